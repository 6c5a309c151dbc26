//! Discrete hermitian line bundles: per-edge transport angles, face
//! curvature, Euler number, and harmonic one-forms.
//!
//! A section is one complex number per vertex, expressed in that vertex's
//! frame. The rank-`k` bundle transports `z` along `i -> j` to
//! `e^{i rho(i->j)} z`, where `rho` is `k` times the Levi-Civita rotation
//! between the frames at `i` and `j`.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{solve_laplacian, DEFAULT_TOL};
use crate::mesh::{cotan_laplacian, SurfaceMesh};

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Real one-form: one value per undirected edge, read along the
/// low-to-high direction. The opposite direction is the exact negative.
#[derive(Debug, Clone, PartialEq)]
pub struct OneForm {
    values: Vec<f64>,
}

impl OneForm {
    pub fn zeros(num_edges: usize) -> Self {
        OneForm {
            values: vec![0.0; num_edges],
        }
    }

    pub fn from_edge_values(values: Vec<f64>) -> Self {
        OneForm { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Value along halfedge `h`.
    pub fn on_halfedge(&self, mesh: &SurfaceMesh, h: usize) -> f64 {
        mesh.halfedge_sign(h) * self.values[mesh.halfedge_edge(h)]
    }

    /// Value along the directed edge `i -> j`.
    pub fn on_edge(&self, mesh: &SurfaceMesh, i: usize, j: usize) -> Result<f64> {
        let h = mesh
            .find_halfedge(i, j)
            .ok_or_else(|| Error::Index(format!("no edge between vertices {i} and {j}")))?;
        Ok(self.on_halfedge(mesh, h))
    }

    pub fn add_scaled(&mut self, a: f64, other: &OneForm) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    /// Sum around the boundary of face `f`.
    pub fn face_sum(&self, mesh: &SurfaceMesh, f: usize) -> f64 {
        (0..3).map(|c| self.on_halfedge(mesh, 3 * f + c)).sum()
    }

    /// Weighted divergence `sum_j w_ij omega(i -> j)` at vertex `v`.
    pub fn divergence(&self, mesh: &SurfaceMesh, v: usize) -> f64 {
        mesh.outgoing(v)
            .map(|h| mesh.cotan_weight(mesh.halfedge_edge(h)) * self.on_halfedge(mesh, h))
            .sum()
    }

    /// Discrete `L^2` inner product `sum_e w_e a_e b_e`.
    pub fn inner(&self, mesh: &SurfaceMesh, other: &OneForm) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(mesh.cotan_weights())
            .map(|((a, b), w)| w * a * b)
            .sum()
    }

    /// Sum along a closed vertex loop `[v0, v1, ..., v0]`.
    pub fn loop_integral(&self, mesh: &SurfaceMesh, path: &[usize]) -> Result<f64> {
        path.windows(2)
            .map(|w| self.on_edge(mesh, w[0], w[1]))
            .sum()
    }

    /// Gradient of a vertex function: `(df)(i -> j) = f_j - f_i`.
    pub fn gradient(mesh: &SurfaceMesh, f: &[f64]) -> Self {
        OneForm {
            values: mesh.edges().iter().map(|&[a, b]| f[b] - f[a]).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteBundle {
    mesh: Arc<SurfaceMesh>,
    rank: u32,
    rho: Vec<f64>,
    face_curvature: Vec<f64>,
    euler_number: i64,
}

/// Frame angle of the edge `tail(h) -> head(h)` at its tail.
fn edge_angle(mesh: &SurfaceMesh, h: usize) -> f64 {
    let v = mesh.tail(h);
    let d = mesh.position(mesh.head(h)) - mesh.position(v);
    mesh.frame(v).angle_of(&d)
}

/// Levi-Civita transport of the tangent bundle (rank 1) and its integer
/// powers: the rotation carrying the frame at `i` to the frame at `j`
/// through the shared edge, multiplied by `rank` and wrapped.
pub fn levi_civita_connection(mesh: Arc<SurfaceMesh>, rank: u32) -> Result<DiscreteBundle> {
    if rank == 0 {
        return Err(Error::Domain("bundle rank must be at least 1".into()));
    }
    let k = rank as f64;
    let rho = (0..mesh.num_edges())
        .map(|e| {
            let h = mesh.edge_halfedge(e);
            let raw = edge_angle(&mesh, mesh.twin(h)) + PI - edge_angle(&mesh, h);
            wrap_angle(k * wrap_angle(raw))
        })
        .collect();

    // face holonomy of the rank-1 transport: projected corner angles minus pi
    let face_curvature: Vec<f64> = (0..mesh.num_faces())
        .map(|f| {
            let turn: f64 = (0..3)
                .map(|c| {
                    let out = 3 * f + c;
                    let back = mesh.twin(3 * f + (c + 2) % 3);
                    wrap_angle(edge_angle(&mesh, back) - edge_angle(&mesh, out))
                })
                .sum();
            k * (turn - PI)
        })
        .collect();
    let total: f64 = face_curvature.iter().sum();
    let euler_number = (total / (2.0 * PI)).round() as i64;
    Ok(DiscreteBundle {
        mesh,
        rank,
        rho,
        face_curvature,
        euler_number,
    })
}

impl DiscreteBundle {
    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<SurfaceMesh> {
        &self.mesh
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn euler_number(&self) -> i64 {
        self.euler_number
    }

    pub fn face_curvatures(&self) -> &[f64] {
        &self.face_curvature
    }

    pub fn face_curvature(&self, f: usize) -> f64 {
        self.face_curvature[f]
    }

    pub fn total_curvature(&self) -> f64 {
        self.face_curvature.iter().sum()
    }

    /// Connection angle per undirected edge, read low to high.
    pub fn edge_angles(&self) -> &[f64] {
        &self.rho
    }

    /// Connection angle along halfedge `h`.
    pub fn rho_halfedge(&self, h: usize) -> f64 {
        self.mesh.halfedge_sign(h) * self.rho[self.mesh.halfedge_edge(h)]
    }

    /// Connection angle along the directed edge `i -> j`.
    pub fn rho(&self, i: usize, j: usize) -> Result<f64> {
        let h = self.find(i, j)?;
        Ok(self.rho_halfedge(h))
    }

    fn find(&self, i: usize, j: usize) -> Result<usize> {
        if i >= self.mesh.num_vertices() || j >= self.mesh.num_vertices() {
            return Err(Error::Index(format!(
                "vertex pair ({i}, {j}) out of range for {} vertices",
                self.mesh.num_vertices()
            )));
        }
        self.mesh
            .find_halfedge(i, j)
            .ok_or_else(|| Error::Index(format!("no edge between vertices {i} and {j}")))
    }

    /// Carry `z` from the fiber at `i` to the fiber at `j`.
    pub fn transport(&self, i: usize, j: usize, z: Complex64) -> Result<Complex64> {
        Ok(z * Complex64::from_polar(1.0, self.rho(i, j)?))
    }

    pub fn transport_halfedge(&self, h: usize, z: Complex64) -> Complex64 {
        z * Complex64::from_polar(1.0, self.rho_halfedge(h))
    }

    /// The same bundle written in frames rotated by `betas[v]`.
    /// Sections transform by `u_v -> e^{-i k beta_v} u_v`.
    pub fn regauge(&self, betas: &[f64]) -> Result<DiscreteBundle> {
        levi_civita_connection(Arc::new(self.mesh.with_rotated_frames(betas)), self.rank)
    }

    /// Alternative curvature assignment: each vertex angle defect split
    /// equally among its incident faces, times the rank.
    pub fn equal_split_curvature(&self) -> Vec<f64> {
        let mesh = &self.mesh;
        let mut out = vec![0.0; mesh.num_faces()];
        for v in 0..mesh.num_vertices() {
            let share = mesh.angle_defect(v) / mesh.degree(v) as f64;
            for f in mesh.vertex_faces(v) {
                out[f] += self.rank as f64 * share;
            }
        }
        out
    }

    /// Curvature lumped to vertices: one third of each incident face.
    pub fn vertex_curvature(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.num_vertices()];
        for (f, face) in self.mesh.faces().iter().enumerate() {
            for &v in face {
                out[v] += self.face_curvature[f] / 3.0;
            }
        }
        out
    }
}

/// Harmonic one-forms dual to a basis of loops.
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    /// Poincaré duals `eta_k` of the generators.
    pub forms: Vec<OneForm>,
    /// `a_kl = <eta_k, eta_l>`; equals the period of `eta_l` over `gamma_k`.
    pub gram: DMatrix<f64>,
    /// Closed vertex loops `[v0, ..., v0]`.
    pub generators: Vec<Vec<usize>>,
}

impl HarmonicBasis {
    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    /// Largest face-closure and divergence residuals over all forms.
    pub fn residuals(&self, mesh: &SurfaceMesh) -> (f64, f64) {
        let mut closed = 0.0f64;
        let mut coclosed = 0.0f64;
        for form in &self.forms {
            for f in 0..mesh.num_faces() {
                closed = closed.max(form.face_sum(mesh, f).abs());
            }
            for v in 0..mesh.num_vertices() {
                coclosed = coclosed.max(form.divergence(mesh, v).abs());
            }
        }
        (closed, coclosed)
    }
}

/// Spanning tree of the vertex graph by breadth-first search from `root`;
/// `parent[root] == root`.
pub(crate) fn vertex_tree(
    mesh: &SurfaceMesh,
    root: usize,
    blocked: &[bool],
) -> (Vec<usize>, Vec<usize>) {
    let n = mesh.num_vertices();
    let mut parent = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    parent[root] = root;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for w in mesh.neighbors(v) {
            if parent[w] == usize::MAX && !blocked[w] {
                parent[w] = v;
                queue.push_back(w);
            }
        }
    }
    (parent, order)
}

fn path_to_root(parent: &[usize], mut v: usize) -> Vec<usize> {
    let mut path = vec![v];
    while parent[v] != v {
        v = parent[v];
        path.push(v);
    }
    path
}

/// Closed loop `a -> b -> (tree) -> a` for a non-tree edge `(a, b)`.
fn tree_cycle(parent: &[usize], a: usize, b: usize) -> Vec<usize> {
    let up_a = path_to_root(parent, a);
    let up_b = path_to_root(parent, b);
    // strip the shared tail above the lowest common ancestor
    let (mut i, mut j) = (up_a.len(), up_b.len());
    while i > 1 && j > 1 && up_a[i - 2] == up_b[j - 2] {
        i -= 1;
        j -= 1;
    }
    let mut cycle = vec![a];
    cycle.extend_from_slice(&up_b[..j]);
    cycle.extend(up_a[..i - 1].iter().rev());
    cycle
}

pub fn harmonic_basis(bundle: &DiscreteBundle) -> Result<HarmonicBasis> {
    let mesh = bundle.mesh();
    let g = mesh.genus();
    if g == 0 {
        return Ok(HarmonicBasis {
            forms: Vec::new(),
            gram: DMatrix::zeros(0, 0),
            generators: Vec::new(),
        });
    }

    // tree-cotree decomposition
    let (parent, _) = vertex_tree(mesh, 0, &vec![false; mesh.num_vertices()]);
    let mut in_tree = vec![false; mesh.num_edges()];
    for v in 0..mesh.num_vertices() {
        if parent[v] != v {
            let h = mesh.find_halfedge(v, parent[v]).expect("tree edge exists");
            in_tree[mesh.halfedge_edge(h)] = true;
        }
    }
    let nf = mesh.num_faces();
    // dual tree: face_parent[f] is the halfedge of f crossed towards the parent face
    let mut face_parent = vec![usize::MAX; nf];
    let mut in_cotree = vec![false; mesh.num_edges()];
    face_parent[0] = 3 * nf;
    let mut queue = VecDeque::from([0usize]);
    while let Some(f) = queue.pop_front() {
        for c in 0..3 {
            let h = 3 * f + c;
            let e = mesh.halfedge_edge(h);
            let g_face = mesh.twin(h) / 3;
            if in_tree[e] || face_parent[g_face] != usize::MAX {
                continue;
            }
            face_parent[g_face] = mesh.twin(h);
            in_cotree[e] = true;
            queue.push_back(g_face);
        }
    }
    let leftover: Vec<usize> = (0..mesh.num_edges())
        .filter(|&e| !in_tree[e] && !in_cotree[e])
        .collect();
    if leftover.len() != 2 * g {
        return Err(Error::Numerical(format!(
            "tree-cotree left {} edges, expected {}",
            leftover.len(),
            2 * g
        )));
    }

    let l = cotan_laplacian(mesh);
    let mut harmonic = Vec::with_capacity(2 * g);
    let mut generators = Vec::with_capacity(2 * g);
    for &e in &leftover {
        let [a, b] = mesh.edges()[e];
        generators.push(tree_cycle(&parent, a, b));

        // closed form from the dual cycle through e: +1 on every halfedge
        // the cycle leaves a face through
        let mut form = OneForm::zeros(mesh.num_edges());
        let h = mesh.edge_halfedge(e);
        let mut add_exit = |h: usize| {
            form.values[mesh.halfedge_edge(h)] += mesh.halfedge_sign(h);
        };
        add_exit(h);
        // from the face across h back up to the root, then down to the face of h
        let mut f = mesh.twin(h) / 3;
        while face_parent[f] < 3 * nf {
            add_exit(face_parent[f]);
            f = mesh.twin(face_parent[f]) / 3;
        }
        let mut f = h / 3;
        while face_parent[f] < 3 * nf {
            add_exit(mesh.twin(face_parent[f]));
            f = mesh.twin(face_parent[f]) / 3;
        }

        // project out the exact part: h = form - d alpha with L alpha = -div form
        let div: Vec<f64> = (0..mesh.num_vertices())
            .map(|v| -form.divergence(mesh, v))
            .collect();
        let (alpha, _) = solve_laplacian(&l, &div, DEFAULT_TOL)?;
        form.add_scaled(-1.0, &OneForm::gradient(mesh, &alpha));
        harmonic.push(form);
    }

    let n = 2 * g;
    let gram_h = DMatrix::from_fn(n, n, |i, j| harmonic[i].inner(mesh, &harmonic[j]));
    let mut periods = DMatrix::zeros(n, n);
    for (m, form) in harmonic.iter().enumerate() {
        for (ell, gamma) in generators.iter().enumerate() {
            periods[(m, ell)] = form.loop_integral(mesh, gamma)?;
        }
    }
    let chol = gram_h.clone().cholesky().ok_or_else(|| {
        Error::Numerical("harmonic forms are linearly dependent (gram not positive definite)".into())
    })?;
    let coeffs = chol.solve(&periods);
    let forms: Vec<OneForm> = (0..n)
        .map(|k| {
            let mut eta = OneForm::zeros(mesh.num_edges());
            for (m, form) in harmonic.iter().enumerate() {
                eta.add_scaled(coeffs[(m, k)], form);
            }
            eta
        })
        .collect();
    let gram = DMatrix::from_fn(n, n, |i, j| forms[i].inner(mesh, &forms[j]));
    Ok(HarmonicBasis {
        forms,
        gram,
        generators,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_icosphere, build_torus};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere(s: u32) -> Arc<SurfaceMesh> {
        Arc::new(build_icosphere(s).unwrap())
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn euler_numbers() {
        let torus = Arc::new(build_torus(2.0, 0.7, 30, 12).unwrap());
        for s in 1..=3 {
            let m = sphere(s);
            for k in [1u32, 2, 3, 6] {
                let b = levi_civita_connection(m.clone(), k).unwrap();
                assert_eq!(b.euler_number(), 2 * k as i64);
                assert!((b.total_curvature() - 4.0 * PI * k as f64).abs() < 1e-9);
                let t = levi_civita_connection(torus.clone(), k).unwrap();
                assert_eq!(t.euler_number(), 0);
            }
        }
        assert!(levi_civita_connection(sphere(0), 0).is_err());
    }

    #[test]
    fn rank_scales_curvature_exactly() {
        let m = sphere(2);
        let b1 = levi_civita_connection(m.clone(), 1).unwrap();
        let b3 = levi_civita_connection(m, 3).unwrap();
        for f in 0..b1.face_curvatures().len() {
            assert_eq!(b3.face_curvature(f), 3.0 * b1.face_curvature(f));
        }
    }

    #[test]
    fn face_loop_holonomy_is_curvature() {
        let m = sphere(2);
        let b = levi_civita_connection(m.clone(), 2).unwrap();
        let z0 = Complex64::new(0.3, -0.7);
        for f in 0..m.num_faces() {
            let [a, bb, c] = m.face(f);
            let z = b.transport(a, bb, z0).unwrap();
            let z = b.transport(bb, c, z).unwrap();
            let z = b.transport(c, a, z).unwrap();
            let expect = z0 * Complex64::from_polar(1.0, b.face_curvature(f));
            assert!((z - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn transport_is_unitary_and_antisymmetric() {
        let m = sphere(1);
        let b = levi_civita_connection(m.clone(), 2).unwrap();
        for &[i, j] in m.edges() {
            assert_eq!(b.rho(i, j).unwrap(), -b.rho(j, i).unwrap());
            let z = Complex64::from_polar(1.0, 0.4);
            let w = b.transport(i, j, z).unwrap();
            assert!((w.norm() - 1.0).abs() < 1e-15);
            assert!((b.transport(j, i, w).unwrap() - z).norm() < 1e-15);
        }
        assert!(matches!(b.transport(0, 0, Complex64::new(1.0, 0.0)), Err(Error::Index(_))));
    }

    #[test]
    fn equal_split_agrees_in_total() {
        let m = sphere(2);
        let b = levi_civita_connection(m, 2).unwrap();
        let eq: f64 = b.equal_split_curvature().iter().sum();
        assert!((eq - b.total_curvature()).abs() < 1e-9);
    }

    #[test]
    fn gauge_change_preserves_curvature() {
        let m = sphere(2);
        let b = levi_civita_connection(m.clone(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let betas: Vec<f64> = (0..m.num_vertices()).map(|_| rng.random_range(-PI..PI)).collect();
        let g = b.regauge(&betas).unwrap();
        assert_eq!(g.euler_number(), b.euler_number());
        for f in 0..m.num_faces() {
            assert!((g.face_curvature(f) - b.face_curvature(f)).abs() < 1e-12);
        }
        for (h, &[i, j]) in m.edges().iter().enumerate() {
            let _ = h;
            let expect = b.rho(i, j).unwrap() + 3.0 * (betas[i] - betas[j]);
            assert!(wrap_angle(g.rho(i, j).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_has_no_harmonic_forms() {
        let b = levi_civita_connection(sphere(1), 1).unwrap();
        let h = harmonic_basis(&b).unwrap();
        assert!(h.is_empty());
    }

    #[test]
    fn torus_harmonic_basis() {
        let m = Arc::new(build_torus(2.0, 0.7, 30, 14).unwrap());
        let b = levi_civita_connection(m.clone(), 1).unwrap();
        let h = harmonic_basis(&b).unwrap();
        assert_eq!(h.len(), 2);
        let (closed, coclosed) = h.residuals(&m);
        assert!(closed < 1e-8, "closure {closed:e}");
        assert!(coclosed < 1e-8, "divergence {coclosed:e}");
        assert_eq!(h.gram.rank(1e-10), 2);
        assert!(h.gram.clone().cholesky().is_some());
        for k in 0..2 {
            for l in 0..2 {
                let period = h.forms[k].loop_integral(&m, &h.generators[l]).unwrap();
                assert!((period - h.gram[(k, l)]).abs() < 1e-8 * h.gram.norm());
            }
        }
    }

    #[test]
    fn tree_cycle_closes() {
        let m = build_icosphere(1).unwrap();
        let (parent, _) = vertex_tree(&m, 0, &vec![false; m.num_vertices()]);
        for &[a, b] in m.edges() {
            if parent[a] == b || parent[b] == a {
                continue;
            }
            let c = tree_cycle(&parent, a, b);
            assert_eq!(c.first(), c.last());
            for w in c.windows(2) {
                assert!(m.find_halfedge(w[0], w[1]).is_some());
            }
        }
    }
}
