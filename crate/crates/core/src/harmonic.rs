//! Canonical harmonic sections with prescribed degree-one singularities,
//! flux-lattice offsets on surfaces of positive genus, and the
//! renormalized energy evaluated as a limit over shrinking balls.
//!
//! The one-form `omega` of a canonical section is built from a stream
//! function on faces: `omega(h) = (lambda(f) - lambda(f')) / w_e` for the
//! halfedge `h` of face `f` whose twin lies in `f'`. Such a form has zero
//! weighted divergence at every vertex by construction; `lambda` is chosen so
//! that the circulation of `omega` around every face equals `-Omega_f`,
//! except that the faces around each singular vertex are merged into one
//! cell whose boundary circulation is `2 pi - sum Omega_f`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::connection::{harmonic_basis, wrap_angle, DiscreteBundle, HarmonicBasis, OneForm};
use crate::error::{Error, Result};
use crate::linalg::{solve_laplacian, CsrMatrix, DEFAULT_TOL};
use crate::mesh::{cotan_laplacian, Point, SurfaceMesh};
use crate::section::Section;

/// Singularity locations, snapped to mesh vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    points: Vec<usize>,
}

impl Configuration {
    pub fn new(mesh: &SurfaceMesh, points: Vec<usize>) -> Result<Self> {
        for (i, &p) in points.iter().enumerate() {
            if p >= mesh.num_vertices() {
                return Err(Error::Index(format!(
                    "configuration point {p} out of range for {} vertices",
                    mesh.num_vertices()
                )));
            }
            if points[..i].contains(&p) {
                return Err(Error::Domain(format!(
                    "configuration repeats vertex {p}"
                )));
            }
        }
        Ok(Configuration { points })
    }

    /// Snap each ambient point to its nearest vertex.
    pub fn snap(mesh: &SurfaceMesh, points: &[Point]) -> Result<Self> {
        let ids = points.iter().map(|p| mesh.nearest_vertex(p)).collect();
        Self::new(mesh, ids)
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self, mesh: &SurfaceMesh) -> Vec<Point> {
        self.points.iter().map(|&v| mesh.position(v)).collect()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.points.contains(&v)
    }

    /// Smallest chord distance between two points.
    pub fn min_separation(&self, mesh: &SurfaceMesh) -> f64 {
        let p = self.positions(mesh);
        let mut best = f64::INFINITY;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                best = best.min((p[i] - p[j]).norm());
            }
        }
        best
    }

    fn check_degree(&self, bundle: &DiscreteBundle) -> Result<()> {
        let e = bundle.euler_number();
        if e < 0 {
            return Err(Error::Solvability(format!(
                "Euler number {e} is negative; only degree +1 singularities are supported"
            )));
        }
        if self.points.len() as i64 != e {
            return Err(Error::Solvability(format!(
                "configuration has {} points but the bundle has Euler number {e}",
                self.points.len()
            )));
        }
        Ok(())
    }

    fn check_separated(&self, mesh: &SurfaceMesh) -> Result<()> {
        for &a in &self.points {
            for b in mesh.neighbors(a) {
                if self.contains(b) {
                    return Err(Error::Geometry(format!(
                        "singular vertices {a} and {b} are adjacent; refine the mesh"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Poisson potential with point loads `2 pi` at the configuration and the
/// vertex-lumped curvature removed; normalized to zero area-weighted mean.
pub fn solve_psi(bundle: &DiscreteBundle, config: &Configuration) -> Result<Vec<f64>> {
    config.check_degree(bundle)?;
    let mesh = bundle.mesh();
    let mut rhs: Vec<f64> = bundle.vertex_curvature().iter().map(|k| -k).collect();
    for &b in config.points() {
        rhs[b] += 2.0 * PI;
    }
    let total: f64 = rhs.iter().sum();
    if total.abs() > 1e-8 {
        return Err(Error::Solvability(format!(
            "right-hand side integrates to {total:e}, not zero"
        )));
    }
    let l = cotan_laplacian(mesh);
    let (mut psi, report) = solve_laplacian(&l, &rhs, 1e-13)?;
    if report.residual > 1e-10 {
        return Err(Error::Numerical(format!(
            "potential solve residual {:e}",
            report.residual
        )));
    }
    let mean = crate::linalg::weighted_mean(&psi, mesh.vertex_areas());
    psi.iter_mut().for_each(|x| *x -= mean);
    Ok(psi)
}

#[derive(Debug, Clone)]
pub struct CanonicalSection {
    pub u: Section,
    /// Full one-form, co-exact part plus `sum Phi_k eta_k`.
    pub omega: OneForm,
    pub fluxes: Vec<f64>,
    pub singular: Vec<usize>,
}

/// Co-exact one-form with the prescribed circulations (see module docs).
pub fn coexact_form(bundle: &DiscreteBundle, config: &Configuration) -> Result<OneForm> {
    config.check_degree(bundle)?;
    let mesh = bundle.mesh();
    config.check_separated(mesh)?;

    // cells: singular stars first, then the remaining faces
    let nf = mesh.num_faces();
    let mut cell = vec![usize::MAX; nf];
    let mut target = Vec::new();
    for &s in config.points() {
        let c = target.len();
        let mut t = 2.0 * PI;
        for f in mesh.vertex_faces(s) {
            cell[f] = c;
            t -= bundle.face_curvature(f);
        }
        target.push(t);
    }
    for f in 0..nf {
        if cell[f] == usize::MAX {
            cell[f] = target.len();
            target.push(-bundle.face_curvature(f));
        }
    }

    let mut triplets = Vec::with_capacity(4 * mesh.num_edges());
    for e in 0..mesh.num_edges() {
        let (f, g) = mesh.edge_faces(e);
        let (a, b) = (cell[f], cell[g]);
        if a == b {
            continue;
        }
        let w = mesh.cotan_weight(e);
        if w <= 0.0 {
            return Err(Error::Geometry(format!(
                "edge {:?} has non-positive cotangent weight {w:e}; the stream-function solve needs positive weights",
                mesh.edges()[e]
            )));
        }
        let c = 1.0 / w;
        triplets.extend([(a, a, c), (b, b, c), (a, b, -c), (b, a, -c)]);
    }
    let dual = CsrMatrix::from_triplets(target.len(), &triplets);
    let (lambda, report) = solve_laplacian(&dual, &target, DEFAULT_TOL)?;
    if report.residual > 1e-9 {
        return Err(Error::Numerical(format!(
            "stream-function solve residual {:e}",
            report.residual
        )));
    }

    let values = (0..mesh.num_edges())
        .map(|e| {
            let (f, g) = mesh.edge_faces(e);
            let (a, b) = (cell[f], cell[g]);
            if a == b {
                0.0
            } else {
                (lambda[a] - lambda[b]) / mesh.cotan_weight(e)
            }
        })
        .collect();
    Ok(OneForm::from_edge_values(values))
}

/// Integrate `d theta = omega + rho` along a breadth-first tree rooted at
/// `root` that avoids the singular vertices. Singular vertices get `0`.
/// Returns the section and the largest closure defect over non-tree edges.
pub fn reconstruct_section(
    bundle: &DiscreteBundle,
    omega: &OneForm,
    singular: &[usize],
    root: usize,
) -> Result<(Section, f64)> {
    let mesh = bundle.mesh();
    let n = mesh.num_vertices();
    let mut blocked = vec![false; n];
    for &s in singular {
        blocked[s] = true;
    }
    if root >= n || blocked[root] {
        return Err(Error::Index(format!("root {root} is singular or out of range")));
    }
    let mut theta = vec![f64::NAN; n];
    theta[root] = 0.0;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for h in mesh.outgoing(v) {
            let w = mesh.head(h);
            if blocked[w] || !theta[w].is_nan() {
                continue;
            }
            theta[w] = theta[v] + omega.on_halfedge(mesh, h) + bundle.rho_halfedge(h);
            queue.push_back(w);
        }
    }
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    for v in 0..n {
        if blocked[v] {
            continue;
        }
        if theta[v].is_nan() {
            return Err(Error::Geometry(
                "removing the singular vertices disconnects the mesh".into(),
            ));
        }
        values[v] = Complex64::from_polar(1.0, theta[v]);
    }

    let mut defect = 0.0f64;
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        if blocked[a] || blocked[b] {
            continue;
        }
        let h = mesh.edge_halfedge(e);
        let mismatch =
            wrap_angle(theta[b] - theta[a] - omega.on_halfedge(mesh, h) - bundle.rho_halfedge(h));
        defect = defect.max(mismatch.abs());
    }
    Ok((Section::new(values), defect))
}

fn default_root(mesh: &SurfaceMesh, config: &Configuration) -> usize {
    (0..mesh.num_vertices())
        .find(|&v| !config.contains(v))
        .expect("more vertices than singular points")
}

/// Phase-closure tolerance for accepting a reconstructed section.
pub const CLOSURE_TOL: f64 = 1e-6;

pub fn canonical_harmonic_section(
    bundle: &DiscreteBundle,
    config: &Configuration,
    fluxes: &[f64],
) -> Result<CanonicalSection> {
    let mesh = bundle.mesh();
    let g = mesh.genus();
    if fluxes.len() != 2 * g {
        return Err(Error::Domain(format!(
            "expected {} flux values for genus {g}, got {}",
            2 * g,
            fluxes.len()
        )));
    }
    let mut omega = coexact_form(bundle, config)?;
    if g > 0 {
        let basis = harmonic_basis(bundle)?;
        for (phi, eta) in fluxes.iter().zip(&basis.forms) {
            omega.add_scaled(*phi, eta);
        }
    }
    let root = default_root(mesh, config);
    let (u, defect) = reconstruct_section(bundle, &omega, config.points(), root)?;
    if defect > CLOSURE_TOL {
        return Err(Error::Inconsistent(format!(
            "fluxes {fluxes:?} leave a holonomy defect of {defect:e} rad (not a multiple of 2π)"
        )));
    }
    Ok(CanonicalSection {
        u,
        omega,
        fluxes: fluxes.to_vec(),
        singular: config.points().to_vec(),
    })
}

/// Replace every pass through a singular vertex by a walk around its link.
fn reroute_loop(mesh: &SurfaceMesh, path: &[usize], singular: &[usize]) -> Result<Vec<usize>> {
    let mut out: Vec<usize> = Vec::with_capacity(path.len());
    // work on the open cycle so the closing vertex is handled uniformly
    let cycle = &path[..path.len() - 1];
    let n = cycle.len();
    for i in 0..n {
        let v = cycle[i];
        if !singular.contains(&v) {
            out.push(v);
            continue;
        }
        let prev = cycle[(i + n - 1) % n];
        let next = cycle[(i + 1) % n];
        if singular.contains(&prev) || singular.contains(&next) {
            return Err(Error::Geometry(format!(
                "generator loop passes two adjacent singular vertices near {v}"
            )));
        }
        let link: Vec<usize> = mesh.neighbors(v).collect();
        let start = link.iter().position(|&w| w == prev).expect("prev is a neighbor");
        let mut j = (start + 1) % link.len();
        while link[j] != next {
            out.push(link[j]);
            j = (j + 1) % link.len();
        }
    }
    // collapse immediate backtracking
    let mut cleaned: Vec<usize> = Vec::with_capacity(out.len());
    for v in out {
        if cleaned.len() >= 2 && cleaned[cleaned.len() - 2] == v {
            cleaned.pop();
        } else if cleaned.last() != Some(&v) {
            cleaned.push(v);
        }
    }
    let first = cleaned[0];
    cleaned.push(first);
    Ok(cleaned)
}

/// Flux vectors compatible with single-valuedness, sorted by `Phi^T a Phi`.
#[derive(Debug, Clone)]
pub struct FluxLattice {
    /// Holonomy defects `zeta_l` of the co-exact section around the generators.
    pub zeta: Vec<f64>,
    pub offsets: Vec<Vec<f64>>,
    pub gram: DMatrix<f64>,
}

pub fn lattice_offsets(
    bundle: &DiscreteBundle,
    config: &Configuration,
    basis: &HarmonicBasis,
    window: i32,
) -> Result<FluxLattice> {
    let mesh = bundle.mesh();
    if basis.is_empty() {
        return Err(Error::Domain("flux lattice needs genus at least 1".into()));
    }
    let n = basis.len();
    let cond = {
        let ev = basis.gram.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        hi / lo
    };
    if !(cond < 1e10) {
        return Err(Error::Numerical(format!(
            "flux gram matrix is ill-conditioned (condition number {cond:e})"
        )));
    }
    let coexact = coexact_form(bundle, config)?;
    let root = default_root(mesh, config);
    let (u0, _) = reconstruct_section(bundle, &coexact, config.points(), root)?;
    let u = u0.values();

    let mut zeta = Vec::with_capacity(n);
    for gamma in &basis.generators {
        let path = reroute_loop(mesh, gamma, config.points())?;
        let mut z = 0.0;
        for w in path.windows(2) {
            let (i, j) = (w[0], w[1]);
            let rho = bundle.rho(i, j)?;
            let actual = (u[j] * u[i].conj() * Complex64::from_polar(1.0, -rho)).arg();
            z += actual - coexact.on_edge(mesh, i, j)?;
        }
        zeta.push(z);
    }

    let a_inv = basis
        .gram
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("flux gram matrix is singular".into()))?;
    let zeta_v = DVector::from_vec(zeta.clone());
    let side = (2 * window + 1) as usize;
    let mut offsets: Vec<(f64, Vec<f64>)> = Vec::new();
    for idx in 0..side.pow(n as u32) {
        let mut rem = idx;
        let shift = DVector::from_fn(n, |_, _| {
            let m = (rem % side) as i32 - window;
            rem /= side;
            2.0 * PI * m as f64
        });
        let phi = &a_inv * (&zeta_v + shift);
        let norm = phi.dot(&(&basis.gram * &phi));
        offsets.push((norm, phi.iter().copied().collect()));
    }
    offsets.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(FluxLattice {
        zeta,
        offsets: offsets.into_iter().map(|(_, p)| p).collect(),
        gram: basis.gram.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extrapolation {
    /// Leading error proportional to `rho`.
    FirstOrder,
    /// Leading error proportional to `rho^2`.
    SecondOrder,
}

#[derive(Debug, Clone)]
pub struct RenormalizedEnergy {
    pub value: f64,
    pub error_estimate: f64,
    /// `(rho, truncated energy + pi d log rho)` at each level.
    pub samples: Vec<(f64, f64)>,
}

/// Half-width, in `log r`, of the smooth cutoff used by
/// [`renormalized_energy_limit`].
pub const CUTOFF_WIDTH: f64 = 0.25;

/// `1/2 sum w_e omega_e^2` outside the chord balls of radius `rho` around
/// `centers`. With `width > 0` the cutoff is a ramp, linear in
/// `log(r / rho)` on `[-width, width]`, applied at edge midpoints; in the
/// continuum this equals the sharp cutoff averaged over that window.
pub fn truncated_energy(
    mesh: &SurfaceMesh,
    omega: &OneForm,
    centers: &[Point],
    rho: f64,
    width: f64,
) -> f64 {
    let mut total = 0.0;
    for e in 0..mesh.num_edges() {
        let m = mesh.edge_midpoint(e);
        let r = centers
            .iter()
            .map(|c| (m - c).norm())
            .fold(f64::INFINITY, f64::min);
        let outside = if width > 0.0 {
            (((r / rho).ln() + width) / (2.0 * width)).clamp(0.0, 1.0)
        } else if r > rho {
            1.0
        } else {
            0.0
        };
        let w = omega.values()[e];
        total += 0.5 * outside * mesh.cotan_weight(e) * w * w;
    }
    total
}

pub fn renormalized_energy_limit(
    bundle: &DiscreteBundle,
    section: &CanonicalSection,
    config: &Configuration,
    rho0: f64,
    order: Extrapolation,
) -> Result<RenormalizedEnergy> {
    let mesh = bundle.mesh();
    let d = config.len() as f64;
    if config.len() >= 2 && rho0 > 0.5 * config.min_separation(mesh) {
        return Err(Error::Geometry(format!(
            "balls of radius {rho0} overlap (minimal separation {})",
            config.min_separation(mesh)
        )));
    }
    if !(rho0 > 0.0) {
        return Err(Error::Domain(format!("ball radius must be positive, got {rho0}")));
    }
    let centers = config.positions(mesh);
    let samples: Vec<(f64, f64)> = [rho0, rho0 / 2.0, rho0 / 4.0]
        .iter()
        .map(|&r| (r, truncated_energy(mesh, &section.omega, &centers, r, CUTOFF_WIDTH) + PI * d * r.ln()))
        .collect();
    let (f0, f1, f2) = (samples[0].1, samples[1].1, samples[2].1);
    let (coarse, fine) = match order {
        Extrapolation::FirstOrder => (2.0 * f1 - f0, 2.0 * f2 - f1),
        Extrapolation::SecondOrder => ((4.0 * f1 - f0) / 3.0, (4.0 * f2 - f1) / 3.0),
    };
    Ok(RenormalizedEnergy {
        value: fine,
        error_estimate: (fine - coarse).abs(),
        samples,
    })
}
