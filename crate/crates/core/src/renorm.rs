//! Renormalized energy: closed form on the round sphere, the discrete
//! Green-function assembly on general meshes, and minimization over point
//! configurations.
//!
//! On the unit sphere the mean-zero Green function is
//! `G(x, y) = -(1/2 pi) log|x - y| + (log 2 - 1/2) / (2 pi)`, so the full
//! renormalized energy of `d` points exceeds the logarithmic sum
//! [`sphere_w`] by the configuration-independent [`sphere_offset`].

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::connection::DiscreteBundle;
use crate::error::{Error, Result};
use crate::harmonic::Configuration;
use crate::linalg::{solve_laplacian, weighted_mean};
use crate::mesh::{cotan_laplacian, Point, SurfaceMesh};
use crate::rng::{stream_rng, unit_sphere};

/// `-2 pi sum_{i<j} log |a_i - a_j|` for points on the unit sphere.
pub fn sphere_w(points: &[Point]) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let r = (points[i] - points[j]).norm();
            if r == 0.0 {
                return Err(Error::Geometry(format!("points {i} and {j} coincide")));
            }
            total -= 2.0 * PI * r.ln();
        }
    }
    Ok(total)
}

/// Euclidean gradient of [`sphere_w`] with respect to each point.
pub fn sphere_w_gradient(points: &[Point]) -> Vec<Point> {
    let n = points.len();
    let mut g = vec![Point::zeros(); n];
    for i in 0..n {
        for j in i + 1..n {
            let d = points[i] - points[j];
            let f = d * (-2.0 * PI / d.norm_squared());
            g[i] += f;
            g[j] -= f;
        }
    }
    g
}

/// Component of each gradient vector tangent to the sphere at its point.
pub fn tangential(points: &[Point], grad: &[Point]) -> Vec<Point> {
    points
        .iter()
        .zip(grad)
        .map(|(p, g)| g - p * g.dot(p))
        .collect()
}

/// Regular tetrahedron: six chords of length `sqrt(8/3)`.
pub fn tetrahedron_w() -> f64 {
    -6.0 * PI * (8.0f64 / 3.0).ln()
}

/// Octahedron: twelve chords `sqrt 2` and three diameters.
pub fn cross_polytope_w() -> f64 {
    -18.0 * PI * 2f64.ln()
}

/// Regular icosahedron inscribed in the unit sphere.
pub const ICOSAHEDRON_W: f64 = -135.755_414_256_719_5;

/// `W` of the full renormalized energy minus [`sphere_w`] on the unit
/// sphere, for `d` points: `pi d^2 (log 2 - 1/2)`.
pub fn sphere_offset(d: usize) -> f64 {
    PI * (d * d) as f64 * (2f64.ln() - 0.5)
}

/// Discrete Green function for one source vertex.
#[derive(Debug, Clone)]
pub struct GreenTable {
    pub source: usize,
    /// `G(v, source)`, area-weighted mean zero.
    pub values: Vec<f64>,
    /// Regular part `H(source, source)`.
    pub regular_part: f64,
}

/// Solve `L G = e_s - area / A` (unit point load against a uniform sink),
/// normalize to zero area-weighted mean, and estimate the regular part by
/// extrapolating ring means of `G + log(r) / 2 pi` from the second and
/// third vertex rings to `r = 0`.
pub fn discrete_green(mesh: &SurfaceMesh, source: usize) -> Result<GreenTable> {
    green_with_operator(mesh, &cotan_laplacian(mesh), source)
}

fn green_with_operator(
    mesh: &SurfaceMesh,
    l: &crate::linalg::CsrMatrix,
    source: usize,
) -> Result<GreenTable> {
    if source >= mesh.num_vertices() {
        return Err(Error::Index(format!("source {source} out of range")));
    }
    let total = mesh.total_area();
    let mut rhs: Vec<f64> = mesh.vertex_areas().iter().map(|a| -a / total).collect();
    rhs[source] += 1.0;
    let (mut g, report) = solve_laplacian(l, &rhs, 1e-13)?;
    if report.residual > 1e-10 {
        return Err(Error::Numerical(format!(
            "Green solve residual {:e}",
            report.residual
        )));
    }
    let mean = weighted_mean(&g, mesh.vertex_areas());
    g.iter_mut().for_each(|x| *x -= mean);

    let x = mesh.position(source);
    let rings = mesh.vertex_rings(source, 3);
    let ring_stats = |ring: &[usize]| {
        let (mut m, mut r) = (0.0, 0.0);
        for &v in ring {
            let dist = (mesh.position(v) - x).norm();
            m += g[v] + dist.ln() / (2.0 * PI);
            r += dist;
        }
        (m / ring.len() as f64, r / ring.len() as f64)
    };
    let (m2, r2) = ring_stats(&rings[2]);
    let (m3, r3) = ring_stats(&rings[3]);
    let regular_part = m2 - r2 * (m3 - m2) / (r3 - r2);
    Ok(GreenTable {
        source,
        values: g,
        regular_part,
    })
}

/// Green tables computed on demand and shared between threads.
pub struct GreenCache {
    mesh: Arc<SurfaceMesh>,
    laplacian: crate::linalg::CsrMatrix,
    tables: RwLock<HashMap<usize, Arc<GreenTable>>>,
    offset: f64,
}

impl GreenCache {
    pub fn new(mesh: Arc<SurfaceMesh>) -> Self {
        let laplacian = cotan_laplacian(&mesh);
        GreenCache {
            mesh,
            laplacian,
            tables: RwLock::new(HashMap::new()),
            offset: 0.0,
        }
    }

    /// Shift every Green value (and regular part) by `offset`, as a
    /// different additive normalization would.
    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn get(&self, source: usize) -> Result<Arc<GreenTable>> {
        if let Some(t) = self.tables.read().expect("cache lock").get(&source) {
            return Ok(t.clone());
        }
        let mut table = green_with_operator(&self.mesh, &self.laplacian, source)?;
        if self.offset != 0.0 {
            table.values.iter_mut().for_each(|v| *v += self.offset);
            table.regular_part += self.offset;
        }
        let table = Arc::new(table);
        let mut guard = self.tables.write().expect("cache lock");
        Ok(guard.entry(source).or_insert(table).clone())
    }

    pub fn len(&self) -> usize {
        self.tables.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Potential of the curvature deviation, `L psi0 = -kappa + mean(kappa) area`
/// with mean zero, and its Dirichlet energy `1/2 sum w (d psi0)^2`.
pub fn psi0_and_energy(bundle: &DiscreteBundle) -> Result<(Vec<f64>, f64)> {
    let mesh = bundle.mesh();
    let kbar = bundle.total_curvature() / mesh.total_area();
    let rhs: Vec<f64> = bundle
        .vertex_curvature()
        .iter()
        .zip(mesh.vertex_areas())
        .map(|(k, a)| -k + kbar * a)
        .collect();
    let (mut psi, _) = solve_laplacian(&cotan_laplacian(mesh), &rhs, 1e-13)?;
    let mean = weighted_mean(&psi, mesh.vertex_areas());
    psi.iter_mut().for_each(|x| *x -= mean);
    let energy = mesh
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &[a, b])| 0.5 * mesh.cotan_weight(e) * (psi[b] - psi[a]).powi(2))
        .sum();
    Ok((psi, energy))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WBreakdown {
    pub pair_term: f64,
    pub self_term: f64,
    pub psi0_term: f64,
    pub flux_term: f64,
    pub total: f64,
}

/// All four parts of the renormalized energy from discrete Green
/// functions. `gram` is the flux inner product (empty for genus 0).
pub fn general_w(
    bundle: &DiscreteBundle,
    config: &Configuration,
    fluxes: &[f64],
    gram: &DMatrix<f64>,
    cache: &GreenCache,
    psi0: &(Vec<f64>, f64),
) -> Result<WBreakdown> {
    if fluxes.len() != gram.nrows() {
        return Err(Error::Domain(format!(
            "{} fluxes for a {}x{} gram matrix",
            fluxes.len(),
            gram.nrows(),
            gram.ncols()
        )));
    }
    if !Arc::ptr_eq(bundle.mesh_arc(), &cache.mesh) {
        return Err(Error::Domain("Green cache was built for a different mesh".into()));
    }
    let mut pts = config.points().to_vec();
    pts.sort_unstable();
    let tables: Vec<Arc<GreenTable>> = pts.iter().map(|&p| cache.get(p)).collect::<Result<_>>()?;
    let mut pair_term = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let g = 0.5 * (tables[i].values[pts[j]] + tables[j].values[pts[i]]);
            pair_term += 4.0 * PI * PI * g;
        }
    }
    let self_term: f64 = tables.iter().map(|t| 2.0 * PI * PI * t.regular_part).sum();
    let (psi, dirichlet) = psi0;
    let psi0_term = pts.iter().map(|&p| 2.0 * PI * psi[p]).sum::<f64>() + dirichlet;
    let mut flux_term = 0.0;
    for i in 0..fluxes.len() {
        for j in 0..fluxes.len() {
            flux_term += 0.5 * fluxes[i] * gram[(i, j)] * fluxes[j];
        }
    }
    Ok(WBreakdown {
        pair_term,
        self_term,
        psi0_term,
        flux_term,
        total: pair_term + self_term + psi0_term + flux_term,
    })
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub seeds: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop when the largest tangential gradient norm falls below this.
    pub grad_tol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            seeds: 20,
            seed: 0,
            max_iters: 50_000,
            grad_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub stream: u64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub best: Vec<Point>,
    pub value: f64,
    pub runs: Vec<RunRecord>,
    /// Set when the best run hit the iteration cap before converging.
    pub warning: Option<String>,
}

fn descend_sphere(start: Vec<Point>, opts: &OptimizeOptions, stream: u64) -> Result<RunRecord> {
    let mut pts = start;
    let mut value = sphere_w(&pts)?;
    let mut step = 1e-2;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        let g = tangential(&pts, &sphere_w_gradient(&pts));
        let gmax = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if gmax < opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let g2: f64 = g.iter().map(|v| v.norm_squared()).sum();
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<Point> = pts
                .iter()
                .zip(&g)
                .map(|(p, gv)| (p - gv * step).normalize())
                .collect();
            if let Ok(v) = sphere_w(&trial) {
                if v < value && v <= value - 1e-4 * step * g2 {
                    pts = trial;
                    value = v;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // converged to rounding when the predicted decrease is lost in
            // the last digits of the value
            converged = step * g2 <= 1e-13 * value.abs().max(1.0);
            break;
        }
        step *= 1.5;
    }
    Ok(RunRecord {
        stream,
        value,
        iterations,
        converged,
        points: pts,
    })
}

/// Multi-start projected gradient descent of [`sphere_w`] over `d` points.
pub fn optimize_sphere_configuration(d: usize, opts: &OptimizeOptions) -> Result<OptimizeResult> {
    if d < 2 {
        return Err(Error::Domain(format!("need at least 2 points, got {d}")));
    }
    if opts.seeds == 0 {
        return Err(Error::Domain("need at least one seed".into()));
    }
    let runs: Vec<RunRecord> = (0..opts.seeds as u64)
        .into_par_iter()
        .map(|stream| {
            let mut rng = stream_rng(opts.seed, stream);
            let start: Vec<Point> = (0..d)
                .map(|_| {
                    let p = unit_sphere(&mut rng);
                    Point::new(p[0], p[1], p[2])
                })
                .collect();
            descend_sphere(start, opts, stream)
        })
        .collect::<Result<_>>()?;
    let best = runs
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value).then(a.stream.cmp(&b.stream)))
        .expect("at least one run");
    let warning = (!best.converged).then(|| {
        format!(
            "best run (stream {}) stopped after {} iterations without meeting the gradient tolerance",
            best.stream, best.iterations
        )
    });
    Ok(OptimizeResult {
        best: best.points.clone(),
        value: best.value,
        runs: runs.clone(),
        warning,
    })
}

/// Discrete descent over vertex configurations: repeatedly move the single
/// point whose move to a neighboring vertex lowers `energy` the most.
pub fn hill_descent(
    mesh: &SurfaceMesh,
    start: Configuration,
    max_moves: usize,
    energy: impl Fn(&Configuration) -> Result<f64>,
) -> Result<(Configuration, f64, usize)> {
    let mut current = start;
    let mut value = energy(&current)?;
    for moves in 0..max_moves {
        let mut best: Option<(f64, Configuration)> = None;
        for (i, &p) in current.points().iter().enumerate() {
            for q in mesh.neighbors(p) {
                if current.contains(q) {
                    continue;
                }
                let mut pts = current.points().to_vec();
                pts[i] = q;
                let cand = Configuration::new(mesh, pts)?;
                let v = energy(&cand)?;
                if v < value && best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                    best = Some((v, cand));
                }
            }
        }
        match best {
            Some((v, c)) => {
                value = v;
                current = c;
            }
            None => return Ok((current, value, moves)),
        }
    }
    Ok((current, value, max_moves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::levi_civita_connection;
    use crate::mesh::build_icosphere;
    use crate::vortex::{configuration_distance, ReferencePolyhedron};
    use rand::Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = stream_rng(seed, 0);
        (0..n)
            .map(|_| {
                let p = unit_sphere(&mut rng);
                Point::new(p[0], p[1], p[2])
            })
            .collect()
    }

    #[test]
    fn closed_forms() {
        for d in [4, 6, 12] {
            let r = ReferencePolyhedron::for_count(d).unwrap();
            let w = sphere_w(&r.vertices).unwrap();
            let expect = match d {
                4 => tetrahedron_w(),
                6 => cross_polytope_w(),
                _ => ICOSAHEDRON_W,
            };
            assert!((w - expect).abs() < 1e-9 * expect.abs(), "{d}: {w}");
        }
        assert!((tetrahedron_w() + 18.4882).abs() < 1e-4);
        assert!((cross_polytope_w() + 39.196_549_6).abs() < 1e-6);
        let p = Point::new(0.0, 0.0, 1.0);
        assert!(sphere_w(&[p, p]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pts = random_points(7, 3);
        let g = sphere_w_gradient(&pts);
        let h = 1e-6;
        for i in 0..pts.len() {
            for c in 0..3 {
                let mut plus = pts.clone();
                let mut minus = pts.clone();
                plus[i][c] += h;
                minus[i][c] -= h;
                let fd = (sphere_w(&plus).unwrap() - sphere_w(&minus).unwrap()) / (2.0 * h);
                assert!((fd - g[i][c]).abs() < 1e-6 * g[i][c].abs().max(1.0));
            }
        }
    }

    #[test]
    fn rotation_invariance() {
        let pts = random_points(9, 4);
        let mut rng = stream_rng(5, 0);
        let axis = nalgebra::Unit::new_normalize(Point::new(rng.random(), rng.random(), 1.0));
        let r = nalgebra::Rotation3::from_axis_angle(&axis, 1.234);
        let rotated: Vec<Point> = pts.iter().map(|p| r * p).collect();
        let (a, b) = (sphere_w(&pts).unwrap(), sphere_w(&rotated).unwrap());
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn two_points_become_antipodal() {
        let res = optimize_sphere_configuration(
            2,
            &OptimizeOptions {
                seeds: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((res.value + 2.0 * PI * 2f64.ln()).abs() < 1e-9);
        assert!(optimize_sphere_configuration(1, &OptimizeOptions::default()).is_err());
    }

    #[test]
    fn four_points_form_a_tetrahedron() {
        let res = optimize_sphere_configuration(
            4,
            &OptimizeOptions {
                seeds: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((res.value - tetrahedron_w()).abs() < 1e-9);
        let r = ReferencePolyhedron::for_count(4).unwrap();
        assert!(configuration_distance(&res.best, &r).unwrap() < 1e-4);
    }

    #[test]
    fn green_function_normalization_and_residual() {
        let mesh = build_icosphere(3).unwrap();
        let t = discrete_green(&mesh, 17).unwrap();
        let mean = weighted_mean(&t.values, mesh.vertex_areas());
        assert!(mean.abs() < 1e-12);
        let l = cotan_laplacian(&mesh);
        let lg = l.apply(&t.values);
        let total = mesh.total_area();
        for v in 0..mesh.num_vertices() {
            if v != 17 {
                assert!((lg[v] + mesh.vertex_areas()[v] / total).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn cache_reuses_tables_and_applies_offsets() {
        let mesh = Arc::new(build_icosphere(2).unwrap());
        let cache = GreenCache::new(mesh.clone());
        let a = cache.get(3).unwrap();
        let b = cache.get(3).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
        let shifted = GreenCache::new(mesh).with_offset(0.25).get(3).unwrap();
        assert!((shifted.values[10] - a.values[10] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn psi0_vanishes_on_the_icosahedron() {
        let b = levi_civita_connection(Arc::new(build_icosphere(0).unwrap()), 2).unwrap();
        let (psi, energy) = psi0_and_energy(&b).unwrap();
        assert!(psi.iter().all(|x| x.abs() < 1e-8));
        assert!(energy < 1e-12);
    }

    #[test]
    fn psi0_is_positive_on_irregular_meshes() {
        let m = build_icosphere(2)
            .unwrap()
            .map_positions(|p| Point::new(p.x * 1.3, p.y, p.z * 0.8))
            .unwrap();
        let b = levi_civita_connection(Arc::new(m), 1).unwrap();
        let (_, energy) = psi0_and_energy(&b).unwrap();
        assert!(energy > 0.0);
    }

    #[test]
    fn general_w_is_permutation_invariant() {
        let mesh = Arc::new(build_icosphere(2).unwrap());
        let b = levi_civita_connection(mesh.clone(), 2).unwrap();
        let cache = GreenCache::new(mesh.clone());
        let psi0 = psi0_and_energy(&b).unwrap();
        let none = DMatrix::zeros(0, 0);
        let c1 = Configuration::new(&mesh, vec![3, 40, 77, 120]).unwrap();
        let c2 = Configuration::new(&mesh, vec![120, 3, 77, 40]).unwrap();
        let w1 = general_w(&b, &c1, &[], &none, &cache, &psi0).unwrap();
        let w2 = general_w(&b, &c2, &[], &none, &cache, &psi0).unwrap();
        assert_eq!(w1, w2);
        assert_eq!(w1.total, w1.pair_term + w1.self_term + w1.psi0_term + w1.flux_term);
    }

    #[test]
    fn empty_configuration_on_flat_data_is_zero() {
        let mesh = Arc::new(build_icosphere(0).unwrap());
        let b = levi_civita_connection(mesh.clone(), 1).unwrap();
        let cache = GreenCache::new(mesh.clone());
        let c = Configuration::new(&mesh, vec![]).unwrap();
        let psi0 = (vec![0.0; mesh.num_vertices()], 0.0);
        let w = general_w(&b, &c, &[], &DMatrix::zeros(0, 0), &cache, &psi0).unwrap();
        assert_eq!(w.total, 0.0);
    }
}
