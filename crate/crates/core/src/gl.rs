//! Discrete Ginzburg-Landau energy of sections, its gradient, and
//! minimization by nonlinear conjugate gradients with continuation in
//! `epsilon`; the radial vortex profile and its core energy; test sections
//! glued from a canonical harmonic section and radial cores.
//!
//! The energy is
//! `E(u) = sum_edges w_ij |u_j - e^{i rho_ij} u_i|^2 / 2
//!       + sum_vertices area_v (1 - |u_v|^2)^2 / (4 eps^2)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::connection::DiscreteBundle;
use crate::error::{Error, Result};
use crate::harmonic::{CanonicalSection, Configuration};
use crate::mesh::SurfaceMesh;
use crate::rng::{stream_rng, unit_disk};
use crate::section::Section;

/// Edge list with transport factors, laid out for repeated evaluation.
struct Operator<'a> {
    edges: Vec<(usize, usize, f64, Complex64)>,
    areas: &'a [f64],
}

impl<'a> Operator<'a> {
    fn new(bundle: &'a DiscreteBundle) -> Self {
        let mesh = bundle.mesh();
        let edges = mesh
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &[a, b])| {
                (
                    a,
                    b,
                    mesh.cotan_weight(e),
                    Complex64::from_polar(1.0, bundle.edge_angles()[e]),
                )
            })
            .collect();
        Operator {
            edges,
            areas: mesh.vertex_areas(),
        }
    }

    fn energy(&self, u: &[Complex64], eps: f64) -> f64 {
        let mut dirichlet = 0.0;
        for &(i, j, w, t) in &self.edges {
            dirichlet += 0.5 * w * (u[j] - t * u[i]).norm_sqr();
        }
        let c = 1.0 / (4.0 * eps * eps);
        let mut potential = 0.0;
        for (z, a) in u.iter().zip(self.areas) {
            let s = 1.0 - z.norm_sqr();
            potential += a * s * s;
        }
        dirichlet + c * potential
    }

    fn gradient(&self, u: &[Complex64], eps: f64, g: &mut [Complex64]) {
        let c = 1.0 / (eps * eps);
        for ((gv, z), a) in g.iter_mut().zip(u).zip(self.areas) {
            *gv = -(a * c * (1.0 - z.norm_sqr())) * z;
        }
        for &(i, j, w, t) in &self.edges {
            let diff = u[j] - t * u[i];
            g[j] += w * diff;
            g[i] -= w * t.conj() * diff;
        }
    }

    /// Coefficients `c[0..5]` of `s -> E(u + s p)`.
    fn quartic(&self, u: &[Complex64], p: &[Complex64], eps: f64) -> [f64; 5] {
        let mut c = [0.0; 5];
        for &(i, j, w, t) in &self.edges {
            let a = u[j] - t * u[i];
            let b = p[j] - t * p[i];
            c[0] += 0.5 * w * a.norm_sqr();
            c[1] += w * (a.conj() * b).re;
            c[2] += 0.5 * w * b.norm_sqr();
        }
        let k = 1.0 / (4.0 * eps * eps);
        for ((z, d), area) in u.iter().zip(p).zip(self.areas) {
            // 1 - |z + s d|^2 = m0 - m1 s - m2 s^2
            let m0 = 1.0 - z.norm_sqr();
            let m1 = 2.0 * (z.conj() * d).re;
            let m2 = d.norm_sqr();
            let f = k * area;
            c[0] += f * m0 * m0;
            c[1] -= f * 2.0 * m0 * m1;
            c[2] += f * (m1 * m1 - 2.0 * m0 * m2);
            c[3] += f * 2.0 * m1 * m2;
            c[4] += f * m2 * m2;
        }
        c
    }
}

pub fn gl_energy(bundle: &DiscreteBundle, u: &Section, epsilon: f64) -> f64 {
    Operator::new(bundle).energy(u.values(), epsilon)
}

/// Gradient with respect to the real and imaginary parts of each value,
/// packed as a complex number: the directional derivative along `delta`
/// is `Re sum conj(g_v) delta_v`.
pub fn gl_gradient(bundle: &DiscreteBundle, u: &Section, epsilon: f64) -> Vec<Complex64> {
    let mut g = vec![Complex64::new(0.0, 0.0); u.len()];
    Operator::new(bundle).gradient(u.values(), epsilon, &mut g);
    g
}

fn real_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn max_norm(g: &[Complex64]) -> f64 {
    g.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn quartic_value(c: &[f64; 5], s: f64) -> f64 {
    (((c[4] * s + c[3]) * s + c[2]) * s + c[1]) * s + c[0]
}

/// Positive minimizer of the quartic with `c[1] < 0` and `c[4] > 0`.
fn quartic_step(c: &[f64; 5]) -> Option<f64> {
    // stationary points: roots of 4 c4 s^3 + 3 c3 s^2 + 2 c2 s + c1
    let lead = 4.0 * c[4];
    if !(lead > 0.0) {
        if c[2] > 0.0 {
            return Some(-c[1] / (2.0 * c[2]));
        }
        return None;
    }
    let companion = DMatrix::from_row_slice(
        3,
        3,
        &[
            -3.0 * c[3] / lead,
            -2.0 * c[2] / lead,
            -c[1] / lead,
            1.0,
            0.0,
            0.0,
            0.0,
            1.0,
            0.0,
        ],
    );
    let roots = companion.complex_eigenvalues();
    let mut best: Option<(f64, f64)> = None;
    for r in roots.iter() {
        if r.im.abs() > 1e-9 * r.re.abs().max(1.0) || r.re <= 0.0 {
            continue;
        }
        // polish with a Newton step on the derivative
        let mut s = r.re;
        for _ in 0..3 {
            let d1 = ((lead * s + 3.0 * c[3]) * s + 2.0 * c[2]) * s + c[1];
            let d2 = (3.0 * lead * s + 6.0 * c[3]) * s + 2.0 * c[2];
            if d2 > 0.0 {
                s -= d1 / d2;
            }
        }
        if s <= 0.0 {
            continue;
        }
        let v = quartic_value(c, s);
        if best.is_none_or(|(bv, _)| v < bv) {
            best = Some((v, s));
        }
    }
    best.map(|(_, s)| s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GLParams {
    /// Decreasing continuation values; the last one is the target epsilon.
    pub schedule: Vec<f64>,
    /// Iteration cap per stage.
    pub max_iters: usize,
    /// Stage ends once the gradient max-norm falls below this.
    pub grad_tol: f64,
    pub seed: u64,
}

pub const DEFAULT_STAGES: usize = 5;

impl GLParams {
    /// Geometric schedule of [`DEFAULT_STAGES`] values from half the
    /// circumradius down to `epsilon`.
    pub fn with_default_schedule(mesh: &SurfaceMesh, epsilon: f64) -> Self {
        GLParams {
            schedule: geometric_schedule(0.5 * mesh.circumradius(), epsilon, DEFAULT_STAGES),
            max_iters: 2_000,
            grad_tol: 1e-8,
            seed: 0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        *self.schedule.last().expect("validated schedule is non-empty")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::Domain("epsilon schedule is empty".into()));
        }
        if self.schedule.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::Domain(format!(
                "epsilon values must be positive and finite: {:?}",
                self.schedule
            )));
        }
        if self.schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Domain(format!(
                "epsilon schedule must be strictly decreasing: {:?}",
                self.schedule
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Domain("max_iters must be positive".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::Domain("grad_tol must be positive".into()));
        }
        Ok(())
    }

    /// Warning text when the final epsilon is below the mean edge length.
    pub fn resolution_warning(&self, mesh: &SurfaceMesh) -> Option<String> {
        let h = mesh.mean_edge_length();
        let eps = self.epsilon();
        (eps < h).then(|| {
            format!("final epsilon {eps} is below the mean edge length {h:.4}; vortex cores are not resolved")
        })
    }
}

/// `stages` values decreasing geometrically from `start` to `end`.
pub fn geometric_schedule(start: f64, end: f64, stages: usize) -> Vec<f64> {
    if stages <= 1 || start <= end {
        return vec![end];
    }
    let ratio = (end / start).powf(1.0 / (stages - 1) as f64);
    let mut s: Vec<f64> = (0..stages).map(|i| start * ratio.powi(i as i32)).collect();
    *s.last_mut().unwrap() = end;
    s
}

#[derive(Debug, Clone)]
pub enum Init {
    /// Uniform in the unit disk from the run's generator.
    Random,
    Given(Section),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub epsilon: f64,
    pub iterations: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub stage: usize,
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeReport {
    pub seed: u64,
    pub stream: u64,
    pub stages: Vec<StageReport>,
    pub history: Vec<IterRecord>,
}

impl MinimizeReport {
    pub fn final_energy(&self) -> f64 {
        self.stages.last().map_or(f64::NAN, |s| s.energy)
    }
}

const RESTART_EVERY: usize = 50;
const ARMIJO: f64 = 1e-4;

/// Run the continuation schedule from `init`. Random initial values use
/// stream `stream` of the generator seeded with `params.seed`.
pub fn minimize(
    bundle: &DiscreteBundle,
    params: &GLParams,
    init: Init,
    stream: u64,
) -> Result<(Section, MinimizeReport)> {
    params.validate()?;
    let n = bundle.mesh().num_vertices();
    let mut u: Vec<Complex64> = match init {
        Init::Random => {
            let mut rng = stream_rng(params.seed, stream);
            (0..n)
                .map(|_| {
                    let (x, y) = unit_disk(&mut rng);
                    Complex64::new(x, y)
                })
                .collect()
        }
        Init::Given(s) => {
            if s.len() != n {
                return Err(Error::Domain(format!(
                    "initial section has {} values for {n} vertices",
                    s.len()
                )));
            }
            s.into_values()
        }
    };
    let op = Operator::new(bundle);
    let mut report = MinimizeReport {
        seed: params.seed,
        stream,
        stages: Vec::new(),
        history: Vec::new(),
    };
    let zero = Complex64::new(0.0, 0.0);
    let mut g = vec![zero; n];
    let mut g_prev = vec![zero; n];
    let mut p = vec![zero; n];
    let mut trial = vec![zero; n];

    for (stage, &eps) in params.schedule.iter().enumerate() {
        let mut energy = op.energy(&u, eps);
        op.gradient(&u, eps, &mut g);
        let mut gnorm = max_norm(&g);
        let mut iterations = 0;
        let mut converged = gnorm < params.grad_tol;
        for (pv, gv) in p.iter_mut().zip(&g) {
            *pv = -gv;
        }
        report.history.push(IterRecord {
            stage,
            iteration: 0,
            energy,
            grad_norm: gnorm,
        });
        while !converged && iterations < params.max_iters {
            iterations += 1;
            let mut slope = real_dot(&g, &p);
            if slope >= 0.0 {
                for (pv, gv) in p.iter_mut().zip(&g) {
                    *pv = -gv;
                }
                slope = real_dot(&g, &p);
            }
            let coeffs = op.quartic(&u, &p, eps);
            let mut step = quartic_step(&coeffs).unwrap_or(1.0);
            let mut accepted = None;
            for _ in 0..40 {
                for ((t, a), b) in trial.iter_mut().zip(&u).zip(&p) {
                    *t = a + step * b;
                }
                let e = op.energy(&trial, eps);
                if e <= energy + ARMIJO * step * slope && e < energy {
                    accepted = Some(e);
                    break;
                }
                step *= 0.5;
            }
            let Some(e_new) = accepted else {
                // no representable decrease left: the stage is converged
                // to rounding if the predicted decrease is negligible
                if -slope * step.max(1.0) <= 1e-13 * energy.abs().max(1.0) {
                    converged = true;
                    break;
                }
                return Err(Error::Stagnation {
                    stage,
                    iteration: iterations,
                    energy,
                    grad_norm: gnorm,
                });
            };
            std::mem::swap(&mut u, &mut trial);
            energy = e_new;
            std::mem::swap(&mut g, &mut g_prev);
            op.gradient(&u, eps, &mut g);
            gnorm = max_norm(&g);
            report.history.push(IterRecord {
                stage,
                iteration: iterations,
                energy,
                grad_norm: gnorm,
            });
            if gnorm < params.grad_tol {
                converged = true;
                break;
            }
            // Polak-Ribiere with non-negative beta and periodic restarts
            let beta = if iterations % RESTART_EVERY == 0 {
                0.0
            } else {
                let num: f64 = g
                    .iter()
                    .zip(&g_prev)
                    .map(|(a, b)| a.re * (a.re - b.re) + a.im * (a.im - b.im))
                    .sum();
                let den = real_dot(&g_prev, &g_prev);
                (num / den).max(0.0)
            };
            for (pv, gv) in p.iter_mut().zip(&g) {
                *pv = beta * *pv - gv;
            }
        }
        report.stages.push(StageReport {
            epsilon: eps,
            iterations,
            energy,
            grad_norm: gnorm,
            converged,
        });
    }
    Ok((Section::new(u), report))
}

/// Independent random-start runs, one generator stream per run.
pub fn minimize_seeds(
    bundle: &DiscreteBundle,
    params: &GLParams,
    runs: usize,
) -> Vec<Result<(Section, MinimizeReport)>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|stream| minimize(bundle, params, Init::Random, stream))
        .collect()
}

/// Radial degree-one vortex profile `f` solving
/// `f'' + f'/r - f/r^2 + f (1 - f^2) = 0`, `f(0) = 0`, `f(inf) = 1`,
/// sampled on a uniform grid over `[0, R]`.
#[derive(Debug, Clone)]
pub struct VortexProfile {
    pub radius: f64,
    pub values: Vec<f64>,
}

impl VortexProfile {
    pub fn step(&self) -> f64 {
        self.radius / (self.values.len() - 1) as f64
    }

    /// `f(r)`, interpolated on the grid and continued by the far-field
    /// expansion beyond `R`.
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= self.radius {
            return far_field(r);
        }
        let h = self.step();
        let x = r / h;
        let i = (x.floor() as usize).min(self.values.len() - 2);
        let t = x - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

fn far_field(r: f64) -> f64 {
    let r2 = r * r;
    1.0 - 1.0 / (2.0 * r2) - 9.0 / (8.0 * r2 * r2)
}

/// Finite differences on `n` intervals with Newton iteration.
pub fn bbh_profile(radius: f64, n: usize) -> Result<VortexProfile> {
    if !(radius >= 10.0) || n < 100 {
        return Err(Error::Domain(format!(
            "profile needs radius >= 10 and at least 100 intervals, got {radius}, {n}"
        )));
    }
    let h = radius / n as f64;
    let mut f: Vec<f64> = (0..=n)
        .map(|i| {
            let r = i as f64 * h;
            r / (r * r + 2.0).sqrt()
        })
        .collect();
    f[n] = far_field(radius);
    let m = n - 1;
    let (mut lower, mut diag, mut upper, mut res) =
        (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for _ in 0..50 {
        let mut worst = 0.0f64;
        for k in 0..m {
            let i = k + 1;
            let r = i as f64 * h;
            let a = 1.0 / (h * h) - 1.0 / (2.0 * r * h);
            let c = 1.0 / (h * h) + 1.0 / (2.0 * r * h);
            let fi = f[i];
            res[k] = a * f[i - 1] - 2.0 * fi / (h * h) + c * f[i + 1] - fi / (r * r) + fi * (1.0 - fi * fi);
            lower[k] = a;
            upper[k] = c;
            diag[k] = -2.0 / (h * h) - 1.0 / (r * r) + 1.0 - 3.0 * fi * fi;
            worst = worst.max(res[k].abs());
        }
        // Thomas algorithm for J delta = -res
        let mut cp = vec![0.0; m];
        let mut dp = vec![0.0; m];
        for k in 0..m {
            let denom = diag[k] - if k > 0 { lower[k] * cp[k - 1] } else { 0.0 };
            if denom == 0.0 {
                return Err(Error::Numerical("profile Jacobian is singular".into()));
            }
            cp[k] = upper[k] / denom;
            dp[k] = (-res[k] - if k > 0 { lower[k] * dp[k - 1] } else { 0.0 }) / denom;
        }
        let mut delta = vec![0.0; m];
        for k in (0..m).rev() {
            delta[k] = dp[k] - if k + 1 < m { cp[k] * delta[k + 1] } else { 0.0 };
        }
        let mut step = 0.0f64;
        for k in 0..m {
            f[k + 1] += delta[k];
            step = step.max(delta[k].abs());
        }
        if step < 1e-11 && worst < 1e-8 {
            return Ok(VortexProfile {
                radius,
                values: f,
            });
        }
    }
    Err(Error::Numerical(
        "Newton iteration for the vortex profile did not converge".into(),
    ))
}

/// Core energy `1/2 int_0^R (f'^2 + f^2/r^2 + (1 - f^2)^2 / 2) 2 pi r dr`
/// minus `pi log R`, corrected for the tail beyond `R`.
fn core_energy(p: &VortexProfile) -> f64 {
    let h = p.step();
    let f = &p.values;
    let n = f.len() - 1;
    // midpoint rule on each interval, second order in h
    let mut total = 0.0;
    for i in 0..n {
        let r = (i as f64 + 0.5) * h;
        let fm = 0.5 * (f[i] + f[i + 1]);
        let df = (f[i + 1] - f[i]) / h;
        let density = df * df + fm * fm / (r * r) + 0.5 * (1.0 - fm * fm).powi(2);
        total += 0.5 * density * 2.0 * PI * r * h;
    }
    let big_r = p.radius;
    total - PI * big_r.ln() - PI / (4.0 * big_r * big_r)
}

/// Core energy estimate at one outer radius, Richardson-extrapolated in
/// the grid step.
pub fn bbh_gamma_at(radius: f64, points_per_unit: usize) -> Result<f64> {
    let n = (radius * points_per_unit as f64).round() as usize;
    let coarse = core_energy(&bbh_profile(radius, n)?);
    let fine = core_energy(&bbh_profile(radius, 2 * n)?);
    Ok((4.0 * fine - coarse) / 3.0)
}

/// The constant `gamma` of the degree-one radial vortex.
pub fn bbh_gamma() -> Result<f64> {
    bbh_gamma_at(100.0, 200)
}

/// Section equal to the canonical section away from the singular points
/// and to a radial vortex core `f(r / eps)` near each of them.
///
/// With `r` the chord distance to the nearest singular point, the modulus
/// is `f(r / eps)` for `r < sqrt(eps)`, interpolates linearly up to 1 on
/// `[sqrt(eps), 2 sqrt(eps)]` and is 1 beyond.
pub fn build_test_section(
    bundle: &DiscreteBundle,
    canonical: &CanonicalSection,
    config: &Configuration,
    epsilon: f64,
    profile: &VortexProfile,
) -> Result<Section> {
    let mesh = bundle.mesh();
    let root = epsilon.sqrt();
    if config.len() >= 2 && 2.0 * root >= config.min_separation(mesh) {
        return Err(Error::Geometry(format!(
            "balls of radius sqrt(eps) = {root:.4} overlap (minimal separation {:.4})",
            config.min_separation(mesh)
        )));
    }
    let centers = config.positions(mesh);
    let inner = profile.eval(root / epsilon);
    let values = (0..mesh.num_vertices())
        .map(|v| {
            let z = canonical.u.values()[v];
            if z.norm() == 0.0 {
                return z;
            }
            let phase = z / z.norm();
            let p = mesh.position(v);
            let r = centers
                .iter()
                .map(|c| (p - c).norm())
                .fold(f64::INFINITY, f64::min);
            let modulus = if r < root {
                profile.eval(r / epsilon)
            } else if r < 2.0 * root {
                let t = (r - root) / root;
                inner + t * (1.0 - inner)
            } else {
                1.0
            };
            modulus * phase
        })
        .collect();
    Ok(Section::new(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::levi_civita_connection;
    use crate::mesh::build_icosphere;
    use rand::Rng;
    use std::sync::Arc;

    fn bundle(s: u32, k: u32) -> DiscreteBundle {
        levi_civita_connection(Arc::new(build_icosphere(s).unwrap()), k).unwrap()
    }

    fn random_section(n: usize, seed: u64) -> Section {
        let mut rng = stream_rng(seed, 0);
        Section::new(
            (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        )
    }

    #[test]
    fn zero_section_energy() {
        let b = bundle(2, 2);
        let e = gl_energy(&b, &Section::zeros(b.mesh().num_vertices()), 0.3);
        let expect = b.mesh().total_area() / (4.0 * 0.09);
        assert!((e - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let b = bundle(2, 2);
        let n = b.mesh().num_vertices();
        let eps = 0.4;
        let u = random_section(n, 1);
        let d = random_section(n, 2);
        let g = gl_gradient(&b, &u, eps);
        let analytic = real_dot(&g, d.values());
        let h = 1e-5;
        let shift = |s: f64| {
            Section::new(u.values().iter().zip(d.values()).map(|(a, b)| a + s * b).collect())
        };
        let fd = (gl_energy(&b, &shift(h), eps) - gl_energy(&b, &shift(-h), eps)) / (2.0 * h);
        assert!((fd - analytic).abs() < 1e-6 * analytic.abs().max(1.0), "{fd} vs {analytic}");
    }

    #[test]
    fn gradient_is_phase_equivariant() {
        let b = bundle(1, 3);
        let u = random_section(b.mesh().num_vertices(), 4);
        let g = gl_gradient(&b, &u, 0.5);
        let g2 = gl_gradient(&b, &u.with_global_phase(0.7), 0.5);
        let p = Complex64::from_polar(1.0, 0.7);
        for (a, b) in g.iter().zip(&g2) {
            assert!((a * p - b).norm() < 1e-12);
        }
    }

    #[test]
    fn energy_is_gauge_invariant() {
        let b = bundle(2, 2);
        let n = b.mesh().num_vertices();
        let mut rng = stream_rng(5, 0);
        let betas: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
        let u = random_section(n, 6);
        let g = b.regauge(&betas).unwrap();
        let e0 = gl_energy(&b, &u, 0.3);
        let e1 = gl_energy(&g, &u.regauge(2, &betas), 0.3);
        assert!((e0 - e1).abs() < 1e-12 * e0);
    }

    #[test]
    fn quartic_matches_energy() {
        let b = bundle(1, 2);
        let n = b.mesh().num_vertices();
        let u = random_section(n, 7);
        let p = random_section(n, 8);
        let op = Operator::new(&b);
        let c = op.quartic(u.values(), p.values(), 0.3);
        for s in [-0.7, 0.0, 0.2, 1.3] {
            let moved: Vec<Complex64> = u.values().iter().zip(p.values()).map(|(a, b)| a + s * b).collect();
            let e = op.energy(&moved, 0.3);
            assert!((quartic_value(&c, s) - e).abs() < 1e-10 * e.max(1.0));
        }
    }

    #[test]
    fn minimize_is_deterministic_and_monotone() {
        let b = bundle(2, 2);
        let params = GLParams {
            schedule: vec![0.6, 0.4],
            max_iters: 200,
            grad_tol: 1e-9,
            seed: 42,
        };
        let (u1, r1) = minimize(&b, &params, Init::Random, 3).unwrap();
        let (u2, r2) = minimize(&b, &params, Init::Random, 3).unwrap();
        assert_eq!(u1, u2);
        assert_eq!(r1, r2);
        for stage in 0..2 {
            let energies: Vec<f64> = r1
                .history
                .iter()
                .filter(|h| h.stage == stage)
                .map(|h| h.energy)
                .collect();
            assert!(energies.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn schedule_validation() {
        let mut p = GLParams {
            schedule: vec![0.5, 0.5],
            max_iters: 10,
            grad_tol: 1e-6,
            seed: 0,
        };
        assert!(p.validate().is_err());
        p.schedule = vec![0.5, 0.2];
        assert!(p.validate().is_ok());
        let s = geometric_schedule(1.0, 0.05, 5);
        assert_eq!(s.len(), 5);
        assert_eq!(s[4], 0.05);
        assert!(s.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn profile_is_monotone_and_converged() {
        let p = bbh_profile(50.0, 10_000).unwrap();
        assert!(p.values.windows(2).all(|w| w[1] >= w[0]));
        // f(r) = 1 - 1/(2 r^2) + O(r^-4) far out
        let r = 40.0;
        assert!((p.eval(r) - (1.0 - 0.5 / (r * r))).abs() < 1e-6);
        assert!(p.eval(50.0) > 1.0 - 2.1e-4);
        assert_eq!(p.eval(0.0), 0.0);
    }

    #[test]
    fn gamma_is_stable_in_radius() {
        let g50 = bbh_gamma_at(50.0, 200).unwrap();
        let g100 = bbh_gamma_at(100.0, 200).unwrap();
        assert!((g50 - g100).abs() < 1e-6, "{g50} vs {g100}");
        assert!(g100 > 0.0);
        // independent collocation solve of the same boundary-value problem
        assert!((g100 - 1.196575).abs() < 1e-5);
    }
}
