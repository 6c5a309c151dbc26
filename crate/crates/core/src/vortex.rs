//! Vortex detection by discrete winding, reference polyhedra, and
//! rotation-invariant comparison of point sets on the sphere.

use std::f64::consts::PI;

use nalgebra::{Matrix3, UnitQuaternion, Vector3, Vector4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::connection::DiscreteBundle;
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::section::Section;

/// Pre-rounding winding farther than this from an integer flags the face.
pub const DEGREE_FLAG_TOL: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Vortex {
    pub face: usize,
    pub degree: i64,
    /// Barycenter of the carrying face.
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VortexSet {
    pub items: Vec<Vortex>,
    pub total_degree: i64,
    /// Faces whose winding was not within [`DEGREE_FLAG_TOL`] of an integer.
    pub flagged: Vec<usize>,
}

impl VortexSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.items.iter().map(|v| v.position).collect()
    }

    pub fn all_degree_one(&self) -> bool {
        self.items.iter().all(|v| v.degree == 1)
    }
}

/// Winding of `u` around each face, corrected by the face curvature.
///
/// Any vertex where `u` vanishes makes the winding undefined; such faces
/// raise [`Error::AmbiguousDegree`]. See [`detect_vortices_with_floor`].
pub fn detect_vortices(bundle: &DiscreteBundle, u: &Section) -> Result<VortexSet> {
    detect(bundle, u.values())
}

/// As [`detect_vortices`], after replacing every value of modulus below
/// `floor` by `floor` times its phase (or by `floor` where the value is 0).
pub fn detect_vortices_with_floor(
    bundle: &DiscreteBundle,
    u: &Section,
    floor: f64,
) -> Result<VortexSet> {
    let values: Vec<Complex64> = u
        .values()
        .iter()
        .map(|&z| {
            let r = z.norm();
            if r >= floor {
                z
            } else if r > 0.0 {
                z * (floor / r)
            } else {
                Complex64::new(floor, 0.0)
            }
        })
        .collect();
    detect(bundle, &values)
}

fn detect(bundle: &DiscreteBundle, u: &[Complex64]) -> Result<VortexSet> {
    let mesh = bundle.mesh();
    if u.len() != mesh.num_vertices() {
        return Err(Error::Domain(format!(
            "section has {} values for {} vertices",
            u.len(),
            mesh.num_vertices()
        )));
    }
    let mut items = Vec::new();
    let mut flagged = Vec::new();
    let mut total = 0;
    for f in 0..mesh.num_faces() {
        let mut winding = bundle.face_curvature(f);
        for c in 0..3 {
            let h = 3 * f + c;
            let (i, j) = (mesh.tail(h), mesh.head(h));
            if u[i] == Complex64::new(0.0, 0.0) {
                return Err(Error::AmbiguousDegree { face: f, vertex: i });
            }
            let rel = u[j] * u[i].conj() * Complex64::from_polar(1.0, -bundle.rho_halfedge(h));
            winding += rel.arg();
        }
        let x = winding / (2.0 * PI);
        let degree = x.round();
        if (x - degree).abs() > DEGREE_FLAG_TOL {
            flagged.push(f);
        }
        let degree = degree as i64;
        if degree != 0 {
            total += degree;
            items.push(Vortex {
                face: f,
                degree,
                position: mesh.face_barycenter(f),
            });
        }
    }
    Ok(VortexSet {
        items,
        total_degree: total,
        flagged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyhedronKind {
    Tetrahedron,
    CrossPolytope,
    Icosahedron,
}

#[derive(Debug, Clone)]
pub struct ReferencePolyhedron {
    pub kind: PolyhedronKind,
    pub vertices: Vec<Point>,
}

impl ReferencePolyhedron {
    pub fn new(kind: PolyhedronKind) -> Self {
        let vertices = match kind {
            PolyhedronKind::Tetrahedron => {
                let c = 1.0 / 3f64.sqrt();
                vec![
                    Point::new(c, c, c),
                    Point::new(c, -c, -c),
                    Point::new(-c, c, -c),
                    Point::new(-c, -c, c),
                ]
            }
            PolyhedronKind::CrossPolytope => vec![
                Point::new(1.0, 0.0, 0.0),
                Point::new(-1.0, 0.0, 0.0),
                Point::new(0.0, 1.0, 0.0),
                Point::new(0.0, -1.0, 0.0),
                Point::new(0.0, 0.0, 1.0),
                Point::new(0.0, 0.0, -1.0),
            ],
            PolyhedronKind::Icosahedron => crate::mesh::icosahedron().0,
        };
        ReferencePolyhedron { kind, vertices }
    }

    /// The optimal configuration for `d` points, where one is known.
    pub fn for_count(d: usize) -> Option<Self> {
        match d {
            4 => Some(Self::new(PolyhedronKind::Tetrahedron)),
            6 => Some(Self::new(PolyhedronKind::CrossPolytope)),
            12 => Some(Self::new(PolyhedronKind::Icosahedron)),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PolyhedronKind::Tetrahedron => "tetrahedron",
            PolyhedronKind::CrossPolytope => "cross-polytope",
            PolyhedronKind::Icosahedron => "icosahedron",
        }
    }
}

fn angle(a: &Point, b: &Point) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Rotation `R` minimizing `sum |R a_i - b_i|^2`.
pub fn kabsch(a: &[Point], b: &[Point]) -> Matrix3<f64> {
    let mut h = Matrix3::zeros();
    for (p, q) in a.iter().zip(b) {
        h += p * q.transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose()
}

/// Minimum-cost perfect matching of a square cost matrix; returns
/// `assignment[row] = column`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    // potentials and matching use 1-based indices with a sentinel column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

fn max_angle_after_alignment(points: &[Point], reference: &[Point], perm: &[usize]) -> (f64, Matrix3<f64>) {
    let matched: Vec<Point> = perm.iter().map(|&j| reference[j]).collect();
    let r = kabsch(&matched, points);
    let worst = points
        .iter()
        .zip(&matched)
        .map(|(p, q)| angle(p, &(r * q)))
        .fold(0.0, f64::max);
    (worst, r)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

const ASSIGNMENT_RESTARTS: usize = 50;
const ASSIGNMENT_SEED: u64 = 0x005e_ed0f_1c05;

/// Smallest achievable maximum angle (radians) between the points and a
/// rotated, relabeled copy of the reference vertices.
///
/// Up to six points every labeling is tried; beyond that, alternating
/// optimal matching and alignment is restarted from fixed pseudo-random
/// rotations.
pub fn configuration_distance(points: &[Point], reference: &ReferencePolyhedron) -> Result<f64> {
    let n = points.len();
    if n != reference.vertices.len() {
        return Err(Error::Domain(format!(
            "{} points cannot be compared with the {} vertices of the {}",
            n,
            reference.vertices.len(),
            reference.name()
        )));
    }
    let pts: Vec<Point> = points.iter().map(|p| p.normalize()).collect();
    let refs = &reference.vertices;
    if n <= 6 {
        return Ok(permutations(n)
            .iter()
            .map(|perm| max_angle_after_alignment(&pts, refs, perm).0)
            .fold(f64::INFINITY, f64::min));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(ASSIGNMENT_SEED);
    let mut best = f64::INFINITY;
    for restart in 0..ASSIGNMENT_RESTARTS {
        let mut rot = if restart == 0 {
            Matrix3::identity()
        } else {
            let q = Vector4::from_fn(|_, _| StandardNormal.sample(&mut rng));
            UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(q))
                .to_rotation_matrix()
                .into_inner()
        };
        let mut last: Vec<usize> = Vec::new();
        for _ in 0..100 {
            let cost: Vec<Vec<f64>> = pts
                .iter()
                .map(|p| refs.iter().map(|q| angle(p, &(rot * q))).collect())
                .collect();
            let perm = hungarian(&cost);
            let (worst, r) = max_angle_after_alignment(&pts, refs, &perm);
            best = best.min(worst);
            rot = r;
            if perm == last {
                break;
            }
            last = perm;
        }
    }
    Ok(best)
}
