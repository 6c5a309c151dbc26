//! Symmetric and symmetric-traceless tensors of rank `k` over the plane.
//!
//! A symmetric tensor is stored by its coefficients in the basis
//! `h(k, j)`, the (unnormalized) sum of all distinct words `e_{i1} ⊗ ... ⊗ e_{ik}`
//! containing exactly `j` copies of `e1`. The words are orthonormal, so
//! `<h(k, j), h(k, j)> = C(k, j)`.
//!
//! The traceless subspace is spanned by
//! `Q_o(k) = sum_i (-1)^i h(k, 2i + 1)` and `Q_e(k) = sum_i (-1)^i h(k, 2i)`;
//! a traceless tensor is written `q_o Q_o + q_e Q_e` and identified with the
//! complex number `q_o + i q_e`. Rotating the plane by `alpha` multiplies
//! that number by `e^{i k alpha}`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::{Frame, Point, SurfaceMesh};

pub const MAX_RANK: usize = 12;

/// `C(n, r)` in exact integer arithmetic.
pub fn binomial(n: usize, r: usize) -> i64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: i64 = 1;
    for i in 0..r {
        acc = acc * (n - i) as i64 / (i + 1) as i64;
    }
    acc
}

fn check_rank(k: usize, min: usize) -> Result<()> {
    if k < min || k > MAX_RANK {
        return Err(Error::Domain(format!(
            "rank {k} outside the supported range {min}..={MAX_RANK}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor {
    rank: usize,
    coeffs: Vec<f64>,
}

impl SymTensor {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Domain("a symmetric tensor needs at least one coefficient".into()));
        }
        Ok(SymTensor {
            rank: coeffs.len() - 1,
            coeffs,
        })
    }

    pub fn zeros(rank: usize) -> Self {
        SymTensor {
            rank,
            coeffs: vec![0.0; rank + 1],
        }
    }

    /// The basis element `h(k, j)`.
    pub fn basis(rank: usize, j: usize) -> Self {
        let mut t = SymTensor::zeros(rank);
        t.coeffs[j] = 1.0;
        t
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Inner product induced by the orthonormal words of the full tensor space.
    pub fn inner(&self, other: &SymTensor) -> f64 {
        assert_eq!(self.rank, other.rank);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .enumerate()
            .map(|(j, (a, b))| a * b * binomial(self.rank, j) as f64)
            .sum()
    }

    /// Value of the tensor on `d ⊗ ... ⊗ d` for `d = (x, y)`.
    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        let k = self.rank;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * binomial(k, j) as f64 * x.powi(j as i32) * y.powi((k - j) as i32))
            .sum()
    }

    fn axpy(&mut self, a: f64, other: &SymTensor) {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += a * o;
        }
    }
}

/// Contraction of the first two slots. For rank 2 the result is a rank-0
/// tensor holding the scalar trace.
pub fn trace12(t: &SymTensor) -> Result<SymTensor> {
    if t.rank < 2 {
        return Err(Error::Domain(format!(
            "trace needs rank at least 2, got {}",
            t.rank
        )));
    }
    let m = t.rank - 2;
    let coeffs = (0..=m).map(|i| t.coeffs[i] + t.coeffs[i + 2]).collect();
    Ok(SymTensor { rank: m, coeffs })
}

/// The `(k - 1) x (k + 1)` matrix of [`trace12`] in the `h` bases.
pub fn trace_matrix(k: usize) -> Result<nalgebra::DMatrix<f64>> {
    check_rank(k, 2)?;
    Ok(nalgebra::DMatrix::from_fn(k - 1, k + 1, |i, j| {
        (i == j) as u8 as f64 + (i + 2 == j) as u8 as f64
    }))
}

/// Integer coefficients of `(Q_o(k), Q_e(k))` from the closed formula.
pub fn q_basis_exact(k: usize) -> Result<(Vec<i64>, Vec<i64>)> {
    check_rank(k, 2)?;
    let mut qo = vec![0i64; k + 1];
    let mut qe = vec![0i64; k + 1];
    for j in 0..=k {
        let sign = if (j / 2) % 2 == 0 { 1 } else { -1 };
        if j % 2 == 1 {
            qo[j] = sign;
        } else {
            qe[j] = sign;
        }
    }
    Ok((qo, qe))
}

/// Integer coefficients of `(Q_o(k), Q_e(k))` grown from rank 2 by
/// `Q_o(k+1) = e1 ⊗ Q_e(k) + e2 ⊗ Q_o(k)` and
/// `Q_e(k+1) = -e1 ⊗ Q_o(k) + e2 ⊗ Q_e(k)`.
///
/// Each right-hand side is formed as a tensor of words; it is symmetric
/// only if the words starting with `e1` and those starting with `e2`
/// assign the same coefficient to every count of ones, which is checked.
pub fn q_basis_recurrence(k: usize) -> Result<(Vec<i64>, Vec<i64>)> {
    check_rank(k, 2)?;
    let mut qo = vec![0, 1, 0];
    let mut qe = vec![1, 0, -1];
    for r in 2..k {
        // words e1 w: coefficient of w in the first factor, one extra 1
        // words e2 w: coefficient of w in the second factor
        let grow = |first: &[i64], first_sign: i64, second: &[i64]| -> Result<Vec<i64>> {
            let mut out = vec![0i64; r + 2];
            for (j, slot) in out.iter_mut().enumerate() {
                let from_e1 = if j >= 1 { Some(first_sign * first[j - 1]) } else { None };
                let from_e2 = if j <= r { Some(second[j]) } else { None };
                *slot = match (from_e1, from_e2) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(Error::Numerical(format!(
                            "recurrence produced a non-symmetric tensor at rank {}",
                            r + 1
                        )))
                    }
                    (Some(a), _) => a,
                    (None, Some(b)) => b,
                    (None, None) => unreachable!(),
                };
            }
            Ok(out)
        };
        let next_o = grow(&qe, 1, &qo)?;
        let next_e = grow(&qo, -1, &qe)?;
        qo = next_o;
        qe = next_e;
    }
    Ok((qo, qe))
}

/// `(Q_o(k), Q_e(k))` as symmetric tensors.
pub fn q_basis(k: usize) -> Result<(SymTensor, SymTensor)> {
    let (qo, qe) = q_basis_exact(k)?;
    let to = |v: Vec<i64>| SymTensor {
        rank: k,
        coeffs: v.into_iter().map(|c| c as f64).collect(),
    };
    Ok((to(qo), to(qe)))
}

/// Element `q_o Q_o(k) + q_e Q_e(k)` of the traceless subspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTracelessTensor {
    pub rank: usize,
    pub q_o: f64,
    pub q_e: f64,
}

impl SymTracelessTensor {
    pub fn new(rank: usize, q_o: f64, q_e: f64) -> Result<Self> {
        check_rank(rank, 2)?;
        Ok(SymTracelessTensor { rank, q_o, q_e })
    }

    pub fn from_complex(rank: usize, z: Complex64) -> Result<Self> {
        Self::new(rank, z.re, z.im)
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.q_o, self.q_e)
    }

    pub fn embed(&self) -> SymTensor {
        let (qo, qe) = q_basis(self.rank).expect("rank checked at construction");
        let mut t = SymTensor::zeros(self.rank);
        t.axpy(self.q_o, &qo);
        t.axpy(self.q_e, &qe);
        t
    }

    /// The `k` unit directions (angles from `e1`) where the tensor's
    /// polynomial `d -> t(d, ..., d)` attains its maximum, i.e. the petals
    /// of the k-fold rose. Empty for the zero tensor.
    pub fn rose_angles(&self) -> Vec<f64> {
        let z = self.as_complex();
        if z.norm() == 0.0 {
            return Vec::new();
        }
        let k = self.rank as f64;
        let base = (z.arg() + (k - 1.0) * PI / 2.0) / k;
        (0..self.rank)
            .map(|m| base + 2.0 * PI * m as f64 / k)
            .collect()
    }
}

/// Action of `⊗^k R_alpha` on the traceless subspace.
pub fn rotate(t: &SymTracelessTensor, alpha: f64) -> SymTracelessTensor {
    let z = t.as_complex() * Complex64::from_polar(1.0, t.rank as f64 * alpha);
    SymTracelessTensor {
        rank: t.rank,
        q_o: z.re,
        q_e: z.im,
    }
}

/// Per-vertex tensor of a section: `a + ib` at a vertex becomes
/// `a Q_o + b Q_e` in that vertex's frame.
pub fn section_to_tensor_field(
    values: &[Complex64],
    rank: usize,
) -> Result<Vec<SymTracelessTensor>> {
    values
        .iter()
        .map(|&z| SymTracelessTensor::from_complex(rank, z))
        .collect()
}

/// Rose petals of a vertex tensor as ambient unit vectors.
pub fn rose_directions(frame: &Frame, t: &SymTracelessTensor) -> Vec<Point> {
    t.rose_angles().into_iter().map(|a| frame.direction(a)).collect()
}

/// Value of the vertex tensor on `d ⊗ ... ⊗ d` for an ambient vector `d`,
/// which only sees the tangential part of `d`. Independent of the frame.
pub fn evaluate_ambient(frame: &Frame, t: &SymTracelessTensor, d: &Point) -> f64 {
    t.embed().evaluate(d.dot(&frame.e1), d.dot(&frame.e2))
}

/// Rose petals for every vertex of a mesh.
pub fn tensor_field_roses(mesh: &SurfaceMesh, field: &[SymTracelessTensor]) -> Vec<Vec<Point>> {
    field
        .iter()
        .enumerate()
        .map(|(v, t)| rose_directions(mesh.frame(v), t))
        .collect()
}

/// Dense reference implementation on the full `2^k`-dimensional tensor
/// space, used for self-checks.
pub mod dense {
    use super::*;

    /// Index bit `b` (from the most significant) of word `w` is 1 for `e2`.
    pub fn embed(t: &SymTensor) -> Vec<f64> {
        let k = t.rank();
        (0..1usize << k)
            .map(|w| {
                let ones = k - w.count_ones() as usize;
                t.coeffs()[ones]
            })
            .collect()
    }

    /// Coefficients in the `h` basis of a symmetric dense tensor.
    pub fn project(full: &[f64], k: usize) -> SymTensor {
        let mut coeffs = vec![0.0; k + 1];
        for (w, &v) in full.iter().enumerate() {
            coeffs[k - w.count_ones() as usize] += v;
        }
        for (j, c) in coeffs.iter_mut().enumerate() {
            *c /= binomial(k, j) as f64;
        }
        SymTensor { rank: k, coeffs }
    }

    /// Apply `⊗^k M` for a 2x2 matrix `m` (row-major).
    pub fn apply_power(full: &[f64], k: usize, m: [[f64; 2]; 2]) -> Vec<f64> {
        let mut cur = full.to_vec();
        for slot in 0..k {
            let stride = 1usize << (k - 1 - slot);
            let mut next = vec![0.0; cur.len()];
            for (w, n) in next.iter_mut().enumerate() {
                let out = (w / stride) & 1;
                let base = w & !stride;
                *n = m[out][0] * cur[base] + m[out][1] * cur[base | stride];
            }
            cur = next;
        }
        cur
    }

    pub fn rotation(alpha: f64) -> [[f64; 2]; 2] {
        let (s, c) = alpha.sin_cos();
        [[c, -s], [s, c]]
    }

    /// Contraction of the first two slots.
    pub fn trace12(full: &[f64], k: usize) -> Vec<f64> {
        let rest = 1usize << (k - 2);
        (0..rest)
            .map(|w| full[w] + full[(3 << (k - 2)) | w])
            .collect()
    }
}

/// Outcome of one self-check.
#[derive(Debug, Clone)]
pub struct SelfCheck {
    pub name: String,
    pub max_error: f64,
    pub passed: bool,
}

/// Compare the compact algebra against the dense reference for ranks
/// `2..=max_rank`, with rotation angles drawn from `angles`.
pub fn selftest(max_rank: usize, angles: &[f64]) -> Result<Vec<SelfCheck>> {
    check_rank(max_rank, 2)?;
    let mut out = Vec::new();
    let mut push = |name: String, err: f64, tol: f64| {
        out.push(SelfCheck {
            name,
            max_error: err,
            passed: err <= tol,
        })
    };
    for k in 2..=max_rank {
        let (qo, qe) = q_basis(k)?;
        let tr = trace12(&qo)?
            .coeffs
            .iter()
            .chain(trace12(&qe)?.coeffs.iter())
            .fold(0.0f64, |m, c| m.max(c.abs()));
        push(format!("rank {k}: Q_o, Q_e traceless"), tr, 0.0);

        let same = q_basis_exact(k)? == q_basis_recurrence(k)?;
        push(
            format!("rank {k}: recurrence matches closed formula"),
            if same { 0.0 } else { 1.0 },
            0.0,
        );

        let ortho = qo.inner(&qe).abs() + (qo.inner(&qo) - qe.inner(&qe)).abs();
        push(format!("rank {k}: Q_o ⟂ Q_e with equal norms"), ortho, 0.0);

        if k <= 8 {
            let mut err = 0.0f64;
            for &alpha in angles {
                for (basis, t) in [(&qo, (1.0, 0.0)), (&qe, (0.0, 1.0))] {
                    let rotated = dense::apply_power(&dense::embed(basis), k, dense::rotation(alpha));
                    let t = SymTracelessTensor::new(k, t.0, t.1)?;
                    let expect = dense::embed(&rotate(&t, alpha).embed());
                    for (a, b) in rotated.iter().zip(&expect) {
                        err = err.max((a - b).abs());
                    }
                }
            }
            push(format!("rank {k}: rotation matches dense ⊗^k R"), err, 1e-12);
        }

        let t = SymTracelessTensor::new(k, 0.6, -0.8)?;
        let back = rotate(&t, 2.0 * PI / k as f64);
        let err = (back.q_o - t.q_o).abs().max((back.q_e - t.q_e).abs());
        push(format!("rank {k}: rotation by 2π/k is the identity"), err, 1e-14);
    }
    Ok(out)
}
