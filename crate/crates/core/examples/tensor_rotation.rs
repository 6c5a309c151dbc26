//! Rotating a symmetric traceless rank-k tensor by alpha multiplies its
//! complex coordinate by e^{ik alpha}; the rose of k directions turns rigidly.

use glvortex::tensor::{q_basis_exact, rotate, selftest, SymTracelessTensor};
use num_complex::Complex64;

fn main() -> glvortex::Result<()> {
    let k = 3;
    let t = SymTracelessTensor::from_complex(k, Complex64::new(1.0, 0.5))?;
    let r = rotate(&t, 0.3);
    println!("before {:?}", t.rose_angles());
    println!("after  {:?}", r.rose_angles());
    println!("coordinate ratio {:.12}", r.as_complex() / t.as_complex());

    let (qo, qe) = q_basis_exact(4)?;
    println!("rank 4 basis: odd {qo:?} even {qe:?}");

    let checks = selftest(6, &[0.1, 1.3, 2.9])?;
    let passed = checks.iter().filter(|c| c.passed).count();
    println!("{passed} of {} algebra checks passed", checks.len());
    Ok(())
}
