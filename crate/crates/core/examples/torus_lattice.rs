//! Harmonic one-forms on a torus, the admissible flux lattice of the
//! tangent bundle and the vortex-free harmonic sections it labels.

use std::sync::Arc;

use glvortex::connection::{harmonic_basis, levi_civita_connection};
use glvortex::harmonic::{canonical_harmonic_section, lattice_offsets};
use glvortex::harmonic::Configuration;
use glvortex::vortex::detect_vortices_with_floor;
use glvortex::build_torus;

fn main() -> glvortex::Result<()> {
    let mesh = Arc::new(build_torus(2.0, 0.7, 32, 16)?);
    let bundle = levi_civita_connection(mesh.clone(), 1)?;
    let basis = harmonic_basis(&bundle)?;
    let (closed, coclosed) = basis.residuals(&mesh);
    println!("harmonic basis: {} forms, residuals {closed:.1e} {coclosed:.1e}", basis.len());
    println!("gram {:.6}", basis.gram);

    let config = Configuration::new(&mesh, vec![])?;
    let lattice = lattice_offsets(&bundle, &config, &basis, 1)?;
    println!("holonomy defects {:?}, {} admissible flux vectors", lattice.zeta, lattice.offsets.len());
    let canonical = canonical_harmonic_section(&bundle, &config, &lattice.offsets[1])?;
    let vortices = detect_vortices_with_floor(&bundle, &canonical.u, 0.5)?;
    println!("fluxes {:?} give {} vortices", canonical.fluxes, vortices.len());
    Ok(())
}
