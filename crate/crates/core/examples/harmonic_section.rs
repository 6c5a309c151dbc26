//! Canonical harmonic section with singularities at a snapped tetrahedron,
//! its vortices and its renormalized energy.

use std::sync::Arc;

use glvortex::connection::levi_civita_connection;
use glvortex::harmonic::{canonical_harmonic_section, renormalized_energy_limit, Extrapolation};
use glvortex::renorm::{sphere_offset, tetrahedron_w};
use glvortex::harmonic::Configuration;
use glvortex::vortex::{detect_vortices_with_floor, PolyhedronKind, ReferencePolyhedron};
use glvortex::build_icosphere;

fn main() -> glvortex::Result<()> {
    let mesh = Arc::new(build_icosphere(4)?);
    let bundle = levi_civita_connection(mesh.clone(), 2)?;
    let tetra = ReferencePolyhedron::new(PolyhedronKind::Tetrahedron);
    let config = Configuration::snap(&mesh, &tetra.vertices)?;
    let canonical = canonical_harmonic_section(&bundle, &config, &[])?;

    let vortices = detect_vortices_with_floor(&bundle, &canonical.u, 0.5)?;
    println!("vortices {} total degree {}", vortices.len(), vortices.total_degree);

    let w = renormalized_energy_limit(&bundle, &canonical, &config, 0.5, Extrapolation::SecondOrder)?;
    println!(
        "renormalized energy {:.4} (+- {:.1e}), closed form {:.4}",
        w.value,
        w.error_estimate,
        tetrahedron_w() + sphere_offset(4)
    );
    Ok(())
}
