//! Renormalized energy two ways on the same mesh: the limit of truncated
//! Dirichlet energies and the Green-function assembly.

use std::sync::Arc;

use glvortex::connection::levi_civita_connection;
use glvortex::harmonic::{canonical_harmonic_section, renormalized_energy_limit, Extrapolation};
use glvortex::renorm::{general_w, psi0_and_energy, GreenCache};
use glvortex::harmonic::Configuration;
use glvortex::vortex::{PolyhedronKind, ReferencePolyhedron};
use glvortex::build_icosphere;
use nalgebra::DMatrix;

fn main() -> glvortex::Result<()> {
    let mesh = Arc::new(build_icosphere(4)?);
    let bundle = levi_civita_connection(mesh.clone(), 2)?;
    let tetra = ReferencePolyhedron::new(PolyhedronKind::Tetrahedron);
    let config = Configuration::snap(&mesh, &tetra.vertices)?;

    let canonical = canonical_harmonic_section(&bundle, &config, &[])?;
    let limit = renormalized_energy_limit(&bundle, &canonical, &config, 0.5, Extrapolation::SecondOrder)?;

    let cache = GreenCache::new(mesh.clone());
    let psi0 = psi0_and_energy(&bundle)?;
    let w = general_w(&bundle, &config, &[], &DMatrix::zeros(0, 0), &cache, &psi0)?;
    println!("limit  {:.5}", limit.value);
    println!("green  {:.5} (pairs {:.5}, self {:.5})", w.total, w.pair_term, w.self_term);
    println!("relative difference {:.2e}", ((limit.value - w.total) / w.total).abs());
    Ok(())
}
