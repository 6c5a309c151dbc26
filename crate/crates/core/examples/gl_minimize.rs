//! Minimize the Ginzburg-Landau energy for rank-2 sections on a sphere and
//! compare the vortices with the regular tetrahedron.

use std::sync::Arc;

use glvortex::connection::levi_civita_connection;
use glvortex::gl::{minimize, GLParams, Init};
use glvortex::vortex::{configuration_distance, detect_vortices, PolyhedronKind, ReferencePolyhedron};
use glvortex::build_icosphere;

fn main() -> glvortex::Result<()> {
    let mesh = Arc::new(build_icosphere(4)?);
    let bundle = levi_civita_connection(mesh.clone(), 2)?;
    let h = mesh.mean_edge_length();
    let mut params = GLParams::with_default_schedule(&mesh, 3.0 * h);
    params.max_iters = 1000;

    let (u, report) = minimize(&bundle, &params, Init::Random, 0)?;
    for s in &report.stages {
        println!("eps {:.4}: {} iterations, energy {:.6}", s.epsilon, s.iterations, s.energy);
    }
    let vortices = detect_vortices(&bundle, &u)?;
    let points: Vec<_> = vortices.positions().iter().map(|p| p.normalize()).collect();
    println!("{} vortices, total degree {}", vortices.len(), vortices.total_degree);
    if points.len() == 4 {
        let tetra = ReferencePolyhedron::new(PolyhedronKind::Tetrahedron);
        println!("distance to tetrahedron {:.2e} rad (2h = {:.4})", configuration_distance(&points, &tetra)?, 2.0 * h);
    }
    Ok(())
}
