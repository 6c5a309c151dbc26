//! Discrete Levi-Civita connections on the tensor bundles and their
//! Euler numbers from total curvature.

use std::sync::Arc;

use glvortex::connection::levi_civita_connection;
use glvortex::{build_icosphere, build_torus};

fn main() -> glvortex::Result<()> {
    let meshes = [
        ("icosphere(2)", Arc::new(build_icosphere(2)?)),
        ("torus", Arc::new(build_torus(2.0, 0.7, 24, 12)?)),
    ];
    for (name, mesh) in meshes {
        for k in 1..=4 {
            let bundle = levi_civita_connection(mesh.clone(), k)?;
            println!(
                "{name} k={k}: total curvature / 2pi = {:+.12}, euler number {}",
                bundle.total_curvature() / (2.0 * std::f64::consts::PI),
                bundle.euler_number()
            );
        }
    }
    Ok(())
}
