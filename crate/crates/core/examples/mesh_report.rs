//! Build an icosphere and a torus and print their discrete geometry.

use glvortex::{build_icosphere, build_torus, Result};

fn main() -> Result<()> {
    let sphere = build_icosphere(3)?;
    let torus = build_torus(2.0, 0.7, 32, 16)?;
    for (name, m) in [("icosphere(3)", &sphere), ("torus(2, 0.7)", &torus)] {
        let defect: f64 = m.angle_defects().iter().sum();
        println!(
            "{name}: V={} E={} F={} genus {} area {:.6} mean edge {:.4} total defect / 2pi {:.12}",
            m.num_vertices(),
            m.num_edges(),
            m.num_faces(),
            m.genus(),
            m.total_area(),
            m.mean_edge_length(),
            defect / (2.0 * std::f64::consts::PI),
        );
    }
    Ok(())
}
