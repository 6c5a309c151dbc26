//! Minimize the renormalized energy of d points on the unit sphere.

use glvortex::renorm::{optimize_sphere_configuration, OptimizeOptions};
use glvortex::vortex::{configuration_distance, ReferencePolyhedron};

fn main() -> glvortex::Result<()> {
    let opts = OptimizeOptions { seeds: 8, ..OptimizeOptions::default() };
    for d in [4, 6, 12] {
        let result = optimize_sphere_configuration(d, &opts)?;
        let reference = ReferencePolyhedron::for_count(d).expect("platonic count");
        println!(
            "d={d:2}: W = {:.10}, {} at distance {:.2e}",
            result.value,
            reference.name(),
            configuration_distance(&result.best, &reference)?
        );
    }
    Ok(())
}
