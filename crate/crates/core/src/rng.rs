//! Reproducible randomness: every run derives its generator from one 64-bit
//! seed and a stream index, so parallel multi-seed runs do not depend on
//! scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for `stream` under the base `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Point uniformly distributed in the unit disk.
pub fn unit_disk(rng: &mut impl Rng) -> (f64, f64) {
    let r = rng.random::<f64>().sqrt();
    let t = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    (r * t.cos(), r * t.sin())
}

/// Point uniformly distributed on the unit sphere.
pub fn unit_sphere(rng: &mut impl Rng) -> [f64; 3] {
    let z: f64 = rng.random_range(-1.0..1.0);
    let t = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    let s = (1.0 - z * z).sqrt();
    [s * t.cos(), s * t.sin(), z]
}
