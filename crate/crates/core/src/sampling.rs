//! Seeded sampling helpers shared by the Monte-Carlo routines.
//!
//! Every batch operation derives one independent stream per trial from a
//! master seed with [`derive_seed`]: `seed_i = splitmix64(master ^ splitmix64(i + 1))`.
//! Trial `i` therefore sees the same stream regardless of how many workers
//! run the batch or in which order trials finish.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, counter: u64) -> u64 {
    splitmix64(master ^ splitmix64(counter.wrapping_add(1)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform sample from the closed Euclidean ball `B_r(center)`.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, center: &[f64], r: f64) -> Vec<f64> {
    let d = center.len();
    let dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let u: f64 = rng.random();
    let radius = r * u.powf(1.0 / d as f64);
    if norm == 0.0 {
        return center.to_vec();
    }
    center
        .iter()
        .zip(&dir)
        .map(|(c, v)| c + radius * v / norm)
        .collect()
}
