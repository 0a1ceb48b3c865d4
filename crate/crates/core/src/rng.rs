//! Seed derivation. Every random quantity is drawn from its own ChaCha stream
//! keyed by `seed ^ hash(tag)`, so adding a link never shifts the draws of
//! another.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::numerics::ComplexMatrix;

/// Stable 64-bit hash of a link tag (first eight bytes of SHA-256).
pub fn tag_hash(tag: &str) -> u64 {
    let digest = Sha256::digest(tag.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn link_rng(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ tag_hash(tag))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one Monte Carlo trial; depends only on its coordinates, never on
/// execution order.
pub fn trial_seed(base: u64, sweep_index: usize, trial_index: usize) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(sweep_index as u64)) ^ trial_index as u64)
}

/// `rows x cols` iid CN(0, scale^2) entries, filled row by row.
pub fn complex_gaussian_from(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> ComplexMatrix {
    let amp = scale * std::f64::consts::FRAC_1_SQRT_2;
    let data: Vec<Complex64> = (0..rows * cols)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(amp * re, amp * im)
        })
        .collect();
    ComplexMatrix::from_row_slice(rows, cols, &data)
}

/// Convenience wrapper keyed by a bare seed.
pub fn complex_gaussian(rows: usize, cols: usize, scale: f64, seed: u64) -> ComplexMatrix {
    complex_gaussian_from(&mut ChaCha8Rng::seed_from_u64(seed), rows, cols, scale)
}
