//! Seed splitting and random matrix generators.
//!
//! Every stream is derived from a master seed by [`mix_seed`], so a draw is a
//! pure function of `(seed, stream index)` and never of scheduling order.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matcore::{CMat, RMat, RealSym};

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `stream` of `seed`.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(stream.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Generator for lattice site `n` under `seed`.
pub fn site_rng(seed: u64, n: i64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, n as u64))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, stream))
}

pub fn gaussian_rmat<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> RMat {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_cmat<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    DMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// `scale · (G + Gᵀ)/2` for Gaussian `G`.
pub fn gaussian_sym<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> RealSym {
    RealSym::symmetrize(gaussian_rmat(n, n, rng) * scale)
}
