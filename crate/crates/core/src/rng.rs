//! Reproducible random streams.
//!
//! Every Monte Carlo consumer draws from a ChaCha stream addressed by
//! `(seed, stream)`, so parallel draws can be replayed independently of
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::DenseMatrix;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a list of labels into one stream id (splitmix64 finalizer).
pub fn stream_id(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

pub fn gaussian_vec<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Matrix with i.i.d. standard normal entries.
pub fn gaussian_matrix<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_vec_unchecked(rows, cols, gaussian_vec(rng, rows * cols))
}
