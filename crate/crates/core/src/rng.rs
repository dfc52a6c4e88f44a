//! Seeded random streams.
//!
//! Every stochastic step draws from its own ChaCha stream derived from the
//! run seed, so adding draws in one place (say, dropout) never shifts the
//! numbers seen by another (say, weight initialisation).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::Matrix;

pub type HerbRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Dropout,
    Split,
    NegativeSampling,
    StructureEncoder,
    FeatureEncoder,
    Synthetic,
    Custom(u64),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Dropout => 2,
            Stream::Split => 3,
            Stream::NegativeSampling => 4,
            Stream::StructureEncoder => 5,
            Stream::FeatureEncoder => 6,
            Stream::Synthetic => 7,
            Stream::Custom(k) => 1024 + k,
        }
    }
}

pub fn seeded(seed: u64, stream: Stream) -> HerbRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Glorot/Xavier uniform initialisation: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut HerbRng) -> Matrix {
    let bound = (6.0 / (rows + cols).max(1) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
}

pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut HerbRng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi))
}

/// Fisher-Yates shuffle of `0..n`.
pub fn permutation(n: usize, rng: &mut HerbRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
