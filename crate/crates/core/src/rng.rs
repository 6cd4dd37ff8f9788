//! Seeded, splittable random streams.
//!
//! Every stochastic routine takes an explicit seed. Independent consumers
//! draw from distinct ChaCha streams of the same seed so that adding a
//! consumer never perturbs another one's draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{Matrix, Vector};

pub type IsoRng = ChaCha8Rng;

/// Stream `stream` of the generator seeded with `seed`.
pub fn seeded(seed: u64, stream: u64) -> IsoRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_vector(rng: &mut impl Rng, len: usize, std: f64) -> Vector {
    Vector::from_fn(len, |_| std * gaussian(rng))
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize, std: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| std * gaussian(rng))
}
