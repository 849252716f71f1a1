//! Seeded randomness shared by every module.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Mat;
use crate::tensor::Tensor3;

/// The generator used everywhere. ChaCha12 is counter-based, so a `u64`
/// seed fixes every draw for a given build.
pub type TrialRng = ChaCha12Rng;

pub fn rng_from_seed(seed: u64) -> TrialRng {
    TrialRng::seed_from_u64(seed)
}

pub fn normal_vec<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn normal_mat<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat { rows, cols, data: normal_vec(rng, rows * cols) }
}

pub fn normal_tensor<R: rand::Rng + ?Sized>(rng: &mut R, dims: [usize; 3]) -> Tensor3 {
    Tensor3 { dims, data: normal_vec(rng, dims.iter().product()) }
}

/// Uniform draw from the unit Frobenius sphere.
pub fn unit_sphere_tensor<R: rand::Rng + ?Sized>(rng: &mut R, dims: [usize; 3]) -> Tensor3 {
    loop {
        let t = normal_tensor(rng, dims);
        let n = t.fro_norm();
        if n > 0.0 {
            return t.scale(1.0 / n);
        }
    }
}
