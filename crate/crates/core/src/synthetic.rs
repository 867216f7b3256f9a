//! Sample generators for demonstration models.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::detection::Hypothesis;
use crate::error::Result;
use crate::moments::SampleDataset;
use crate::readout::{simulate_path, ReadoutModel};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `x ~ N(0, 1)` seen through `y₁ = x + n₁`, `y₂ = x/2 + n₂` with
/// `n ~ N(0, 1/4)`.
pub fn gaussian_linear(n: usize, seed: u64) -> Result<SampleDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, 1);
    let mut y = DMatrix::zeros(n, 2);
    for i in 0..n {
        let v = normal(&mut rng);
        x[(i, 0)] = v;
        y[(i, 0)] = v + 0.5 * normal(&mut rng);
        y[(i, 1)] = 0.5 * v + 0.5 * normal(&mut rng);
    }
    SampleDataset::new(x, y)
}

/// `x = y² − 1` with `y ~ N(0, 1)`.
pub fn square_law(n: usize, seed: u64) -> Result<SampleDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = DMatrix::from_fn(n, 1, |_, _| normal(&mut rng));
    let x = y.map(|v| v * v - 1.0);
    SampleDataset::new(x, y)
}

/// Final value of a decaying two-level path sampled in white noise at
/// `samples` points spaced `0.25·T₁`, with amplitude 2.
pub fn telegraph_noise(n: usize, samples: usize, seed: u64) -> Result<SampleDataset> {
    let dt = 0.25;
    let model = ReadoutModel::new(1.0, 2.0, dt, dt * samples as f64, dt, 0.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, 1);
    let mut y = DMatrix::zeros(n, samples);
    for i in 0..n {
        let path = simulate_path(&model, &mut rng);
        x[(i, 0)] = path[samples - 1] as u8 as f64;
        for (k, &on) in path.iter().enumerate() {
            let signal = if on { model.s() } else { 0.0 };
            y[(i, k)] = signal + model.noise_std() * normal(&mut rng);
        }
    }
    SampleDataset::new(x, y)
}

/// Records of the readout model under one hypothesis, as a dataset whose
/// `x` column is the hypothesis label.
pub fn readout_records(model: &ReadoutModel, hypothesis: Hypothesis, n: usize, seed: u64) -> Result<SampleDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = DMatrix::zeros(n, model.len());
    for i in 0..n {
        let r = crate::readout::simulate_record(model, hypothesis, &mut rng);
        y.row_mut(i).copy_from_slice(&r);
    }
    SampleDataset::new(DMatrix::from_element(n, 1, hypothesis.index() as f64), y)
}
