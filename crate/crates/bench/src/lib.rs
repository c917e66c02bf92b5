//! Shared fixtures for the benchmarks.

use unlearn_core::numkit::gaussian_sample;
use unlearn_core::{DataPoint, Dataset, ParamVector, RngHandle};

/// `n` standard normal vectors of dimension `d`.
pub fn gradients(n: usize, d: usize, seed: u64) -> Vec<ParamVector> {
    let mut rng = RngHandle::new(seed, 0);
    (0..n).map(|_| gaussian_sample(&mut rng, d, 1.0).unwrap()).collect()
}

/// Noisy linear regression data with `x ~ N(0, I/d)`.
pub fn regression(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = RngHandle::new(seed, 0);
    let truth = gaussian_sample(&mut rng, d, 1.0).unwrap();
    let points = (0..n)
        .map(|_| {
            let x = gaussian_sample(&mut rng, d, 1.0 / d as f64).unwrap();
            let y = x.dot(&truth) + 0.1 * rng.standard_normal();
            DataPoint::Regression { x, y }
        })
        .collect();
    Dataset::new(points).unwrap()
}
