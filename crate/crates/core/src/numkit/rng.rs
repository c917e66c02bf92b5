use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use super::ParamVector;
use crate::error::{invalid, Result};

/// A seeded random stream identified by `(seed, stream_id)`.
///
/// Streams that share a seed but differ in `stream_id` are disjoint ChaCha
/// keystreams. Output is reproducible within this implementation only.
#[derive(Debug, Clone)]
pub struct RngHandle {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RngHandle {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngHandle { seed, stream_id, rng }
    }

    /// A fresh handle on the same seed with a different stream.
    pub fn derive(&self, stream_id: u64) -> RngHandle {
        RngHandle::new(self.seed, stream_id)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// `k` distinct indices from `0..n`, sorted ascending.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut picked = index::sample(&mut self.rng, n, k).into_vec();
        picked.sort_unstable();
        picked
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }
}

/// `d` i.i.d. draws from N(0, variance).
pub fn gaussian_sample(rng: &mut RngHandle, d: usize, variance: f64) -> Result<ParamVector> {
    if d == 0 {
        return invalid("dimension must be >= 1");
    }
    if !(variance > 0.0) || !variance.is_finite() {
        return invalid(format!("variance must be positive and finite, got {variance}"));
    }
    let std = variance.sqrt();
    let values = (0..d).map(|_| std * rng.standard_normal()).collect();
    Ok(ParamVector::from_vec_unchecked(values))
}
