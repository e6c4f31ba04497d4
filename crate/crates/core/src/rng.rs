//! Reproducible per-trial random streams.
//!
//! Every trial owns a ChaCha8 stream selected by `(master seed, stream id)`.
//! Draws within a stream are consumed strictly in step order, so the
//! `(seed, stream, step)` triple identifies a draw uniquely and results do
//! not depend on how trials are scheduled across workers.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::real::Real;

/// Stream id reserved for the long reference trajectory of the ergodic estimator.
pub const REFERENCE_STREAM: u64 = u64::MAX;

/// A vector of independent standard normal variates tagged with its origin.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw<T> {
    pub values: Vec<T>,
    pub stream: u64,
    pub step: u64,
}

#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    seed: u64,
    stream: u64,
    step: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            rng,
            seed,
            stream,
            step: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of normal vectors drawn so far.
    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// Fills `out` with standard normals and advances the step counter.
    #[inline]
    pub fn fill_normals<T: Real>(&mut self, out: &mut [T]) {
        for v in out.iter_mut() {
            let z: f64 = self.rng.sample(StandardNormal);
            *v = T::lit(z);
        }
        self.step += 1;
    }

    pub fn draw<T: Real>(&mut self, dim: usize) -> NoiseDraw<T> {
        let step = self.step;
        let mut values = vec![T::zero(); dim];
        self.fill_normals(&mut values);
        NoiseDraw {
            values,
            stream: self.stream,
            step,
        }
    }

    /// Uniform variate on `[0, 1)`.
    #[inline]
    pub fn uniform<T: Real>(&mut self) -> T {
        T::lit(self.rng.random::<f64>())
    }

    #[inline]
    pub fn bernoulli<T: Real>(&mut self, p: T) -> bool {
        p > T::zero() && self.uniform::<T>() < p
    }

    #[inline]
    pub fn normal<T: Real>(&mut self) -> T {
        T::lit(self.rng.sample::<f64, _>(StandardNormal))
    }
}
