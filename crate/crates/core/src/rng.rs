//! Counter-based, splittable random streams.
//!
//! Every replica of a simulation owns one [`RandomStream`], addressed by a
//! master seed and a 64-bit stream id. Streams are ChaCha8 keystreams, so
//! two streams with distinct ids never overlap and results do not depend on
//! the order in which replicas are scheduled.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Debug)]
pub struct RandomStream {
    inner: ChaCha8Rng,
}

impl RandomStream {
    /// Stream `id` under master seed `seed`.
    pub fn new(seed: u64, id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(id);
        Self { inner }
    }

    /// Derive an independent child stream keyed by `(self's seed material, label)`.
    ///
    /// Used when one replica needs several logically separate sub-streams.
    pub fn split(&mut self, label: u64) -> Self {
        let seed = self.inner.next_u64() ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        Self::new(seed, label)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform index in `0..n`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Fill `perm` with a uniformly random permutation of `0..perm.len()`.
    pub fn permutation(&mut self, perm: &mut [usize]) {
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        perm.shuffle(&mut self.inner);
    }
}
