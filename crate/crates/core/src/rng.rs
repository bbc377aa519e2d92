//! Seeded random streams.
//!
//! A stream is a ChaCha8 generator keyed by the master seed with the stream id
//! selecting ChaCha's 64-bit stream counter. Streams with different ids never
//! overlap, so replica `b` always sees the same draws whether replicas run
//! serially or on a worker pool.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream id reserved for prior elicitation.
pub const PRIOR_STREAM: u64 = u64::MAX;
/// Stream id reserved for baseline K-means runs.
pub const BASELINE_STREAM: u64 = u64::MAX - 1;
/// Stream id reserved for dataset generation.
pub const GENERATOR_STREAM: u64 = u64::MAX - 2;

#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Derives a child seed from a master seed and a path of coordinates
/// (replication index, method id, ...), using SplitMix64 finalization at each
/// step.
pub fn derive_seed(master_seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(master_seed), |acc, &c| {
        splitmix(acc ^ c.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    })
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
