//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed and selected by a
//! 64-bit stream id. The pair `(seed, stream_id)` fully determines the sequence,
//! so independent streams can be handed to worker threads without sharing state.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Identity of the generator backing [`RandomStream`]; echoed in reports.
pub const RNG_IDENTITY: &str = "chacha8/seed_from_u64+stream";

/// Domain tags used to derive sub-seeds for independent purposes.
pub mod domain {
    pub const ASSORTMENT: u64 = 0x6173_736f_7274;
    pub const SALES: u64 = 0x73_616c_6573;
    pub const PERMUTATION: u64 = 0x7065_726d;
    pub const BOOTSTRAP: u64 = 0x626f_6f74;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a seed for a named purpose from a base seed.
pub fn derive_seed(seed: u64, domain: u64) -> u64 {
    mix64(mix64(seed) ^ domain)
}

/// A single-owner deterministic random stream.
#[derive(Clone, Debug)]
pub struct RandomStream {
    inner: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        RandomStream { inner }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Uniform draw in the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        loop {
            let u = (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u > 0.0 {
                return u;
            }
        }
    }
}

impl RngCore for RandomStream {
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
