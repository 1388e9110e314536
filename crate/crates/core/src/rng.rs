//! Seedable, splittable random streams.
//!
//! A stream is identified by `(seed, stream_id)`. Replicate `k` of an
//! experiment always uses `stream_id = k`, so results do not depend on how
//! replicates are scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent stream for a named purpose (e.g. one Monte Carlo estimator)
    /// derived from this stream's identity, not its current position.
    pub fn fork(&self, purpose: u64) -> RngStream {
        RngStream::new(mix(self.seed ^ mix(self.stream_id)), purpose)
    }

    /// Stream for chunk/replicate `index` under purpose `purpose`.
    pub fn substream(&self, purpose: u64, index: u64) -> RngStream {
        RngStream::new(mix(self.seed ^ mix(self.stream_id ^ mix(purpose))), index)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
