//! Deterministic random streams.
//!
//! A [`RngStream`] is a ChaCha8 generator addressed by `(seed, stream_id)`.
//! Child streams are derived by hashing the parent id with an index, so a
//! tree of independent streams can be handed out to threads without any
//! shared state.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
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

    /// Fresh stream derived from this stream's address and `index`.
    ///
    /// The result depends only on `(seed, stream_id, index)`, never on how
    /// many values were already drawn from `self`.
    pub fn substream(&self, index: u64) -> RngStream {
        Self::with_stream(self.seed, mix(self.stream_id, index))
    }

    /// Shorthand for nested derivation, `substream(a).substream(b)...`.
    pub fn substream_path(&self, path: &[u64]) -> RngStream {
        path.iter().fold(self.clone(), |s, &i| s.substream(i))
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

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(index).rotate_left(17))
}
