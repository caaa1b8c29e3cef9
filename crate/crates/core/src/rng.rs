//! Seedable random streams.
//!
//! Every sampler in the crate draws from an [`RngStream`]. A stream is a
//! ChaCha8 generator keyed by a 64-bit seed and a 64-bit stream id; streams
//! with the same seed but different ids use disjoint keystreams, so child
//! streams handed to worker threads never share state with their parent.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;

/// Observation count above which per-observation draws are spread over the rayon pool.
const PARALLEL_MIN_OBS: usize = 32;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Child stream identified by `id`. Derivation is a pure function of
    /// `(seed, parent stream id, id)` and does not advance `self`.
    pub fn substream(&self, id: u64) -> RngStream {
        let key = splitmix64(self.stream ^ splitmix64(id.wrapping_add(1)).rotate_left(17));
        RngStream::with_stream(self.seed, key)
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

/// Evaluate `draw(i, stream_i)` for `i in 0..n`, where each `stream_i` is a child of
/// one key taken from `rng`. The output does not depend on how the work is scheduled.
pub(crate) fn per_observation<T, F>(n: usize, rng: &mut RngStream, draw: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut RngStream) -> Result<T> + Sync,
{
    let base = RngStream::with_stream(rng.seed(), rng.next_u64());
    let one = |i: usize| draw(i, &mut base.substream(i as u64));
    if n >= PARALLEL_MIN_OBS {
        (0..n).into_par_iter().map(one).collect()
    } else {
        (0..n).map(one).collect()
    }
}
