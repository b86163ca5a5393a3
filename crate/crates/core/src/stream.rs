//! Deterministic random streams keyed by `(master_seed, sample_id, epoch)`.
//!
//! Every sample in every epoch gets its own ChaCha stream whose 256-bit key is
//! the three identifiers laid out verbatim, so distinct tuples can never share
//! a stream and no state is carried between samples. Companion transforms
//! (flip, resize) read from separate ChaCha stream ids under the same key.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// ChaCha stream id used by the deformation itself (gate, Ω choice, noise).
pub const DEFORM_STREAM: u64 = 0;
/// ChaCha stream id used by the horizontal flip gate.
pub const FLIP_STREAM: u64 = 1;
/// ChaCha stream id used by the random resize scale.
pub const RESIZE_STREAM: u64 = 2;

/// Tag mixed into the last key word so these streams never alias a
/// `ChaCha12Rng::seed_from_u64` stream a caller might create elsewhere.
const KEY_TAG: u64 = 0x4e53_4547_4d45_4e54; // "NSEGMENT"

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub sample_id: u64,
    pub epoch: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, sample_id: u64, epoch: u64) -> Self {
        Self {
            master_seed,
            sample_id,
            epoch,
        }
    }

    fn key_bytes(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.sample_id.to_le_bytes());
        key[16..24].copy_from_slice(&self.epoch.to_le_bytes());
        key[24..32].copy_from_slice(&KEY_TAG.to_le_bytes());
        key
    }

    /// Opens sub-stream `stream_id` at offset zero.
    pub fn stream(&self, stream_id: u64) -> SampleStream {
        let mut rng = ChaCha12Rng::from_seed(self.key_bytes());
        rng.set_stream(stream_id);
        SampleStream { rng }
    }
}

/// Opens the deformation stream for one sample in one epoch.
pub fn derive_stream(master_seed: u64, sample_id: u64, epoch: u64) -> SampleStream {
    StreamKey::new(master_seed, sample_id, epoch).stream(DEFORM_STREAM)
}

/// A seeded stream of uniform draws. Each call to [`SampleStream::uniform`]
/// consumes exactly one 64-bit word.
#[derive(Debug, Clone)]
pub struct SampleStream {
    rng: ChaCha12Rng,
}

impl SampleStream {
    /// A stream not tied to any sample, for tests and one-off tools.
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform index in `0..k` from a single draw. `k` must be non-zero.
    #[inline]
    pub fn index(&mut self, k: usize) -> usize {
        debug_assert!(k > 0);
        let i = (self.uniform() * k as f64) as usize;
        i.min(k - 1)
    }

    /// Number of 32-bit words consumed so far.
    pub fn word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }
}
