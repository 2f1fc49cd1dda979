//! Counter-based random streams derived from a master seed.
//!
//! Every task draws from its own ChaCha stream, addressed by a [`StreamId`]
//! hashed from the task kind and its indices, so results never depend on the
//! order in which workers pick up tasks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl StreamId {
    pub fn derive(kind: &str, indices: &[u64]) -> Self {
        let mut h = 0xCBF2_9CE4_8422_2325u64;
        for b in kind.bytes() {
            h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3);
        }
        h = splitmix64(h);
        for &i in indices {
            h = splitmix64(h ^ splitmix64(i));
        }
        StreamId(h)
    }
}

pub fn stream_rng(master_seed: u64, stream: StreamId) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream.0);
    rng
}

/// Serializable position of a stream, sufficient to resume it exactly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngPosition {
    pub master_seed: u64,
    pub stream: StreamId,
    /// Word position as a decimal string (u128 does not survive every JSON reader).
    pub word_pos: String,
}

impl RngPosition {
    pub fn capture(master_seed: u64, rng: &StreamRng) -> Self {
        RngPosition {
            master_seed,
            stream: StreamId(rng.get_stream()),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Option<StreamRng> {
        let pos: u128 = self.word_pos.parse().ok()?;
        let mut rng = stream_rng(self.master_seed, self.stream);
        rng.set_word_pos(pos);
        Some(rng)
    }
}
