//! Path-derived random streams.
//!
//! A stream is identified by a root seed and an ordered path of labels
//! (experiment name, replication index, agent index, purpose). The key of
//! a ChaCha generator is a pure function of that identity, so any
//! replication can be regenerated in isolation and in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NAME_TAG: u64 = 0x6e61_6d65_6c61_6265;
const INDEX_TAG: u64 = 0x696e_6465_7869_6478;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    path: Vec<u64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            path: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Substream labelled by a name, e.g. `"rivals"` or `"data"`.
    pub fn named(&self, name: &str) -> Self {
        self.push(fnv1a(name.as_bytes()) ^ NAME_TAG)
    }

    /// Substream labelled by an index, e.g. a replication or agent number.
    pub fn index(&self, i: u64) -> Self {
        self.push(splitmix64(i ^ INDEX_TAG))
    }

    fn push(&self, word: u64) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(word);
        Self {
            seed: self.seed,
            path,
        }
    }

    pub fn key(&self) -> [u8; 32] {
        let mut state = splitmix64(self.seed);
        for &word in &self.path {
            state = splitmix64(state ^ splitmix64(word.wrapping_add(state.rotate_left(17))));
        }
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        key
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.key())
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
