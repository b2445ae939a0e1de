//! Seeded randomness.
//!
//! Every random draw in a run comes from a ChaCha stream whose seed is derived
//! from the master seed, a [`StreamTag`] and a short list of indices (client,
//! round, ...). Streams with different tags never share state, so e.g. changing
//! the number of clients leaves the adversary's draws untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type Rng = ChaCha12Rng;

/// Disjoint sub-streams of a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamTag {
    /// Loss-stream construction and per-(client, round) loss draws.
    Adversary,
    /// Laplace noise added by a client before communicating.
    ClientNoise,
    /// Batch sampling inside DP-FW.
    ClientBatch,
    /// Server-side mechanism noise (central DP, AboveThreshold, exponential sampling).
    Server,
    /// Anything else a caller wants isolated (tests, examples).
    Custom(u64),
}

impl StreamTag {
    fn code(self) -> u64 {
        match self {
            StreamTag::Adversary => 0x0a,
            StreamTag::ClientNoise => 0x0b,
            StreamTag::ClientBatch => 0x0c,
            StreamTag::Server => 0x0d,
            StreamTag::Custom(c) => 0x1000_0000_0000_0000 ^ c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSource {
    master: u64,
}

impl RandomSource {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master: master_seed,
        }
    }

    /// Source for trial `trial` of an experiment seeded with `base`: the master
    /// seed is `base + trial`.
    pub fn for_trial(base: u64, trial: u64) -> Self {
        Self::new(base.wrapping_add(trial))
    }

    pub fn master_seed(&self) -> u64 {
        self.master
    }

    /// Derived seed for `(tag, indices...)`.
    pub fn derive_seed(&self, tag: StreamTag, indices: &[u64]) -> u64 {
        let mut h = splitmix64(self.master ^ 0x5eed_0ffe_d00e_5e00);
        h = splitmix64(h ^ tag.code());
        for &i in indices {
            h = splitmix64(h ^ splitmix64(i.wrapping_add(0x9e37_79b9)));
        }
        h
    }

    pub fn stream(&self, tag: StreamTag, indices: &[u64]) -> Rng {
        Rng::seed_from_u64(self.derive_seed(tag, indices))
    }

    /// Per-client stream: `seed(trial, client, tag)`.
    pub fn client_stream(&self, client: usize, tag: StreamTag) -> Rng {
        self.stream(tag, &[client as u64])
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
