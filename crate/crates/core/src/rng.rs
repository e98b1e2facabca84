//! Stream-keyed random number generation.
//!
//! Every random draw in an experiment comes from a generator keyed by
//! `(master seed, scenario, trial, stream tag)`, so the values a trial sees
//! do not depend on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

/// Named random streams within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Target = 1,
    Design = 2,
    Noise = 3,
    Auxiliary = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub scenario: u64,
    pub trial: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, scenario: u64, trial: u64) -> Self {
        Self { master_seed, scenario, trial }
    }

    /// Derives the 64-bit seed for one stream of this key.
    pub fn seed(&self, stream: Stream) -> u64 {
        let mut h = splitmix(self.master_seed);
        h = splitmix(h ^ self.scenario);
        h = splitmix(h ^ self.trial);
        splitmix(h ^ stream as u64)
    }

    pub fn rng(&self, stream: Stream) -> TrialRng {
        ChaCha8Rng::seed_from_u64(self.seed(stream))
    }
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
