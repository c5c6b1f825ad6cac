//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, domain, a, b, c)`: the first four words
//! form a ChaCha key and `c` selects the stream. Streams with distinct
//! addresses are independent, and a draw does not depend on which worker
//! makes it or in what order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent purposes that consume randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    MisPriority = 1,
    ShrinkCoin = 2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyedRng {
    seed: u64,
}

impl KeyedRng {
    pub fn new(seed: u64) -> Self {
        KeyedRng { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, domain: Domain, a: u64, b: u64, c: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
        key[16..24].copy_from_slice(&a.to_le_bytes());
        key[24..].copy_from_slice(&b.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(c);
        rng
    }
}
