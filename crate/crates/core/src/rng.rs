//! Seed derivation. Every random stream in a run is a `ChaCha8Rng` whose seed
//! is derived from the master seed plus a stream tag and an index, so streams
//! never depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags used when deriving child seeds.
pub mod stream {
    pub const POPULATION_INIT: u64 = 1;
    pub const AGENT: u64 = 2;
    pub const EVOLUTION: u64 = 3;
    pub const EDRL_EVAL: u64 = 4;
    pub const DRL_EPISODE: u64 = 5;
    pub const EVAL_ONLY: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream.wrapping_mul(0xA24B_AED4_963E_E407)) ^ index)
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_rng(master: u64, stream: u64, index: u64) -> SimRng {
    rng_from_seed(derive_seed(master, stream, index))
}
