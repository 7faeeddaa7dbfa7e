//! Named random sub-streams derived from a single run seed.
//!
//! Every consumer of randomness (table initialization, each training worker,
//! dataset splitting) draws from its own ChaCha stream, so changing how one
//! consumer uses randomness never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const INIT: &str = "init";
pub const SPLIT: &str = "split";

/// Stream name for training worker `index`.
pub fn worker(index: usize) -> String {
    format!("train/worker/{index}")
}

/// Returns the generator for sub-stream `name` of `seed`.
pub fn substream(seed: u64, name: &str) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name.as_bytes()));
    rng
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
