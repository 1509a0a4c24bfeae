//! Labeled sub-seeding so that every RNG stream is derived from one master
//! seed and is independent of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Derive a child seed from `master` and a label.
pub fn sub_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
}

/// Derive a child seed from `master`, a label and an index.
pub fn indexed_seed(master: u64, label: &str, index: u64) -> u64 {
    sub_seed(master.wrapping_add(index), label)
}

pub fn rng(master: u64, label: &str) -> Rng {
    Rng::seed_from_u64(sub_seed(master, label))
}

/// Generator for an already derived seed.
pub fn rng_from(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
