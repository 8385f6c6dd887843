//! Sub-seed derivation. Every random decision in the pipeline (fold
//! shuffling, network init, batch order, synthetic data) draws from the one
//! user-facing seed through a named stream so that adding a consumer never
//! perturbs the others.

use sha2::{Digest, Sha256};

/// Derives a stable 64-bit sub-seed from a master seed and a stream name.
pub fn sub_seed(master: u64, name: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
