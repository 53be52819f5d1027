//! Named, independent random streams derived from a run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Mixes a seed with a label into a new 64-bit seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Deterministic RNG for one concern (`"batch"`, `"augment"`, `"retrieve"`, ...).
pub fn substream(seed: u64, label: &str) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}
