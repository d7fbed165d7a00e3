//! Counter-based random streams.
//!
//! A stream is identified by `(master seed, label, index)`. The label is
//! hashed into the ChaCha key together with the master seed and the index
//! selects the ChaCha stream, so stream `i` never depends on how many other
//! streams were drawn before it or on which thread draws it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Derive the 256-bit key for a labelled family of streams.
pub fn family_key(master: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    h.finalize().into()
}

/// Stream `index` of the family `(master, label)`.
pub fn stream(master: u64, label: &str, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::from_seed(family_key(master, label));
    rng.set_stream(index);
    rng
}

/// Stream for a (path, component) pair.
pub fn path_stream(master: u64, label: &str, path: usize, component: usize) -> StreamRng {
    stream(master, label, ((path as u64) << 16) | component as u64)
}

/// Derive a child seed by labelled hashing.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let key = family_key(master, label);
    u64::from_le_bytes(key[..8].try_into().expect("8 bytes"))
}
