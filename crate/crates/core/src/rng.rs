//! Deterministic random substreams.
//!
//! Every stochastic stage draws from a ChaCha8 generator seeded with
//! `derive_seed(root, label, index)`: the label is hashed with 64-bit
//! FNV-1a, combined with the root seed and the index, and passed through
//! two SplitMix64 finalizer rounds. The same (root, label, index) always
//! yields the same stream, independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(root ^ fnv1a(label)).wrapping_add(index))
}

pub fn substream(root: u64, label: &str, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(root, label, index))
}
