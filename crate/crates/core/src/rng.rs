//! Seed derivation.
//!
//! Every random consumer gets its own ChaCha stream keyed by
//! `(master seed, purpose, index)`, so trials can run in any order or in
//! parallel and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(purpose: &str) -> u64 {
    purpose.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Derives a sub-seed for `purpose` and `index` from a master seed.
pub fn derive_seed(master: u64, purpose: &str, index: u64) -> u64 {
    let h = splitmix64(master ^ splitmix64(fnv1a(purpose)));
    splitmix64(h ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Random stream for `(master, purpose, index)`.
pub fn stream(master: u64, purpose: &str, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(master, purpose, index))
}
