//! Deterministic seed derivation for independent work cells.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a master
//! seed mixed with a path of integer labels, so results never depend on the
//! order in which workers pick up cells.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `labels` into `master` one at a time.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(master), |acc, &l| {
            splitmix64(acc.wrapping_mul(0x0000_0100_0000_01B3) ^ l)
        })
}

pub fn rng_from(master: u64, labels: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, labels))
}

/// Stream labels, so that e.g. demos and prior fits of one distribution
/// never share a stream.
pub mod stream {
    pub const TASK: u64 = 1;
    pub const DEMOS: u64 = 2;
    pub const PRIOR: u64 = 3;
    pub const AGENT: u64 = 4;
    pub const ENTROPY: u64 = 5;
    pub const DISTRIBUTION: u64 = 6;
    pub const ENV: u64 = 7;
}
