//! Seed derivation for reproducible runs.
//!
//! Every run owns independent named ChaCha streams (ground truth,
//! coordinator draws, reward noise) derived from the run seed with a fixed
//! SplitMix64 key schedule, so results are identical across thread counts
//! and platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SALT_GROUND_TRUTH: u64 = 0x9e37_79b9_7f4a_7c15;
const SALT_COORDINATOR: u64 = 0xbf58_476d_1ce4_e5b9;
const SALT_NOISE: u64 = 0x94d0_49bb_1331_11eb;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a salt into a fresh stream seed.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    splitmix64(splitmix64(base) ^ salt)
}

/// The named random streams used by one simulation run.
#[derive(Debug, Clone)]
pub struct RunRng {
    pub ground_truth: ChaCha8Rng,
    pub coordinator: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

impl RunRng {
    pub fn new(run_seed: u64) -> Self {
        RunRng {
            ground_truth: ChaCha8Rng::seed_from_u64(derive_seed(run_seed, SALT_GROUND_TRUTH)),
            coordinator: ChaCha8Rng::seed_from_u64(derive_seed(run_seed, SALT_COORDINATOR)),
            noise: ChaCha8Rng::seed_from_u64(derive_seed(run_seed, SALT_NOISE)),
        }
    }
}
