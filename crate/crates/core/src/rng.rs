//! Deterministic random streams.
//!
//! Every sampling trial owns a stream derived from the base seed, the
//! iteration, the stage and the trial index, so results do not depend on how
//! trials are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Scale = 1,
    Recovery = 2,
    Synthesis = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for trial `index` of `stage` during `iteration`.
pub fn trial_rng(seed: u64, iteration: u64, stage: Stage, index: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(seed ^ splitmix64(iteration)) ^ stage as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
