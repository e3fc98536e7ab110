//! Deterministic RNG streams for parallel Monte-Carlo work.
//!
//! Replicate `i` of a job seeded with `s` always draws from
//! `stream_rng(s, i)`, so results are independent of how replicates are
//! scheduled across threads. Nested jobs derive their own seeds with
//! [`mix_seed`] before fanning out again.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mixes `salt` into `seed` (splitmix64 finalizer), for deriving the seed of
/// a sub-job from a parent seed and a stable label.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent ChaCha stream `stream` of the generator seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard Exponential draw by inverse CDF.
///
/// Uses one uniform per draw so that samplers of different families driven
/// by the same stream stay in lockstep (the Weibull sampler at shape 1
/// reproduces the Exponential sampler exactly).
pub fn std_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // random::<f64>() is in [0, 1); 1 - u is in (0, 1], so ln() is finite.
    // The floor keeps the draw strictly positive even at u = 0, which
    // downstream log-domain fits rely on.
    (-(1.0 - rng.random::<f64>()).ln()).max(f64::MIN_POSITIVE)
}
