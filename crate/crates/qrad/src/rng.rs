//! Seed derivation for reproducible, schedule-independent random streams.
//!
//! Every random draw in this crate is a pure function of `(seed, domain,
//! index pair)`. Streams are ChaCha8 counters: the 64-bit user seed is
//! expanded to a 256-bit key (SplitMix64, via `seed_from_u64`), and the
//! ChaCha stream id carries a packed `(domain, a, b)` triple. Workers pull
//! from disjoint streams, so thread count and scheduling never change the
//! numbers drawn.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Purpose tag baked into the stream id so that unrelated draws
/// (trial data vs. theta candidates vs. SPSA steps) never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    /// Per-trial draws of the estimator: inputs x, signs sigma, and the
    /// circuit model when resampling per trial.
    Trial = 1,
    /// Per-candidate theta draws inside a trial.
    Theta = 2,
    /// Teacher model, teacher parameters, and training inputs.
    Dataset = 3,
    /// Held-out test inputs.
    TestSet = 4,
    /// SPSA initial parameter vector.
    SpsaInit = 5,
    /// SPSA per-epoch perturbation signs.
    SpsaStep = 6,
    /// Gradient-bound certification samples.
    Certify = 7,
    /// Standalone model sampling (CLI, tests).
    Model = 8,
}

const A_BITS: u32 = 24;
const B_BITS: u32 = 32;

/// Open the ChaCha8 stream identified by `(seed, domain, a, b)`.
///
/// `a` is typically a trial index (< 2^24) and `b` a within-trial
/// candidate index (< 2^32).
pub fn stream(seed: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    assert!(a < (1 << A_BITS), "stream index a out of range: {a}");
    assert!(b < (1u64 << B_BITS), "stream index b out of range: {b}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << (A_BITS + B_BITS)) | (a << B_BITS) | b);
    rng
}

/// Derive a child seed from a parent seed and a word path (SplitMix64 mix).
///
/// Used to give nested experiment cells (e.g. one per `(L, M, repeat)`)
/// their own full stream space.
pub fn derive_seed(seed: u64, words: &[u64]) -> u64 {
    let mut state = seed;
    let mut out = splitmix64(&mut state);
    for &w in words {
        state ^= w.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        out ^= splitmix64(&mut state);
    }
    out
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw from `[lo, hi)`.
pub fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + u * (hi - lo)
}

/// Rademacher sign: +1 or -1 with equal probability.
pub fn sign(rng: &mut impl RngCore) -> f64 {
    let u: f64 = rng.random();
    if u < 0.5 {
        1.0
    } else {
        -1.0
    }
}
