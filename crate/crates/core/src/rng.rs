//! Seeded random streams.
//!
//! Every stream in the crate is a [`ChaCha8Rng`]; a seed fully determines its
//! output across platforms. Gaussian variates come from
//! [`rand_distr::StandardNormal`] (ziggurat), uniforms from `Rng::random::<f64>()`
//! on `[0, 1)`.
//!
//! Independent per-trial streams are derived with [`stream_seed`], a
//! splitmix64 chain over `(base_seed, trial_index, tag)`:
//!
//! ```text
//! h = splitmix64(tag)
//! h = splitmix64(h ^ trial_index)
//! h = splitmix64(h ^ base_seed)
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// Tags for the independent streams a trial consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    Data = 0x4441_5441,
    Prior = 0x5052_494f,
    Selection = 0x5345_4c43,
    GradInit = 0x4752_4144,
    Perturbation = 0x5045_5254,
}

/// The splitmix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn stream_seed(base_seed: u64, trial_index: u64, tag: StreamTag) -> u64 {
    let h = splitmix64(tag as u64);
    let h = splitmix64(h ^ trial_index);
    splitmix64(h ^ base_seed)
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

pub fn fill_std_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = std_normal(rng);
    }
}

/// Inverse-CDF categorical draw for a given uniform `u ∈ [0, 1)`.
///
/// Returns the first index whose cumulative weight exceeds `u`. Rounding can
/// leave the cumulative sum just under `u`; the last index with positive
/// weight is returned in that case so zero-weight entries are never chosen.
pub fn categorical_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .unwrap_or(weights.len().saturating_sub(1))
}

pub fn categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    categorical_index(weights, uniform(rng))
}
