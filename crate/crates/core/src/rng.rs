//! Seeded random number generation shared by every stochastic routine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;

pub type CcaRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> CcaRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A uniform draw strictly inside (0, 1).
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// Pulls a value into the open unit interval.
pub(crate) fn clamp_open(u: f64) -> f64 {
    const LO: f64 = f64::MIN_POSITIVE;
    const HI: f64 = 1.0 - f64::EPSILON / 2.0;
    u.clamp(LO, HI)
}
