//! Seeded random streams and the few distributions the engines draw from.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::Scalar;

/// Counter-based generator used for every run, episode and training job.
pub type Rng = ChaCha8Rng;

/// Independent stream `stream` derived from a single experiment seed.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal draw. Sampled in f64 so every scalar type sees the same stream.
#[inline]
pub fn normal<S: Scalar, R: rand::Rng + ?Sized>(rng: &mut R) -> S {
    S::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Uniform draw on `[lo, hi)`.
#[inline]
pub fn uniform<S: Scalar, R: rand::Rng + ?Sized>(rng: &mut R, lo: S, hi: S) -> S {
    let u = S::lit(rng.random::<f64>());
    lo + (hi - lo) * u
}

/// Uniform draw on `[0, 1)`.
#[inline]
pub fn unit<S: Scalar, R: rand::Rng + ?Sized>(rng: &mut R) -> S {
    S::lit(rng.random::<f64>())
}
