//! Seed derivation and Gaussian sampling.
//!
//! Every random draw in a session comes from a ChaCha8 generator keyed by the
//! 64-bit master seed, with the 64-bit stream id `block * 4 + purpose`.  Two
//! different (block, purpose) pairs therefore never share a keystream, and the
//! output for a block does not depend on which thread runs it.
//!
//! Gaussians are drawn with `rand_distr::StandardNormal` (ziggurat) in `f64`
//! and then rounded to the working precision, so `f32` and `f64` runs see the
//! same underlying samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Real;

/// What a stream is used for within a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Channel = 0,
    Codebook = 1,
    Seed = 2,
    Score = 3,
}

/// Generator for one (block, purpose) pair.
pub fn stream(master: u64, block: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(block.wrapping_mul(4).wrapping_add(purpose as u64));
    rng
}

/// One standard normal draw at precision `R`.
#[inline]
pub fn std_normal<R: Real, G: rand::Rng + ?Sized>(rng: &mut G) -> R {
    let z: f64 = StandardNormal.sample(rng);
    R::cst(z)
}

/// Fills `out` with `N(0, var)` draws.
pub fn fill_normal<R: Real, G: rand::Rng + ?Sized>(rng: &mut G, var: R, out: &mut [R]) {
    let sd = var.sqrt();
    for v in out {
        *v = std_normal::<R, _>(rng) * sd;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = stream(7, 3, Purpose::Channel).random();
        let b: u64 = stream(7, 3, Purpose::Channel).random();
        let c: u64 = stream(7, 3, Purpose::Codebook).random();
        let d: u64 = stream(7, 4, Purpose::Channel).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn f32_and_f64_share_samples() {
        let x: f64 = std_normal(&mut stream(1, 0, Purpose::Score));
        let y: f32 = std_normal(&mut stream(1, 0, Purpose::Score));
        assert_eq!(x as f32, y);
    }
}
