//! Channel parameters, the protocol operating point and sampling of the
//! matched-quadrature channel `y = sqrt(T) x + noise`.
//!
//! All quantities are in shot-noise units.  Only the quadrature that Alice and
//! Bob both used is simulated; the basis choice has no effect on the
//! reconciliation layer.

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::rng::{self, Purpose};
use crate::scalar::Real;

/// Physical channel and modulation, plus derived variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelParams<R> {
    /// Transmittance in (0, 1].
    pub t: R,
    /// Excess noise power.
    pub xi: R,
    /// Modulation variance of Alice's quadrature.
    pub sigma_x2: R,
    /// Variance of Bob's outcome.
    pub sigma_y2: R,
    /// Conditional variance of Bob's outcome given Alice's symbol.
    pub sigma_ygx2: R,
    /// Signal-to-noise ratio.
    pub eps: R,
}

/// Validates the inputs and computes the derived variances.
pub fn derive_channel<R: Real>(t: R, xi: R, sigma_x2: R) -> Result<ChannelParams<R>> {
    if !(t > R::zero() && t <= R::one()) {
        return Err(invalid("T", format!("transmittance {t} outside (0, 1]")));
    }
    if !(xi >= R::zero()) || !xi.is_finite() {
        return Err(invalid(
            "xi",
            format!("excess noise {xi} must be finite and >= 0"),
        ));
    }
    if !(sigma_x2 > R::zero()) || !sigma_x2.is_finite() {
        return Err(invalid(
            "sigma_x2",
            format!("modulation variance {sigma_x2} must be > 0"),
        ));
    }
    let half = R::cst(0.5);
    let sigma_ygx2 = half + half * t * xi;
    let sigma_y2 = t * sigma_x2 + sigma_ygx2;
    Ok(ChannelParams {
        t,
        xi,
        sigma_x2,
        sigma_y2,
        sigma_ygx2,
        eps: t * sigma_x2 / sigma_ygx2,
    })
}

impl<R: Real> ChannelParams<R> {
    pub fn new(t: R, xi: R, sigma_x2: R) -> Result<Self> {
        derive_channel(t, xi, sigma_x2)
    }

    /// Same channel evaluated at another precision.
    pub fn cast<S: Real>(&self) -> ChannelParams<S> {
        let c = |v: R| S::cst(v.as_f64());
        ChannelParams {
            t: c(self.t),
            xi: c(self.xi),
            sigma_x2: c(self.sigma_x2),
            sigma_y2: c(self.sigma_y2),
            sigma_ygx2: c(self.sigma_ygx2),
            eps: c(self.eps),
        }
    }
}

/// Protocol design point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint<R> {
    /// Codebook size, a power of two.
    pub q: u64,
    pub log2_q: u32,
    /// Capacity offset; the code rate is `(1 + gamma)` times capacity.
    pub gamma: R,
    /// Threshold offset from the mean true score.
    pub delta: R,
    /// Block length, `n_real` rounded to the nearest integer.
    pub n: usize,
    pub n_real: R,
    /// Score threshold.
    pub theta: R,
}

/// `log2 q` if `q` is a power of two no smaller than 2.
pub fn log2_pow2(q: u64) -> Result<u32> {
    if q < 2 || !q.is_power_of_two() {
        return Err(invalid("q", format!("{q} is not a power of two >= 2")));
    }
    Ok(q.trailing_zeros())
}

/// Mean true score `sqrt(2 ln q / (1 + gamma))`, the threshold before the
/// `delta` offset.
pub fn score_offset<R: Real>(q: u64, gamma: R) -> R {
    (R::cst(2.0 * (q as f64).ln()) / (R::one() + gamma)).sqrt()
}

/// Block length and threshold for `(q, gamma, delta)` on the given channel.
///
/// Rejects `gamma <= -1` and block lengths that round to zero.
pub fn derive_operating_point<R: Real>(
    params: &ChannelParams<R>,
    q: u64,
    gamma: R,
    delta: R,
) -> Result<OperatingPoint<R>> {
    let log2_q = log2_pow2(q)?;
    if !(gamma > -R::one()) || !gamma.is_finite() {
        return Err(invalid("gamma", format!("{gamma} must exceed -1")));
    }
    if !delta.is_finite() {
        return Err(invalid("delta", "must be finite"));
    }
    let ln_q = R::cst(log2_q as f64 * std::f64::consts::LN_2);
    let n_real = R::cst(2.0) * ln_q / ((R::one() + gamma) * params.eps.ln_1p());
    let n_round = n_real.round();
    if !(n_round >= R::one()) || !n_round.is_finite() || n_round.as_f64() > usize::MAX as f64 {
        return Err(invalid(
            "n",
            format!("block length {n_real} rounds below 1"),
        ));
    }
    Ok(OperatingPoint {
        q,
        log2_q,
        gamma,
        delta,
        n: n_round.as_f64() as usize,
        n_real,
        theta: score_offset(q, gamma) + delta,
    })
}

/// Alice's matched quadratures and Bob's outcomes for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSample<R> {
    pub x: Vec<R>,
    pub y: Vec<R>,
}

/// Samples one block from the channel stream of `(seed, block 0)`.
pub fn sample_block<R: Real>(params: &ChannelParams<R>, n: usize, seed: u64) -> BlockSample<R> {
    sample_block_with(params, n, &mut rng::stream(seed, 0, Purpose::Channel))
}

/// Samples one block from a caller-supplied generator: `x ~ N(0, sigma_x2)`,
/// `y = sqrt(T) x + N(0, sigma_ygx2)`.
pub fn sample_block_with<R: Real, G: Rng + ?Sized>(
    params: &ChannelParams<R>,
    n: usize,
    rng: &mut G,
) -> BlockSample<R> {
    let sx = params.sigma_x2.sqrt();
    let sn = params.sigma_ygx2.sqrt();
    let st = params.t.sqrt();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = rng::std_normal::<R, _>(rng) * sx;
        let noise = rng::std_normal::<R, _>(rng) * sn;
        x.push(xi);
        y.push(st * xi + noise);
    }
    BlockSample { x, y }
}
