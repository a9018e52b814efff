//! The score `J(x, m)`, its likelihood-ratio oracle and its analytic
//! moments.
//!
//! With `a = sum x_i m_i / (sigma_X sigma_Y)` and `b = sum m_i^2 / sigma_Y^2`,
//!
//! ```text
//! J = [ a / sqrt(n) + B (1 - b / n) ] / den
//! B   = sqrt(n eps / (1 + eps)) / 2
//! den = sqrt(|x|^2 / (n sigma_X^2) + eps / (2 (1 + eps)))
//! ```
//!
//! For a fake row (`m ~ N(0, sigma_Y^2)` independent of `x`) `J` has mean 0
//! and variance 1 exactly.  `J` is an increasing affine function of the
//! log-likelihood ratio `ln f(m | x) - ln f(m)`, so thresholding `J` is a
//! Neyman-Pearson test.

mod lut;

use std::cmp::Ordering;

use serde::Serialize;

pub use lut::{score_lut_build, score_lut_direct, score_tally, ScoreLut, LUT_FRAC_BITS};

use crate::channel::ChannelParams;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Alice's side of one block, with the per-block constants of `J`.
#[derive(Debug, Clone)]
pub struct ScoreContext<R> {
    pub x: Vec<R>,
    pub x_norm2: R,
    pub params: ChannelParams<R>,
    n: usize,
    sqrt_n: R,
    bias: R,
    den: R,
    inv_sx_sy: R,
}

impl<R: Real> ScoreContext<R> {
    pub fn new(x: Vec<R>, params: ChannelParams<R>) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(invalid("x", "empty vector"));
        }
        let mut acc = LaneAcc::default();
        acc.add_norm(&x, 0);
        let x_norm2 = acc.norm();
        let nr = R::from_usize_lossy(n);
        let eps = params.eps;
        let half = R::cst(0.5);
        let ratio = eps / (R::one() + eps);
        let den = (x_norm2 / (nr * params.sigma_x2) + half * ratio).sqrt();
        if !(den > R::zero()) || !den.is_finite() {
            return Err(Error::DegenerateScore);
        }
        Ok(Self {
            x,
            x_norm2,
            params,
            n,
            sqrt_n: nr.sqrt(),
            bias: half * (nr * ratio).sqrt(),
            den,
            inv_sx_sy: (params.sigma_x2 * params.sigma_y2).sqrt().recip(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `B`, the weight of the norm correction.
    pub fn bias(&self) -> R {
        self.bias
    }

    /// Denominator of `J`.
    pub fn den(&self) -> R {
        self.den
    }

    /// `x_i / sigma_X` summed in squares and divided by `n`.
    pub fn x_power(&self) -> R {
        self.x_norm2 / (R::from_usize_lossy(self.n) * self.params.sigma_x2)
    }

    /// Converts raw sums `sum x m` and `sum m^2` into normalized `(a, b)`.
    #[inline]
    pub fn normalize(&self, xm: R, mm: R) -> (R, R) {
        (xm * self.inv_sx_sy, mm / self.params.sigma_y2)
    }

    /// `J` from normalized sums.
    #[inline]
    pub fn score_normalized(&self, a: R, b: R) -> R {
        let nr = R::from_usize_lossy(self.n);
        (a / self.sqrt_n + self.bias * (R::one() - b / nr)) / self.den
    }

    /// `J` from raw sums `sum x m` and `sum m^2`.
    #[inline]
    pub fn score_from_sums(&self, xm: R, mm: R) -> R {
        let (a, b) = self.normalize(xm, mm);
        self.score_normalized(a, b)
    }
}

/// Eight-lane accumulator.  Component `i` always lands in lane `i % 8` and
/// lanes are combined by a fixed tree, so a sum split into several ranges is
/// bit-identical to the same sum done in one pass.
#[derive(Debug, Clone, Copy)]
pub struct LaneAcc<R> {
    xm: [R; 8],
    mm: [R; 8],
}

impl<R: Real> Default for LaneAcc<R> {
    fn default() -> Self {
        Self {
            xm: [R::zero(); 8],
            mm: [R::zero(); 8],
        }
    }
}

#[inline]
fn tree<R: Real>(v: &[R; 8]) -> R {
    ((v[0] + v[1]) + (v[2] + v[3])) + ((v[4] + v[5]) + (v[6] + v[7]))
}

impl<R: Real> LaneAcc<R> {
    /// Adds `x_i m_i` for `i` in `start .. start + x.len()`.
    #[inline]
    pub fn add_inner(&mut self, x: &[R], m: &[R], start: usize) {
        debug_assert_eq!(x.len(), m.len());
        let head = ((8 - start % 8) % 8).min(x.len());
        for i in 0..head {
            self.xm[(start + i) % 8] += x[i] * m[i];
        }
        let (x, m) = (&x[head..], &m[head..]);
        let mut xc = x.chunks_exact(8);
        let mut mc = m.chunks_exact(8);
        for (xs, ms) in (&mut xc).zip(&mut mc) {
            for k in 0..8 {
                self.xm[k] += xs[k] * ms[k];
            }
        }
        for (k, (&a, &b)) in xc.remainder().iter().zip(mc.remainder()).enumerate() {
            self.xm[k] += a * b;
        }
    }

    /// Adds `m_i^2` for `i` in `start .. start + m.len()`.
    #[inline]
    pub fn add_norm(&mut self, m: &[R], start: usize) {
        let head = ((8 - start % 8) % 8).min(m.len());
        for i in 0..head {
            self.mm[(start + i) % 8] += m[i] * m[i];
        }
        let m = &m[head..];
        let mut mc = m.chunks_exact(8);
        for ms in &mut mc {
            for k in 0..8 {
                self.mm[k] += ms[k] * ms[k];
            }
        }
        for (k, &b) in mc.remainder().iter().enumerate() {
            self.mm[k] += b * b;
        }
    }

    pub fn inner(&self) -> R {
        tree(&self.xm)
    }

    pub fn norm(&self) -> R {
        tree(&self.mm)
    }
}

/// Exact `J(x, m)`.
pub fn score<R: Real>(ctx: &ScoreContext<R>, m: &[R]) -> Result<R> {
    if m.len() != ctx.n {
        return Err(Error::LengthMismatch {
            expected: ctx.n,
            actual: m.len(),
        });
    }
    let mut acc = LaneAcc::default();
    acc.add_inner(&ctx.x, m, 0);
    acc.add_norm(m, 0);
    Ok(ctx.score_from_sums(acc.inner(), acc.norm()))
}

/// `ln f_{Y|X}(m | x) - ln f_Y(m)` from the two Gaussian densities, in `f64`.
pub fn log_likelihood_ratio<R: Real>(ctx: &ScoreContext<R>, m: &[R]) -> Result<f64> {
    if m.len() != ctx.n {
        return Err(Error::LengthMismatch {
            expected: ctx.n,
            actual: m.len(),
        });
    }
    let p = ctx.params.cast::<f64>();
    let (s_cond, s_marg) = (p.sigma_ygx2.sqrt(), p.sigma_y2.sqrt());
    let st = p.t.sqrt();
    let ln_pdf = |z: f64, s: f64| crate::special::ln_norm_pdf(z / s) - s.ln();
    Ok(ctx
        .x
        .iter()
        .zip(m)
        .map(|(&x, &m)| {
            let (x, m) = (x.as_f64(), m.as_f64());
            ln_pdf(m - st * x, s_cond) - ln_pdf(m, s_marg)
        })
        .sum())
}

/// Orders `m1` against `m2` by likelihood ratio; differences within `1e-12`
/// relative count as ties.
pub fn likelihood_ratio_order<R: Real>(
    ctx: &ScoreContext<R>,
    m1: &[R],
    m2: &[R],
) -> Result<Ordering> {
    let l1 = log_likelihood_ratio(ctx, m1)?;
    let l2 = log_likelihood_ratio(ctx, m2)?;
    Ok(tolerant_cmp(l1, l2, 1e-12))
}

/// Compares with a relative tie tolerance.
pub fn tolerant_cmp(a: f64, b: f64, tol: f64) -> Ordering {
    if (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0) {
        Ordering::Equal
    } else if a < b {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// Moments of `J` for the true row (given `x`) and for a fake row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreStats<R> {
    pub mean_true: R,
    pub var_true: R,
    pub mean_fake: R,
    pub var_fake: R,
}

/// Exact conditional mean and variance of the true-row score given `x`.
pub fn analytic_score_stats<R: Real>(ctx: &ScoreContext<R>) -> ScoreStats<R> {
    let eps = ctx.params.eps;
    let one = R::one();
    let half = R::cst(0.5);
    let a = ctx.x_power();
    let nr = R::from_usize_lossy(ctx.n);
    let d2 = a + half * eps / (one + eps);
    let mean = (nr * eps).sqrt() / (one + eps).powf(R::cst(1.5))
        * (a * (one + half * eps) + half * eps)
        / d2.sqrt();
    let var = (a + half * eps) / d2 / (one + eps).powi(3);
    ScoreStats {
        mean_true: mean,
        var_true: var,
        mean_fake: R::zero(),
        var_fake: one,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::derive_channel;

    fn unit_params(eps: f64) -> ChannelParams<f64> {
        // sigma_X = 1 with sigma_Y^2 = 1 needs T = eps / (1 + eps) and
        // sigma_ygx2 = 1 / (1 + eps); build it by hand.
        let s = 1.0 / (1.0 + eps);
        ChannelParams {
            t: eps * s,
            xi: 0.0,
            sigma_x2: 1.0,
            sigma_y2: 1.0,
            sigma_ygx2: s,
            eps,
        }
    }

    #[test]
    fn worked_examples() {
        let p = derive_channel(0.3, 0.0, 1.7).unwrap();
        let ctx = ScoreContext::new(vec![0.0], p).unwrap();
        assert!((score(&ctx, &[0.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);

        let ctx = ScoreContext::new(vec![2.0], unit_params(0.01)).unwrap();
        let j = score(&ctx, &[1.0]).unwrap();
        let expect = 2.0 / (4.0 + 0.5 * 0.01 / 1.01f64).sqrt();
        assert!((j - expect).abs() < 1e-15, "{j} vs {expect}");
        assert!((j - 0.99938).abs() < 1e-5);
    }

    #[test]
    fn length_mismatch_rejected() {
        let ctx = ScoreContext::new(vec![1.0, 2.0], unit_params(0.1)).unwrap();
        assert!(matches!(
            score(&ctx, &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(ScoreContext::new(Vec::<f64>::new(), unit_params(0.1)).is_err());
    }

    #[test]
    fn lane_split_is_bit_identical() {
        let x: Vec<f64> = (0..203)
            .map(|i| ((i * 37 % 101) as f64 - 50.0) / 7.3)
            .collect();
        let m: Vec<f64> = (0..203)
            .map(|i| ((i * 53 % 97) as f64 - 48.0) / 3.1)
            .collect();
        let mut whole = LaneAcc::default();
        whole.add_inner(&x, &m, 0);
        whole.add_norm(&m, 0);
        for cut in [0, 1, 5, 8, 13, 64, 202, 203] {
            let mut s = LaneAcc::default();
            s.add_inner(&x[..cut], &m[..cut], 0);
            s.add_inner(&x[cut..], &m[cut..], cut);
            s.add_norm(&m[..cut], 0);
            s.add_norm(&m[cut..], cut);
            assert_eq!(s.inner().to_bits(), whole.inner().to_bits());
            assert_eq!(s.norm().to_bits(), whole.norm().to_bits());
        }
    }

    #[test]
    fn stats_limits() {
        let p = derive_channel(1e-6, 0.0, 1.0).unwrap();
        let n = 1000;
        // x^2 = n sigma_X^2 exactly.
        let ctx = ScoreContext::new(vec![1.0; n], p).unwrap();
        let s = analytic_score_stats(&ctx);
        let lead = (n as f64 * p.eps).sqrt();
        assert!((s.mean_true - lead).abs() / lead < 2.0 * p.eps);
        assert!((s.var_true - 1.0).abs() < 1e-5);
        assert_eq!((s.mean_fake, s.var_fake), (0.0, 1.0));
    }

    #[test]
    fn rescaling_x_and_sigma_x_keeps_score() {
        let p = derive_channel(0.2, 0.05, 0.8).unwrap();
        let x = vec![0.3, -1.2, 0.7];
        let m = [0.1, 0.4, -0.9];
        let j = score(&ScoreContext::new(x.clone(), p).unwrap(), &m).unwrap();
        let c: f64 = 3.0;
        // sigma_Y^2 and eps must stay fixed, so T absorbs the change.
        let mut q = p;
        q.sigma_x2 *= c * c;
        q.t /= c * c;
        let j2 = score(
            &ScoreContext::new(x.iter().map(|v| v * c).collect(), q).unwrap(),
            &m,
        )
        .unwrap();
        assert!((j - j2).abs() < 1e-14);
    }

    #[test]
    fn lr_order_basics() {
        let p = derive_channel(0.4, 0.1, 1.0).unwrap();
        let ctx = ScoreContext::new(vec![0.5, -0.2], p).unwrap();
        let m = [0.3, 0.1];
        assert_eq!(
            likelihood_ratio_order(&ctx, &m, &m).unwrap(),
            Ordering::Equal
        );
        assert_eq!(
            likelihood_ratio_order(&ctx, &[0.3, -0.1], &[-0.3, 0.1]).unwrap(),
            Ordering::Greater
        );
    }
}
