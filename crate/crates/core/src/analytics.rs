//! Closed-form layer: error probabilities of the threshold rule, mutual
//! informations, the Holevo leakage, and the asymptotic key ratio.
//!
//! Fake scores are modelled as standard normals and the true score as a
//! normal with unit variance and mean `sqrt(2 ln q / (1 + gamma))`.  Powers
//! `Phi(theta)^(q-1)` are taken in log space so that `q = 2^30` is harmless.

use std::sync::OnceLock;

use serde::Serialize;

use crate::channel::{log2_pow2, score_offset, ChannelParams, OperatingPoint};
use crate::error::{invalid, Error, Result};
use crate::quadrature::GaussHermite;
use crate::scalar::Real;
use crate::special::{binary_entropy, ln_norm_cdf, ln_norm_pdf, ln_norm_sf, thermal_entropy};

/// Probabilities of the accept/reject rule for one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorProbabilities<R> {
    pub theta: R,
    /// The unique row above threshold is the true one.
    pub p_ta: R,
    /// The unique row above threshold is a fake.
    pub p_fa: R,
    pub p_acc: R,
    /// Symbol error rate among accepted blocks.
    pub ser: R,
    pub ber: R,
}

fn ln_add_exp<R: Real>(a: R, b: R) -> R {
    if a == R::neg_infinity() {
        return b;
    }
    if b == R::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `P_TA = Phi(theta)^(q-1) (1 - Phi(delta))` and
/// `P_FA = (q-1) Phi(theta)^(q-2) (1 - Phi(theta)) Phi(delta)`.
pub fn error_probs<R: Real>(q: u64, gamma: R, delta: R) -> Result<ErrorProbabilities<R>> {
    log2_pow2(q)?;
    if !(gamma > -R::one()) {
        return Err(invalid("gamma", format!("{gamma} must exceed -1")));
    }
    let theta = score_offset(q, gamma) + delta;
    let qm1 = R::cst((q - 1) as f64);
    let ln_phi_t = ln_norm_cdf(theta);
    let ln_ta = qm1 * ln_phi_t + ln_norm_sf(delta);
    let ln_fa = qm1.ln() + (qm1 - R::one()) * ln_phi_t + ln_norm_sf(theta) + ln_norm_cdf(delta);
    let ln_acc = ln_add_exp(ln_ta, ln_fa);
    let (p_ta, p_fa) = (ln_ta.exp(), ln_fa.exp());
    let ser = if ln_acc == R::neg_infinity() {
        R::zero()
    } else {
        (ln_fa - ln_acc).exp()
    };
    Ok(ErrorProbabilities {
        theta,
        p_ta,
        p_fa,
        p_acc: p_ta + p_fa,
        ser,
        ber: ber_from_ser(ser, q)?,
    })
}

/// Bit error rate of a uniformly wrong `log2 q`-bit symbol: `(ser / 2) q / (q - 1)`.
pub fn ber_from_ser<R: Real>(ser: R, q: u64) -> Result<R> {
    log2_pow2(q)?;
    if !(ser >= R::zero() && ser <= R::one()) {
        return Err(invalid("ser", format!("{ser} outside [0, 1]")));
    }
    let qf = q as f64;
    Ok(ser * R::cst(0.5 * qf / (qf - 1.0)))
}

/// `I(X;Y) = log2(1 + eps) / 2` bits per pulse.
pub fn mutual_info_xy<R: Real>(params: &ChannelParams<R>) -> R {
    params.eps.ln_1p() / (R::cst(2.0) * R::LN_2())
}

/// Devetak–Winter value at low transmittance, `T / (2 ln 2)`.
pub fn devetak_winter<R: Real>(t: R) -> Result<R> {
    if !(t > R::zero()) || !t.is_finite() {
        return Err(invalid("T", "must be positive"));
    }
    Ok(t / (R::cst(2.0) * R::LN_2()))
}

/// Intermediate quantities of the leakage computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeakageInputs<R> {
    pub v: R,
    pub delta: R,
    pub d: R,
    /// `Delta^2 - 4 D`, evaluated in factored form.
    pub disc: R,
    pub nu1: R,
    pub nu2: R,
    pub nu3: R,
}

/// Symplectic eigenvalues for Eve's state (`nu1`, `nu2`) and for Eve's state
/// conditioned on Bob's outcome (`nu3`).
///
/// `Delta^2 - 4D` cancels to order `T` when computed naively; it factors
/// exactly as `(V - 2 sigma_Y^2)^2 ((V + 2 sigma_Y^2)^2 - 4 T (V^2 - 1))`, and
/// `V - 2 sigma_Y^2 = 2 sigma_X^2 (1 - T) - T xi` has no cancellation.
pub fn leakage_inputs<R: Real>(params: &ChannelParams<R>) -> Result<LeakageInputs<R>> {
    let one = R::one();
    let two = R::cst(2.0);
    let t = params.t;
    let v = one + two * params.sigma_x2;
    let s = two * params.sigma_y2;
    let k = t * (v * v - one);
    let delta = v * v + s * s - two * k;
    let d = (v * s - k).powi(2);
    let diff = two * params.sigma_x2 * (one - t) - t * params.xi;
    let disc = diff * diff * ((v + s).powi(2) - R::cst(4.0) * k);
    if disc < R::zero() {
        return Err(Error::NonPhysical {
            which: "discriminant",
            value: disc.as_f64(),
        });
    }
    let root = disc.sqrt();
    let nu1 = ((delta + root) / two).sqrt();
    let nu2 = (two * d / (delta + root)).sqrt();
    let nu3 = (v * (v - k / s)).sqrt();
    let tol = one - R::cst(1e-9);
    for (which, nu) in [("nu1", nu1), ("nu2", nu2), ("nu3", nu3)] {
        if !(nu >= tol) {
            return Err(Error::NonPhysical {
                which,
                value: nu.as_f64(),
            });
        }
    }
    Ok(LeakageInputs {
        v,
        delta,
        d,
        disc,
        nu1,
        nu2,
        nu3,
    })
}

/// Holevo information `I(E;Y)` in bits per pulse.
pub fn leakage_ey<R: Real>(params: &ChannelParams<R>) -> Result<R> {
    let li = leakage_inputs(params)?;
    let half = R::cst(0.5);
    let g = |nu: R| thermal_entropy(((nu - R::one()) * half).max(R::zero()));
    Ok(g(li.nu1) + g(li.nu2) - g(li.nu3))
}

/// Small-`eps` approximation `eps / (2 ln 2) sigma_X^2 ln((1 + sigma_X^2) / sigma_X^2)`.
pub fn leakage_ey_approx<R: Real>(params: &ChannelParams<R>) -> R {
    let sx = params.sigma_x2;
    params.eps / (R::cst(2.0) * R::LN_2()) * sx * (R::one() + sx.recip()).ln()
}

/// Rates per pulse for one design point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport<R> {
    pub i_xy: R,
    pub i_ey: R,
    pub delta_i: R,
    pub dw: R,
    pub skr: R,
    pub skr_over_dw: R,
    pub skr_over_delta_i: R,
}

/// Asymptotic key ratio
/// `P_acc [(1+gamma) I(X;Y) {1 - h(BER) - h(P_acc) / (P_acc log2 q)} - I(E;Y)]`.
///
/// Negative values are returned as is.  `P_acc = 0` gives 0.
pub fn skr_infinity<R: Real>(
    params: &ChannelParams<R>,
    op: &OperatingPoint<R>,
    probs: &ErrorProbabilities<R>,
) -> Result<RateReport<R>> {
    skr_parts(params, op.log2_q, op.gamma, probs)
}

pub(crate) fn skr_parts<R: Real>(
    params: &ChannelParams<R>,
    log2_q: u32,
    gamma: R,
    probs: &ErrorProbabilities<R>,
) -> Result<RateReport<R>> {
    let i_xy = mutual_info_xy(params);
    let i_ey = leakage_ey(params)?;
    let dw = devetak_winter(params.t)?;
    let p = probs.p_acc;
    let skr = if p > R::zero() {
        let lq = R::cst(log2_q as f64);
        p * ((R::one() + gamma)
            * i_xy
            * (R::one() - binary_entropy(probs.ber) - binary_entropy(p) / p / lq)
            - i_ey)
    } else {
        R::zero()
    };
    Ok(RateReport {
        i_xy,
        i_ey,
        delta_i: i_xy - i_ey,
        dw,
        skr,
        skr_over_dw: skr / dw,
        skr_over_delta_i: skr / (i_xy - i_ey),
    })
}

/// The `log2(2N) / (N n)` term left out of [`skr_infinity`].
pub fn finite_size_term(blocks: u64, n: usize) -> f64 {
    let nb = blocks as f64;
    (2.0 * nb).log2() / (nb * n as f64)
}

/// Nodes used for the no-threshold integral.
pub const OMEGA_NODES: usize = 128;

fn omega_rule() -> &'static GaussHermite {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    RULE.get_or_init(|| GaussHermite::new(OMEGA_NODES))
}

/// Symbol error probability of the always-accept variant: the chance that
/// the largest of `q - 1` fake scores beats the true score.
///
/// Written as `integral f_M(m) Phi(m - mu) dm` with `f_M` the density of the
/// maximum of the fakes, and evaluated by Gauss–Hermite quadrature centred at
/// the mode of the (log-concave) integrand with the Laplace width.
pub fn omega(q: u64, gamma: f64) -> Result<f64> {
    log2_pow2(q)?;
    if !(gamma > -1.0) {
        return Err(invalid("gamma", format!("{gamma} must exceed -1")));
    }
    let mu = score_offset(q, gamma);
    Ok(omega_at(q, mu))
}

/// [`omega`] for an explicit offset `mu` between true and fake means.
pub fn omega_at(q: u64, mu: f64) -> f64 {
    let k = (q - 2) as f64;
    let ln_qm1 = ((q - 1) as f64).ln();
    let mills = |x: f64| (ln_norm_pdf(x) - ln_norm_cdf(x)).exp();
    let h = |m: f64| ln_qm1 + k * ln_norm_cdf(m) + ln_norm_pdf(m) + ln_norm_cdf(m - mu);
    let dh = |m: f64| k * mills(m) - m + mills(m - mu);
    let (mut lo, mut hi) = (-20.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dh(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let mode = 0.5 * (lo + hi);
    let (r1, r2) = (mills(mode), mills(mode - mu));
    let d2 = -k * r1 * (mode + r1) - 1.0 - r2 * (mode - mu + r2);
    let scale = (-d2).sqrt().recip();
    omega_rule().integrate_log(mode, scale, h).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoThreshold {
    pub omega: f64,
    /// `(1+gamma) I(X;Y) [1 - h(omega/2 q/(q-1))] - I(E;Y)`, bits per pulse.
    pub skr: f64,
}

/// Always-accept variant: symbol error rate and key ratio.
pub fn no_threshold_variant(
    params: &ChannelParams<f64>,
    q: u64,
    gamma: f64,
) -> Result<NoThreshold> {
    let omega = omega(q, gamma)?;
    let ber = ber_from_ser(omega, q)?;
    let skr =
        (1.0 + gamma) * mutual_info_xy(params) * (1.0 - binary_entropy(ber)) - leakage_ey(params)?;
    Ok(NoThreshold { omega, skr })
}
