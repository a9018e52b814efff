//! Special functions: the standard normal distribution and the two entropy
//! functions that enter the key-ratio formulas.
//!
//! The normal CDF follows W. J. Cody's rational Chebyshev approximations
//! (Math. Comp. 23, 1969) in the arrangement popularised by R's `pnorm`: three
//! ranges in |x| with the tail factor `exp(-x^2/2)` split as
//! `exp(-xs^2/2) * exp(-(x-xs)(x+xs)/2)` where `xs = trunc(16 x) / 16`.
//! The tail is returned in log form, so `ln Phi(x)` stays accurate when
//! `Phi(x)` itself would underflow and `ln(1 - Phi(t))` stays accurate for
//! large `t` (needed to raise `Phi(theta)` to the power `q - 1` for q = 2^30).
//! Relative accuracy is about 1e-15 over the whole real line.
//!
//! The quantile uses Wichura's AS241 (PPND16), relative accuracy about 1e-16.

use crate::scalar::Real;

const CODY_A: [f64; 5] = [
    2.235_252_035_460_683_9e0,
    1.610_282_310_685_558_8e2,
    1.067_689_485_460_370_9e3,
    1.815_498_125_334_356e4,
    6.568_233_791_820_745e-2,
];
const CODY_B: [f64; 4] = [
    4.720_258_190_468_824e1,
    9.760_985_517_377_767e2,
    1.026_093_220_861_897_8e4,
    4.550_778_933_502_673e4,
];
const CODY_C: [f64; 9] = [
    3.989_415_120_881_346_7e-1,
    8.883_149_794_388_375,
    9.350_665_613_217_785e1,
    5.972_702_763_948_002e2,
    2.494_537_585_290_372_7e3,
    6.848_190_450_536_282e3,
    1.160_265_143_764_735e4,
    9.842_714_838_383_978e3,
    1.076_557_677_372_019_2e-8,
];
const CODY_D: [f64; 8] = [
    2.226_668_804_432_811_6e1,
    2.353_879_017_826_25e2,
    1.519_377_599_407_554_8e3,
    6.485_558_298_266_761e3,
    1.861_557_164_088_51e4,
    3.490_095_272_114_598e4,
    3.891_200_328_609_327e4,
    1.968_542_967_685_999e4,
];
const CODY_P: [f64; 6] = [
    2.158_985_340_579_57e-1,
    1.274_011_611_602_473_6e-1,
    2.223_527_787_064_980_7e-2,
    1.421_619_193_227_893_5e-3,
    2.911_287_495_116_879e-5,
    2.307_344_176_494_017_3e-2,
];
const CODY_Q: [f64; 5] = [
    1.284_260_096_144_911,
    4.682_382_124_808_651e-1,
    6.598_813_786_892_855e-2,
    3.782_396_332_027_582_4e-3,
    7.297_515_550_839_662e-5,
];

/// Where `x` falls relative to the central interval of the approximation.
enum Split<R> {
    /// `Phi(x) = 1/2 + t`.
    Central(R),
    /// `ln` of the tail on the side away from zero; `upper` when `x > 0`.
    Tail { ln_tail: R, upper: bool },
}

fn split<R: Real>(x: R) -> Split<R> {
    let c = R::cst;
    let y = x.abs();
    if y.is_infinite() {
        return Split::Tail {
            ln_tail: R::neg_infinity(),
            upper: x > R::zero(),
        };
    }
    if y <= c(0.674_489_75) {
        let (mut num, mut den) = (R::zero(), R::zero());
        if y > c(f64::EPSILON * 0.5) {
            let xsq = x * x;
            num = c(CODY_A[4]) * xsq;
            den = xsq;
            for i in 0..3 {
                num = (num + c(CODY_A[i])) * xsq;
                den = (den + c(CODY_B[i])) * xsq;
            }
        }
        return Split::Central(x * (num + c(CODY_A[3])) / (den + c(CODY_B[3])));
    }
    let ln_rational = if y <= c(32f64.sqrt()) {
        let mut num = c(CODY_C[8]) * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + c(CODY_C[i])) * y;
            den = (den + c(CODY_D[i])) * y;
        }
        ((num + c(CODY_C[7])) / (den + c(CODY_D[7]))).ln()
    } else {
        let xsq = (y * y).recip();
        let mut num = c(CODY_P[5]) * xsq;
        let mut den = xsq;
        for i in 0..4 {
            num = (num + c(CODY_P[i])) * xsq;
            den = (den + c(CODY_Q[i])) * xsq;
        }
        let t = xsq * (num + c(CODY_P[4])) / (den + c(CODY_Q[4]));
        ((c(std::f64::consts::FRAC_1_SQRT_2 / std::f64::consts::PI.sqrt()) - t) / y).ln()
    };
    let xs = (y * c(16.0)).trunc() / c(16.0);
    let del = (y - xs) * (y + xs);
    let half = c(0.5);
    Split::Tail {
        ln_tail: -xs * xs * half - del * half + ln_rational,
        upper: x > R::zero(),
    }
}

/// Standard normal cumulative distribution function `Phi(x)`.
pub fn norm_cdf<R: Real>(x: R) -> R {
    if x.is_nan() {
        return x;
    }
    match split(x) {
        Split::Central(t) => R::cst(0.5) + t,
        Split::Tail { ln_tail, upper } => {
            if upper {
                R::one() - ln_tail.exp()
            } else {
                ln_tail.exp()
            }
        }
    }
}

/// Survival function `1 - Phi(x)`, accurate in the upper tail.
pub fn norm_sf<R: Real>(x: R) -> R {
    norm_cdf(-x)
}

/// `ln Phi(x)`, accurate for `x -> -inf` and for `x -> +inf`.
pub fn ln_norm_cdf<R: Real>(x: R) -> R {
    if x.is_nan() {
        return x;
    }
    match split(x) {
        Split::Central(t) => (R::cst(0.5) + t).ln(),
        Split::Tail { ln_tail, upper } => {
            if upper {
                (-ln_tail.exp()).ln_1p()
            } else {
                ln_tail
            }
        }
    }
}

/// `ln(1 - Phi(x))`.
pub fn ln_norm_sf<R: Real>(x: R) -> R {
    ln_norm_cdf(-x)
}

/// `ln phi(x)` for the standard normal density.
pub fn ln_norm_pdf<R: Real>(x: R) -> R {
    -x * x * R::cst(0.5) - R::cst(0.5 * (2.0 * std::f64::consts::PI).ln())
}

/// Standard normal density.
pub fn norm_pdf<R: Real>(x: R) -> R {
    ln_norm_pdf(x).exp()
}

/// Inverse of `Phi` (Wichura AS241). Returns `-inf`/`+inf` at 0 and 1 and NaN
/// outside `[0, 1]`.
pub fn norm_quantile<R: Real>(p: R) -> R {
    const A: [f64; 8] = [
        3.387_132_872_796_366_6,
        1.331_416_678_917_843_8e2,
        1.971_590_950_306_551_3e3,
        1.373_169_376_550_946e4,
        4.592_195_393_154_987e4,
        6.726_577_092_700_87e4,
        3.343_057_558_358_813e4,
        2.509_080_928_730_122_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091e1,
        6.871_870_074_920_579e2,
        5.394_196_021_424_751e3,
        2.121_379_430_158_659_7e4,
        3.930_789_580_009_271e4,
        2.872_908_573_572_194_3e4,
        5.226_495_278_852_545e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_6,
        4.630_337_846_156_546,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        2.417_807_251_774_506e-1,
        2.272_384_498_926_918_4e-2,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        6.897_673_349_851e-1,
        1.481_039_764_274_800_8e-1,
        1.519_866_656_361_645_7e-2,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        2.965_605_718_285_048_7e-1,
        2.653_218_952_657_612_4e-2,
        1.242_660_947_388_078_4e-3,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_88e-1,
        1.369_298_809_227_358e-1,
        1.487_536_129_085_061_5e-2,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.044_263_103_389_939_7e-15,
    ];
    fn poly<R: Real>(coef: &[f64; 8], r: R) -> R {
        coef.iter()
            .rev()
            .fold(R::zero(), |acc, &k| acc * r + R::cst(k))
    }

    let c = R::cst;
    if p.is_nan() || p < R::zero() || p > R::one() {
        return R::nan();
    }
    if p == R::zero() {
        return R::neg_infinity();
    }
    if p == R::one() {
        return R::infinity();
    }
    let q = p - c(0.5);
    if q.abs() <= c(0.425) {
        let r = c(0.180_625) - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < R::zero() { p } else { R::one() - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= c(5.0) {
        r -= c(1.6);
        poly(&C, r) / poly(&D, r)
    } else {
        r -= c(5.0);
        poly(&E, r) / poly(&F, r)
    };
    if q < R::zero() {
        -val
    } else {
        val
    }
}

/// Binary entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy<R: Real>(p: R) -> R {
    if p <= R::zero() || p >= R::one() {
        return R::zero();
    }
    let q = R::one() - p;
    -(p * p.ln() + q * (-p).ln_1p()) / R::LN_2()
}

/// Thermal (bosonic) entropy `g(x) = (x+1) log2(x+1) - x log2 x` in bits,
/// with `g(0) = 0`.
pub fn thermal_entropy<R: Real>(x: R) -> R {
    if x <= R::zero() {
        return R::zero();
    }
    ((x + R::one()) * x.ln_1p() - x * x.ln()) / R::LN_2()
}

#[cfg(test)]
mod tests {
    use super::*;

    // (x, Phi(x), ln Phi(x)) from 40-digit arbitrary-precision evaluation.
    const CDF_REF: &[(f64, f64, f64)] = &[
        (-40.0, 0.0, -804.608_442_013_753_8),
        (-20.0, 2.753_624_118_606_233_7e-89, -203.917_155_371_097_26),
        (-8.5, 9.479_534_822_203_318e-18, -39.197_396_428_217_67),
        (-5.3, 5.790_134_039_964_588e-8, -16.664_525_302_382_473),
        (-3.0, 0.001_349_898_031_630_094_5, -6.607_726_221_510_35),
        (-1.2, 0.115_069_670_221_708_27, -2.162_217_506_043_739_4),
        (-0.6, 0.274_253_117_750_073_6, -1.293_703_811_614_028),
        (-0.1, 0.460_172_162_722_971, -0.776_154_592_730_273_3),
        (0.0, 0.5, -std::f64::consts::LN_2),
        (0.3, 0.617_911_422_188_952_6, -0.481_410_161_588_481_2),
        (0.67, 0.748_571_104_904_689_9, -0.289_589_083_101_687_1),
        (0.7, 0.758_036_347_776_927, -0.277_023_942_277_131_24),
        (1.5, 0.933_192_798_731_141_9, -0.069_143_455_612_233_98),
        (2.77, 0.997_197_185_367_235, -0.002_806_749_872_583_048),
        (4.9, 0.999_999_520_816_723_4, -4.791_833_913_986_628e-7),
        (6.0, 0.999_999_999_013_412_4, -9.865_876_455_243_757e-10),
        (6.9, 0.999_999_999_997_399_9, -2.600_126_965_641_553e-12),
        (9.1, 1.0, -4.516_591_491_435_442e-20),
        (12.0, 1.0, -1.776_482_112_077_679e-33),
    ];

    fn rel(a: f64, b: f64) -> f64 {
        if b == 0.0 {
            a.abs()
        } else {
            ((a - b) / b).abs()
        }
    }

    #[test]
    fn cdf_matches_high_precision_reference() {
        for &(x, cdf, ln_cdf) in CDF_REF {
            assert!(rel(norm_cdf(x), cdf) < 2e-14, "Phi({x}) = {}", norm_cdf(x));
            assert!(
                rel(ln_norm_cdf(x), ln_cdf) < 2e-14,
                "ln Phi({x}) = {} vs {ln_cdf}",
                ln_norm_cdf(x)
            );
        }
    }

    #[test]
    fn upper_tail_keeps_relative_precision() {
        // 1 - Phi(6.9) = 2.6001269656449...e-12
        let sf = norm_sf(6.9f64);
        assert!(rel(sf, 2.600_126_965_638_166e-12) < 1e-12, "{sf}");
        assert!(norm_sf(40.0f64) == 0.0);
        assert!(ln_norm_sf(40.0f64) < -800.0);
    }

    #[test]
    fn cdf_is_symmetric_and_monotone() {
        let mut prev = 0.0;
        for i in -400..=400 {
            let x = i as f64 * 0.025;
            let p = norm_cdf(x);
            assert!(p >= prev);
            prev = p;
            assert!((p + norm_cdf(-x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(norm_cdf(0.0f64), 0.5);
    }

    #[test]
    fn quantile_matches_reference() {
        let refs: [(f64, f64); 9] = [
            (1e-12, -7.034_483_825_301_132),
            (0.000_488_281_25, -3.297_193_345_691_963),
            (0.01, -2.326_347_874_040_841),
            (0.2, -0.841_621_233_572_914_2),
            (0.5, 0.0),
            (0.75, 0.674_489_750_196_081_7),
            (0.93, 1.475_791_028_179_170_7),
            (0.999, 3.090_232_306_167_813_5),
            (0.999_999_99, 5.612_001_243_305_505),
        ];
        for (p, z) in refs {
            let got = norm_quantile(p);
            assert!(
                (got - z).abs() < 1e-13 * (1.0 + z.abs()),
                "ppf({p}) = {got}"
            );
        }
        assert_eq!(norm_quantile(0.0f64), f64::NEG_INFINITY);
        assert_eq!(norm_quantile(1.0f64), f64::INFINITY);
        assert!(norm_quantile(1.5f64).is_nan());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            assert!((norm_cdf(norm_quantile(p)) - p).abs() < 1e-14);
        }
    }

    #[test]
    fn f32_agrees_with_f64() {
        for &(x, cdf, _) in CDF_REF.iter().filter(|r| r.0.abs() < 9.0) {
            assert!((norm_cdf(x as f32) as f64 - cdf).abs() < 1e-6);
        }
    }

    #[test]
    fn entropies() {
        assert_eq!(binary_entropy(0.0f64), 0.0);
        assert_eq!(binary_entropy(1.0f64), 0.0);
        assert!((binary_entropy(0.5f64) - 1.0).abs() < 1e-15);
        assert!((binary_entropy(0.11f64) - 0.499_915_958_164_528_8).abs() < 1e-14);
        assert_eq!(thermal_entropy(0.0f64), 0.0);
        assert!((thermal_entropy(1.0f64) - 2.0).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 1..2000 {
            let g = thermal_entropy(i as f64 * 0.01);
            assert!(g > prev);
            prev = g;
        }
    }
}
