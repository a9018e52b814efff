#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi2_sf(stat: f64, df: usize) -> f64 {
    ChiSquared::new(df as f64).expect("df > 0").sf(stat)
}

/// Pearson statistic of `counts` against a uniform expectation.
pub fn chi2_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, s)
}

/// Standard normal CDF from an independent implementation.
pub fn phi(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Kolmogorov-Smirnov distance of `sample` against `cdf`.
pub fn ks_distance(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
