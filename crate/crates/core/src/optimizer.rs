//! Maximizes the asymptotic key ratio over `(sigma_X^2, gamma, delta)` at a
//! fixed codebook size and channel.
//!
//! A coarse grid (log-spaced in `sigma_X^2`, linear in `gamma` and `delta`)
//! picks the starting point; Nelder–Mead rounds in `(ln sigma_X^2, gamma,
//! delta)` refine it until a round gains less than `rel_tol`.  Points outside
//! the box are rejected by an infinite penalty.  Everything is deterministic.

use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{error_probs, skr_parts, RateReport};
use crate::channel::{derive_channel, log2_pow2, score_offset};
use crate::error::{invalid, Result};

/// Search box and stopping rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub sigma_x2: (f64, f64),
    pub gamma: (f64, f64),
    pub delta: (f64, f64),
    /// Grid points per axis.
    pub grid: [usize; 3],
    /// Stop when a refinement round improves by less than this, relatively.
    pub rel_tol: f64,
    pub max_rounds: usize,
    /// Record every evaluated point in the result.
    pub keep_trace: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            sigma_x2: (0.01, 5.0),
            gamma: (-0.9, 0.5),
            delta: (-3.0, 1.0),
            grid: [20, 20, 20],
            rel_tol: 1e-4,
            max_rounds: 20,
            keep_trace: false,
        }
    }
}

/// Everything the key-ratio formula produces at one design point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignPoint {
    pub q: u64,
    pub t: f64,
    pub xi: f64,
    pub sigma_x2: f64,
    pub gamma: f64,
    pub delta: f64,
    pub theta: f64,
    /// Real-valued block length.
    pub n_real: f64,
    pub p_acc: f64,
    pub ser: f64,
    pub ber: f64,
    pub rates: RateReport<f64>,
}

/// Key ratio and the quantities behind it.
pub fn evaluate(
    t: f64,
    xi: f64,
    q: u64,
    sigma_x2: f64,
    gamma: f64,
    delta: f64,
) -> Result<DesignPoint> {
    let params = derive_channel(t, xi, sigma_x2)?;
    let log2_q = log2_pow2(q)?;
    let probs = error_probs(q, gamma, delta)?;
    let rates = skr_parts(&params, log2_q, gamma, &probs)?;
    Ok(DesignPoint {
        q,
        t,
        xi,
        sigma_x2,
        gamma,
        delta,
        theta: score_offset(q, gamma) + delta,
        n_real: 2.0 * (q as f64).ln() / ((1.0 + gamma) * params.eps.ln_1p()),
        p_acc: probs.p_acc,
        ser: probs.ser,
        ber: probs.ber,
        rates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub sigma_x2: f64,
    pub gamma: f64,
    pub delta: f64,
    pub skr_over_dw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub best: DesignPoint,
    pub skr: f64,
    pub skr_over_dw: f64,
    pub evaluations: usize,
    pub rounds: usize,
    /// Names of the search bounds the optimum sits on.
    pub boundary_hits: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TracePoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub landscape: Option<Landscape>,
}

struct Objective<'a> {
    t: f64,
    xi: f64,
    q: u64,
    cfg: &'a SearchConfig,
}

impl Objective<'_> {
    fn inside(&self, sx: f64, g: f64, d: f64) -> bool {
        let c = self.cfg;
        sx >= c.sigma_x2.0
            && sx <= c.sigma_x2.1
            && g > c.gamma.0
            && g < c.gamma.1
            && d > c.delta.0
            && d < c.delta.1
    }

    /// `SKR / DW`, or `-inf` outside the box or where the formula fails.
    fn value(&self, sx: f64, g: f64, d: f64) -> f64 {
        if !self.inside(sx, g, d) {
            return f64::NEG_INFINITY;
        }
        match evaluate(self.t, self.xi, self.q, sx, g, d) {
            Ok(p) if p.rates.skr_over_dw.is_finite() => p.rates.skr_over_dw,
            _ => f64::NEG_INFINITY,
        }
    }
}

fn check_config(cfg: &SearchConfig) -> Result<()> {
    let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
    if !(ok(cfg.sigma_x2) && cfg.sigma_x2.0 > 0.0) {
        return Err(invalid("sigma_x2 bounds", "need 0 < lo < hi"));
    }
    if !(ok(cfg.gamma) && cfg.gamma.0 >= -1.0) {
        return Err(invalid("gamma bounds", "need -1 <= lo < hi"));
    }
    if !ok(cfg.delta) {
        return Err(invalid("delta bounds", "need lo < hi"));
    }
    if cfg.grid.contains(&0) {
        return Err(invalid("grid", "every axis needs at least one point"));
    }
    if !(cfg.rel_tol > 0.0) {
        return Err(invalid("rel_tol", "must be positive"));
    }
    Ok(())
}

/// Cell midpoints of `k` equal cells of `[lo, hi]`.
fn midpoints(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| lo + (i as f64 + 0.5) * (hi - lo) / k as f64)
        .collect()
}

/// Minimizes `f` with Nelder–Mead from `x0` with per-axis initial steps.
/// Returns the best vertex, its value and the number of evaluations.
fn nelder_mead<F: FnMut(&[f64; 3]) -> f64>(
    mut f: F,
    x0: [f64; 3],
    step: [f64; 3],
    max_iter: usize,
) -> ([f64; 3], f64, usize) {
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((x0, f(&x0)));
    for k in 0..3 {
        let mut x = x0;
        x[k] += step[k];
        simplex.push((x, f(&x)));
    }
    let mut evals = 4;
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[3].1);
        let size = (1..4)
            .map(|i| {
                (0..3)
                    .map(|k| (simplex[i].0[k] - simplex[0].0[k]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (worst - best).abs() <= 1e-13 * best.abs().max(1e-12) && size < 1e-9 {
            break;
        }
        let mut c = [0.0; 3];
        for v in &simplex[..3] {
            for k in 0..3 {
                c[k] += v.0[k] / 3.0;
            }
        }
        let along = |t: f64| -> [f64; 3] {
            let w = simplex[3].0;
            [
                c[0] + t * (w[0] - c[0]),
                c[1] + t * (w[1] - c[1]),
                c[2] + t * (w[2] - c[2]),
            ]
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (xr, fr);
        } else {
            let xc = if fr < simplex[3].1 {
                along(-0.5)
            } else {
                along(0.5)
            };
            let fc = f(&xc);
            evals += 1;
            if fc < fr.min(simplex[3].1) {
                simplex[3] = (xc, fc);
            } else {
                let x_best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    for k in 0..3 {
                        v.0[k] = x_best[k] + 0.5 * (v.0[k] - x_best[k]);
                    }
                    v.1 = f(&v.0);
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0, simplex[0].1, evals)
}

/// Grid scan plus Nelder–Mead refinement of `SKR / DW`.
pub fn optimize_skr(t: f64, xi: f64, q: u64, cfg: &SearchConfig) -> Result<OptimizationResult> {
    check_config(cfg)?;
    derive_channel(t, xi, cfg.sigma_x2.0)?;
    log2_pow2(q)?;
    let obj = Objective { t, xi, q, cfg };

    let (lsx0, lsx1) = (cfg.sigma_x2.0.ln(), cfg.sigma_x2.1.ln());
    let sxs: Vec<f64> = midpoints(lsx0, lsx1, cfg.grid[0])
        .into_iter()
        .map(f64::exp)
        .collect();
    let gs = midpoints(cfg.gamma.0, cfg.gamma.1, cfg.grid[1]);
    let ds = midpoints(cfg.delta.0, cfg.delta.1, cfg.grid[2]);
    let mut points = Vec::with_capacity(sxs.len() * gs.len() * ds.len());
    for &sx in &sxs {
        for &g in &gs {
            for &d in &ds {
                points.push((sx, g, d));
            }
        }
    }
    let values: Vec<f64> = points
        .par_iter()
        .map(|&(sx, g, d)| obj.value(sx, g, d))
        .collect();
    let mut trace = Vec::new();
    if cfg.keep_trace {
        trace.extend(
            points
                .iter()
                .zip(&values)
                .map(|(&(sx, g, d), &v)| TracePoint {
                    sigma_x2: sx,
                    gamma: g,
                    delta: d,
                    skr_over_dw: v,
                }),
        );
    }
    // Points are ordered by sigma_X^2 first, so a strict comparison keeps
    // the smallest sigma_X^2 among ties.
    let mut best_i = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best_i] {
            best_i = i;
        }
    }
    let (sx, g, d) = points[best_i];
    let mut best = ([sx.ln(), g, d], values[best_i]);
    let mut evaluations = values.len();
    let step = [
        (lsx1 - lsx0) / cfg.grid[0] as f64,
        (cfg.gamma.1 - cfg.gamma.0) / cfg.grid[1] as f64,
        (cfg.delta.1 - cfg.delta.0) / cfg.grid[2] as f64,
    ];
    let mut rounds = 0;
    while rounds < cfg.max_rounds {
        rounds += 1;
        let (x, fx, used) = nelder_mead(
            |u| {
                let v = -obj.value(u[0].exp(), u[1], u[2]);
                if cfg.keep_trace && v.is_finite() {
                    trace.push(TracePoint {
                        sigma_x2: u[0].exp(),
                        gamma: u[1],
                        delta: u[2],
                        skr_over_dw: -v,
                    });
                }
                v
            },
            best.0,
            step,
            2000,
        );
        evaluations += used;
        let improved = -fx - best.1;
        if -fx > best.1 {
            best = (x, -fx);
        }
        if rounds > 1 && improved <= cfg.rel_tol * best.1.abs() {
            break;
        }
    }

    let [lsx, g, d] = best.0;
    let point = evaluate(t, xi, q, lsx.exp(), g, d)?;
    let mut boundary_hits = Vec::new();
    let near = |v: f64, (lo, hi): (f64, f64)| -> Option<&'static str> {
        let tol = 1e-4 * (hi - lo);
        if v - lo <= tol {
            Some("lower")
        } else if hi - v <= tol {
            Some("upper")
        } else {
            None
        }
    };
    for (name, v, b) in [
        ("sigma_x2", lsx, (lsx0, lsx1)),
        ("gamma", g, cfg.gamma),
        ("delta", d, cfg.delta),
    ] {
        if let Some(side) = near(v, b) {
            boundary_hits.push(format!("{name}:{side}"));
        }
    }
    Ok(OptimizationResult {
        skr: point.rates.skr,
        skr_over_dw: point.rates.skr_over_dw,
        best: point,
        evaluations,
        rounds,
        boundary_hits,
        trace,
        landscape: None,
    })
}

/// One row of the reproduced optimum table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub q: u64,
    pub sigma_x2: f64,
    pub gamma: f64,
    pub delta: f64,
    pub skr_over_dw: f64,
    pub p_acc: f64,
    pub sigma: f64,
    pub skr_over_delta_i: f64,
}

/// Codebook sizes of the reference table.
pub const TABLE2_Q: [u64; 5] = [1 << 5, 1 << 10, 1 << 15, 1 << 20, 1 << 30];

/// Optimizes every `q` in turn.
pub fn table2(t: f64, xi: f64, qs: &[u64], cfg: &SearchConfig) -> Result<Vec<Table2Row>> {
    qs.iter()
        .map(|&q| {
            let r = optimize_skr(t, xi, q, cfg)?;
            let b = &r.best;
            Ok(Table2Row {
                q,
                sigma_x2: b.sigma_x2,
                gamma: b.gamma,
                delta: b.delta,
                skr_over_dw: b.rates.skr_over_dw,
                p_acc: b.p_acc,
                sigma: b.ser,
                skr_over_delta_i: b.rates.skr_over_delta_i,
            })
        })
        .collect()
}

/// `SKR / DW` on a `(gamma, delta)` grid at fixed `sigma_X^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Landscape {
    pub sigma_x2: f64,
    pub gammas: Vec<f64>,
    pub deltas: Vec<f64>,
    /// `values[i][j]` is at `(gammas[i], deltas[j])`; NaN where undefined.
    pub values: Vec<Vec<f64>>,
}

impl Landscape {
    /// Largest value and its `(gamma, delta)`.
    pub fn max(&self) -> Option<(f64, f64, f64)> {
        let mut best: Option<(f64, f64, f64)> = None;
        for (i, row) in self.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v.is_finite() && best.is_none_or(|b| v > b.0) {
                    best = Some((v, self.gammas[i], self.deltas[j]));
                }
            }
        }
        best
    }

    /// Row-major CSV: header `gamma\delta,<deltas...>`, then one row per gamma.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma\\delta");
        for d in &self.deltas {
            out.push_str(&format!(",{d}"));
        }
        out.push('\n');
        for (g, row) in self.gammas.iter().zip(&self.values) {
            out.push_str(&g.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect()
}

/// Evaluates `SKR / DW` on a `resolution.0 x resolution.1` grid including
/// the range endpoints.
pub fn landscape_slice(
    t: f64,
    xi: f64,
    q: u64,
    sigma_x2: f64,
    gamma_range: (f64, f64),
    delta_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<Landscape> {
    if resolution.0 == 0 || resolution.1 == 0 {
        return Err(invalid("resolution", "must be positive"));
    }
    derive_channel(t, xi, sigma_x2)?;
    log2_pow2(q)?;
    let gammas = linspace(gamma_range.0, gamma_range.1, resolution.0);
    let deltas = linspace(delta_range.0, delta_range.1, resolution.1);
    let values = gammas
        .par_iter()
        .map(|&g| {
            deltas
                .iter()
                .map(|&d| match evaluate(t, xi, q, sigma_x2, g, d) {
                    Ok(p) => p.rates.skr_over_dw,
                    Err(_) => f64::NAN,
                })
                .collect()
        })
        .collect();
    Ok(Landscape {
        sigma_x2,
        gammas,
        deltas,
        values,
    })
}
