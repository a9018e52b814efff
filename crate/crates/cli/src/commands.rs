//! Command bodies.  Each returns the rendered output.

use std::path::PathBuf;
use std::time::Instant;

use randcode::analytics::{
    devetak_winter, error_probs, leakage_ey, leakage_ey_approx, mutual_info_xy,
};
use randcode::channel::score_offset;
use randcode::codebook::Expander;
use randcode::decoder::DecoderOptions;
use randcode::optimizer::{self, landscape_slice, optimize_skr, SearchConfig};
use randcode::protocol::{
    run_gaussian_model, run_session, score_histogram, ScoreKernel, SessionConfig, Variant,
};
use randcode::{derive_channel, derive_operating_point};
use serde::Serialize;

use crate::output::{self, Format, Row};
use crate::{CliError, ExpanderArg, KernelArg, Settings, VariantArg};

/// Loss of the fibre in the distance sweep.
pub const LOSS_DB_PER_KM: f64 = 0.2;

/// Transmittance at which the distance sweep takes its key ratio.  The
/// ratio is flat in `T` once `T` is small.
pub const RATE_REFERENCE_T: f64 = 1e-6;

/// Transmittance after `km` of fibre.
pub fn transmittance_at(km: f64) -> f64 {
    10f64.powf(-LOSS_DB_PER_KM * km / 10.0)
}

fn config(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeRow {
    pub q: u64,
    #[serde(rename = "T")]
    pub t: f64,
    pub xi: f64,
    pub sigma_x2: f64,
    pub gamma: f64,
    pub delta: f64,
    pub theta: f64,
    pub n_real: f64,
    pub p_acc: f64,
    pub ser: f64,
    pub ber: f64,
    pub i_xy: f64,
    pub i_ey: f64,
    pub delta_i: f64,
    pub dw: f64,
    pub skr: f64,
    pub skr_over_dw: f64,
    pub skr_over_delta_i: f64,
    pub evaluations: usize,
    pub rounds: usize,
    /// Semicolon-separated names of active search bounds.
    pub boundary_hits: String,
}

impl Row for OptimizeRow {
    const HEADER: &'static [&'static str] = &[
        "q",
        "T",
        "xi",
        "sigma_x2",
        "gamma",
        "delta",
        "theta",
        "n_real",
        "p_acc",
        "ser",
        "ber",
        "i_xy",
        "i_ey",
        "delta_i",
        "dw",
        "skr",
        "skr_over_dw",
        "skr_over_delta_i",
        "evaluations",
        "rounds",
        "boundary_hits",
    ];
}

pub fn optimize(s: &Settings, f: Format, trace: bool) -> Result<Vec<u8>, CliError> {
    let t = s.t.unwrap_or(1e-6);
    let xi = s.xi.unwrap_or(1e-5);
    let q = s.q.unwrap_or(1 << 15);
    let cfg = SearchConfig {
        keep_trace: trace,
        ..SearchConfig::default()
    };
    let r = optimize_skr(t, xi, q, &cfg)?;
    let b = &r.best;
    let row = OptimizeRow {
        q,
        t,
        xi,
        sigma_x2: b.sigma_x2,
        gamma: b.gamma,
        delta: b.delta,
        theta: b.theta,
        n_real: b.n_real,
        p_acc: b.p_acc,
        ser: b.ser,
        ber: b.ber,
        i_xy: b.rates.i_xy,
        i_ey: b.rates.i_ey,
        delta_i: b.rates.delta_i,
        dw: b.rates.dw,
        skr: b.rates.skr,
        skr_over_dw: b.rates.skr_over_dw,
        skr_over_delta_i: b.rates.skr_over_delta_i,
        evaluations: r.evaluations,
        rounds: r.rounds,
        boundary_hits: r.boundary_hits.join(";"),
    };
    match f {
        Format::Csv => output::csv(&[row]),
        Format::Json if trace => {
            #[derive(Serialize)]
            struct WithTrace<'a> {
                #[serde(flatten)]
                row: &'a OptimizeRow,
                trace: &'a [optimizer::TracePoint],
            }
            output::json(&WithTrace {
                row: &row,
                trace: &r.trace,
            })
        }
        Format::Json => output::json(&row),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Line {
    pub q: u64,
    pub sigma_x2: f64,
    pub gamma: f64,
    pub delta: f64,
    pub skr_over_dw: f64,
    pub p_acc: f64,
    pub sigma: f64,
    pub skr_over_delta_i: f64,
}

impl Row for Table2Line {
    const HEADER: &'static [&'static str] = &[
        "q",
        "sigma_x2",
        "gamma",
        "delta",
        "skr_over_dw",
        "p_acc",
        "sigma",
        "skr_over_delta_i",
    ];
}

/// Optimum per codebook size at `T = 1e-6`, `xi = 1e-5` unless overridden.
pub fn table2_rows(s: &Settings, qs: &[u64]) -> Result<Vec<Table2Line>, CliError> {
    let t = s.t.unwrap_or(1e-6);
    let xi = s.xi.unwrap_or(1e-5);
    Ok(optimizer::table2(t, xi, qs, &SearchConfig::default())?
        .into_iter()
        .map(|r| Table2Line {
            q: r.q,
            sigma_x2: r.sigma_x2,
            gamma: r.gamma,
            delta: r.delta,
            skr_over_dw: r.skr_over_dw,
            p_acc: r.p_acc,
            sigma: r.sigma,
            skr_over_delta_i: r.skr_over_delta_i,
        })
        .collect())
}

pub fn table2(s: &Settings, f: Format, qs: &[u64]) -> Result<Vec<u8>, CliError> {
    output::table(&table2_rows(s, qs)?, f)
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub variant: VariantArg,
    pub expander: ExpanderArg,
    pub kernel: KernelArg,
    pub prune: bool,
    pub scores: bool,
    pub model: bool,
    pub records: Option<PathBuf>,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateRow {
    pub q: u64,
    pub n: usize,
    pub b: u8,
    pub blocks: usize,
    pub seed: u64,
    pub variant: String,
    pub kernel: String,
    pub pruning: bool,
    pub n_acc: usize,
    pub symbol_errors: usize,
    pub p_acc: f64,
    pub ser: f64,
    pub p_acc_analytic: f64,
    pub ser_analytic: f64,
    pub mul_accumulate: u64,
    pub rows_pruned: u64,
    pub raw_bits: f64,
    pub otp_nacc: f64,
    pub otp_alpha: f64,
    pub otp_syndrome: f64,
    pub otp_final_bit: f64,
    pub leakage_budget: f64,
    pub net_key: f64,
    pub skr_finite: f64,
    pub true_mean: Option<f64>,
    pub true_var: Option<f64>,
    pub fake_mean: Option<f64>,
    pub fake_var: Option<f64>,
}

impl Row for SimulateRow {
    const HEADER: &'static [&'static str] = &[
        "q",
        "n",
        "b",
        "blocks",
        "seed",
        "variant",
        "kernel",
        "pruning",
        "n_acc",
        "symbol_errors",
        "p_acc",
        "ser",
        "p_acc_analytic",
        "ser_analytic",
        "mul_accumulate",
        "rows_pruned",
        "raw_bits",
        "otp_nacc",
        "otp_alpha",
        "otp_syndrome",
        "otp_final_bit",
        "leakage_budget",
        "net_key",
        "skr_finite",
        "true_mean",
        "true_var",
        "fake_mean",
        "fake_var",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRow {
    pub q: u64,
    pub gamma: f64,
    pub delta: f64,
    pub blocks: u64,
    pub seed: u64,
    pub true_accepts: u64,
    pub false_accepts: u64,
    pub p_ta: f64,
    pub p_fa: f64,
    pub p_acc: f64,
    pub ser: f64,
    pub p_ta_analytic: f64,
    pub p_fa_analytic: f64,
    pub p_acc_analytic: f64,
    pub ser_analytic: f64,
}

impl Row for ModelRow {
    const HEADER: &'static [&'static str] = &[
        "q",
        "gamma",
        "delta",
        "blocks",
        "seed",
        "true_accepts",
        "false_accepts",
        "p_ta",
        "p_fa",
        "p_acc",
        "ser",
        "p_ta_analytic",
        "p_fa_analytic",
        "p_acc_analytic",
        "ser_analytic",
    ];
}

fn single<T: Row>(row: T, f: Format) -> Result<Vec<u8>, CliError> {
    match f {
        Format::Csv => output::csv(&[row]),
        Format::Json => output::json(&row),
    }
}

/// Desk-scale defaults: the `q = 2^5` optimum on a `T = 1e-2` channel.
struct Desk {
    t: f64,
    xi: f64,
    q: u64,
    sigma_x2: f64,
    gamma: f64,
    delta: f64,
    blocks: usize,
    b: u8,
    seed: u64,
}

impl Desk {
    fn resolve(s: &Settings, base: Desk) -> Desk {
        Desk {
            t: s.t.unwrap_or(base.t),
            xi: s.xi.unwrap_or(base.xi),
            q: s.q.unwrap_or(base.q),
            sigma_x2: s.sigma_x2.unwrap_or(base.sigma_x2),
            gamma: s.gamma.unwrap_or(base.gamma),
            delta: s.delta.unwrap_or(base.delta),
            blocks: s.blocks.unwrap_or(base.blocks),
            b: s.b.unwrap_or(base.b),
            seed: s.seed.unwrap_or(base.seed),
        }
    }
}

const SIMULATE_DEFAULTS: Desk = Desk {
    t: 1e-2,
    xi: 0.0,
    q: 32,
    sigma_x2: 0.095,
    gamma: -0.45,
    delta: -0.78,
    blocks: 2000,
    b: 8,
    seed: 1,
};

pub fn simulate(s: &Settings, f: Format, o: &SimulateOptions) -> Result<Vec<u8>, CliError> {
    let d = Desk::resolve(s, SIMULATE_DEFAULTS);
    if o.model {
        let m = run_gaussian_model(d.q, d.gamma, d.delta, d.blocks as u64, d.seed)?;
        let a = error_probs(d.q, d.gamma, d.delta)?;
        return single(
            ModelRow {
                q: d.q,
                gamma: d.gamma,
                delta: d.delta,
                blocks: m.blocks,
                seed: d.seed,
                true_accepts: m.true_accepts,
                false_accepts: m.false_accepts,
                p_ta: m.p_ta,
                p_fa: m.p_fa,
                p_acc: m.p_acc,
                ser: m.ser,
                p_ta_analytic: a.p_ta,
                p_fa_analytic: a.p_fa,
                p_acc_analytic: a.p_acc,
                ser_analytic: a.ser,
            },
            f,
        );
    }

    let params = derive_channel(d.t, d.xi, d.sigma_x2)?;
    let op = derive_operating_point(&params, d.q, d.gamma, d.delta)?;
    let mut cfg = SessionConfig::new(params, op, d.blocks, d.seed);
    cfg.b = d.b;
    cfg.budget = o.budget;
    cfg.variant = match (o.variant, o.expander) {
        (VariantArg::TrueRandom, _) => Variant::TrueRandom,
        (VariantArg::Pseudorandom, ExpanderArg::Chacha8) => {
            Variant::Pseudorandom(Expander::ChaCha8)
        }
        (VariantArg::Pseudorandom, ExpanderArg::Chacha20) => {
            Variant::Pseudorandom(Expander::ChaCha20)
        }
    };
    cfg.kernel = match o.kernel {
        KernelArg::Exact => ScoreKernel::Exact,
        KernelArg::Lut => ScoreKernel::Lut,
    };
    if o.prune {
        cfg.decoder = DecoderOptions {
            parallel: false,
            ..DecoderOptions::pruned()
        };
    }
    cfg.collect_scores = o.scores;
    cfg.record_blocks = o.records.is_some();
    let r = run_session(&cfg)?;
    if let Some(path) = &o.records {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        r.write_records(&mut file)?;
        std::io::Write::flush(&mut file)?;
    }
    let a = error_probs(d.q, d.gamma, d.delta)?;
    let l = &r.ledger;
    let sc = r.scores.as_ref();
    single(
        SimulateRow {
            q: d.q,
            n: r.n,
            b: d.b,
            blocks: r.blocks,
            seed: d.seed,
            variant: variant_name(cfg.variant),
            kernel: match cfg.kernel {
                ScoreKernel::Exact => "exact".into(),
                ScoreKernel::Lut => "lut".into(),
            },
            pruning: o.prune,
            n_acc: r.n_acc,
            symbol_errors: r.symbol_errors,
            p_acc: r.p_acc,
            ser: r.ser,
            p_acc_analytic: a.p_acc,
            ser_analytic: a.ser,
            mul_accumulate: r.mul_accumulate,
            rows_pruned: r.rows_pruned,
            raw_bits: l.raw_bits,
            otp_nacc: l.otp_nacc,
            otp_alpha: l.otp_alpha,
            otp_syndrome: l.otp_syndrome,
            otp_final_bit: l.otp_final_bit,
            leakage_budget: l.leakage_budget,
            net_key: l.net_key,
            skr_finite: l.skr_finite,
            true_mean: sc.map(|s| s.true_mean),
            true_var: sc.map(|s| s.true_var),
            fake_mean: sc.map(|s| s.fake_mean),
            fake_var: sc.map(|s| s.fake_var),
        },
        f,
    )
}

fn variant_name(v: Variant) -> String {
    match v {
        Variant::TrueRandom => "true-random".into(),
        Variant::Pseudorandom(Expander::ChaCha8) => "pseudorandom-chacha8".into(),
        Variant::Pseudorandom(Expander::ChaCha20) => "pseudorandom-chacha20".into(),
        Variant::Pseudorandom(Expander::Zero) => "pseudorandom-zero".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub fake_count: u64,
    pub true_count: u64,
    pub fake_density: f64,
    pub true_density: f64,
    /// Standard normal density at the center.
    pub fake_model: f64,
    /// Unit-variance normal density around the mean true score.
    pub true_model: f64,
}

impl Row for HistogramBin {
    const HEADER: &'static [&'static str] = &[
        "lo",
        "hi",
        "center",
        "fake_count",
        "true_count",
        "fake_density",
        "true_density",
        "fake_model",
        "true_model",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreDistReport {
    pub q: u64,
    pub gamma: f64,
    pub n: usize,
    pub blocks: usize,
    pub seed: u64,
    /// `sqrt(2 ln q / (1 + gamma))`.
    pub mu: f64,
    pub true_mean: f64,
    pub true_var: f64,
    pub fake_mean: f64,
    pub fake_var: f64,
    pub mean_gap: f64,
    /// Distance between the fullest bins; `None` with no samples.
    pub mode_gap: Option<f64>,
    pub true_outside: u64,
    pub fake_outside: u64,
    pub bins: Vec<HistogramBin>,
}

const SCORE_DIST_DEFAULTS: Desk = Desk {
    t: 1e-2,
    xi: 0.0,
    q: 1 << 10,
    sigma_x2: 0.21,
    gamma: -0.28,
    delta: -0.50,
    blocks: 200,
    b: 8,
    seed: 1,
};

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn score_dist_report(
    s: &Settings,
    bins: usize,
    range: (f64, f64),
    budget: f64,
) -> Result<ScoreDistReport, CliError> {
    let d = Desk::resolve(s, SCORE_DIST_DEFAULTS);
    let params = derive_channel(d.t, d.xi, d.sigma_x2)?;
    let op = derive_operating_point(&params, d.q, d.gamma, d.delta)?;
    let work = op.n as f64 * op.q as f64 * d.blocks as f64;
    if work > budget {
        return Err(randcode::Error::BudgetExceeded {
            required: work,
            budget,
        }
        .into());
    }
    let h = score_histogram(&params, &op, d.blocks, d.seed, range, bins)?;
    let mu = score_offset(d.q, d.gamma);
    let w = h.width();
    let density = |c: u64, total: u64| {
        if total == 0 {
            0.0
        } else {
            c as f64 / (total as f64 * w)
        }
    };
    let t_total = h.true_counts.iter().sum::<u64>() + h.true_outside;
    let f_total = h.fake_counts.iter().sum::<u64>() + h.fake_outside;
    let rows = (0..h.bins())
        .map(|i| {
            let lo = h.lo + i as f64 * w;
            let center = lo + 0.5 * w;
            HistogramBin {
                lo,
                hi: lo + w,
                center,
                fake_count: h.fake_counts[i],
                true_count: h.true_counts[i],
                fake_density: density(h.fake_counts[i], f_total),
                true_density: density(h.true_counts[i], t_total),
                fake_model: normal_pdf(center),
                true_model: normal_pdf(center - mu),
            }
        })
        .collect();
    let (tm, fm) = h.modes();
    Ok(ScoreDistReport {
        q: d.q,
        gamma: d.gamma,
        n: op.n,
        blocks: d.blocks,
        seed: d.seed,
        mu,
        true_mean: h.true_moments.0,
        true_var: h.true_moments.1,
        fake_mean: h.fake_moments.0,
        fake_var: h.fake_moments.1,
        mean_gap: h.true_moments.0 - h.fake_moments.0,
        mode_gap: tm.zip(fm).map(|(t, f)| t - f),
        true_outside: h.true_outside,
        fake_outside: h.fake_outside,
        bins: rows,
    })
}

pub fn score_dist(
    s: &Settings,
    f: Format,
    bins: usize,
    range: (f64, f64),
    budget: f64,
) -> Result<Vec<u8>, CliError> {
    let r = score_dist_report(s, bins, range, budget)?;
    match f {
        Format::Csv => output::csv(&r.bins),
        Format::Json => output::json(&r),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakageRow {
    pub sigma_x2: f64,
    pub i_xy_over_t: f64,
    pub i_ey_over_t: f64,
    pub i_ey_approx_over_t: f64,
    /// `I(E;Y) / I(X;Y)`.
    pub ratio: f64,
    pub delta_i_over_dw: f64,
}

impl Row for LeakageRow {
    const HEADER: &'static [&'static str] = &[
        "sigma_x2",
        "i_xy_over_t",
        "i_ey_over_t",
        "i_ey_approx_over_t",
        "ratio",
        "delta_i_over_dw",
    ];
}

pub fn leakage_rows(
    s: &Settings,
    from: f64,
    to: f64,
    points: usize,
) -> Result<Vec<LeakageRow>, CliError> {
    if !(from > 0.0) || !(to >= from) || !to.is_finite() {
        return Err(config(format!("need 0 < from <= to, got {from}, {to}")));
    }
    if points == 0 {
        return Ok(Vec::new());
    }
    let t = s.t.unwrap_or(1e-6);
    let xi = s.xi.unwrap_or(1e-5);
    let dw = devetak_winter(t)?;
    (0..points)
        .map(|i| {
            let frac = if points == 1 {
                0.0
            } else {
                i as f64 / (points - 1) as f64
            };
            let sx = (from.ln() + frac * (to.ln() - from.ln())).exp();
            let p = derive_channel(t, xi, sx)?;
            let ixy = mutual_info_xy(&p);
            let iey = leakage_ey(&p)?;
            Ok(LeakageRow {
                sigma_x2: sx,
                i_xy_over_t: ixy / t,
                i_ey_over_t: iey / t,
                i_ey_approx_over_t: leakage_ey_approx(&p) / t,
                ratio: iey / ixy,
                delta_i_over_dw: (ixy - iey) / dw,
            })
        })
        .collect()
}

pub fn leakage_fig1(
    s: &Settings,
    f: Format,
    from: f64,
    to: f64,
    points: usize,
) -> Result<Vec<u8>, CliError> {
    output::table(&leakage_rows(s, from, to, points)?, f)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub km: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub dw: f64,
    pub skr_over_dw: f64,
    pub key_rate_bps: f64,
}

impl Row for RateRow {
    const HEADER: &'static [&'static str] = &["km", "T", "dw", "skr_over_dw", "key_rate_bps"];
}

/// Key bits per second against distance.  The key ratio is the optimum at
/// [`RATE_REFERENCE_T`] with excess noise `xi` (default 0); `DW` is the
/// low-transmittance value `T / (2 ln 2)` throughout.
pub fn rate_rows(
    s: &Settings,
    max_km: f64,
    step_km: f64,
    pulse_rate: f64,
) -> Result<Vec<RateRow>, CliError> {
    if !(max_km >= 0.0) || !max_km.is_finite() {
        return Err(config(format!(
            "max-km must be a non-negative number, got {max_km}"
        )));
    }
    if !(step_km > 0.0) || !step_km.is_finite() {
        return Err(config(format!("step-km must be positive, got {step_km}")));
    }
    if !(pulse_rate > 0.0) || !pulse_rate.is_finite() {
        return Err(config(format!(
            "pulse-rate must be positive, got {pulse_rate}"
        )));
    }
    let q = s.q.unwrap_or(1 << 15);
    let xi = s.xi.unwrap_or(0.0);
    let ratio = optimize_skr(RATE_REFERENCE_T, xi, q, &SearchConfig::default())?.skr_over_dw;
    let steps = (max_km / step_km + 1e-9).floor() as usize;
    (0..=steps)
        .map(|i| {
            let km = i as f64 * step_km;
            let t = transmittance_at(km);
            let dw = devetak_winter(t)?;
            Ok(RateRow {
                km,
                t,
                dw,
                skr_over_dw: ratio,
                key_rate_bps: ratio * dw * pulse_rate,
            })
        })
        .collect()
}

pub fn rate_fig4(
    s: &Settings,
    f: Format,
    max_km: f64,
    step_km: f64,
    pulse_rate: f64,
) -> Result<Vec<u8>, CliError> {
    output::table(&rate_rows(s, max_km, step_km, pulse_rate)?, f)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeRow {
    pub gamma: f64,
    pub delta: f64,
    /// NaN where the key ratio is undefined.
    pub skr_over_dw: f64,
}

impl Row for LandscapeRow {
    const HEADER: &'static [&'static str] = &["gamma", "delta", "skr_over_dw"];
}

pub fn landscape(
    s: &Settings,
    f: Format,
    gamma_range: (f64, f64),
    delta_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<Vec<u8>, CliError> {
    let t = s.t.unwrap_or(1e-6);
    let xi = s.xi.unwrap_or(1e-5);
    let q = s.q.unwrap_or(1 << 10);
    let sx = s.sigma_x2.unwrap_or(0.21);
    let l = landscape_slice(t, xi, q, sx, gamma_range, delta_range, resolution)?;
    match f {
        Format::Csv => {
            let rows: Vec<LandscapeRow> = l
                .gammas
                .iter()
                .zip(&l.values)
                .flat_map(|(&g, vals)| {
                    l.deltas.iter().zip(vals).map(move |(&d, &v)| LandscapeRow {
                        gamma: g,
                        delta: d,
                        skr_over_dw: v,
                    })
                })
                .collect();
            output::csv(&rows)
        }
        Format::Json => output::json(&l),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub q: u64,
    pub n: usize,
    pub b: u8,
    pub blocks: usize,
    pub kernel: String,
    pub pruning: bool,
    /// Seconds.
    pub wall_time: f64,
    pub mul_accumulate_count: u64,
    pub rows_pruned: u64,
    #[serde(rename = "P_acc_empirical")]
    pub p_acc_empirical: f64,
    #[serde(rename = "SER_empirical")]
    pub ser_empirical: f64,
    pub mul_accumulate_per_pulse: f64,
    /// `P_acc q` with the analytic acceptance probability.
    pub budget_per_pulse: f64,
    pub ratio_to_budget: f64,
}

impl Row for BenchRecord {
    const HEADER: &'static [&'static str] = &[
        "q",
        "n",
        "b",
        "blocks",
        "kernel",
        "pruning",
        "wall_time",
        "mul_accumulate_count",
        "rows_pruned",
        "P_acc_empirical",
        "SER_empirical",
        "mul_accumulate_per_pulse",
        "budget_per_pulse",
        "ratio_to_budget",
    ];
}

const BENCH_DEFAULTS: Desk = Desk {
    t: 1e-2,
    xi: 0.0,
    q: 1 << 15,
    sigma_x2: 0.31,
    gamma: -0.21,
    delta: -0.40,
    blocks: 8,
    b: 8,
    seed: 1,
};

/// Times the decoder with early abort, with pruning and optionally with the
/// lookup-table kernel on the same blocks.
pub fn bench_records(s: &Settings, lut: bool, budget: f64) -> Result<Vec<BenchRecord>, CliError> {
    let d = Desk::resolve(s, BENCH_DEFAULTS);
    let params = derive_channel(d.t, d.xi, d.sigma_x2)?;
    let op = derive_operating_point(&params, d.q, d.gamma, d.delta)?;
    let analytic = error_probs(d.q, d.gamma, d.delta)?;
    let serial = DecoderOptions {
        parallel: false,
        ..DecoderOptions::default()
    };
    let mut runs = vec![
        (ScoreKernel::Exact, false, serial.clone()),
        (
            ScoreKernel::Exact,
            true,
            DecoderOptions {
                parallel: false,
                ..DecoderOptions::pruned()
            },
        ),
    ];
    if lut {
        runs.push((ScoreKernel::Lut, false, serial));
    }
    let mut out = Vec::new();
    for (kernel, pruning, decoder) in runs {
        let mut cfg = SessionConfig::new(params, op, d.blocks, d.seed);
        cfg.b = d.b;
        cfg.budget = budget;
        cfg.kernel = kernel;
        cfg.decoder = decoder;
        let start = Instant::now();
        let r = run_session(&cfg)?;
        let wall = start.elapsed().as_secs_f64();
        let per_pulse = r.mul_accumulate as f64 / (r.blocks * r.n) as f64;
        let budget_per_pulse = analytic.p_acc * d.q as f64;
        out.push(BenchRecord {
            q: d.q,
            n: r.n,
            b: d.b,
            blocks: r.blocks,
            kernel: match kernel {
                ScoreKernel::Exact => "exact".into(),
                ScoreKernel::Lut => "lut".into(),
            },
            pruning,
            wall_time: wall,
            mul_accumulate_count: r.mul_accumulate,
            rows_pruned: r.rows_pruned,
            p_acc_empirical: r.p_acc,
            ser_empirical: r.ser,
            mul_accumulate_per_pulse: per_pulse,
            budget_per_pulse,
            ratio_to_budget: per_pulse / budget_per_pulse,
        });
    }
    Ok(out)
}

pub fn bench(s: &Settings, f: Format, lut: bool, budget: f64) -> Result<Vec<u8>, CliError> {
    let recs = bench_records(s, lut, budget)?;
    match f {
        Format::Csv => output::csv(&recs),
        Format::Json => output::json_lines(&recs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_of<T: Row>(row: &T) -> Vec<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(row).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        text.lines()
            .next()
            .unwrap()
            .split(',')
            .map(String::from)
            .collect()
    }

    #[test]
    fn headers_match_field_order() {
        let t2 = Table2Line {
            q: 1,
            sigma_x2: 0.0,
            gamma: 0.0,
            delta: 0.0,
            skr_over_dw: 0.0,
            p_acc: 0.0,
            sigma: 0.0,
            skr_over_delta_i: 0.0,
        };
        assert_eq!(header_of(&t2), Table2Line::HEADER);
        let lr = LeakageRow {
            sigma_x2: 0.0,
            i_xy_over_t: 0.0,
            i_ey_over_t: 0.0,
            i_ey_approx_over_t: 0.0,
            ratio: 0.0,
            delta_i_over_dw: 0.0,
        };
        assert_eq!(header_of(&lr), LeakageRow::HEADER);
        let rr = RateRow {
            km: 0.0,
            t: 1.0,
            dw: 0.0,
            skr_over_dw: 0.0,
            key_rate_bps: 0.0,
        };
        assert_eq!(header_of(&rr), RateRow::HEADER);
        let ls = LandscapeRow {
            gamma: 0.0,
            delta: 0.0,
            skr_over_dw: 0.0,
        };
        assert_eq!(header_of(&ls), LandscapeRow::HEADER);
        let hb = HistogramBin {
            lo: 0.0,
            hi: 0.0,
            center: 0.0,
            fake_count: 0,
            true_count: 0,
            fake_density: 0.0,
            true_density: 0.0,
            fake_model: 0.0,
            true_model: 0.0,
        };
        assert_eq!(header_of(&hb), HistogramBin::HEADER);
        let br = BenchRecord {
            q: 0,
            n: 0,
            b: 0,
            blocks: 0,
            kernel: String::new(),
            pruning: false,
            wall_time: 0.0,
            mul_accumulate_count: 0,
            rows_pruned: 0,
            p_acc_empirical: 0.0,
            ser_empirical: 0.0,
            mul_accumulate_per_pulse: 0.0,
            budget_per_pulse: 0.0,
            ratio_to_budget: 0.0,
        };
        assert_eq!(header_of(&br), BenchRecord::HEADER);
        let mr = ModelRow {
            q: 0,
            gamma: 0.0,
            delta: 0.0,
            blocks: 0,
            seed: 0,
            true_accepts: 0,
            false_accepts: 0,
            p_ta: 0.0,
            p_fa: 0.0,
            p_acc: 0.0,
            ser: 0.0,
            p_ta_analytic: 0.0,
            p_fa_analytic: 0.0,
            p_acc_analytic: 0.0,
            ser_analytic: 0.0,
        };
        assert_eq!(header_of(&mr), ModelRow::HEADER);
    }

    #[test]
    fn wide_headers_match_field_order() {
        let o = OptimizeRow {
            q: 0,
            t: 0.0,
            xi: 0.0,
            sigma_x2: 0.0,
            gamma: 0.0,
            delta: 0.0,
            theta: 0.0,
            n_real: 0.0,
            p_acc: 0.0,
            ser: 0.0,
            ber: 0.0,
            i_xy: 0.0,
            i_ey: 0.0,
            delta_i: 0.0,
            dw: 0.0,
            skr: 0.0,
            skr_over_dw: 0.0,
            skr_over_delta_i: 0.0,
            evaluations: 0,
            rounds: 0,
            boundary_hits: String::new(),
        };
        assert_eq!(header_of(&o), OptimizeRow::HEADER);
        let sr = SimulateRow {
            q: 0,
            n: 0,
            b: 0,
            blocks: 0,
            seed: 0,
            variant: String::new(),
            kernel: String::new(),
            pruning: false,
            n_acc: 0,
            symbol_errors: 0,
            p_acc: 0.0,
            ser: 0.0,
            p_acc_analytic: 0.0,
            ser_analytic: 0.0,
            mul_accumulate: 0,
            rows_pruned: 0,
            raw_bits: 0.0,
            otp_nacc: 0.0,
            otp_alpha: 0.0,
            otp_syndrome: 0.0,
            otp_final_bit: 0.0,
            leakage_budget: 0.0,
            net_key: 0.0,
            skr_finite: 0.0,
            true_mean: Some(0.0),
            true_var: None,
            fake_mean: None,
            fake_var: None,
        };
        assert_eq!(header_of(&sr), SimulateRow::HEADER);
    }

    #[test]
    fn fibre_loss() {
        assert_eq!(transmittance_at(0.0), 1.0);
        assert!((transmittance_at(300.0) - 1e-6).abs() < 1e-18);
        assert!((transmittance_at(50.0) - 0.1).abs() < 1e-15);
    }
}
