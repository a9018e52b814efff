//! Monte-Carlo session: `N` blocks of sample, hide, decode, plus the bit
//! budget of the one-time-pad traffic.
//!
//! Both sides are simulated in one process; the harness compares Alice's
//! winner with Bob's hidden index to count symbol errors.  Encrypted messages
//! are represented by their lengths only.  The outer error-correcting code is
//! not instantiated: its syndrome costs `h(BER) log2 q` bits per accepted
//! block and it is assumed to correct every residual symbol error.  The seed
//! sent with the pseudorandom variant is public and, as in the key-ratio
//! formula, not deducted.
//!
//! Block `r` draws from ChaCha8 streams `(seed, r, purpose)` (see
//! [`crate::rng`]), so results do not depend on scheduling.

use std::io::Write;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{error_probs, leakage_ey};
use crate::channel::{sample_block_with, BlockSample, ChannelParams, OperatingPoint};
use crate::codebook::{build_random_table_with, pr_encode, quantize, Expander};
use crate::decoder::{
    decode_block, score_all, DecoderOptions, Kernel, QuantizedRows, Reason, RowProvider,
};
use crate::error::{invalid, Error, Result};
use crate::rng::{self, Purpose};
use crate::scalar::Real;
use crate::scoring::{score_lut_build, ScoreContext};
use crate::special::binary_entropy;

/// How Bob builds the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `q - 1` fresh Gaussian fakes per block.
    TrueRandom,
    /// Quantized `y` masked with a keystream row.
    Pseudorandom(Expander),
}

/// How Alice evaluates scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKernel {
    Exact,
    /// Quantized `x` and rows scored through the product table.
    Lut,
}

#[derive(Debug, Clone)]
pub struct SessionConfig<R> {
    pub params: ChannelParams<R>,
    pub op: OperatingPoint<R>,
    /// Number of blocks `N`.
    pub blocks: usize,
    pub seed: u64,
    pub variant: Variant,
    /// Bit depth for the pseudorandom variant and the LUT kernel.
    pub b: u8,
    pub kernel: ScoreKernel,
    pub decoder: DecoderOptions,
    /// Upper bound on `n * q * N`.
    pub budget: f64,
    /// Also score every row exactly to collect true/fake score moments.
    pub collect_scores: bool,
    /// Keep one record per block.
    pub record_blocks: bool,
    /// Bob measures `sqrt(T) x` without noise.
    pub noiseless: bool,
}

impl<R: Real> SessionConfig<R> {
    pub fn new(params: ChannelParams<R>, op: OperatingPoint<R>, blocks: usize, seed: u64) -> Self {
        Self {
            params,
            op,
            blocks,
            seed,
            variant: Variant::TrueRandom,
            b: crate::codebook::DEFAULT_BITS,
            kernel: ScoreKernel::Exact,
            decoder: DecoderOptions {
                parallel: false,
                ..DecoderOptions::default()
            },
            budget: DEFAULT_BUDGET,
            collect_scores: false,
            record_blocks: false,
            noiseless: false,
        }
    }
}

/// Default cap on `n * q * N`.
pub const DEFAULT_BUDGET: f64 = 5e10;

/// Bit accounting for a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyBudgetLedger {
    /// `N_acc log2 q`.
    pub raw_bits: f64,
    /// `log2 N`, to send `N_acc`.
    pub otp_nacc: f64,
    /// `log2 C(N, N_acc)`, to send the compressed accept string.
    pub otp_alpha: f64,
    /// `h(BER) N_acc log2 q` with the analytic BER.
    pub otp_syndrome: f64,
    pub otp_final_bit: f64,
    /// `N_acc n I(E;Y)`.
    pub leakage_budget: f64,
    pub net_key: f64,
    /// `net_key / (N n)`.
    pub skr_finite: f64,
}

impl KeyBudgetLedger {
    pub fn compute(
        blocks: u64,
        n_acc: u64,
        log2_q: u32,
        n: usize,
        ber: f64,
        i_ey: f64,
    ) -> Result<Self> {
        if blocks == 0 || n_acc > blocks {
            return Err(invalid("n_acc", "need 0 <= N_acc <= N with N >= 1"));
        }
        let acc = n_acc as f64;
        let lq = log2_q as f64;
        let raw_bits = acc * lq;
        let otp_nacc = (blocks as f64).log2();
        let otp_alpha = exact_log_binomial(blocks, n_acc)?;
        let otp_syndrome = binary_entropy(ber) * acc * lq;
        let otp_final_bit = 1.0;
        let leakage_budget = acc * n as f64 * i_ey;
        let net_key =
            raw_bits - (otp_nacc + otp_alpha + otp_syndrome + otp_final_bit + leakage_budget);
        Ok(Self {
            raw_bits,
            otp_nacc,
            otp_alpha,
            otp_syndrome,
            otp_final_bit,
            leakage_budget,
            net_key,
            skr_finite: net_key / (blocks as f64 * n as f64),
        })
    }
}

/// `ln(n!) - ((n + 1/2) ln n - n + ln(2 pi) / 2)` for `n >= 16`.
fn stirling_err(n: f64) -> f64 {
    let r = 1.0 / (n * n);
    (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r * (1.0 / 1680.0 - r / 1188.0)))) / n
}

/// `log2 C(N, k)` to about 1e-14 relative.
///
/// Small `min(k, N - k)` sums `log2((N - k + i) / i)` directly.  Otherwise the
/// log-gamma difference is expanded with Stirling's series, where the linear
/// terms cancel exactly and what remains is
/// `k ln(N/k) - m ln(1 - k/N) + ln(N / (k m)) / 2 - ln(2 pi) / 2` plus the
/// series corrections, `m = N - k`.
pub fn exact_log_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(invalid("k", format!("{k} exceeds N = {n}")));
    }
    let k = k.min(n - k);
    if k == 0 {
        return Ok(0.0);
    }
    if k <= 32 {
        let base = (n - k) as f64;
        let s: f64 = (1..=k).map(|i| ((base + i as f64) / i as f64).ln()).sum();
        return Ok(s / std::f64::consts::LN_2);
    }
    let (nf, kf) = (n as f64, k as f64);
    let m = nf - kf;
    let ln = kf * (nf / kf).ln() - m * (-kf / nf).ln_1p() + 0.5 * (nf / (kf * m)).ln()
        - 0.5 * (2.0 * std::f64::consts::PI).ln()
        + stirling_err(nf)
        - stirling_err(kf)
        - stirling_err(m);
    Ok(ln / std::f64::consts::LN_2)
}

/// Harness-side record of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockRecord {
    pub block: usize,
    pub accepted: bool,
    pub reason: Reason,
    pub winner: Option<usize>,
    pub u: usize,
    pub symbol_error: bool,
    pub max_score: Option<f64>,
    pub mul_accumulate: u64,
    pub rows_pruned: usize,
    /// Exact true-row score, when scores are collected.
    pub true_score: Option<f64>,
}

/// Moments of exactly computed scores over the session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct EmpiricalScores {
    pub true_mean: f64,
    pub true_var: f64,
    pub true_count: u64,
    pub fake_mean: f64,
    pub fake_var: f64,
    pub fake_count: u64,
}

#[derive(Debug, Default, Clone, Copy)]
struct Moments {
    count: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(&mut self, o: &Moments) {
        self.count += o.count;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    fn mean_var(&self) -> (f64, f64) {
        let c = self.count as f64;
        let mean = self.sum / c;
        (mean, (self.sum_sq - c * mean * mean) / (c - 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionResult {
    pub blocks: usize,
    pub n: usize,
    pub n_acc: usize,
    /// Accept indicator string, one character per block.
    pub alpha: String,
    pub symbol_errors: usize,
    pub p_acc: f64,
    pub ser: f64,
    pub mul_accumulate: u64,
    pub rows_pruned: u64,
    pub ledger: KeyBudgetLedger,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<EmpiricalScores>,
    #[serde(skip)]
    pub records: Vec<BlockRecord>,
}

impl SessionResult {
    /// Writes the per-block records as JSON lines.
    pub fn write_records<W: Write>(&self, w: &mut W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut *w, r).map_err(|e| Error::Format {
                what: "block record",
                reason: e.to_string(),
            })?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

struct BlockRun {
    record: BlockRecord,
    true_m: Moments,
    fake_m: Moments,
}

fn run_block<R: Real>(
    cfg: &SessionConfig<R>,
    r: usize,
    lut: Option<&crate::scoring::ScoreLut>,
) -> Result<BlockRun> {
    let p = &cfg.params;
    let n = cfg.op.n;
    let q = cfg.op.q as usize;
    let mut ch = rng::stream(cfg.seed, r as u64, Purpose::Channel);
    let BlockSample { x, y } = if cfg.noiseless {
        let mut s = sample_block_with(p, n, &mut ch);
        let st = p.t.sqrt();
        for (yi, &xi) in s.y.iter_mut().zip(&s.x) {
            *yi = st * xi;
        }
        s
    } else {
        sample_block_with(p, n, &mut ch)
    };
    let ctx = ScoreContext::new(x, *p)?;
    let kernel = match (cfg.kernel, lut) {
        (ScoreKernel::Lut, Some(l)) => Kernel::Lut(l),
        _ => Kernel::Exact,
    };
    let mut cb_rng = rng::stream(cfg.seed, r as u64, Purpose::Codebook);
    let theta = cfg.op.theta;

    let decode =
        |rows: &dyn RowProvider<R>| -> Result<(crate::decoder::DecodeOutcome<R>, Option<Vec<R>>)> {
            let out = decode_block(&ctx, rows, theta, kernel, &cfg.decoder)?;
            let scores = if cfg.collect_scores {
                Some(score_all(&ctx, rows, kernel)?)
            } else {
                None
            };
            Ok((out, scores))
        };

    let (u, (out, scores)) = match cfg.variant {
        Variant::TrueRandom => {
            let table = build_random_table_with(&y, q, p.sigma_y2, &mut cb_rng)?;
            let u = table.secret_index();
            let res = if matches!(kernel, Kernel::Lut(_)) {
                decode(&QuantizedRows::new(&table, p.sigma_y2.sqrt(), cfg.b)?)?
            } else {
                decode(&table)?
            };
            (u, res)
        }
        Variant::Pseudorandom(expander) => {
            let u = cb_rng.random_range(0..q);
            let mut tau = [0u8; 32];
            rng::stream(cfg.seed, r as u64, Purpose::Seed).fill_bytes(&mut tau);
            let yq = quantize(&y, p.sigma_y2.sqrt(), cfg.b)?;
            let cb = pr_encode(&yq, u as u64, q as u64, tau, expander)?;
            (u, decode(&cb)?)
        }
    };

    let mut true_m = Moments::default();
    let mut fake_m = Moments::default();
    let mut true_score = None;
    if let Some(s) = &scores {
        for (l, v) in s.iter().enumerate() {
            let v = v.as_f64();
            if l == u {
                true_m.push(v);
                true_score = Some(v);
            } else {
                fake_m.push(v);
            }
        }
    }
    let symbol_error = out.accepted && out.winner != Some(u);
    Ok(BlockRun {
        record: BlockRecord {
            block: r,
            accepted: out.accepted,
            reason: out.reason,
            winner: out.winner,
            u,
            symbol_error,
            max_score: out.diagnostics.max_score.map(|v| v.as_f64()),
            mul_accumulate: out.diagnostics.mul_accumulate,
            rows_pruned: out.diagnostics.rows_pruned,
            true_score,
        },
        true_m,
        fake_m,
    })
}

/// Runs `N` blocks and reduces them in block order.
pub fn run_session<R: Real>(cfg: &SessionConfig<R>) -> Result<SessionResult> {
    if cfg.blocks == 0 {
        return Err(invalid("N", "need at least one block"));
    }
    let work = cfg.op.n as f64 * cfg.op.q as f64 * cfg.blocks as f64;
    if work > cfg.budget {
        return Err(Error::BudgetExceeded {
            required: work,
            budget: cfg.budget,
        });
    }
    cfg.decoder.schedule.validate()?;
    let lut = match cfg.kernel {
        ScoreKernel::Lut => Some(score_lut_build(cfg.b)?),
        ScoreKernel::Exact => None,
    };
    let runs: Vec<Result<BlockRun>> = (0..cfg.blocks)
        .into_par_iter()
        .map(|r| run_block(cfg, r, lut.as_ref()))
        .collect();

    let mut alpha = String::with_capacity(cfg.blocks);
    let mut n_acc = 0;
    let mut symbol_errors = 0;
    let mut macs = 0u64;
    let mut pruned = 0u64;
    let mut true_m = Moments::default();
    let mut fake_m = Moments::default();
    let mut records = Vec::new();
    for run in runs {
        let run = run?;
        let rec = run.record;
        alpha.push(if rec.accepted { '1' } else { '0' });
        n_acc += rec.accepted as usize;
        symbol_errors += rec.symbol_error as usize;
        macs += rec.mul_accumulate;
        pruned += rec.rows_pruned as u64;
        true_m.merge(&run.true_m);
        fake_m.merge(&run.fake_m);
        if cfg.record_blocks {
            records.push(rec);
        }
    }

    let probs = error_probs(cfg.op.q, cfg.op.gamma.as_f64(), cfg.op.delta.as_f64())?;
    let i_ey = leakage_ey(&cfg.params.cast::<f64>())?;
    let ledger = KeyBudgetLedger::compute(
        cfg.blocks as u64,
        n_acc as u64,
        cfg.op.log2_q,
        cfg.op.n,
        probs.ber,
        i_ey,
    )?;
    let scores = cfg.collect_scores.then(|| {
        let (tm, tv) = true_m.mean_var();
        let (fm, fv) = fake_m.mean_var();
        EmpiricalScores {
            true_mean: tm,
            true_var: tv,
            true_count: true_m.count,
            fake_mean: fm,
            fake_var: fv,
            fake_count: fake_m.count,
        }
    });
    Ok(SessionResult {
        blocks: cfg.blocks,
        n: cfg.op.n,
        n_acc,
        alpha,
        symbol_errors,
        p_acc: n_acc as f64 / cfg.blocks as f64,
        ser: if n_acc > 0 {
            symbol_errors as f64 / n_acc as f64
        } else {
            0.0
        },
        mul_accumulate: macs,
        rows_pruned: pruned,
        ledger,
        scores,
        records,
    })
}

/// Histogram of true and fake scores over `[lo, hi)` with equal-width bins.
/// Scores outside the range are counted in `below` / `above`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreHistogram {
    pub lo: f64,
    pub hi: f64,
    pub true_counts: Vec<u64>,
    pub fake_counts: Vec<u64>,
    pub true_outside: u64,
    pub fake_outside: u64,
    pub true_moments: (f64, f64),
    pub fake_moments: (f64, f64),
}

impl ScoreHistogram {
    pub fn bins(&self) -> usize {
        self.true_counts.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    /// Center of the fullest bin of each population, `None` when empty.
    pub fn modes(&self) -> (Option<f64>, Option<f64>) {
        let mode = |c: &[u64]| {
            let (i, &m) = c
                .iter()
                .enumerate()
                .max_by_key(|&(i, &v)| (v, std::cmp::Reverse(i)))?;
            (m > 0).then(|| self.lo + (i as f64 + 0.5) * self.width())
        };
        (mode(&self.true_counts), mode(&self.fake_counts))
    }
}

/// Scores every row of `blocks` true-random tables with the exact kernel.
///
/// Blocks use the same streams as [`run_session`], so the true scores agree
/// with a session run on the same seed.  Zero blocks give empty counts.
pub fn score_histogram(
    params: &ChannelParams<f64>,
    op: &OperatingPoint<f64>,
    blocks: usize,
    seed: u64,
    range: (f64, f64),
    bins: usize,
) -> Result<ScoreHistogram> {
    if bins == 0 {
        return Err(invalid("bins", "must be positive"));
    }
    if !(range.0 < range.1) || !range.0.is_finite() || !range.1.is_finite() {
        return Err(invalid("range", format!("need lo < hi, got {range:?}")));
    }
    let (lo, hi) = range;
    let width = (hi - lo) / bins as f64;
    let q = op.q as usize;
    let n = op.n;

    type Acc = (Vec<u64>, Vec<u64>, u64, u64, Moments, Moments);
    let empty = || -> Acc {
        (
            vec![0; bins],
            vec![0; bins],
            0,
            0,
            Moments::default(),
            Moments::default(),
        )
    };
    let block = |r: usize| -> Result<Acc> {
        let mut acc = empty();
        let mut ch = rng::stream(seed, r as u64, Purpose::Channel);
        let BlockSample { x, y } = sample_block_with(params, n, &mut ch);
        let ctx = ScoreContext::new(x, *params)?;
        let mut cb_rng = rng::stream(seed, r as u64, Purpose::Codebook);
        let table = build_random_table_with(&y, q, params.sigma_y2, &mut cb_rng)?;
        let u = table.secret_index();
        for (l, s) in score_all(&ctx, &table, Kernel::Exact)?
            .into_iter()
            .enumerate()
        {
            let (counts, outside, m) = if l == u {
                (&mut acc.0, &mut acc.2, &mut acc.4)
            } else {
                (&mut acc.1, &mut acc.3, &mut acc.5)
            };
            m.push(s);
            let k = ((s - lo) / width).floor();
            if k >= 0.0 && k < bins as f64 {
                counts[k as usize] += 1;
            } else {
                *outside += 1;
            }
        }
        Ok(acc)
    };
    let merge = |mut a: Acc, b: Acc| -> Acc {
        for (x, y) in a.0.iter_mut().zip(&b.0) {
            *x += y;
        }
        for (x, y) in a.1.iter_mut().zip(&b.1) {
            *x += y;
        }
        a.2 += b.2;
        a.3 += b.3;
        a.4.merge(&b.4);
        a.5.merge(&b.5);
        a
    };
    let runs: Vec<Result<Acc>> = (0..blocks).into_par_iter().map(block).collect();
    let mut total = empty();
    for r in runs {
        total = merge(total, r?);
    }
    Ok(ScoreHistogram {
        lo,
        hi,
        true_counts: total.0,
        fake_counts: total.1,
        true_outside: total.2,
        fake_outside: total.3,
        true_moments: total.4.mean_var(),
        fake_moments: total.5.mean_var(),
    })
}

/// Outcome counts of the Gaussian score model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelResult {
    pub blocks: u64,
    pub true_accepts: u64,
    pub false_accepts: u64,
    pub p_ta: f64,
    pub p_fa: f64,
    pub p_acc: f64,
    pub ser: f64,
}

/// Model-level simulation: per block, `q - 1` standard normal fake scores
/// and one true score `N(sqrt(2 ln q / (1 + gamma)), 1)`, thresholded at
/// `theta`.  No vectors are drawn; this checks the error-probability
/// formulas, not the decoder.
pub fn run_gaussian_model(
    q: u64,
    gamma: f64,
    delta: f64,
    blocks: u64,
    seed: u64,
) -> Result<ModelResult> {
    crate::channel::log2_pow2(q)?;
    if !(gamma > -1.0) {
        return Err(invalid("gamma", "must exceed -1"));
    }
    if blocks == 0 {
        return Err(invalid("N", "need at least one block"));
    }
    let mu = crate::channel::score_offset(q, gamma);
    let theta = mu + delta;
    let (ta, fa) = (0..blocks)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, r, Purpose::Score);
            let t: f64 = mu + rng::std_normal::<f64, _>(&mut g);
            let mut above = 0u64;
            for _ in 1..q {
                if rng::std_normal::<f64, _>(&mut g) > theta {
                    above += 1;
                }
            }
            let true_above = t > theta;
            match (true_above, above) {
                (true, 0) => (1u64, 0u64),
                (false, 1) => (0, 1),
                _ => (0, 0),
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nb = blocks as f64;
    let acc = ta + fa;
    Ok(ModelResult {
        blocks,
        true_accepts: ta,
        false_accepts: fa,
        p_ta: ta as f64 / nb,
        p_fa: fa as f64 / nb,
        p_acc: acc as f64 / nb,
        ser: if acc > 0 { fa as f64 / acc as f64 } else { 0.0 },
    })
}
