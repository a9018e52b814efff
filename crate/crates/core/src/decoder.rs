//! Alice's per-block decision: accept iff exactly one row scores above the
//! threshold.
//!
//! [`decode_block_reference`] scores every row in full.  [`decode_block`]
//! gives the same decision with less work:
//!
//! * rows are scored in fixed-size batches and decoding stops after the batch
//!   in which a second row clears the threshold (the decision is already
//!   "reject");
//! * the norm term `B (1 - |m|^2 / (n sigma_Y^2))` is deferred: since
//!   `|m|^2 >= 0`, the score with the norm dropped is an upper bound, and rows
//!   whose bound is below the threshold are rejected without computing `|m|^2`;
//! * optionally, rows are culled part-way through the inner product when even
//!   an optimistic continuation cannot reach the threshold.  This is lossy.
//!
//! Every accepted winner has its exact score computed, so pruning can lose a
//! true winner but never invent one.  Batch boundaries do not depend on the
//! thread count, so outcomes are deterministic.

use rayon::prelude::*;
use serde::Serialize;

use crate::codebook::{
    cell_representative, quantize_scalar, representatives, CodebookTable, PseudorandomCodebook,
    QuantizedVector, Quantizer,
};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::scoring::{score, score_lut_direct, LaneAcc, ScoreContext, ScoreLut};

/// A row as handed out by a provider.
#[derive(Debug, Clone, Copy)]
pub enum RowRef<'a, R> {
    /// Real components in the units of `y`.
    Real(&'a [R]),
    /// `b`-bit quantile symbols of `m / sigma_Y`.
    Symbols(&'a [u16], u8),
}

/// Per-thread scratch space for providers that materialize rows.
#[derive(Debug, Default, Clone)]
pub struct RowScratch<R> {
    pub bytes: Vec<u8>,
    pub symbols: Vec<u16>,
    pub reals: Vec<R>,
}

/// Source of codebook rows.  The decoder only ever sees rows through this
/// trait, never the true index.
pub trait RowProvider<R>: Sync {
    fn rows(&self) -> usize;
    fn row_len(&self) -> usize;
    fn fetch<'a>(&'a self, l: usize, scratch: &'a mut RowScratch<R>) -> Result<RowRef<'a, R>>;
}

impl<R: Real> RowProvider<R> for CodebookTable<R> {
    fn rows(&self) -> usize {
        self.q()
    }

    fn row_len(&self) -> usize {
        self.n()
    }

    fn fetch<'a>(&'a self, l: usize, _: &'a mut RowScratch<R>) -> Result<RowRef<'a, R>> {
        if l >= self.q() {
            return Err(Error::RowProvider {
                row: l,
                reason: "index out of range".into(),
            });
        }
        Ok(RowRef::Real(self.row(l)))
    }
}

impl<R: Real> RowProvider<R> for PseudorandomCodebook {
    fn rows(&self) -> usize {
        self.q as usize
    }

    fn row_len(&self) -> usize {
        self.n
    }

    fn fetch<'a>(&'a self, l: usize, scratch: &'a mut RowScratch<R>) -> Result<RowRef<'a, R>> {
        if l as u64 >= self.q {
            return Err(Error::RowProvider {
                row: l,
                reason: "index out of range".into(),
            });
        }
        self.reconstruct_into(l as u64, &mut scratch.bytes, &mut scratch.symbols);
        Ok(RowRef::Symbols(&scratch.symbols, self.b))
    }
}

/// A real table seen through the quantizer: each row is discretized on fetch.
#[derive(Debug, Clone)]
pub struct QuantizedRows<'t, R> {
    table: &'t CodebookTable<R>,
    quantizer: Quantizer,
}

impl<'t, R: Real> QuantizedRows<'t, R> {
    pub fn new(table: &'t CodebookTable<R>, sigma_y: R, b: u8) -> Result<Self> {
        Ok(Self {
            table,
            quantizer: Quantizer::new(sigma_y.as_f64(), b)?,
        })
    }
}

impl<R: Real> RowProvider<R> for QuantizedRows<'_, R> {
    fn rows(&self) -> usize {
        self.table.q()
    }

    fn row_len(&self) -> usize {
        self.table.n()
    }

    fn fetch<'a>(&'a self, l: usize, scratch: &'a mut RowScratch<R>) -> Result<RowRef<'a, R>> {
        if l >= self.table.q() {
            return Err(Error::RowProvider {
                row: l,
                reason: "index out of range".into(),
            });
        }
        scratch.symbols.clear();
        scratch.symbols.extend(
            self.table
                .row(l)
                .iter()
                .map(|&v| self.quantizer.symbol(v.as_f64())),
        );
        Ok(RowRef::Symbols(&scratch.symbols, self.quantizer.bits()))
    }
}

/// How row/vector products are evaluated.
#[derive(Debug, Clone, Copy, Default)]
pub enum Kernel<'a> {
    /// Floating-point products with Alice's exact `x`; symbol rows are
    /// replaced by their cell representatives.
    #[default]
    Exact,
    /// `x` and rows both quantized, products from the table.
    Lut(&'a ScoreLut),
}

/// Lossy culling part-way through the inner product.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneSchedule {
    /// Fractions of `n`, strictly increasing in (0, 1).
    pub checkpoints: Vec<f64>,
    /// Optimism of the continuation bound in standard deviations.
    pub kappa: f64,
    pub enabled: bool,
}

impl PruneSchedule {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev = 0.0;
        for &c in &self.checkpoints {
            if !(c > prev && c < 1.0) {
                return Err(invalid(
                    "checkpoints",
                    "fractions must increase strictly inside (0, 1)",
                ));
            }
            prev = c;
        }
        if !(self.kappa >= 0.0) {
            return Err(invalid("kappa", "must be >= 0"));
        }
        Ok(())
    }
}

impl Default for PruneSchedule {
    fn default() -> Self {
        Self {
            checkpoints: vec![0.25, 0.5],
            kappa: 1.5,
            enabled: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecoderOptions {
    pub early_abort: bool,
    pub deferred_correction: bool,
    pub schedule: PruneSchedule,
    /// Rows per batch.  Only affects how much work early abort saves.
    pub batch: usize,
    /// Score the rows of a batch on the rayon pool.
    pub parallel: bool,
}

impl Default for DecoderOptions {
    fn default() -> Self {
        Self {
            early_abort: true,
            deferred_correction: true,
            schedule: PruneSchedule::disabled(),
            batch: 256,
            parallel: true,
        }
    }
}

impl DecoderOptions {
    /// Default options with the default lossy prune schedule switched on.
    pub fn pruned() -> Self {
        Self {
            schedule: PruneSchedule::default(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    UniqueWinner,
    ZeroAboveThreshold,
    MultipleAboveThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Diagnostics<R> {
    /// Largest exactly computed score.
    pub max_score: Option<R>,
    /// Second largest exactly computed score.
    pub runner_up: Option<R>,
    pub rows_fully_scored: usize,
    /// Rows culled by the prune schedule.
    pub rows_pruned: usize,
    /// Rows rejected by the deferred-correction bound.
    pub rows_resolved_early: usize,
    /// Rows never looked at because of early abort.
    pub rows_skipped: usize,
    pub mul_accumulate: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecodeOutcome<R> {
    pub accepted: bool,
    pub winner: Option<usize>,
    pub reason: Reason,
    pub diagnostics: Diagnostics<R>,
}

/// Interval known to contain the final score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreBounds<R> {
    pub lo: R,
    pub hi: R,
}

/// Bounds on `J` once the inner product is complete and a fraction `stage`
/// of the norm has been accumulated (`a`, `b_partial` normalized as in
/// [`ScoreContext::normalize`]).  The rest of the norm is nonnegative, so the
/// current value is an upper bound; the bound becomes exact at `stage = 1`.
pub fn deferred_correction<R: Real>(
    ctx: &ScoreContext<R>,
    a: R,
    b_partial: R,
    stage: R,
) -> Result<ScoreBounds<R>> {
    if !(stage > R::zero() || stage == R::zero()) || stage > R::one() {
        return Err(invalid("stage", "must lie in [0, 1]"));
    }
    let hi = ctx.score_normalized(a, b_partial);
    let lo = if stage >= R::one() {
        hi
    } else {
        R::neg_infinity()
    };
    Ok(ScoreBounds { lo, hi })
}

fn tie_margin<R: Real>(theta: R) -> R {
    R::cst(1e-9) * theta.abs().max(R::one())
}

/// Exact score of every row, in row order, on one thread.
pub fn score_all<R: Real, P: RowProvider<R> + ?Sized>(
    ctx: &ScoreContext<R>,
    rows: &P,
    kernel: Kernel<'_>,
) -> Result<Vec<R>> {
    check_shape(ctx, rows)?;
    let xq = quantized_x(ctx, kernel);
    let sy = ctx.params.sigma_y2.sqrt();
    let mut scratch = RowScratch::default();
    let mut reps: Vec<R> = Vec::new();
    (0..rows.rows())
        .map(|l| match (kernel, rows.fetch(l, &mut scratch)?) {
            (Kernel::Exact, RowRef::Real(m)) => score(ctx, m),
            (Kernel::Exact, RowRef::Symbols(sym, b)) => {
                if reps.len() != 1 << b {
                    reps = representatives(b)
                        .into_iter()
                        .map(|r| R::cst(r) * sy)
                        .collect();
                }
                let m: Vec<R> = sym.iter().map(|&s| reps[s as usize]).collect();
                score(ctx, &m)
            }
            (Kernel::Lut(lut), RowRef::Symbols(sym, b)) => {
                let qm = QuantizedVector {
                    symbols: sym.to_vec(),
                    b,
                };
                score_lut_direct(ctx, xq.as_ref().expect("LUT kernel"), &qm, lut)
            }
            (Kernel::Lut(_), RowRef::Real(_)) => Err(invalid(
                "kernel",
                "LUT kernel needs a quantized row provider",
            )),
        })
        .collect()
}

/// Reference semantics: every row scored in full, in order, on one thread.
pub fn decode_block_reference<R: Real, P: RowProvider<R> + ?Sized>(
    ctx: &ScoreContext<R>,
    rows: &P,
    theta: R,
    kernel: Kernel<'_>,
) -> Result<DecodeOutcome<R>> {
    let scores = score_all(ctx, rows, kernel)?;
    let mut tally = Tally::default();
    for (l, &s) in scores.iter().enumerate() {
        tally.push(l, s, theta);
    }
    let diag = Diagnostics {
        rows_fully_scored: scores.len(),
        mul_accumulate: 2 * (ctx.n() * scores.len()) as u64,
        ..Diagnostics::default()
    };
    Ok(tally.finish(diag))
}

/// Applies the single-winner rule to a list of scores.
pub fn decide<R: Real>(scores: &[R], theta: R) -> DecodeOutcome<R> {
    let mut tally = Tally::default();
    for (l, &s) in scores.iter().enumerate() {
        tally.push(l, s, theta);
    }
    tally.finish(Diagnostics {
        rows_fully_scored: scores.len(),
        ..Diagnostics::default()
    })
}

fn check_shape<R: Real, P: RowProvider<R> + ?Sized>(ctx: &ScoreContext<R>, rows: &P) -> Result<()> {
    if rows.row_len() != ctx.n() {
        return Err(Error::LengthMismatch {
            expected: ctx.n(),
            actual: rows.row_len(),
        });
    }
    if rows.rows() == 0 {
        return Err(invalid("q", "empty codebook"));
    }
    Ok(())
}

fn quantized_x<R: Real>(ctx: &ScoreContext<R>, kernel: Kernel<'_>) -> Option<QuantizedVector> {
    match kernel {
        Kernel::Exact => None,
        Kernel::Lut(lut) => {
            let s = ctx.params.sigma_x2.sqrt().as_f64();
            Some(QuantizedVector {
                symbols: ctx
                    .x
                    .iter()
                    .map(|&v| quantize_scalar(v.as_f64(), s, lut.bits()))
                    .collect(),
                b: lut.bits(),
            })
        }
    }
}

/// Running count of rows above the threshold.
#[derive(Debug, Default)]
struct Tally<R> {
    above: usize,
    winner: Option<usize>,
    max: Option<R>,
    second: Option<R>,
}

impl<R: Real> Tally<R> {
    fn push(&mut self, l: usize, s: R, theta: R) {
        if s > theta {
            self.above += 1;
            if self.above == 1 {
                self.winner = Some(l);
            }
        }
        match self.max {
            Some(m) if s <= m => {
                if self.second.is_none_or(|r| s > r) {
                    self.second = Some(s);
                }
            }
            _ => {
                self.second = self.max;
                self.max = Some(s);
            }
        }
    }

    fn finish(self, mut diag: Diagnostics<R>) -> DecodeOutcome<R> {
        diag.max_score = self.max;
        diag.runner_up = self.second;
        let reason = match self.above {
            0 => Reason::ZeroAboveThreshold,
            1 => Reason::UniqueWinner,
            _ => Reason::MultipleAboveThreshold,
        };
        let accepted = reason == Reason::UniqueWinner;
        DecodeOutcome {
            accepted,
            winner: if accepted { self.winner } else { None },
            reason,
            diagnostics: diag,
        }
    }
}

enum RowFate<R> {
    Scored(R),
    Pruned,
    Resolved,
}

struct RowResult<R> {
    fate: RowFate<R>,
    macs: u64,
}

/// Everything a row evaluation needs that is fixed for the block.
struct Plan<'k, R> {
    kernel: Kernel<'k>,
    xq: Option<QuantizedVector>,
    theta: R,
    margin: R,
    deferred: bool,
    /// Checkpoint indices with the optimistic continuation
    /// `(mean_rem + kappa * sd_rem)`, in normalized inner-product units.
    checkpoints: Vec<(usize, R)>,
    /// Offset added to the partial inner product at every checkpoint:
    /// expected norm term of a true row.
    corr_mean: R,
    sigma_y: R,
    reps: Vec<Vec<R>>,
}

impl<'k, R: Real> Plan<'k, R> {
    fn new(
        ctx: &ScoreContext<R>,
        theta: R,
        kernel: Kernel<'k>,
        opts: &DecoderOptions,
    ) -> Result<Self> {
        let n = ctx.n();
        let p = &ctx.params;
        let sched = &opts.schedule;
        let mut checkpoints = Vec::new();
        let nr = R::from_usize_lossy(n);
        let corr_mean =
            ctx.bias() * (R::one() - (p.t * ctx.x_norm2 / nr + p.sigma_ygx2) / p.sigma_y2);
        if sched.enabled {
            sched.validate()?;
            // Suffix sums of x^2 at each checkpoint.
            let idx: Vec<usize> = sched
                .checkpoints
                .iter()
                .map(|&f| (f * n as f64).floor() as usize)
                .filter(|&i| i > 0 && i < n)
                .collect();
            let inv = (p.sigma_x2 * p.sigma_y2).sqrt().recip();
            let corr_var = ctx.bias() * ctx.bias() * R::cst(2.0) / nr;
            for i in idx {
                if checkpoints.last().is_some_and(|&(j, _)| j >= i) {
                    continue;
                }
                let rem: R = ctx.x[i..].iter().map(|&v| v * v).sum();
                let mean_rem = p.t.sqrt() * rem * inv;
                let var_rem = rem * p.sigma_ygx2 / (p.sigma_x2 * p.sigma_y2);
                let slack =
                    mean_rem / nr.sqrt() + R::cst(sched.kappa) * (var_rem / nr + corr_var).sqrt();
                checkpoints.push((i, slack));
            }
        }
        let reps = vec![Vec::new(); 16];
        Ok(Self {
            kernel,
            xq: quantized_x(ctx, kernel),
            theta,
            margin: tie_margin(theta),
            deferred: opts.deferred_correction,
            checkpoints,
            corr_mean,
            sigma_y: p.sigma_y2.sqrt(),
            reps,
        })
    }

    /// Fills the representative table for bit depth `b` (exact kernel with a
    /// symbol provider).
    fn ensure_reps(&mut self, b: u8) {
        if let Some(slot) = self.reps.get_mut(b as usize - 1) {
            if slot.is_empty() {
                *slot = (0..1u32 << b)
                    .map(|s| R::cst(cell_representative(s as u16, b)) * self.sigma_y)
                    .collect();
            }
        }
    }
}

enum Acc<R> {
    F(LaneAcc<R>),
    I { a: i128, b: i128 },
}

fn eval_row<R: Real>(
    ctx: &ScoreContext<R>,
    plan: &Plan<'_, R>,
    row: RowRef<'_, R>,
    reals: &mut Vec<R>,
) -> Result<RowResult<R>> {
    let n = ctx.n();
    // Normalize the row representation to what the kernel consumes.
    enum Data<'a, R> {
        F(&'a [R]),
        I(&'a [u16], &'a QuantizedVector, &'a ScoreLut),
    }
    let data = match (plan.kernel, row) {
        (Kernel::Exact, RowRef::Real(m)) => Data::F(m),
        (Kernel::Exact, RowRef::Symbols(sym, b)) => {
            let rep = &plan.reps[b as usize - 1];
            reals.clear();
            reals.extend(sym.iter().map(|&s| rep[s as usize]));
            Data::F(&reals[..])
        }
        (Kernel::Lut(lut), RowRef::Symbols(sym, _)) => {
            Data::I(sym, plan.xq.as_ref().expect("LUT kernel"), lut)
        }
        (Kernel::Lut(_), RowRef::Real(_)) => {
            return Err(invalid(
                "kernel",
                "LUT kernel needs a quantized row provider",
            ))
        }
    };
    let mut acc = match data {
        Data::F(_) => Acc::F(LaneAcc::default()),
        Data::I(..) => Acc::I { a: 0, b: 0 },
    };
    let add_inner = |acc: &mut Acc<R>, lo: usize, hi: usize| match (acc, &data) {
        (Acc::F(f), Data::F(m)) => f.add_inner(&ctx.x[lo..hi], &m[lo..hi], lo),
        (Acc::I { a, .. }, Data::I(sym, xq, lut)) => {
            for (&j, &k) in xq.symbols[lo..hi].iter().zip(&sym[lo..hi]) {
                *a += lut.fixed(j, k) as i128;
            }
        }
        _ => unreachable!(),
    };
    let add_norm = |acc: &mut Acc<R>| match (acc, &data) {
        (Acc::F(f), Data::F(m)) => f.add_norm(m, 0),
        (Acc::I { b, .. }, Data::I(sym, _, lut)) => {
            for &k in sym.iter() {
                *b += lut.fixed_sq(k) as i128;
            }
        }
        _ => unreachable!(),
    };
    let sums = |acc: &Acc<R>| -> (R, R) {
        match acc {
            Acc::F(f) => ctx.normalize(f.inner(), f.norm()),
            Acc::I { a, b } => {
                let (a, b) = ScoreLut::unfix(*a, *b);
                (R::cst(a), R::cst(b))
            }
        }
    };

    let mut done = 0usize;
    let sqrt_n = R::from_usize_lossy(n).sqrt();
    for &(i, slack) in &plan.checkpoints {
        add_inner(&mut acc, done, i);
        done = i;
        let (a, _) = sums(&acc);
        let optimistic = (a / sqrt_n + slack + plan.corr_mean) / ctx.den();
        if optimistic < plan.theta {
            return Ok(RowResult {
                fate: RowFate::Pruned,
                macs: i as u64,
            });
        }
    }
    add_inner(&mut acc, done, n);
    let mut macs = n as u64;
    if plan.deferred {
        let (a, _) = sums(&acc);
        let bound = deferred_correction(ctx, a, R::zero(), R::zero())?;
        if bound.hi < plan.theta - plan.margin {
            return Ok(RowResult {
                fate: RowFate::Resolved,
                macs,
            });
        }
    }
    add_norm(&mut acc);
    macs += n as u64;
    let (a, b) = sums(&acc);
    Ok(RowResult {
        fate: RowFate::Scored(ctx.score_normalized(a, b)),
        macs,
    })
}

/// Optimized decoder.  With pruning disabled the decision equals
/// [`decode_block_reference`]'s.
pub fn decode_block<R: Real, P: RowProvider<R> + ?Sized>(
    ctx: &ScoreContext<R>,
    rows: &P,
    theta: R,
    kernel: Kernel<'_>,
    opts: &DecoderOptions,
) -> Result<DecodeOutcome<R>> {
    check_shape(ctx, rows)?;
    let mut plan = Plan::new(ctx, theta, kernel, opts)?;
    if matches!(kernel, Kernel::Exact) {
        let mut probe = RowScratch::default();
        if let RowRef::Symbols(_, b) = rows.fetch(0, &mut probe)? {
            plan.ensure_reps(b);
        }
    }
    let plan = &plan;
    let q = rows.rows();
    let batch = opts.batch.max(1);
    let mut tally = Tally::default();
    let mut diag = Diagnostics::default();
    let run = |l: usize, scratch: &mut RowScratch<R>| -> Result<RowResult<R>> {
        let mut reals = std::mem::take(&mut scratch.reals);
        let row = rows.fetch(l, scratch)?;
        let r = eval_row(ctx, plan, row, &mut reals);
        scratch.reals = reals;
        r
    };
    let mut start = 0;
    let mut serial_scratch = RowScratch::default();
    while start < q {
        let end = (start + batch).min(q);
        let results: Vec<Result<RowResult<R>>> = if opts.parallel && end - start > 1 {
            (start..end)
                .into_par_iter()
                .map_init(RowScratch::default, |s, l| run(l, s))
                .collect()
        } else {
            (start..end).map(|l| run(l, &mut serial_scratch)).collect()
        };
        for (l, r) in (start..end).zip(results) {
            let r = r?;
            diag.mul_accumulate += r.macs;
            match r.fate {
                RowFate::Scored(s) => {
                    diag.rows_fully_scored += 1;
                    tally.push(l, s, theta);
                }
                RowFate::Pruned => diag.rows_pruned += 1,
                RowFate::Resolved => diag.rows_resolved_early += 1,
            }
        }
        start = end;
        if opts.early_abort && tally.above >= 2 {
            diag.rows_skipped = q - end;
            break;
        }
    }
    Ok(tally.finish(diag))
}
