use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use randcode::channel::sample_block;
use randcode::codebook::{build_random_table, pr_encode, quantize, CodebookTable, Expander};
use randcode::decoder::*;
use randcode::scoring::{score, ScoreContext};
use randcode::{derive_channel, derive_operating_point, ChannelParams, Error, OperatingPoint};

fn desk() -> (ChannelParams<f64>, OperatingPoint<f64>) {
    let p = derive_channel(1e-2, 0.0, 0.095f64).unwrap();
    let op = derive_operating_point(&p, 32, -0.45, -0.78).unwrap();
    (p, op)
}

fn block(
    p: &ChannelParams<f64>,
    op: &OperatingPoint<f64>,
    s: u64,
) -> (ScoreContext<f64>, CodebookTable<f64>) {
    let b = sample_block(p, op.n, s);
    let t = build_random_table(&b.y, op.q as usize, p.sigma_y2, s ^ 0xdead_beef).unwrap();
    (ScoreContext::new(b.x, *p).unwrap(), t)
}

#[test]
fn decision_rule_examples() {
    let out = decide(&[3.0, 1.0], 2.0);
    assert!(out.accepted);
    assert_eq!(out.winner, Some(0));
    assert_eq!(out.reason, Reason::UniqueWinner);
    let out = decide(&[3.0, 4.0, 1.0], 2.0);
    assert!(!out.accepted);
    assert_eq!(out.winner, None);
    assert_eq!(out.reason, Reason::MultipleAboveThreshold);
    let out = decide(&[1.0, 1.5], 2.0);
    assert_eq!(out.reason, Reason::ZeroAboveThreshold);
    // Equal to the threshold is not above it.
    assert_eq!(decide(&[2.0, 0.0], 2.0).reason, Reason::ZeroAboveThreshold);
}

#[test]
fn optimized_decoder_matches_reference() {
    let (p, op) = desk();
    let configs = [
        DecoderOptions::default(),
        DecoderOptions {
            parallel: false,
            batch: 3,
            ..DecoderOptions::default()
        },
        DecoderOptions {
            deferred_correction: false,
            early_abort: false,
            ..DecoderOptions::default()
        },
    ];
    let mut accepted = 0;
    let mut multi = 0;
    for s in 0..1000 {
        let (ctx, t) = block(&p, &op, s);
        let r = decode_block_reference(&ctx, &t, op.theta, Kernel::Exact).unwrap();
        accepted += r.accepted as usize;
        multi += (r.reason == Reason::MultipleAboveThreshold) as usize;
        for o in &configs {
            let d = decode_block(&ctx, &t, op.theta, Kernel::Exact, o).unwrap();
            assert_eq!(
                (d.accepted, d.winner, d.reason),
                (r.accepted, r.winner, r.reason),
                "block {s}"
            );
        }
    }
    // The sample must exercise every branch.
    assert!(accepted > 600 && multi > 0, "{accepted} {multi}");
}

#[test]
fn pruned_decoder_is_sound() {
    let (p, op) = desk();
    let opts = DecoderOptions::pruned();
    let mut disagree = 0;
    let mut pruned = 0;
    for s in 0..1000 {
        let (ctx, t) = block(&p, &op, s + 50_000);
        let r = decode_block_reference(&ctx, &t, op.theta, Kernel::Exact).unwrap();
        let d = decode_block(&ctx, &t, op.theta, Kernel::Exact, &opts).unwrap();
        pruned += d.diagnostics.rows_pruned;
        if (d.accepted, d.winner) != (r.accepted, r.winner) {
            disagree += 1;
        }
        if let Some(w) = d.winner {
            assert!(
                score(&ctx, t.row(w)).unwrap() > op.theta,
                "fabricated winner in block {s}"
            );
        }
    }
    assert!(pruned > 0);
    assert!(
        (disagree as f64) / 1000.0 < 1e-2,
        "{disagree} disagreements"
    );
}

#[test]
fn noiseless_blocks_always_decode_to_secret_row() {
    let p = derive_channel(1e-2, 0.0, 0.095f64).unwrap();
    let op = derive_operating_point(&p, 32, -0.8, 0.0).unwrap();
    for s in 0..1000 {
        let b = sample_block(&p, op.n, s);
        let y: Vec<f64> = b.x.iter().map(|v| v * p.t.sqrt()).collect();
        let t = build_random_table(&y, 32, p.sigma_y2, s + 7).unwrap();
        let ctx = ScoreContext::new(b.x, p).unwrap();
        let d = decode_block(
            &ctx,
            &t,
            op.theta,
            Kernel::Exact,
            &DecoderOptions::default(),
        )
        .unwrap();
        assert_eq!(d.winner, Some(t.secret_index()), "block {s}");
    }
}

#[test]
fn deferred_bound_contains_final_score() {
    let (p, op) = desk();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (ctx, t) = block(&p, &op, 1);
    let n = ctx.n();
    let mut checked = 0;
    for _ in 0..10_000 {
        let l = rng.random_range(0..t.q());
        let m = t.row(l);
        let stage: f64 = rng.random_range(0.0..=1.0);
        let k = (stage * n as f64).round() as usize;
        let xm: f64 = ctx.x.iter().zip(m).map(|(a, b)| a * b).sum();
        let mm_part: f64 = m[..k].iter().map(|v| v * v).sum();
        let (a, b) = ctx.normalize(xm, mm_part);
        let bounds = deferred_correction(&ctx, a, b, k as f64 / n as f64).unwrap();
        let exact = score(&ctx, m).unwrap();
        assert!(bounds.lo <= exact + 1e-12 && exact <= bounds.hi + 1e-12);
        checked += 1;
    }
    assert_eq!(checked, 10_000);
    let m = t.row(0);
    let (a, b) = ctx.normalize(
        ctx.x.iter().zip(m).map(|(a, b)| a * b).sum(),
        m.iter().map(|v| v * v).sum(),
    );
    let full = deferred_correction(&ctx, a, b, 1.0).unwrap();
    assert_eq!(full.lo, full.hi);
    assert!((full.hi - score(&ctx, m).unwrap()).abs() < 1e-12);
    assert!(deferred_correction(&ctx, a, b, 1.5).is_err());
}

#[test]
fn most_fakes_resolve_by_half_norm() {
    let (p, op) = desk();
    let (mut resolved, mut total) = (0, 0);
    for s in 0..100 {
        let (ctx, t) = block(&p, &op, s + 9_000);
        let half = ctx.n() / 2;
        for l in (0..t.q()).filter(|&l| l != t.secret_index()) {
            let m = t.row(l);
            let (a, b) = ctx.normalize(
                ctx.x.iter().zip(m).map(|(a, b)| a * b).sum(),
                m[..half].iter().map(|v| v * v).sum(),
            );
            let hi = deferred_correction(&ctx, a, b, 0.5).unwrap().hi;
            resolved += (hi < op.theta) as usize;
            total += 1;
        }
    }
    assert!(resolved * 2 >= total, "{resolved}/{total}");
}

#[test]
fn decisions_do_not_depend_on_scheduling() {
    let (p, op) = desk();
    for s in 0..50 {
        let (ctx, t) = block(&p, &op, s);
        let mut outs = Vec::new();
        for parallel in [false, true] {
            for batch in [1, 7, 256] {
                let o = DecoderOptions {
                    parallel,
                    batch,
                    ..DecoderOptions::pruned()
                };
                let d = decode_block(&ctx, &t, op.theta, Kernel::Exact, &o).unwrap();
                outs.push((d.accepted, d.winner, d.reason));
            }
        }
        assert!(outs.windows(2).all(|w| w[0] == w[1]), "block {s}: {outs:?}");
        let o = DecoderOptions::pruned();
        assert_eq!(
            decode_block(&ctx, &t, op.theta, Kernel::Exact, &o).unwrap(),
            decode_block(&ctx, &t, op.theta, Kernel::Exact, &o).unwrap()
        );
    }
}

#[test]
fn multiply_accumulate_accounting() {
    let (p, op) = desk();
    let (ctx, t) = block(&p, &op, 3);
    let o = DecoderOptions {
        early_abort: false,
        deferred_correction: false,
        ..DecoderOptions::default()
    };
    let d = decode_block(&ctx, &t, op.theta, Kernel::Exact, &o).unwrap();
    assert_eq!(d.diagnostics.rows_fully_scored, 32);
    assert_eq!(d.diagnostics.mul_accumulate, 2 * 32 * op.n as u64);
    let d = decode_block(
        &ctx,
        &t,
        op.theta,
        Kernel::Exact,
        &DecoderOptions::default(),
    )
    .unwrap();
    let g = d.diagnostics;
    assert_eq!(
        g.rows_fully_scored + g.rows_resolved_early + g.rows_skipped + g.rows_pruned,
        32
    );
    assert_eq!(
        g.mul_accumulate,
        (2 * g.rows_fully_scored + g.rows_resolved_early) as u64 * op.n as u64
    );
}

#[test]
fn seed_expanded_rows_decode_like_reference() {
    let (p, op) = desk();
    for s in 0..100u64 {
        let b = sample_block(&p, op.n, s);
        let yq = quantize(&b.y, p.sigma_y2.sqrt(), 8).unwrap();
        let cb = pr_encode(&yq, s % 32, 32, [s as u8; 32], Expander::ChaCha8).unwrap();
        let ctx = ScoreContext::new(b.x, p).unwrap();
        let r = decode_block_reference(&ctx, &cb, op.theta, Kernel::Exact).unwrap();
        let d = decode_block(
            &ctx,
            &cb,
            op.theta,
            Kernel::Exact,
            &DecoderOptions::default(),
        )
        .unwrap();
        assert_eq!((d.accepted, d.winner), (r.accepted, r.winner));
    }
}

struct Failing(CodebookTable<f64>);

impl RowProvider<f64> for Failing {
    fn rows(&self) -> usize {
        self.0.q()
    }

    fn row_len(&self) -> usize {
        self.0.n()
    }

    fn fetch<'a>(
        &'a self,
        l: usize,
        _: &'a mut RowScratch<f64>,
    ) -> randcode::Result<RowRef<'a, f64>> {
        if l == 3 {
            return Err(Error::RowProvider {
                row: l,
                reason: "storage unavailable".into(),
            });
        }
        Ok(RowRef::Real(self.0.row(l)))
    }
}

#[test]
fn provider_failure_is_an_error_not_a_rejection() {
    let (p, op) = desk();
    let (ctx, t) = block(&p, &op, 0);
    let f = Failing(t);
    for o in [DecoderOptions::default(), DecoderOptions::pruned()] {
        assert!(matches!(
            decode_block(&ctx, &f, op.theta, Kernel::Exact, &o),
            Err(Error::RowProvider { row: 3, .. })
        ));
    }
    assert!(decode_block_reference(&ctx, &f, op.theta, Kernel::Exact).is_err());
}

#[test]
fn bad_schedules_are_rejected() {
    let (p, op) = desk();
    let (ctx, t) = block(&p, &op, 0);
    for cps in [vec![0.5, 0.25], vec![0.0], vec![1.0], vec![0.3, 0.3]] {
        let o = DecoderOptions {
            schedule: PruneSchedule {
                checkpoints: cps,
                ..PruneSchedule::default()
            },
            ..DecoderOptions::default()
        };
        assert!(decode_block(&ctx, &t, op.theta, Kernel::Exact, &o).is_err());
    }
}
