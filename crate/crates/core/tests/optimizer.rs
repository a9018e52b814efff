use randcode::optimizer::*;

const T: f64 = 1e-6;
const XI: f64 = 1e-5;

#[test]
fn table_optima_are_local_maxima() {
    let cfg = SearchConfig::default();
    for q in TABLE2_Q {
        let r = optimize_skr(T, XI, q, &cfg).unwrap();
        let b = &r.best;
        let f = |sx: f64, g: f64, d: f64| evaluate(T, XI, q, sx, g, d).unwrap().rates.skr_over_dw;
        let base = f(b.sigma_x2, b.gamma, b.delta);
        assert_eq!(base, r.skr_over_dw);
        for s in [-0.2, 0.2] {
            assert!(f(b.sigma_x2 * (1.0 + s), b.gamma, b.delta) <= base);
            assert!(f(b.sigma_x2, b.gamma + s * b.gamma.abs(), b.delta) <= base);
            assert!(f(b.sigma_x2, b.gamma, b.delta + s * b.delta.abs()) <= base);
        }
        assert!(r.boundary_hits.is_empty(), "q={q}: {:?}", r.boundary_hits);
    }
}

#[test]
fn key_ratio_grows_with_codebook_size() {
    let rows = table2(T, XI, &TABLE2_Q, &SearchConfig::default()).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].skr_over_dw >= w[0].skr_over_dw, "{w:?}");
    }
    // Photon number stays below one.
    assert!(rows.iter().all(|r| r.sigma_x2 < 1.0));
    assert!(table2(T, XI, &[], &SearchConfig::default())
        .unwrap()
        .is_empty());
}

#[test]
fn reproducible_and_trace_bounded() {
    let cfg = SearchConfig {
        keep_trace: true,
        ..SearchConfig::default()
    };
    let a = optimize_skr(T, XI, 1 << 10, &cfg).unwrap();
    let b = optimize_skr(T, XI, 1 << 10, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.trace.len() >= 8000);
    assert!(a.trace.iter().all(|p| !(p.skr_over_dw > a.skr_over_dw)));
}

#[test]
fn landscape_peak_matches_optimizer() {
    let opt = optimize_skr(T, XI, 1 << 10, &SearchConfig::default()).unwrap();
    let l = landscape_slice(T, XI, 1 << 10, 0.21, (-0.6, 0.0), (-1.5, 0.5), (151, 201)).unwrap();
    let (v, g, d) = l.max().unwrap();
    assert!(
        (v - opt.skr_over_dw).abs() < 1e-3,
        "{v} vs {}",
        opt.skr_over_dw
    );
    assert!((g - opt.best.gamma).abs() < 0.03 && (d - opt.best.delta).abs() < 0.03);
    for row in &l.values {
        assert!(row.iter().all(|&v| v <= 1.0));
    }
    let again =
        landscape_slice(T, XI, 1 << 10, 0.21, (-0.6, 0.0), (-1.5, 0.5), (151, 201)).unwrap();
    assert_eq!(l, again);
    let csv = l.to_csv();
    assert_eq!(csv.lines().count(), 152);
    assert!(csv.starts_with("gamma\\delta,-1.5,"));
    assert!(landscape_slice(T, XI, 1 << 10, 0.21, (-0.6, 0.0), (-1.5, 0.5), (0, 3)).is_err());
}

#[test]
fn smallest_codebook_is_handled() {
    let r = optimize_skr(T, XI, 2, &SearchConfig::default()).unwrap();
    assert!(r.skr_over_dw.is_finite());
}

#[test]
fn boundary_hits_are_reported() {
    let cfg = SearchConfig {
        sigma_x2: (0.01, 0.05),
        ..SearchConfig::default()
    };
    let r = optimize_skr(T, XI, 1 << 10, &cfg).unwrap();
    assert!((r.best.sigma_x2 - 0.05).abs() < 1e-3);
    assert!(!r.boundary_hits.is_empty());
}
