use proptest::prelude::*;
use tempered_causal::baseline::{als_complete, AlsSettings};
use tempered_causal::io::{read_panel, write_panel, PanelSchema};
use tempered_causal::panel::{random_cell_mask, summarize_slice, Cell, CellMask, PanelData, TreatmentIndicator};
use tempered_causal::regression::closed_form_tau_posterior;
use tempered_causal::scoring::{average_score, combined_score, crps_slice, interval_score, mse_score};
use tempered_causal::PosteriorSummary;

fn draws() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, 2..80)
}

fn alpha() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.05), Just(0.1), 0.01..0.5f64]
}

proptest! {
    #[test]
    fn indicator_is_absorbing(starts in prop::collection::vec(prop::option::of(0usize..12), 1..8)) {
        let d = TreatmentIndicator::from_starts(starts.clone(), 10);
        for (i, s) in starts.iter().enumerate() {
            let row = d.row(i);
            prop_assert!(row.windows(2).all(|w| w[0] <= w[1]));
            for (t, &v) in row.iter().enumerate() {
                prop_assert_eq!(v == 1, s.is_some_and(|s| t >= s));
            }
        }
    }

    #[test]
    fn summary_ordered_and_permutation_invariant(mut xs in draws(), a in alpha(), seed in any::<u64>()) {
        let s = summarize_slice(&xs, a).unwrap();
        prop_assert!(s.lower <= s.upper);
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert!(s.lower >= sorted[0] && s.upper <= sorted[sorted.len() - 1]);
        // Fisher–Yates with a tiny LCG keeps the permutation reproducible.
        let mut state = seed | 1;
        for i in (1..xs.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            xs.swap(i, (state >> 33) as usize % (i + 1));
        }
        let p = summarize_slice(&xs, a).unwrap();
        prop_assert_eq!(s.lower, p.lower);
        prop_assert_eq!(s.upper, p.upper);
        prop_assert!((s.mean - p.mean).abs() <= 1e-12 * (1.0 + s.mean.abs()));
    }

    #[test]
    fn interval_score_at_least_width(l in -10.0..10.0f64, w in 0.0..10.0f64, tau in -30.0..30.0f64, a in alpha()) {
        let s = interval_score(l, l + w, tau, a).unwrap();
        prop_assert!(s >= w - 1e-12);
        if tau >= l && tau <= l + w {
            prop_assert!((s - w).abs() < 1e-12);
        }
    }

    #[test]
    fn combined_is_translation_invariant(m in -5.0..5.0f64, l in -5.0..0.0f64, w in 0.0..5.0f64, tau in -8.0..8.0f64, c in -100.0..100.0f64) {
        let s = PosteriorSummary::new(m, m + l, m + l + w, 0.05).unwrap();
        let shifted = PosteriorSummary::new(m + c, m + l + c, m + l + w + c, 0.05).unwrap();
        let a = combined_score(&s, tau).unwrap();
        let b = combined_score(&shifted, tau + c).unwrap();
        prop_assert!((a.combined - b.combined).abs() < 1e-8 * (1.0 + a.combined));
        prop_assert!((a.combined - a.squared_bias - a.interval_score).abs() < 1e-12 * (1.0 + a.combined));
    }

    #[test]
    fn mse_decomposes(m in -5.0..5.0f64, v in 0.0..4.0f64, tau in -5.0..5.0f64) {
        prop_assert!((mse_score(m, v, tau).unwrap() - ((m - tau).powi(2) + v)).abs() < 1e-12);
    }

    #[test]
    fn crps_nonnegative_and_zero_for_point_mass(xs in draws(), tau in -60.0..60.0f64) {
        prop_assert!(crps_slice(&xs, tau).unwrap() >= -1e-12);
        prop_assert!(crps_slice(&[tau, tau], tau).unwrap().abs() < 1e-15);
    }

    #[test]
    fn average_score_is_componentwise_mean(specs in prop::collection::vec((-3.0..3.0f64, 0.0..2.0f64, -3.0..3.0f64), 1..20)) {
        let reports: Vec<_> = specs
            .iter()
            .map(|&(m, w, tau)| combined_score(&PosteriorSummary::new(m, m - w, m + w, 0.05).unwrap(), tau).unwrap())
            .collect();
        let avg = average_score(&reports).unwrap();
        let n = reports.len() as f64;
        let mean: f64 = reports.iter().map(|r| r.combined).sum::<f64>() / n;
        prop_assert!((avg.combined - mean).abs() < 1e-12 * (1.0 + mean));
    }

    #[test]
    fn flat_posterior_mean_is_omega_free(y in prop::collection::vec(-10.0..10.0f64, 1..30), w in 0.01..10.0f64, s2 in 0.1..5.0f64) {
        let (m1, v1) = closed_form_tau_posterior(&y, 1.0, s2).unwrap();
        let (mw, vw) = closed_form_tau_posterior(&y, w, s2).unwrap();
        prop_assert_eq!(m1, mw);
        prop_assert!((vw * w - v1).abs() < 1e-12 * v1);
    }

    #[test]
    fn random_mask_respects_eligibility(n in 2usize..8, t in 2usize..10, frac in 0.05..0.9f64, seed in any::<u64>()) {
        let panel = PanelData::new(
            (0..n).map(|i| i.to_string()).collect(),
            (0..t).map(|i| i.to_string()).collect(),
            vec![vec![Some(0.0f64); t]; n],
            vec![None; n],
        ).unwrap();
        let eligible = |c: Cell| (c.unit + c.time) % 3 != 0;
        let pool = (0..n * t).filter(|j| eligible(Cell::new(j / t, j % t))).count();
        let m = random_cell_mask(&panel, frac, eligible, seed).unwrap();
        prop_assert_eq!(m.len(), (frac * pool as f64).round() as usize);
        prop_assert!(m.iter().all(eligible));
        prop_assert_eq!(&m, &random_cell_mask(&panel, frac, eligible, seed).unwrap());
    }

    #[test]
    fn csv_round_trip(vals in prop::collection::vec(prop::option::of(-1e6..1e6f64), 12), start in prop::option::of(0usize..4)) {
        let rows: Vec<Vec<Option<f64>>> = vals.chunks(4).map(<[_]>::to_vec).collect();
        let panel = PanelData::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["1".into(), "2".into(), "3".into(), "4".into()],
            rows,
            vec![start, None, Some(1)],
        ).unwrap();
        let mut buf = Vec::new();
        write_panel(&panel, &mut buf).unwrap();
        let back: PanelData<f64> = read_panel(buf.as_slice(), &PanelSchema::default()).unwrap();
        prop_assert_eq!(back, panel);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn als_objective_never_increases(seed in any::<u64>(), ridge in 0.0..1.0f64) {
        let (n, t) = (8, 12);
        let rows = (0..n)
            .map(|i| (0..t).map(|s| Some(((i * 7 + s * 3) % 11) as f64 / 5.0 + (i as f64 * 0.3).sin() * (s as f64 * 0.5).cos())).collect())
            .collect();
        let panel = PanelData::new(
            (0..n).map(|i| i.to_string()).collect(),
            (0..t).map(|i| i.to_string()).collect(),
            rows,
            vec![None; n],
        ).unwrap();
        let holes = CellMask::new(n, t, (0..n).map(|i| Cell::new(i, (i * 5) % t))).unwrap();
        let fit = als_complete(&panel, &holes, AlsSettings { ridge, ..AlsSettings::new(2) }, seed).unwrap();
        for w in fit.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10) + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }
}
