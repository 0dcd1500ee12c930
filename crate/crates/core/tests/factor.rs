use tempered_causal::diagnostics::{ks_critical_value, ks_statistic};
use tempered_causal::factor::{cell_summaries, gibbs_factor, posterior_predict, FactorModel, VarianceModel};
use tempered_causal::panel::{Cell, CellMask, PanelData};
use tempered_causal::rng::stream;
use tempered_causal::scalar::Real;
use tempered_causal::simgen::{simulate_panel, PanelSimConfig};

fn unit_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("u{i}")).collect()
}

fn rank_one(n: usize, t: usize, noise: f64, seed: u64) -> PanelData<f64> {
    let mut rng = stream(seed, "test-panel", 0);
    let u: Vec<f64> = (0..n).map(|i| 0.5 + (i as f64 * 0.7).sin().abs()).collect();
    let v: Vec<f64> = (0..t).map(|s| 1.0 + 0.5 * (s as f64 * 0.3).cos()).collect();
    let rows = (0..n).map(|i| (0..t).map(|s| Some(u[i] * v[s] + noise * f64::sample_std_normal(&mut rng))).collect()).collect();
    PanelData::new(unit_ids(n), unit_ids(t), rows, vec![None; n]).unwrap()
}

fn all_cells(n: usize, t: usize) -> CellMask {
    CellMask::new(n, t, (0..n).flat_map(|i| (0..t).map(move |s| Cell::new(i, s)))).unwrap()
}

#[test]
fn noiseless_rank_one_is_reproduced() {
    let panel = rank_one(12, 15, 0.0, 0);
    let fit = gibbs_factor(&panel, &CellMask::empty(12, 15), &FactorModel::new(1, 1.0).with_chain(1500, 500), 3).unwrap();
    let ymax = (0..12).flat_map(|i| panel.outcome_row(i).iter().flatten().copied().collect::<Vec<_>>()).fold(0.0f64, |a, y| a.max(y.abs()));
    for c in &all_cells(12, 15) {
        assert!((fit.fitted(&panel, c) - panel.outcome(c.unit, c.time).unwrap()).abs() < 0.05 * ymax);
    }
}

#[test]
fn excluded_outcomes_never_enter_the_fit() {
    let cfg = PanelSimConfig { n_units: 10, n_times: 30, start_range: Some((20, 28)), ..Default::default() };
    let sim = simulate_panel::<f64>(&cfg, 5).unwrap();
    let treated = sim.panel.treated_cells();
    let holdout = CellMask::new(10, 30, [Cell::new(0, 3), Cell::new(4, 10)]).unwrap();
    let excluded = treated.union(&holdout).unwrap();
    let garbage = sim.panel.with_outcome_overrides(excluded.iter().map(|c| (c, Some(1e6 * (c.time as f64 - 7.5))))).unwrap();
    let model = FactorModel::new(2, 0.7).with_chain(300, 100);
    let a = gibbs_factor(&sim.panel, &excluded, &model, 42).unwrap();
    let b = gibbs_factor(&garbage, &excluded, &model, 42).unwrap();
    assert_eq!(a, b);
}

#[test]
fn draws_do_not_depend_on_worker_count() {
    let panel = rank_one(8, 20, 0.5, 1);
    let model = FactorModel::new(2, 1.3).with_chain(200, 50);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| gibbs_factor(&panel, &CellMask::empty(8, 20), &model, 9).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn shrinks_toward_prior_as_omega_falls() {
    // Small panel with large signal so the prior can win at ω = 0.01.
    let panel = rank_one(6, 8, 0.3, 2);
    let mean_abs = |w: f64| {
        let fit =
            gibbs_factor(&panel, &CellMask::empty(6, 8), &FactorModel::new(1, w).with_chain(3000, 1000).with_variance(VarianceModel::Fixed(1.0)), 17)
                .unwrap();
        all_cells(6, 8).iter().map(|c| fit.fitted(&panel, c).abs()).sum::<f64>() / 48.0
    };
    let (a, b, c) = (mean_abs(1.0), mean_abs(0.1), mean_abs(0.01));
    assert!(a > b && b > c, "{a} {b} {c}");
}

#[test]
fn precision_shape_identity() {
    let panel = rank_one(5, 9, 0.2, 3);
    let excluded = CellMask::new(5, 9, [Cell::new(0, 0), Cell::new(0, 1), Cell::new(3, 8)]).unwrap();
    for &w in &[0.2, 1.0, 2.5] {
        let fit = gibbs_factor(&panel, &excluded, &FactorModel::new(1, w).with_chain(20, 10), 1).unwrap();
        for i in 0..5 {
            assert_eq!(fit.precision_shapes[i], 0.01 + w * fit.included_per_unit[i] as f64 / 2.0);
        }
        assert_eq!(fit.included_per_unit, vec![7, 9, 9, 8, 9]);
        let shared = gibbs_factor(&panel, &excluded, &FactorModel::new(1, w).with_chain(20, 10).with_variance(VarianceModel::Shared), 1).unwrap();
        assert!(shared.precision_shapes.iter().all(|&s| s == 0.01 + w * 42.0 / 2.0));
        assert!(shared.sigma2.chunks(5).all(|d| d.iter().all(|&s| s == d[0] && s > 0.0)));
    }
}

#[test]
fn predictive_draw_structure() {
    let panel = rank_one(6, 10, 0.4, 4);
    let cells = CellMask::new(6, 10, [Cell::new(1, 2), Cell::new(5, 9)]).unwrap();
    let fit = gibbs_factor(&panel, &cells, &FactorModel::new(1, 1.0).with_chain(800, 200), 5).unwrap();
    let pred = posterior_predict(&fit, &panel, &cells).unwrap();
    let var = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
    };
    for (j, c) in cells.iter().enumerate() {
        for m in 0..fit.retained {
            let bilinear: f64 = fit.loading(m, c.unit).iter().zip(fit.factor(m, c.time)).map(|(a, b)| a * b).sum();
            assert_eq!(pred.mean_draws[j][m], bilinear);
        }
        assert!(var(&pred.outcome_draws[j]) >= var(&pred.mean_draws[j]));
    }
    let mut sharp = fit.clone();
    sharp.omega = 4.0;
    let pred4 = posterior_predict(&sharp, &panel, &cells).unwrap();
    for j in 0..2 {
        for m in 0..fit.retained {
            let e1 = pred.outcome_draws[j][m] - pred.mean_draws[j][m];
            let e4 = pred4.outcome_draws[j][m] - pred4.mean_draws[j][m];
            assert!((e4 - 0.5 * e1).abs() < 1e-12);
        }
    }
    let s = cell_summaries(&pred, 0.05).unwrap();
    assert!(s.iter().all(|s| s.lower <= s.upper));
}

#[test]
fn tempering_equivalence_for_cell_predictions() {
    let panel = rank_one(20, 30, 1.0, 6);
    let cells = CellMask::new(20, 30, (0..5).map(|j| Cell::new(3 * j, 29 - 2 * j))).unwrap();
    let pooled = |w: f64, s2: f64, seed: u64| -> Vec<f64> {
        let model = FactorModel::new(1, w).with_chain(2500, 500).with_variance(VarianceModel::Fixed(s2));
        let fit = gibbs_factor(&panel, &cells, &model, seed).unwrap();
        posterior_predict(&fit, &panel, &cells).unwrap().outcome_draws.concat()
    };
    let a = pooled(0.5, 1.0, 21);
    let b = pooled(1.0, 2.0, 22);
    assert_eq!(a.len(), 10_000);
    let d = ks_statistic(&a, &b);
    assert!(d < ks_critical_value(0.01, a.len(), b.len()), "KS {d}");
}

#[test]
fn correct_model_reaches_noise_floor() {
    let sim = simulate_panel::<f64>(&PanelSimConfig::default(), 8).unwrap();
    let treated = sim.panel.treated_cells();
    let fit = gibbs_factor(&sim.panel, &treated, &FactorModel::new(2, 1.0).with_chain(2000, 1000), 8).unwrap();
    let bias2 = treated.iter().map(|c| (fit.fitted(&sim.panel, c) - sim.untreated(c.unit, c.time)).powi(2)).sum::<f64>() / treated.len() as f64;
    assert!(bias2 <= 2.0, "bias² {bias2}");
}

#[test]
fn rejects_bad_configurations() {
    let panel = rank_one(3, 4, 0.1, 0);
    let none = CellMask::empty(3, 4);
    assert!(gibbs_factor(&panel, &none, &FactorModel::new(4, 1.0), 0).is_err());
    assert!(gibbs_factor(&panel, &none, &FactorModel::new(1, -1.0), 0).is_err());
    let whole_unit = CellMask::new(3, 4, (0..4).map(|t| Cell::new(1, t))).unwrap();
    assert!(gibbs_factor(&panel, &whole_unit, &FactorModel::new(1, 1.0).with_chain(10, 5), 0).is_err());
    let treated = panel.with_treatment_start(vec![Some(2), None, None]).unwrap();
    assert!(gibbs_factor(&treated, &none, &FactorModel::new(1, 1.0).with_chain(10, 5), 0).is_err());
}
