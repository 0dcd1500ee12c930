use tempered_causal::effects::{att_curve, effect_draws, effect_summaries, Alignment};
use tempered_causal::factor::{gibbs_factor, FactorModel, PredictiveDraws};
use tempered_causal::io::{read_panel, write_panel, PanelSchema};
use tempered_causal::panel::{build_treatment_indicator, PanelData};
use tempered_causal::simgen::{abs_normal_sd, simulate_cross_section, simulate_panel, PanelSimConfig, TauSpec};

/// `P(D = 1)` under the cross-sectional design, by 2-d Simpson quadrature
/// over `X₁` and `Z = 0.4X₂ + 0.8X₃ ~ N(0, 0.8)`.
fn treatment_probability() -> f64 {
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let steps = 800;
    let (a, b) = (-9.0, 9.0);
    let h = (b - a) / steps as f64;
    let w = |j: usize| if j == 0 || j == steps { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
    let sz = 0.8f64.sqrt();
    let mut s = 0.0;
    for i in 0..=steps {
        let x = a + i as f64 * h;
        for j in 0..=steps {
            let z = a + j as f64 * h;
            let p = 1.0 / (1.0 + (-(0.4 * x.abs() / abs_normal_sd() + sz * z)).exp());
            s += w(i) * w(j) * phi(x) * phi(z) * p;
        }
    }
    s * h * h / 9.0
}

#[test]
fn cross_section_treatment_rate() {
    let reference = 0.607_954_5;
    assert!((treatment_probability() - reference).abs() < 1e-6);
    let sim = simulate_cross_section::<f64>(1_000_000, 0.0, 1.0, 2024).unwrap();
    let mean = sim.d.iter().sum::<f64>() / 1e6;
    let se = (reference * (1.0 - reference) / 1e6).sqrt();
    assert!((mean - reference).abs() < 4.0 * se, "{mean}");
}

#[test]
fn confounder_is_standardized() {
    let sim = simulate_cross_section::<f64>(100_000, 1.0, 1.0, 3).unwrap();
    let n = sim.u.len() as f64;
    let m = sim.u.iter().sum::<f64>() / n;
    let v = sim.u.iter().map(|u| (u - m).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((v - 1.0).abs() < 0.05);
    let cfg = PanelSimConfig { n_units: 100, n_times: 1000, ..Default::default() };
    let panel = simulate_panel::<f64>(&cfg, 3).unwrap();
    let m = panel.u.iter().sum::<f64>() / 1e5;
    let v = panel.u.iter().map(|u| (u - m).powi(2)).sum::<f64>() / (1e5 - 1.0);
    assert!((v - 1.0).abs() < 0.05);
}

#[test]
fn gamma_only_enters_through_the_confounder() {
    let a = simulate_cross_section::<f64>(500, 0.0, 1.0, 4).unwrap();
    let b = simulate_cross_section::<f64>(500, 2.0, 1.0, 4).unwrap();
    assert_eq!((&a.d, &a.x1, &a.u), (&b.d, &b.x1, &b.u));
    for i in 0..500 {
        assert!((b.y[i] - a.y[i] - 2.0 * a.u[i]).abs() < 1e-12);
    }
}

#[test]
fn confounder_only_touches_untreated_cells() {
    let base = PanelSimConfig::default();
    let a = simulate_panel::<f64>(&base, 77).unwrap();
    let b = simulate_panel::<f64>(&PanelSimConfig { beta_u: 5.0, ..base }, 77).unwrap();
    for i in 0..30 {
        for t in 0..100 {
            let (ya, yb) = (a.panel.outcome(i, t).unwrap(), b.panel.outcome(i, t).unwrap());
            if a.panel.is_treated(i, t) {
                assert_eq!(ya, yb);
            } else {
                assert!((yb - ya - 5.0 * a.u[i * 100 + t]).abs() < 1e-12);
            }
        }
    }
    assert_eq!(a, simulate_panel::<f64>(&base, 77).unwrap());
}

#[test]
fn misspecification_grows_with_beta_u() {
    let errors: Vec<f64> = [0.0, 1.0, 2.0, 5.0]
        .iter()
        .map(|&beta_u| {
            let sim = simulate_panel::<f64>(&PanelSimConfig { beta_u, ..Default::default() }, 12).unwrap();
            let treated = sim.panel.treated_cells();
            let fit = gibbs_factor(&sim.panel, &treated, &FactorModel::new(2, 1.0).with_chain(2000, 1000), 12).unwrap();
            treated.iter().map(|c| (fit.fitted(&sim.panel, c) - sim.untreated(c.unit, c.time)).powi(2)).sum::<f64>() / treated.len() as f64
        })
        .collect();
    assert!(errors.windows(2).all(|w| w[0] <= w[1]), "{errors:?}");
}

#[test]
fn perfect_counterfactuals_recover_the_true_att() {
    let cfg = PanelSimConfig { n_units: 12, n_times: 40, tau: TauSpec::Ramp { base: 0.5, slope: 0.1 }, start_range: Some((15, 35)), ..Default::default() };
    let sim = simulate_panel::<f64>(&cfg, 6).unwrap();
    let treated = sim.panel.treated_cells();
    let cells: Vec<_> = treated.iter().collect();
    let pred = PredictiveDraws {
        cells: cells.clone(),
        mean_draws: cells.iter().map(|c| vec![sim.untreated(c.unit, c.time); 4]).collect(),
        outcome_draws: cells.iter().map(|c| vec![sim.untreated(c.unit, c.time); 4]).collect(),
    };
    let eff = effect_draws(&sim.panel, &pred, &treated).unwrap();
    for (c, d) in eff.cells.iter().zip(&eff.draws) {
        assert!(d.iter().all(|&v| (v - sim.tau(c.unit, c.time)).abs() < 1e-12));
    }
    let d = build_treatment_indicator(&sim.panel);
    for alignment in [Alignment::Calendar, Alignment::EventTime] {
        let curve = att_curve(&eff, &d, alignment, 0.05).unwrap();
        let mut period_means = Vec::new();
        for p in &curve.periods {
            let members: Vec<f64> =
                cells.iter().filter(|&&c| alignment.period(c, d.starts()) == Some(p.period)).map(|c| sim.tau(c.unit, c.time)).collect();
            let m = members.iter().sum::<f64>() / members.len() as f64;
            assert_eq!(p.n_cells, members.len());
            assert!((p.summary.mean - m).abs() < 1e-12);
            period_means.push(m);
        }
        let overall = period_means.iter().sum::<f64>() / period_means.len() as f64;
        assert!((curve.overall.mean - overall).abs() < 1e-12);
    }

    // Shifting every counterfactual draw by c moves every effect draw by −c.
    let shifted = PredictiveDraws { outcome_draws: pred.outcome_draws.iter().map(|d| d.iter().map(|v| v + 0.25).collect()).collect(), ..pred };
    let eff2 = effect_draws(&sim.panel, &shifted, &treated).unwrap();
    for (a, b) in eff.draws.iter().zip(&eff2.draws) {
        assert!(a.iter().zip(b).all(|(x, y)| (x - y - 0.25).abs() < 1e-12));
    }
    assert!(effect_summaries(&eff2, 0.05).unwrap().iter().all(|s| s.lower <= s.upper));
}

#[test]
fn att_curve_ignores_unit_order() {
    let cfg = PanelSimConfig { n_units: 6, n_times: 20, start_range: Some((5, 15)), tau: TauSpec::Ramp { base: 1.0, slope: -0.05 }, ..Default::default() };
    let sim = simulate_panel::<f64>(&cfg, 2).unwrap();
    let order = [5, 3, 1, 0, 2, 4];
    let flipped = sim.panel.subset_units(&order).unwrap();
    let curve = |panel: &PanelData<f64>| {
        let treated = panel.treated_cells();
        let cells: Vec<_> = treated.iter().collect();
        let draws: Vec<Vec<f64>> = cells.iter().map(|c| vec![panel.outcome(c.unit, c.time).unwrap() - 1.0; 3]).collect();
        let pred = PredictiveDraws { cells: cells.clone(), mean_draws: draws.clone(), outcome_draws: draws };
        att_curve(&effect_draws(panel, &pred, &treated).unwrap(), &build_treatment_indicator(panel), Alignment::Calendar, 0.05).unwrap()
    };
    let (a, b) = (curve(&sim.panel), curve(&flipped));
    assert_eq!(a.periods.len(), b.periods.len());
    for (p, q) in a.periods.iter().zip(&b.periods) {
        assert_eq!((p.period, p.n_cells), (q.period, q.n_cells));
        assert!((p.summary.mean - q.summary.mean).abs() < 1e-12);
    }
}

#[test]
fn simulated_panels_survive_the_file_format() {
    let sim = simulate_panel::<f64>(&PanelSimConfig { n_units: 5, n_times: 12, start_range: Some((4, 20)), ..Default::default() }, 1).unwrap();
    let mut buf = Vec::new();
    write_panel(&sim.panel, &mut buf).unwrap();
    let back: PanelData<f64> = read_panel(buf.as_slice(), &PanelSchema::default()).unwrap();
    assert_eq!(back, sim.panel);
}
