use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use tempered_causal::baseline::{als_complete, mc_evaluate, wild_bootstrap, AlsSettings, BootstrapConfig};
use tempered_causal::effects::{att_curve, effect_draws, AttCurve, Alignment, PeriodScore};
use tempered_causal::factor::{gibbs_factor, posterior_predict, FactorModel, FactorPriors, VarianceModel};
use tempered_causal::io::{read_panel_file, write_panel};
use tempered_causal::linalg::Matrix;
use tempered_causal::panel::{summarize_slice, PanelData, PosteriorSummary};
use tempered_causal::regression::{gibbs_regression, gibbs_regression_known_variance, RegressionPriors};
use tempered_causal::rng::derive_seed;
use tempered_causal::scoring::{average_score, ScoreReport};
use tempered_causal::selection::{
    build_placebo_masks, evaluate_placebo, final_chain_seed, placebo_pipeline, score_surface_export, select_omega, GridFailure,
    OmegaGrid, PlaceboDesign, PlaceboEvaluation, PlaceboMasks,
};
use tempered_causal::simgen::{simulate_cross_section, simulate_panel, PanelSimConfig, TauSpec};
use tempered_causal::build_treatment_indicator;

use crate::config::{Design, RunConfig, TauKind, VarianceKind};
use crate::output::OutputDir;

type Panel = PanelData<f64>;

fn load_panel(cfg: &RunConfig, outcome: &str) -> Result<Panel> {
    let path = cfg.input.path.as_deref().ok_or_else(|| anyhow!("input.path is required"))?;
    let mut schema = cfg.input.schema.clone();
    schema.outcome = outcome.to_string();
    read_panel_file(path, &schema).with_context(|| format!("reading panel {}", path.display()))
}

fn template(cfg: &RunConfig) -> FactorModel<f64> {
    let variance = match cfg.factor.variance {
        VarianceKind::UnitSpecific => VarianceModel::UnitSpecific,
        VarianceKind::Shared => VarianceModel::Shared,
        VarianceKind::Fixed => VarianceModel::Fixed(cfg.factor.sigma2),
    };
    let priors = FactorPriors { loading_scale: cfg.factor.loading_scale, a: cfg.factor.a, b: cfg.factor.b, beta_cov: None };
    FactorModel::new(1, 1.0).with_chain(cfg.chain.iterations, cfg.chain.burnin).with_variance(variance).with_priors(priors)
}

fn design(cfg: &RunConfig) -> PlaceboDesign {
    let s = &cfg.selection;
    PlaceboDesign {
        pseudo_fraction: s.pseudo_fraction,
        tune_fraction: s.tune_fraction,
        start_window: s.start_min.zip(s.start_max),
        alpha: cfg.alpha,
    }
}

fn fixed_fit(cfg: &RunConfig) -> Option<(usize, f64)> {
    cfg.fit.k.zip(cfg.fit.omega)
}

// ---------------------------------------------------------------- simulate

#[derive(Serialize)]
struct TruthRow<'a> {
    unit: &'a str,
    time: &'a str,
    treated: u8,
    y0: f64,
    tau: f64,
    u: f64,
}

#[derive(Serialize)]
struct CrossSectionRow {
    y: f64,
    d: f64,
    x1: f64,
    x2: f64,
    x3: f64,
    u: f64,
}

pub fn simulate(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let s = &cfg.simulate;
    match s.design {
        Design::Panel => {
            let tau = match s.tau {
                TauKind::Constant => TauSpec::Constant(s.tau_base),
                TauKind::Ramp => TauSpec::Ramp { base: s.tau_base, slope: s.tau_slope },
            };
            let sim_cfg = PanelSimConfig {
                n_units: s.n_units,
                n_times: s.n_times,
                k: s.k,
                beta_u: s.beta_u,
                tau,
                start_range: Some(s.start_min.zip(s.start_max).unwrap_or_else(|| {
                    let t = s.n_times as f64;
                    ((0.4 * t).round() as usize, (0.95 * t).round() as usize)
                })),
                never_treated: s.never_treated,
            };
            let sim = simulate_panel::<f64>(&sim_cfg, cfg.seed)?;
            let p = &sim.panel;
            let mut body = Vec::new();
            write_panel(p, &mut body)?;
            out.write_csv_bytes("panel.csv", &body)?;
            let mut truth = Vec::with_capacity(p.n_units() * p.n_times());
            for i in 0..p.n_units() {
                for t in 0..p.n_times() {
                    truth.push(TruthRow {
                        unit: &p.unit_ids()[i],
                        time: &p.time_ids()[t],
                        treated: p.is_treated(i, t) as u8,
                        y0: sim.untreated(i, t),
                        tau: sim.tau(i, t),
                        u: sim.u[i * p.n_times() + t],
                    });
                }
            }
            out.write_csv("truth.csv", &truth)?;
            let treated = p.treated_cells();
            out.write_json(
                "summary.json",
                &serde_json::json!({
                    "seed": cfg.seed,
                    "design": "panel",
                    "n_units": p.n_units(),
                    "n_times": p.n_times(),
                    "true_k": sim.true_k,
                    "beta_u": s.beta_u,
                    "n_never_treated": p.never_treated_units().len(),
                    "n_treated_cells": treated.len(),
                }),
            )
        }
        Design::CrossSection => {
            let sim = simulate_cross_section::<f64>(s.n, s.gamma, s.tau_true, cfg.seed)?;
            let rows: Vec<CrossSectionRow> = (0..sim.len())
                .map(|i| CrossSectionRow { y: sim.y[i], d: sim.d[i], x1: sim.x1[i], x2: sim.x2[i], x3: sim.x3[i], u: sim.u[i] })
                .collect();
            out.write_csv("data.csv", &rows)?;
            out.write_json(
                "summary.json",
                &serde_json::json!({
                    "seed": cfg.seed,
                    "design": "cross-section",
                    "n": sim.len(),
                    "gamma": s.gamma,
                    "tau_true": s.tau_true,
                    "treated_share": sim.d.iter().sum::<f64>() / sim.len() as f64,
                }),
            )
        }
    }
}

// ---------------------------------------------------------------- select

#[derive(Serialize)]
struct MaskRow<'a> {
    unit: &'a str,
    time: &'a str,
    role: &'a str,
}

#[derive(Serialize)]
struct PlaceboStart<'a> {
    unit: &'a str,
    start: &'a str,
}

#[derive(Serialize)]
struct SelectionDoc<'a> {
    seed: u64,
    outcome: &'a str,
    best_k: Option<usize>,
    best_omega: f64,
    best_report: ScoreReport<f64>,
    omega_grid: &'a [f64],
    ks: &'a [usize],
    failures: &'a [GridFailure],
    pseudo_units: Vec<PlaceboStart<'a>>,
    n_tuning_cells: usize,
    n_evaluation_cells: usize,
    evaluation: Option<ScoreReport<f64>>,
}

fn write_masks(out: &OutputDir, name: &str, panel: &Panel, masks: &PlaceboMasks) -> Result<()> {
    let mut rows = Vec::new();
    for (mask, role) in [(&masks.tuning, "tuning"), (&masks.evaluation, "evaluation")] {
        rows.extend(mask.iter().map(|c| MaskRow { unit: &panel.unit_ids()[c.unit], time: &panel.time_ids()[c.time], role }));
    }
    out.write_csv(name, &rows)
}

fn pseudo_starts<'a>(panel: &'a Panel, masks: &PlaceboMasks) -> Vec<PlaceboStart<'a>> {
    masks
        .pseudo_units
        .iter()
        .map(|&i| PlaceboStart {
            unit: &panel.unit_ids()[i],
            start: masks.placebo_starts[i].map(|s| panel.time_ids()[s].as_str()).unwrap_or(""),
        })
        .collect()
}

pub fn select(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let outcome = cfg.outcomes().remove(0);
    let panel = load_panel(cfg, &outcome)?;
    let grid = OmegaGrid::new(cfg.selection.omega_grid.clone())?;
    let res = placebo_pipeline(&panel, &grid, &cfg.selection.ks, &design(cfg), &template(cfg), cfg.seed)?;
    let masks = res.masks.as_ref().expect("pipeline records masks");
    out.write_csv("surface.csv", &score_surface_export(&res))?;
    write_masks(out, "masks.csv", &panel, masks)?;
    out.write_json(
        "selection.json",
        &SelectionDoc {
            seed: cfg.seed,
            outcome: &outcome,
            best_k: res.best_k,
            best_omega: res.best_omega,
            best_report: res.best_report,
            omega_grid: &cfg.selection.omega_grid,
            ks: &cfg.selection.ks,
            failures: &res.failures,
            pseudo_units: pseudo_starts(&panel, masks),
            n_tuning_cells: masks.tuning.len(),
            n_evaluation_cells: masks.evaluation.len(),
            evaluation: res.evaluation.as_ref().map(|e| e.overall),
        },
    )
}

// ---------------------------------------------------------------- fit-regression

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_path(path)?;
        let headers = rdr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|v| v.parse::<f64>().with_context(|| format!("row {}: {v:?} is not a number", line + 1)))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { headers, rows })
    }

    fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.headers.iter().position(|h| h == name).ok_or_else(|| anyhow!("missing column {name:?}"))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }
}

#[derive(Clone, Serialize)]
struct RegressionRow {
    omega: f64,
    mean: f64,
    sd: f64,
    lower: f64,
    upper: f64,
    bias2: Option<f64>,
    interval_score: Option<f64>,
    combined: Option<f64>,
}

pub fn fit_regression(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let r = &cfg.regression;
    let path = cfg.input.path.as_deref().ok_or_else(|| anyhow!("input.path is required"))?;
    let table = Table::read(path).with_context(|| format!("reading {}", path.display()))?;
    let y = table.column(&r.outcome)?;
    let mut cols = vec![table.column(&r.treatment)?];
    for c in &r.covariates {
        cols.push(table.column(c)?);
    }
    if r.intercept {
        cols.insert(0, vec![1.0; y.len()]);
    }
    let q = cols.len();
    let data = (0..y.len()).flat_map(|i| cols.iter().map(move |c| c[i])).collect();
    let x = Matrix::from_row_major(y.len(), q, data)?;
    let priors = RegressionPriors::new(vec![0.0; q], &Matrix::identity(q).scale(r.prior_variance), r.a0, r.b0)?;
    let coef = r.intercept as usize;
    let chain_seed = derive_seed(cfg.seed, "regression-chain", 0);
    let draws_at = |w: f64| -> Result<Vec<f64>> {
        let fit = match r.sigma2 {
            Some(s2) => gibbs_regression_known_variance(&x, &y, &priors, w, s2, r.iterations, r.burnin, chain_seed)?,
            None => gibbs_regression(&x, &y, &priors, w, r.iterations, r.burnin, chain_seed)?,
        };
        Ok(fit.beta_draws[coef].draws().to_vec())
    };
    let fits: Vec<(Vec<f64>, PosteriorSummary<f64>)> = r
        .omegas
        .par_iter()
        .map(|&w| {
            let d = draws_at(w)?;
            let s = summarize_slice(&d, cfg.alpha)?;
            Ok((d, s))
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<RegressionRow> = r
        .omegas
        .iter()
        .zip(&fits)
        .map(|(&omega, (d, s))| {
            let n = d.len() as f64;
            let sd = (d.iter().map(|v| (v - s.mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            RegressionRow { omega, mean: s.mean, sd, lower: s.lower, upper: s.upper, bias2: None, interval_score: None, combined: None }
        })
        .collect();
    let mut selected = None;
    if let Some(tau) = r.tau_true {
        let grid = OmegaGrid::new(r.omegas.clone())?;
        let lookup = |w: f64| {
            let j = r.omegas.iter().position(|&v| v == w).expect("grid value");
            Ok(vec![fits[j].1])
        };
        let res = select_omega(&grid, lookup, &[tau], cfg.seed)?;
        for row in &mut rows {
            let p = res.surface.iter().find(|p| p.omega == row.omega).expect("every grid point scored");
            row.bias2 = Some(p.report.squared_bias);
            row.interval_score = Some(p.report.interval_score);
            row.combined = Some(p.report.combined);
        }
        selected = Some(res.best_omega);
    }
    out.write_csv("regression.csv", &rows)?;
    out.write_json(
        "regression.json",
        &serde_json::json!({
            "seed": cfg.seed,
            "n": y.len(),
            "treatment": r.treatment,
            "known_sigma2": r.sigma2,
            "tau_true": r.tau_true,
            "selected_omega": selected,
            "fits": rows,
        }),
    )
}

// ---------------------------------------------------------------- fit-panel

#[derive(Serialize)]
struct AttRow<'a> {
    alignment: &'a str,
    period: String,
    n_cells: usize,
    mean: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct EffectRow<'a> {
    unit: &'a str,
    time: &'a str,
    observed: f64,
    counterfactual: f64,
    effect: f64,
    lower: f64,
    upper: f64,
}

fn period_label(panel: &Panel, alignment: Alignment, period: i64) -> String {
    match alignment {
        Alignment::Calendar => panel.time_ids()[period as usize].clone(),
        Alignment::EventTime => period.to_string(),
    }
}

pub fn fit_panel(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let (k, omega) = fixed_fit(cfg).ok_or_else(|| anyhow!("fit-panel needs fit.k and fit.omega; run select first"))?;
    let outcome = cfg.outcomes().remove(0);
    let panel = load_panel(cfg, &outcome)?;
    let treated = panel.treated_cells();
    if treated.is_empty() {
        bail!("panel has no treated cells");
    }
    let model = FactorModel { k, omega, ..template(cfg) };
    let fit = gibbs_factor(&panel, &treated, &model, final_chain_seed(cfg.seed))?;
    let pred = posterior_predict(&fit, &panel, &treated)?;
    let eff = effect_draws(&panel, &pred, &treated)?;
    let indicator = build_treatment_indicator(&panel);
    let curves: Vec<(&str, AttCurve<f64>)> = [("calendar", Alignment::Calendar), ("event-time", Alignment::EventTime)]
        .into_iter()
        .map(|(name, a)| Ok((name, att_curve(&eff, &indicator, a, cfg.alpha)?)))
        .collect::<Result<_>>()?;
    let mut att_rows = Vec::new();
    for (name, curve) in &curves {
        for p in &curve.periods {
            att_rows.push(AttRow {
                alignment: name,
                period: period_label(&panel, curve.alignment, p.period),
                n_cells: p.n_cells,
                mean: p.summary.mean,
                lower: p.summary.lower,
                upper: p.summary.upper,
            });
        }
    }
    out.write_csv("att.csv", &att_rows)?;
    let eff_summaries = tempered_causal::effects::effect_summaries(&eff, cfg.alpha)?;
    let effect_rows: Vec<EffectRow> = eff
        .cells
        .iter()
        .zip(&eff_summaries)
        .zip(&pred.outcome_draws)
        .map(|((c, s), draws)| {
            let observed = panel.outcome(c.unit, c.time).expect("treated cells are observed");
            EffectRow {
                unit: &panel.unit_ids()[c.unit],
                time: &panel.time_ids()[c.time],
                observed,
                counterfactual: draws.iter().sum::<f64>() / draws.len() as f64,
                effect: s.mean,
                lower: s.lower,
                upper: s.upper,
            }
        })
        .collect();
    out.write_csv("effects.csv", &effect_rows)?;
    let overall: BTreeMap<&str, _> = curves
        .iter()
        .map(|(name, c)| (*name, serde_json::json!({ "overall": c.overall, "overall_cell_weighted": c.overall_cell_weighted })))
        .collect();
    out.write_json(
        "att.json",
        &serde_json::json!({
            "seed": cfg.seed,
            "outcome": outcome,
            "k": k,
            "omega": omega,
            "n_treated_cells": treated.len(),
            "att": overall,
            "diagnostics": fit.diagnostics,
        }),
    )
}

// ---------------------------------------------------------------- evaluate / compare

struct PlaceboRun {
    k: usize,
    omega: f64,
    selected: bool,
    masks: PlaceboMasks,
    rbci: PlaceboEvaluation<f64>,
    mc: Option<PlaceboEvaluation<f64>>,
}

fn placebo_run(cfg: &RunConfig, panel: &Panel, with_mc: bool) -> Result<PlaceboRun> {
    let tmpl = template(cfg);
    let (k, omega, selected, masks, rbci) = match fixed_fit(cfg) {
        Some((k, omega)) => {
            let masks = build_placebo_masks(panel, &design(cfg), cfg.seed)?;
            let ev = evaluate_placebo(panel, &masks, &tmpl, k, omega, cfg.alpha, cfg.seed)?;
            (k, omega, false, masks, ev)
        }
        None => {
            let grid = OmegaGrid::new(cfg.selection.omega_grid.clone())?;
            let res = placebo_pipeline(panel, &grid, &cfg.selection.ks, &design(cfg), &tmpl, cfg.seed)?;
            let k = res.best_k.expect("panel selection sets K");
            (k, res.best_omega, true, res.masks.expect("pipeline records masks"), res.evaluation.expect("pipeline evaluates"))
        }
    };
    let mc = if with_mc {
        let b = &cfg.baseline;
        let settings = AlsSettings { k, ridge: b.ridge, max_iter: b.max_iter, tol: b.tol };
        let fit = als_complete(panel, &masks.final_exclusion(panel)?, settings, derive_seed(cfg.seed, "mc-als", 0))?;
        let boot = BootstrapConfig { replicates: b.replicates, alpha: cfg.alpha, scheme: b.scheme };
        let intervals = wild_bootstrap(panel, &fit, &masks.evaluation, &boot, derive_seed(cfg.seed, "mc-bootstrap", 0))?;
        Some(mc_evaluate(panel, &intervals, &masks.placebo_starts, k)?)
    } else {
        None
    };
    Ok(PlaceboRun { k, omega, selected, masks, rbci, mc })
}

#[derive(Serialize)]
struct PlotRow {
    period: String,
    method: &'static str,
    bias2: f64,
    interval_score: f64,
}

#[derive(Serialize)]
struct TableRow<'a> {
    outcome: &'a str,
    method: &'static str,
    bias2: f64,
    interval_score: f64,
    k: usize,
    omega: Option<f64>,
}

fn plot_rows(panel: &Panel, method: &'static str, scores: &[PeriodScore<f64>], out: &mut Vec<PlotRow>) {
    out.extend(scores.iter().map(|p| PlotRow {
        period: period_label(panel, Alignment::Calendar, p.period),
        method,
        bias2: p.report.squared_bias,
        interval_score: p.report.interval_score,
    }));
}

fn file_stem(outcome: &str) -> String {
    outcome.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

pub fn evaluate(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let outcomes = cfg.outcomes();
    let mut table = Vec::new();
    let mut docs = Vec::new();
    for outcome in &outcomes {
        let panel = load_panel(cfg, outcome)?;
        let run = placebo_run(cfg, &panel, cfg.baseline.enabled)?;
        let mut plot = Vec::new();
        plot_rows(&panel, "RBCI", &run.rbci.per_period, &mut plot);
        table.push(TableRow {
            outcome,
            method: "RBCI",
            bias2: run.rbci.overall.squared_bias,
            interval_score: run.rbci.overall.interval_score,
            k: run.k,
            omega: Some(run.omega),
        });
        if let Some(mc) = &run.mc {
            plot_rows(&panel, "MC", &mc.per_period, &mut plot);
            table.push(TableRow {
                outcome,
                method: "MC",
                bias2: mc.overall.squared_bias,
                interval_score: mc.overall.interval_score,
                k: run.k,
                omega: None,
            });
        }
        let stem = file_stem(outcome);
        out.write_csv(&format!("plot_data_{stem}.csv"), &plot)?;
        write_masks(out, &format!("masks_{stem}.csv"), &panel, &run.masks)?;
        docs.push(serde_json::json!({
            "outcome": outcome,
            "k": run.k,
            "omega": run.omega,
            "selected": run.selected,
            "n_evaluation_cells": run.masks.evaluation.len(),
            "pseudo_units": pseudo_starts(&panel, &run.masks),
            "rbci": { "overall": run.rbci.overall, "per_event_time": run.rbci.per_event_time },
            "mc": run.mc.as_ref().map(|m| serde_json::json!({ "overall": m.overall, "per_event_time": m.per_event_time })),
        }));
    }
    out.write_csv("table.csv", &table)?;
    out.write_json("evaluation.json", &serde_json::json!({ "seed": cfg.seed, "alpha": cfg.alpha, "outcomes": docs }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupRow {
    pub group: String,
    pub n_units: usize,
    pub n_cells: usize,
    pub k: usize,
    pub omega: f64,
    pub rbci_bias2: f64,
    pub rbci_interval_score: f64,
    pub rbci_combined: f64,
    pub mc_bias2: f64,
    pub mc_interval_score: f64,
    pub mc_combined: f64,
}

/// Paired per-group averages of cell scores, groups in label order, then an
/// `overall` row. `cells[j]` is scored by `rbci[j]` and `mc[j]`.
pub fn group_report(
    cells: &[(usize, usize)],
    unit_groups: &[String],
    rbci: &[ScoreReport<f64>],
    mc: &[ScoreReport<f64>],
    k: usize,
    omega: f64,
) -> Result<Vec<GroupRow>> {
    if cells.len() != rbci.len() || cells.len() != mc.len() {
        bail!("paired scores are misaligned");
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (j, &(unit, _)) in cells.iter().enumerate() {
        members.entry(unit_groups[unit].as_str()).or_default().push(j);
    }
    let row = |group: &str, idx: &[usize]| -> Result<GroupRow> {
        let pick = |r: &[ScoreReport<f64>]| average_score(&idx.iter().map(|&j| r[j]).collect::<Vec<_>>());
        let (a, b) = (pick(rbci)?, pick(mc)?);
        let mut units: Vec<usize> = idx.iter().map(|&j| cells[j].0).collect();
        units.dedup();
        Ok(GroupRow {
            group: group.to_string(),
            n_units: units.len(),
            n_cells: idx.len(),
            k,
            omega,
            rbci_bias2: a.squared_bias,
            rbci_interval_score: a.interval_score,
            rbci_combined: a.combined,
            mc_bias2: b.squared_bias,
            mc_interval_score: b.interval_score,
            mc_combined: b.combined,
        })
    };
    let mut rows = members.iter().map(|(g, idx)| row(g, idx)).collect::<Result<Vec<_>>>()?;
    rows.push(row("overall", &(0..cells.len()).collect::<Vec<_>>())?);
    Ok(rows)
}

#[derive(Serialize)]
struct PairedCell<'a> {
    unit: &'a str,
    time: &'a str,
    group: &'a str,
    truth: f64,
    rbci_mean: f64,
    rbci_lower: f64,
    rbci_upper: f64,
    rbci_bias2: f64,
    rbci_interval_score: f64,
    mc_mean: f64,
    mc_lower: f64,
    mc_upper: f64,
    mc_bias2: f64,
    mc_interval_score: f64,
}

pub fn compare(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let outcome = cfg.outcomes().remove(0);
    let panel = load_panel(cfg, &outcome)?;
    let run = placebo_run(cfg, &panel, true)?;
    let mc = run.mc.as_ref().expect("compare always runs the baseline");
    let groups: Vec<String> = match panel.groups() {
        Some(g) => g.to_vec(),
        None => vec!["all".to_string(); panel.n_units()],
    };
    let (a, b) = (&run.rbci, mc);
    let cells: Vec<PairedCell> = a
        .cells
        .iter()
        .enumerate()
        .map(|(j, &(u, t))| PairedCell {
            unit: &panel.unit_ids()[u],
            time: &panel.time_ids()[t],
            group: &groups[u],
            truth: panel.outcome(u, t).expect("evaluation cells are observed"),
            rbci_mean: a.summaries[j].mean,
            rbci_lower: a.summaries[j].lower,
            rbci_upper: a.summaries[j].upper,
            rbci_bias2: a.cell_reports[j].squared_bias,
            rbci_interval_score: a.cell_reports[j].interval_score,
            mc_mean: b.summaries[j].mean,
            mc_lower: b.summaries[j].lower,
            mc_upper: b.summaries[j].upper,
            mc_bias2: b.cell_reports[j].squared_bias,
            mc_interval_score: b.cell_reports[j].interval_score,
        })
        .collect();
    if a.cells != b.cells {
        bail!("methods were scored on different cells");
    }
    out.write_csv("compare_cells.csv", &cells)?;
    let rows = group_report(&a.cells, &groups, &a.cell_reports, &b.cell_reports, run.k, run.omega)?;
    out.write_csv("compare_groups.csv", &rows)?;
    out.write_json(
        "compare.json",
        &serde_json::json!({
            "seed": cfg.seed,
            "outcome": outcome,
            "k": run.k,
            "omega": run.omega,
            "selected": run.selected,
            "n_cells": a.cells.len(),
            "rbci": a.overall,
            "mc": b.overall,
            "rbci_better_combined": a.overall.combined < b.overall.combined,
        }),
    )
}
