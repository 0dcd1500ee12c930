//! Learning-rate and factor-count selection by a proper scoring rule.
//!
//! [`select_omega`] is the plain grid search: fit at every `ω`, summarize,
//! score against known truth, keep the minimizer. [`placebo_pipeline`] is
//! the panel version, which manufactures truth by masking never-treated
//! outcomes.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effects::{cell_scores, per_time_evaluation, Alignment, PeriodScore};
use crate::error::{Error, Result};
use crate::factor::{cell_summaries, gibbs_factor, posterior_predict, FactorModel};
use crate::panel::{random_cell_mask, Cell, CellMask, PanelData, PosteriorSummary};
use crate::rng::{derive_seed, stream};
use crate::scalar::Real;
use crate::scoring::{average_score, ScoreReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaGrid<T> {
    values: Vec<T>,
}

impl<T: Real> OmegaGrid<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("omega grid".into()));
        }
        if values.iter().any(|&w| !(w > T::zero() && w.is_finite())) {
            return Err(Error::InvalidArgument("omega grid values must be positive and finite".into()));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("omega grid must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// `{0.1, 0.2, …, 3.0}`.
    pub fn standard() -> Self {
        Self { values: (1..=30).map(|k| T::lit(k as f64 / 10.0)).collect() }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint<T> {
    pub k: Option<usize>,
    pub omega: T,
    pub report: ScoreReport<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFailure {
    pub k: Option<usize>,
    pub omega: f64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult<T> {
    pub best_omega: T,
    pub best_k: Option<usize>,
    pub best_report: ScoreReport<T>,
    /// Sorted by `(K, ω)`.
    pub surface: Vec<SurfacePoint<T>>,
    pub failures: Vec<GridFailure>,
    pub masks: Option<PlaceboMasks>,
    pub evaluation: Option<PlaceboEvaluation<T>>,
    pub seed: u64,
}

/// Minimum combined score; ties go to the `ω` closest to 1, then smaller
/// `K`.
fn argmin<T: Real>(surface: &[SurfacePoint<T>]) -> Option<SurfacePoint<T>> {
    surface.iter().copied().min_by(|a, b| {
        let key = |p: &SurfacePoint<T>| (p.report.combined, (p.omega - T::one()).abs());
        let (ca, da) = key(a);
        let (cb, db) = key(b);
        ca.partial_cmp(&cb)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.k.cmp(&b.k))
    })
}

fn score_against<T: Real>(summaries: &[PosteriorSummary<T>], truth: &[T]) -> Result<ScoreReport<T>> {
    average_score(&cell_scores(summaries, truth)?)
}

fn assemble<T: Real>(
    outcomes: Vec<(Option<usize>, T, Result<ScoreReport<T>>)>,
    seed: u64,
) -> Result<SelectionResult<T>> {
    let mut surface = Vec::new();
    let mut failures = Vec::new();
    for (k, omega, r) in outcomes {
        match r {
            Ok(report) => surface.push(SurfacePoint { k, omega, report }),
            Err(e) => failures.push(GridFailure { k, omega: omega.as_f64(), message: e.to_string() }),
        }
    }
    let best = argmin(&surface).ok_or_else(|| {
        Error::AllGridPointsFailed(failures.first().map_or_else(|| "empty grid".to_string(), |f| f.message.clone()))
    })?;
    Ok(SelectionResult {
        best_omega: best.omega,
        best_k: best.k,
        best_report: best.report,
        surface,
        failures,
        masks: None,
        evaluation: None,
        seed,
    })
}

/// Grid search over `ω`. `factory(ω)` returns posterior summaries aligned
/// with `truth`; their average combined score is the criterion. Failing
/// grid points are recorded and skipped.
pub fn select_omega<T, F>(grid: &OmegaGrid<T>, factory: F, truth: &[T], seed: u64) -> Result<SelectionResult<T>>
where
    T: Real,
    F: Fn(T) -> Result<Vec<PosteriorSummary<T>>> + Sync,
{
    let outcomes = grid
        .values()
        .par_iter()
        .map(|&w| (None, w, factory(w).and_then(|s| score_against(&s, truth))))
        .collect();
    assemble(outcomes, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaceboDesign {
    /// Share of never-treated units turned into pseudo-treated units.
    pub pseudo_fraction: f64,
    /// Share of the remaining controls' cells masked for tuning.
    pub tune_fraction: f64,
    /// Inclusive window of placebo starts; `None` uses
    /// `[round(0.4 T), round(0.95 T)]`.
    pub start_window: Option<(usize, usize)>,
    pub alpha: f64,
}

impl Default for PlaceboDesign {
    fn default() -> Self {
        Self { pseudo_fraction: 0.15, tune_fraction: 0.20, start_window: None, alpha: 0.05 }
    }
}

impl PlaceboDesign {
    fn window(&self, n_times: usize) -> Result<(usize, usize)> {
        let (lo, hi) = self.start_window.unwrap_or_else(|| {
            let t = n_times as f64;
            ((0.4 * t).round() as usize, (0.95 * t).round() as usize)
        });
        let hi = hi.min(n_times - 1);
        if lo == 0 || lo > hi {
            return Err(Error::InvalidArgument(format!("placebo start window ({lo}, {hi}) invalid for T = {n_times}")));
        }
        Ok((lo, hi))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaceboMasks {
    pub pseudo_units: Vec<usize>,
    /// Placebo start per unit (`None` for units that are not pseudo-treated).
    pub placebo_starts: Vec<Option<usize>>,
    /// Post-placebo cells of the pseudo-treated units.
    #[serde(with = "mask_serde")]
    pub evaluation: CellMask,
    #[serde(with = "mask_serde")]
    pub tuning: CellMask,
}

mod mask_serde {
    use super::{Cell, CellMask};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        n_units: usize,
        n_times: usize,
        cells: Vec<(usize, usize)>,
    }

    pub fn serialize<S: Serializer>(m: &CellMask, s: S) -> Result<S::Ok, S::Error> {
        Repr { n_units: m.n_units(), n_times: m.n_times(), cells: m.iter().map(|c| (c.unit, c.time)).collect() }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CellMask, D::Error> {
        let r = Repr::deserialize(d)?;
        CellMask::new(r.n_units, r.n_times, r.cells.into_iter().map(|(u, t)| Cell::new(u, t))).map_err(serde::de::Error::custom)
    }
}

impl PlaceboMasks {
    /// Cells kept out of the tuning fits: treated, evaluation and tuning.
    pub fn tuning_exclusion<T: Real>(&self, panel: &PanelData<T>) -> Result<CellMask> {
        panel.treated_cells().union(&self.evaluation)?.union(&self.tuning)
    }

    /// Cells kept out of the final fit: treated and evaluation.
    pub fn final_exclusion<T: Real>(&self, panel: &PanelData<T>) -> Result<CellMask> {
        panel.treated_cells().union(&self.evaluation)
    }
}

/// Draws pseudo-treated units, their placebo starts, and the tuning mask.
pub fn build_placebo_masks<T: Real>(panel: &PanelData<T>, design: &PlaceboDesign, seed: u64) -> Result<PlaceboMasks> {
    for (name, f) in [("pseudo_fraction", design.pseudo_fraction), ("tune_fraction", design.tune_fraction)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidArgument(format!("{name} {f} not in (0, 1)")));
        }
    }
    let controls = panel.never_treated_units();
    let n_pseudo = (design.pseudo_fraction * controls.len() as f64).round() as usize;
    if n_pseudo == 0 || controls.len() < n_pseudo + 2 {
        return Err(Error::InsufficientControls { needed: n_pseudo.max(1) + 2, available: controls.len() });
    }
    let (lo, hi) = design.window(panel.n_times())?;
    let mut rng = stream(seed, "placebo-units", 0);
    let mut pseudo: Vec<usize> =
        rand::seq::index::sample(&mut rng, controls.len(), n_pseudo).into_iter().map(|j| controls[j]).collect();
    pseudo.sort_unstable();
    let mut rng = stream(seed, "placebo-starts", 0);
    let mut placebo_starts = vec![None; panel.n_units()];
    for &u in &pseudo {
        placebo_starts[u] = Some(rng.random_range(lo..=hi));
    }
    let evaluation = CellMask::new(
        panel.n_units(),
        panel.n_times(),
        pseudo.iter().flat_map(|&u| {
            let s = placebo_starts[u].expect("pseudo unit has a start");
            (s..panel.n_times()).filter(move |&t| panel.outcome(u, t).is_some()).map(move |t| Cell::new(u, t))
        }),
    )?;
    let is_pseudo = |u: usize| placebo_starts[u].is_some();
    let tuning = random_cell_mask(
        panel,
        design.tune_fraction,
        |c| panel.treatment_start()[c.unit].is_none() && !is_pseudo(c.unit) && panel.outcome(c.unit, c.time).is_some(),
        derive_seed(seed, "tune-mask", 0),
    )?;
    if tuning.is_empty() {
        return Err(Error::NoEligibleCells("tuning mask is empty".into()));
    }
    Ok(PlaceboMasks { pseudo_units: pseudo, placebo_starts, evaluation, tuning })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaceboEvaluation<T> {
    pub k: usize,
    pub omega: T,
    pub cells: Vec<(usize, usize)>,
    pub summaries: Vec<PosteriorSummary<T>>,
    pub cell_reports: Vec<ScoreReport<T>>,
    /// Per calendar period.
    pub per_period: Vec<PeriodScore<T>>,
    /// Per period since the placebo start.
    pub per_event_time: Vec<PeriodScore<T>>,
    pub overall: ScoreReport<T>,
}

/// Predictive summaries of `fit` on `cells`, scored against the panel's
/// held-out outcomes.
pub fn evaluate_cells<T: Real>(
    panel: &PanelData<T>,
    summaries: Vec<PosteriorSummary<T>>,
    cells: &CellMask,
    starts: &[Option<usize>],
    k: usize,
    omega: T,
) -> Result<PlaceboEvaluation<T>> {
    let cell_list: Vec<Cell> = cells.iter().collect();
    let truth: Vec<Option<T>> = cell_list.iter().map(|c| panel.outcome(c.unit, c.time)).collect();
    let flat: Vec<T> = truth
        .iter()
        .zip(&cell_list)
        .map(|(y, c)| y.ok_or(Error::MissingReference { unit: c.unit, time: c.time }))
        .collect::<Result<_>>()?;
    let cell_reports = cell_scores(&summaries, &flat)?;
    Ok(PlaceboEvaluation {
        k,
        omega,
        per_period: per_time_evaluation(&cell_list, &summaries, &truth, starts, Alignment::Calendar)?,
        per_event_time: per_time_evaluation(&cell_list, &summaries, &truth, starts, Alignment::EventTime)?,
        overall: average_score(&cell_reports)?,
        cells: cell_list.iter().map(|c| (c.unit, c.time)).collect(),
        summaries,
        cell_reports,
    })
}

fn fit_and_score<T: Real>(
    panel: &PanelData<T>,
    exclusion: &CellMask,
    target: &CellMask,
    model: &FactorModel<T>,
    alpha: T,
    seed: u64,
) -> Result<Vec<PosteriorSummary<T>>> {
    let fit = gibbs_factor(panel, exclusion, model, seed)?;
    cell_summaries(&posterior_predict(&fit, panel, target)?, alpha)
}

/// Final-fit seed for a given master seed; shared by the pipeline and by
/// evaluations at user-supplied `(K, ω)`.
pub fn final_chain_seed(seed: u64) -> u64 {
    derive_seed(seed, "final-chain", 0)
}

/// Refits at `(K, ω)` with the tuning cells returned to training and scores
/// the evaluation cells.
pub fn evaluate_placebo<T: Real>(
    panel: &PanelData<T>,
    masks: &PlaceboMasks,
    template: &FactorModel<T>,
    k: usize,
    omega: T,
    alpha: T,
    seed: u64,
) -> Result<PlaceboEvaluation<T>> {
    let model = FactorModel { k, omega, ..template.clone() };
    let summaries = fit_and_score(panel, &masks.final_exclusion(panel)?, &masks.evaluation, &model, alpha, final_chain_seed(seed))?;
    evaluate_cells(panel, summaries, &masks.evaluation, &masks.placebo_starts, k, omega)
}

/// Placebo-masking `(K, ω)` selection with held-out evaluation.
///
/// Every grid point is fitted on the same masks. Grid points sharing a `K`
/// also share a chain seed, so the ω-profile of the surface is free of
/// between-chain noise; results are independent of the worker count.
pub fn placebo_pipeline<T: Real>(
    panel: &PanelData<T>,
    grid: &OmegaGrid<T>,
    ks: &[usize],
    design: &PlaceboDesign,
    template: &FactorModel<T>,
    seed: u64,
) -> Result<SelectionResult<T>> {
    if ks.is_empty() {
        return Err(Error::EmptyInput("K set".into()));
    }
    let alpha = T::lit(design.alpha);
    crate::panel::check_alpha(alpha)?;
    let masks = build_placebo_masks(panel, design, seed)?;
    let exclusion = masks.tuning_exclusion(panel)?;
    let truth: Vec<T> = masks
        .tuning
        .iter()
        .map(|c| panel.outcome(c.unit, c.time).expect("tuning cells are observed"))
        .collect();

    let mut sorted_ks = ks.to_vec();
    sorted_ks.sort_unstable();
    sorted_ks.dedup();
    let jobs: Vec<(usize, T)> = sorted_ks.iter().flat_map(|&k| grid.values().iter().map(move |&w| (k, w))).collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(k, w)| {
            let model = FactorModel { k, omega: w, ..template.clone() };
            let chain_seed = derive_seed(seed, "tune-chain", k as u64);
            let r = fit_and_score(panel, &exclusion, &masks.tuning, &model, alpha, chain_seed)
                .and_then(|s| score_against(&s, &truth));
            (Some(k), w, r)
        })
        .collect();
    let mut result = assemble(outcomes, seed)?;
    let k_star = result.best_k.expect("panel selection sets K");
    result.evaluation = Some(evaluate_placebo(panel, &masks, template, k_star, result.best_omega, alpha, seed)?);
    result.masks = Some(masks);
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRecord {
    pub k: Option<usize>,
    pub omega: f64,
    pub bias2: f64,
    pub interval_score: f64,
    pub combined: f64,
}

/// One record per surface point, ordered by `(K, ω)`.
pub fn score_surface_export<T: Real>(result: &SelectionResult<T>) -> Vec<SurfaceRecord> {
    let mut recs: Vec<SurfaceRecord> = result
        .surface
        .iter()
        .map(|p| SurfaceRecord {
            k: p.k,
            omega: p.omega.as_f64(),
            bias2: p.report.squared_bias.as_f64(),
            interval_score: p.report.interval_score.as_f64(),
            combined: p.report.combined.as_f64(),
        })
        .collect();
    recs.sort_by(|a, b| a.k.cmp(&b.k).then(a.omega.partial_cmp(&b.omega).unwrap_or(std::cmp::Ordering::Equal)));
    recs
}
