//! Unit–time treatment effects, dynamic and overall ATT, and per-period
//! scoring against known truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::PredictiveDraws;
use crate::panel::{summarize_slice, Cell, CellMask, PanelData, PosteriorSummary, TreatmentIndicator};
use crate::scalar::Real;
use crate::scoring::{average_score, combined_score, ScoreReport};

/// Draws of `τ_it = Y_it − Ỹ_it(0)` per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectDraws<T> {
    pub cells: Vec<Cell>,
    pub draws: Vec<Vec<T>>,
}

/// Differences the panel's outcome at each cell (observed treated value, or
/// held-out truth in placebo runs) against the counterfactual draws.
pub fn effect_draws<T: Real>(panel: &PanelData<T>, pred: &PredictiveDraws<T>, cells: &CellMask) -> Result<EffectDraws<T>> {
    let index: BTreeMap<Cell, usize> = pred.cells.iter().enumerate().map(|(j, &c)| (c, j)).collect();
    let mut out_cells = Vec::with_capacity(cells.len());
    let mut draws = Vec::with_capacity(cells.len());
    for c in cells {
        let j = *index
            .get(&c)
            .ok_or_else(|| Error::InvalidArgument(format!("no predictive draws for cell ({}, {})", c.unit, c.time)))?;
        let y = panel.outcome(c.unit, c.time).ok_or(Error::MissingReference { unit: c.unit, time: c.time })?;
        out_cells.push(c);
        draws.push(pred.outcome_draws[j].iter().map(|&y0| y - y0).collect());
    }
    Ok(EffectDraws { cells: out_cells, draws })
}

pub fn effect_summaries<T: Real>(effects: &EffectDraws<T>, alpha: T) -> Result<Vec<PosteriorSummary<T>>> {
    effects.draws.iter().map(|d| summarize_slice(d, alpha)).collect()
}

/// How post-treatment cells are grouped into periods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    /// Calendar time index `t`.
    #[default]
    Calendar,
    /// Exposure length `t − T_i`.
    EventTime,
}

impl Alignment {
    /// Period label of a cell, `None` if the unit has no (placebo) start.
    pub fn period(self, cell: Cell, starts: &[Option<usize>]) -> Option<i64> {
        match self {
            Self::Calendar => Some(cell.time as i64),
            Self::EventTime => starts[cell.unit].map(|s| cell.time as i64 - s as i64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttPoint<T> {
    pub period: i64,
    pub n_cells: usize,
    pub summary: PosteriorSummary<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttCurve<T> {
    pub alignment: Alignment,
    pub periods: Vec<AttPoint<T>>,
    /// Equal-weight average of the period ATTs, per draw.
    pub overall: PosteriorSummary<T>,
    /// Alternative aggregation weighting every treated cell equally.
    pub overall_cell_weighted: PosteriorSummary<T>,
}

/// Per-period ATT over `ℐ_t = {i : T_i ≤ t}` and the overall ATT.
pub fn att_curve<T: Real>(
    effects: &EffectDraws<T>,
    treatment: &TreatmentIndicator,
    alignment: Alignment,
    alpha: T,
) -> Result<AttCurve<T>> {
    let m = effects.draws.first().map_or(0, Vec::len);
    if effects.draws.iter().any(|d| d.len() != m) {
        return Err(Error::InvalidArgument("effect cells carry different numbers of draws".into()));
    }
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (j, &c) in effects.cells.iter().enumerate() {
        if c.unit >= treatment.n_units() || c.time >= treatment.n_times() {
            return Err(Error::OutOfRange(format!("cell ({}, {})", c.unit, c.time)));
        }
        if treatment.get(c.unit, c.time) {
            let period = alignment.period(c, treatment.starts()).expect("treated unit has a start");
            groups.entry(period).or_default().push(j);
        }
    }
    if groups.is_empty() {
        return Err(Error::EmptyInput("no treated cells among the effect draws".into()));
    }
    let mut per_period_draws: Vec<Vec<T>> = Vec::with_capacity(groups.len());
    let mut periods = Vec::with_capacity(groups.len());
    for (&period, idx) in &groups {
        let nf = T::from_usize_lossy(idx.len());
        let d: Vec<T> = (0..m).map(|r| idx.iter().map(|&j| effects.draws[j][r]).sum::<T>() / nf).collect();
        periods.push(AttPoint { period, n_cells: idx.len(), summary: summarize_slice(&d, alpha)? });
        per_period_draws.push(d);
    }
    let np = T::from_usize_lossy(per_period_draws.len());
    let overall: Vec<T> = (0..m).map(|r| per_period_draws.iter().map(|d| d[r]).sum::<T>() / np).collect();
    let all: Vec<usize> = groups.values().flatten().copied().collect();
    let nc = T::from_usize_lossy(all.len());
    let weighted: Vec<T> = (0..m).map(|r| all.iter().map(|&j| effects.draws[j][r]).sum::<T>() / nc).collect();
    Ok(AttCurve {
        alignment,
        periods,
        overall: summarize_slice(&overall, alpha)?,
        overall_cell_weighted: summarize_slice(&weighted, alpha)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodScore<T> {
    pub period: i64,
    pub n_cells: usize,
    pub report: ScoreReport<T>,
}

/// Per-cell combined scores of `summaries` against `truth`, aligned by index.
pub fn cell_scores<T: Real>(summaries: &[PosteriorSummary<T>], truth: &[T]) -> Result<Vec<ScoreReport<T>>> {
    if summaries.len() != truth.len() {
        return Err(Error::InvalidArgument(format!("{} summaries but {} truth values", summaries.len(), truth.len())));
    }
    summaries.iter().zip(truth).map(|(s, &y)| combined_score(s, y)).collect()
}

/// Squared bias and interval score averaged over the cells of each period.
pub fn per_time_evaluation<T: Real>(
    cells: &[Cell],
    summaries: &[PosteriorSummary<T>],
    truth: &[Option<T>],
    starts: &[Option<usize>],
    alignment: Alignment,
) -> Result<Vec<PeriodScore<T>>> {
    if cells.len() != summaries.len() || cells.len() != truth.len() {
        return Err(Error::InvalidArgument("cells, summaries and truth differ in length".into()));
    }
    let mut groups: BTreeMap<i64, Vec<ScoreReport<T>>> = BTreeMap::new();
    for ((&c, s), y) in cells.iter().zip(summaries).zip(truth) {
        let y = y.ok_or(Error::MissingReference { unit: c.unit, time: c.time })?;
        let period = alignment
            .period(c, starts)
            .ok_or_else(|| Error::InvalidArgument(format!("unit {} has no start for event-time alignment", c.unit)))?;
        groups.entry(period).or_default().push(combined_score(s, y)?);
    }
    groups
        .into_iter()
        .map(|(period, reports)| Ok(PeriodScore { period, n_cells: reports.len(), report: average_score(&reports)? }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn effects(cells: Vec<Cell>, value: f64) -> EffectDraws<f64> {
        let n = cells.len();
        EffectDraws { cells, draws: vec![vec![value; 5]; n] }
    }

    #[test]
    fn constant_effect_curve() {
        let d = TreatmentIndicator::from_starts(vec![Some(2), None], 4);
        let e = effects(vec![Cell::new(0, 2), Cell::new(0, 3)], 0.5);
        let c = att_curve(&e, &d, Alignment::Calendar, 0.05).unwrap();
        assert_eq!(c.periods.len(), 2);
        assert!(c.periods.iter().all(|p| p.summary.mean == 0.5));
        assert_eq!(c.overall.mean, 0.5);
    }

    #[test]
    fn staggered_sets() {
        let d = TreatmentIndicator::from_starts(vec![Some(2), Some(3)], 4);
        let cells = vec![Cell::new(0, 2), Cell::new(0, 3), Cell::new(1, 3)];
        let e = EffectDraws::<f64> { cells, draws: vec![vec![1.0; 3], vec![2.0; 3], vec![4.0; 3]] };
        let c = att_curve(&e, &d, Alignment::Calendar, 0.05).unwrap();
        assert_eq!(c.periods[0].n_cells, 1);
        assert_eq!(c.periods[1].summary.mean, 3.0);
        assert_eq!(c.overall.mean, 2.0);
        assert!((c.overall_cell_weighted.mean - 7.0 / 3.0).abs() < 1e-12);
        let ev = att_curve(&e, &d, Alignment::EventTime, 0.05).unwrap();
        assert_eq!(ev.periods.iter().map(|p| p.period).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(ev.periods[0].summary.mean, 2.5);
    }

    #[test]
    fn empty_treated_set_errors() {
        let d = TreatmentIndicator::from_starts(vec![None, None], 3);
        assert!(att_curve(&effects(vec![Cell::new(0, 1)], 1.0), &d, Alignment::Calendar, 0.05).is_err());
    }

    #[test]
    fn period_scores_match_flat_average() {
        let cells = vec![Cell::new(0, 1), Cell::new(1, 1), Cell::new(0, 2), Cell::new(1, 2)];
        let sums: Vec<_> = [(0.1, -1.0, 1.0), (0.4, 0.0, 0.5), (-0.2, -0.3, 0.3), (1.0, 0.5, 2.0)]
            .iter()
            .map(|&(m, l, u)| PosteriorSummary::<f64>::new(m, l, u, 0.05).unwrap())
            .collect();
        let truth = vec![Some(0.0); 4];
        let per = per_time_evaluation(&cells, &sums, &truth, &[Some(1), Some(1)], Alignment::Calendar).unwrap();
        assert_eq!(per.len(), 2);
        let avg: Vec<_> = per.iter().map(|p| p.report).collect();
        let flat = average_score(&cell_scores(&sums, &[0.0; 4]).unwrap()).unwrap();
        let agg = average_score(&avg).unwrap();
        assert!((agg.combined - flat.combined).abs() < 1e-12);
        assert!(per_time_evaluation(&cells, &sums, &[None; 4], &[None, None], Alignment::Calendar).is_err());
    }
}
