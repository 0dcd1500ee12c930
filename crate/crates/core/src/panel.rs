//! Panel data model: outcomes, staggered treatment, cell masks and
//! posterior-draw summaries.

use std::collections::{BTreeSet, HashSet};

use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::scalar::Real;

/// Rectangular `N × T` panel. Outcomes are stored unit-major; `None` marks a
/// missing cell.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelData<T> {
    unit_ids: Vec<String>,
    time_ids: Vec<String>,
    outcomes: Vec<Option<T>>,
    n_covariates: usize,
    covariates: Vec<T>,
    treatment_start: Vec<Option<usize>>,
    groups: Option<Vec<String>>,
}

fn check_unique(labels: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::InvalidPanel(format!("duplicate {what} label {l:?}")));
        }
    }
    Ok(())
}

impl<T: Real> PanelData<T> {
    /// `outcomes[i][t]` for unit `i` and time `t`.
    pub fn new(
        unit_ids: Vec<String>,
        time_ids: Vec<String>,
        outcomes: Vec<Vec<Option<T>>>,
        treatment_start: Vec<Option<usize>>,
    ) -> Result<Self> {
        let n = unit_ids.len();
        let t = time_ids.len();
        if n < 2 || t < 2 {
            return Err(Error::InvalidPanel(format!("need N ≥ 2 and T ≥ 2, got {n}×{t}")));
        }
        check_unique(&unit_ids, "unit")?;
        check_unique(&time_ids, "time")?;
        if outcomes.len() != n || outcomes.iter().any(|r| r.len() != t) {
            return Err(Error::InvalidPanel("outcome matrix shape does not match labels".into()));
        }
        if treatment_start.len() != n {
            return Err(Error::InvalidPanel("treatment_start length differs from N".into()));
        }
        if let Some((i, s)) =
            treatment_start.iter().enumerate().find_map(|(i, s)| s.filter(|&s| s >= t).map(|s| (i, s)))
        {
            return Err(Error::InvalidPanel(format!("unit {i} treatment start {s} outside [0, {t})")));
        }
        let outcomes: Vec<Option<T>> = outcomes.into_iter().flatten().collect();
        if outcomes.iter().flatten().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("panel outcomes".into()));
        }
        Ok(Self {
            unit_ids,
            time_ids,
            outcomes,
            n_covariates: 0,
            covariates: Vec::new(),
            treatment_start,
            groups: None,
        })
    }

    /// Attaches covariates laid out as `[unit][time][k]`, flattened.
    pub fn with_covariates(mut self, p: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != self.n_units() * self.n_times() * p {
            return Err(Error::InvalidPanel(format!(
                "covariate array has {} values, expected N·T·p = {}",
                values.len(),
                self.n_units() * self.n_times() * p
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("covariates".into()));
        }
        self.n_covariates = p;
        self.covariates = values;
        Ok(self)
    }

    pub fn with_groups(mut self, groups: Vec<String>) -> Result<Self> {
        if groups.len() != self.n_units() {
            return Err(Error::InvalidPanel("group labels length differs from N".into()));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn with_treatment_start(mut self, starts: Vec<Option<usize>>) -> Result<Self> {
        if starts.len() != self.n_units() || starts.iter().flatten().any(|&s| s >= self.n_times()) {
            return Err(Error::InvalidPanel("invalid treatment starts".into()));
        }
        self.treatment_start = starts;
        Ok(self)
    }

    /// Copy with some cells' outcomes replaced.
    pub fn with_outcome_overrides<I>(&self, overrides: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Cell, Option<T>)>,
    {
        let mut out = self.clone();
        for (c, y) in overrides {
            out.check_cell(c)?;
            if y.is_some_and(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("override at {c:?}")));
            }
            let idx = out.flat(c.unit, c.time);
            out.outcomes[idx] = y;
        }
        Ok(out)
    }

    /// Panel restricted to the listed units, in the given order.
    pub fn subset_units(&self, units: &[usize]) -> Result<Self> {
        if let Some(&u) = units.iter().find(|&&u| u >= self.n_units()) {
            return Err(Error::OutOfRange(format!("unit {u}")));
        }
        let outcomes = units.iter().map(|&u| self.outcome_row(u).to_vec()).collect();
        let mut sub = Self::new(
            units.iter().map(|&u| self.unit_ids[u].clone()).collect(),
            self.time_ids.clone(),
            outcomes,
            units.iter().map(|&u| self.treatment_start[u]).collect(),
        )?;
        if self.n_covariates > 0 {
            let stride = self.n_times() * self.n_covariates;
            let cov = units.iter().flat_map(|&u| self.covariates[u * stride..(u + 1) * stride].iter().copied()).collect();
            sub = sub.with_covariates(self.n_covariates, cov)?;
        }
        if let Some(g) = &self.groups {
            sub = sub.with_groups(units.iter().map(|&u| g[u].clone()).collect())?;
        }
        Ok(sub)
    }

    #[inline]
    fn flat(&self, unit: usize, time: usize) -> usize {
        unit * self.time_ids.len() + time
    }

    pub fn check_cell(&self, c: Cell) -> Result<()> {
        if c.unit >= self.n_units() || c.time >= self.n_times() {
            return Err(Error::OutOfRange(format!("cell ({}, {}) in {}×{} panel", c.unit, c.time, self.n_units(), self.n_times())));
        }
        Ok(())
    }

    pub fn n_units(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn n_times(&self) -> usize {
        self.time_ids.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn time_ids(&self) -> &[String] {
        &self.time_ids
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    pub fn treatment_start(&self) -> &[Option<usize>] {
        &self.treatment_start
    }

    #[inline]
    pub fn outcome(&self, unit: usize, time: usize) -> Option<T> {
        self.outcomes[self.flat(unit, time)]
    }

    pub fn outcome_row(&self, unit: usize) -> &[Option<T>] {
        let t = self.n_times();
        &self.outcomes[unit * t..(unit + 1) * t]
    }

    /// Covariate vector `X_it` (empty when the panel has none).
    #[inline]
    pub fn covariate(&self, unit: usize, time: usize) -> &[T] {
        let p = self.n_covariates;
        let off = self.flat(unit, time) * p;
        &self.covariates[off..off + p]
    }

    #[inline]
    pub fn is_treated(&self, unit: usize, time: usize) -> bool {
        self.treatment_start[unit].is_some_and(|s| time >= s)
    }

    pub fn never_treated_units(&self) -> Vec<usize> {
        (0..self.n_units()).filter(|&i| self.treatment_start[i].is_none()).collect()
    }

    /// Cells with `D_it = 1`.
    pub fn treated_cells(&self) -> CellMask {
        let cells = (0..self.n_units())
            .flat_map(|i| (0..self.n_times()).map(move |t| Cell::new(i, t)))
            .filter(|c| self.is_treated(c.unit, c.time));
        CellMask::from_unique(self.n_units(), self.n_times(), cells.collect())
    }
}

/// Absorbing staggered treatment matrix `D_it = 1{t ≥ T_i}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreatmentIndicator {
    n_times: usize,
    starts: Vec<Option<usize>>,
}

impl TreatmentIndicator {
    pub fn from_starts(starts: Vec<Option<usize>>, n_times: usize) -> Self {
        Self { n_times, starts }
    }

    pub fn n_units(&self) -> usize {
        self.starts.len()
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn starts(&self) -> &[Option<usize>] {
        &self.starts
    }

    #[inline]
    pub fn get(&self, unit: usize, time: usize) -> bool {
        self.starts[unit].is_some_and(|s| time >= s)
    }

    pub fn row(&self, unit: usize) -> Vec<u8> {
        (0..self.n_times).map(|t| u8::from(self.get(unit, t))).collect()
    }

    pub fn values(&self) -> Vec<Vec<u8>> {
        (0..self.n_units()).map(|i| self.row(i)).collect()
    }
}

pub fn build_treatment_indicator<T: Real>(panel: &PanelData<T>) -> TreatmentIndicator {
    TreatmentIndicator::from_starts(panel.treatment_start().to_vec(), panel.n_times())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub unit: usize,
    pub time: usize,
}

impl Cell {
    pub const fn new(unit: usize, time: usize) -> Self {
        Self { unit, time }
    }
}

/// Set of in-range cells, iterated in (unit, time) order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellMask {
    n_units: usize,
    n_times: usize,
    cells: BTreeSet<Cell>,
}

impl CellMask {
    pub fn empty(n_units: usize, n_times: usize) -> Self {
        Self { n_units, n_times, cells: BTreeSet::new() }
    }

    /// Rejects out-of-range and duplicated cells.
    pub fn new<I: IntoIterator<Item = Cell>>(n_units: usize, n_times: usize, cells: I) -> Result<Self> {
        let mut set = BTreeSet::new();
        for c in cells {
            if c.unit >= n_units || c.time >= n_times {
                return Err(Error::OutOfRange(format!("cell ({}, {})", c.unit, c.time)));
            }
            if !set.insert(c) {
                return Err(Error::InvalidArgument(format!("duplicate cell ({}, {})", c.unit, c.time)));
            }
        }
        Ok(Self { n_units, n_times, cells: set })
    }

    fn from_unique(n_units: usize, n_times: usize, cells: Vec<Cell>) -> Self {
        Self { n_units, n_times, cells: cells.into_iter().collect() }
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn contains(&self, c: Cell) -> bool {
        self.cells.contains(&c)
    }

    pub fn iter(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells.iter().copied()
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        if (self.n_units, self.n_times) != (other.n_units, other.n_times) {
            return Err(Error::InvalidArgument("masks for different panel shapes".into()));
        }
        Ok(Self { n_units: self.n_units, n_times: self.n_times, cells: self.cells.union(&other.cells).copied().collect() })
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.cells.is_disjoint(&other.cells)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.cells.is_subset(&other.cells)
    }

    /// Distinct time indices covered, ascending.
    pub fn times(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c.time).collect::<BTreeSet<_>>().into_iter().collect()
    }
}

impl<'a> IntoIterator for &'a CellMask {
    type Item = Cell;
    type IntoIter = std::iter::Copied<std::collections::btree_set::Iter<'a, Cell>>;

    fn into_iter(self) -> Self::IntoIter {
        self.cells.iter().copied()
    }
}

/// Uniformly random subset of eligible cells of size
/// `round(fraction × #eligible)`.
pub fn random_cell_mask<T: Real, F>(panel: &PanelData<T>, fraction: f64, eligible: F, seed: u64) -> Result<CellMask>
where
    F: Fn(Cell) -> bool,
{
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("mask fraction {fraction} not in (0, 1)")));
    }
    let pool: Vec<Cell> = (0..panel.n_units())
        .flat_map(|i| (0..panel.n_times()).map(move |t| Cell::new(i, t)))
        .filter(|&c| eligible(c))
        .collect();
    if pool.is_empty() {
        return Err(Error::NoEligibleCells("random cell mask".into()));
    }
    let k = (fraction * pool.len() as f64).round() as usize;
    let mut rng = StreamRng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, pool.len(), k);
    Ok(CellMask::from_unique(panel.n_units(), panel.n_times(), picked.into_iter().map(|j| pool[j]).collect()))
}

/// Retained draws of one named scalar quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct DrawStore<T> {
    name: String,
    draws: Vec<T>,
}

impl<T: Real> DrawStore<T> {
    pub fn new(name: impl Into<String>, draws: Vec<T>) -> Result<Self> {
        let name = name.into();
        if draws.len() < 2 {
            return Err(Error::EmptyInput(format!("draw store {name:?} needs at least 2 draws")));
        }
        if draws.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite(format!("draw store {name:?}")));
        }
        Ok(Self { name, draws })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn draws(&self) -> &[T] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn mean(&self) -> T {
        mean(&self.draws)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PosteriorSummary<T> {
    pub mean: T,
    pub lower: T,
    pub upper: T,
    pub alpha: T,
}

impl<T: Real> PosteriorSummary<T> {
    pub fn new(mean: T, lower: T, upper: T, alpha: T) -> Result<Self> {
        check_alpha(alpha)?;
        if !(lower <= upper) {
            return Err(Error::InvalidArgument(format!("interval lower {lower} > upper {upper}")));
        }
        if !(mean.is_finite() && lower.is_finite() && upper.is_finite()) {
            return Err(Error::NonFinite("posterior summary".into()));
        }
        Ok(Self { mean, lower, upper, alpha })
    }

    pub fn width(&self) -> T {
        self.upper - self.lower
    }
}

pub(crate) fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha {alpha} not in (0, 1)")))
    }
}

pub(crate) fn mean<T: Real>(xs: &[T]) -> T {
    xs.iter().copied().sum::<T>() / T::from_usize_lossy(xs.len())
}

/// Type-7 empirical quantile of ascending-sorted data: `h = (n − 1) p`.
pub fn quantile_sorted<T: Real>(sorted: &[T], p: T) -> T {
    let n = sorted.len();
    let h = T::from_usize_lossy(n - 1) * p;
    let lo = h.floor().to_usize().unwrap_or(0).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let frac = h - T::from_usize_lossy(lo);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Mean and central `(1 − α)` interval of raw draws.
pub fn summarize_slice<T: Real>(draws: &[T], alpha: T) -> Result<PosteriorSummary<T>> {
    summarize_split(draws, draws, alpha)
}

/// Mean from `mean_draws`, interval from the quantiles of `interval_draws`.
pub fn summarize_split<T: Real>(mean_draws: &[T], interval_draws: &[T], alpha: T) -> Result<PosteriorSummary<T>> {
    check_alpha(alpha)?;
    if mean_draws.is_empty() || interval_draws.is_empty() {
        return Err(Error::EmptyInput("draws".into()));
    }
    if mean_draws.iter().chain(interval_draws).any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("draws".into()));
    }
    let mut sorted = interval_draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    let half = alpha / T::lit(2.0);
    let lower = quantile_sorted(&sorted, half);
    let upper = quantile_sorted(&sorted, T::one() - half);
    PosteriorSummary::new(mean(mean_draws), lower, upper.max(lower), alpha)
}

pub fn summarize<T: Real>(draws: &DrawStore<T>, alpha: T) -> Result<PosteriorSummary<T>> {
    summarize_slice(draws.draws(), alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn toy(n: usize, t: usize, starts: Vec<Option<usize>>) -> PanelData<f64> {
        let y = (0..n).map(|i| (0..t).map(|s| Some((i * t + s) as f64)).collect()).collect();
        PanelData::new(labels("u", n), labels("t", t), y, starts).unwrap()
    }

    #[test]
    fn indicator_rows() {
        let p = toy(3, 4, vec![Some(2), None, Some(0)]);
        let d = build_treatment_indicator(&p);
        assert_eq!(d.row(0), vec![0, 0, 1, 1]);
        assert_eq!(d.row(1), vec![0, 0, 0, 0]);
        assert_eq!(d.row(2), vec![1, 1, 1, 1]);
    }

    #[test]
    fn rejects_invalid_panels() {
        let y = vec![vec![Some(1.0), Some(2.0)]; 2];
        assert!(PanelData::new(labels("u", 2), vec!["a".into(), "a".into()], y.clone(), vec![None, None]).is_err());
        assert!(PanelData::new(labels("u", 2), labels("t", 2), y.clone(), vec![Some(2), None]).is_err());
        let bad = vec![vec![Some(f64::NAN), Some(2.0)], vec![None, None]];
        assert!(PanelData::new(labels("u", 2), labels("t", 2), bad, vec![None, None]).is_err());
        assert!(PanelData::<f64>::new(labels("u", 1), labels("t", 2), vec![vec![None, None]], vec![None]).is_err());
    }

    #[test]
    fn summarize_examples() {
        let s = summarize(&DrawStore::new("c", vec![1.0; 4]).unwrap(), 0.05).unwrap();
        assert_eq!((s.mean, s.lower, s.upper), (1.0, 1.0, 1.0));
        let s = summarize(&DrawStore::new("m", vec![1.0, 2.0, 3.0]).unwrap(), 0.05).unwrap();
        assert_eq!(s.mean, 2.0);
        let grid: Vec<f64> = (0..=10_000).map(|i| i as f64 / 10_000.0).collect();
        let s = summarize(&DrawStore::new("u", grid).unwrap(), 0.10).unwrap();
        assert!((s.lower - 0.05).abs() < 1e-3 && (s.upper - 0.95).abs() < 1e-3);
    }

    #[test]
    fn draw_store_requires_two_finite() {
        assert!(DrawStore::new("x", vec![1.0]).is_err());
        assert!(DrawStore::new("x", vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn mask_size_and_determinism() {
        let p = toy(10, 10, vec![None; 10]);
        let a = random_cell_mask(&p, 0.2, |_| true, 11).unwrap();
        let b = random_cell_mask(&p, 0.2, |_| true, 11).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a, b);
        let c = random_cell_mask(&p, 0.2, |c| c.unit < 3, 11).unwrap();
        assert_eq!(c.len(), 6);
        assert!(c.iter().all(|c| c.unit < 3));
        assert!(random_cell_mask(&p, 0.2, |_| false, 1).is_err());
    }

    #[test]
    fn mask_rejects_duplicates() {
        assert!(CellMask::new(2, 2, [Cell::new(0, 0), Cell::new(0, 0)]).is_err());
        assert!(CellMask::new(2, 2, [Cell::new(2, 0)]).is_err());
    }

    #[test]
    fn subset_and_overrides() {
        let p = toy(3, 2, vec![Some(1), None, None]);
        let s = p.subset_units(&[2, 0]).unwrap();
        assert_eq!(s.unit_ids(), &["u2".to_string(), "u0".to_string()]);
        assert_eq!(s.outcome(1, 1), Some(1.0));
        assert_eq!(s.treatment_start(), &[None, Some(1)]);
        let o = p.with_outcome_overrides([(Cell::new(1, 0), None)]).unwrap();
        assert_eq!(o.outcome(1, 0), None);
        assert_eq!(p.treated_cells().len(), 1);
    }
}
