//! Matrix-completion baseline: ridge-regularized alternating least squares
//! with wild-bootstrap intervals.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{truncated_svd, Cholesky, Matrix};
use crate::panel::{quantile_sorted, Cell, CellMask, PanelData, PosteriorSummary};
use crate::rng::stream;
use crate::scalar::Real;
use crate::selection::{evaluate_cells, PlaceboEvaluation};

pub const DEFAULT_RIDGE: f64 = 0.1;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_REPLICATES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlsSettings {
    pub k: usize,
    pub ridge: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl AlsSettings {
    pub fn new(k: usize) -> Self {
        Self { k, ridge: DEFAULT_RIDGE, max_iter: DEFAULT_MAX_ITER, tol: DEFAULT_TOL }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MCFit<T> {
    /// `Ŷ = A Bᵀ` on every cell.
    pub completed: Matrix<T>,
    pub row_factors: Matrix<T>,
    pub col_factors: Matrix<T>,
    pub settings: AlsSettings,
    /// Cells treated as unobserved (missing outcomes are added implicitly).
    pub excluded: CellMask,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after initialization and after every sweep.
    pub objective_trace: Vec<T>,
    pub seed: u64,
}

impl<T: Real> MCFit<T> {
    pub fn value(&self, cell: Cell) -> T {
        self.completed[(cell.unit, cell.time)]
    }
}

struct Observed<T> {
    by_row: Vec<Vec<(usize, T)>>,
    by_col: Vec<Vec<(usize, T)>>,
}

fn observed<T: Real>(panel: &PanelData<T>, excluded: &CellMask) -> Observed<T> {
    let (n, t) = (panel.n_units(), panel.n_times());
    let mut by_row = vec![Vec::new(); n];
    let mut by_col = vec![Vec::new(); t];
    for i in 0..n {
        for s in 0..t {
            if !excluded.contains(Cell::new(i, s)) {
                if let Some(y) = panel.outcome(i, s) {
                    by_row[i].push((s, y));
                    by_col[s].push((i, y));
                }
            }
        }
    }
    Observed { by_row, by_col }
}

fn objective<T: Real>(obs: &Observed<T>, a: &Matrix<T>, b: &Matrix<T>, ridge: T) -> T {
    let fit: T = obs
        .by_row
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().map(move |&(t, y)| (i, t, y)))
        .map(|(i, t, y)| {
            let e = y - crate::linalg::dot(a.row(i), b.row(t));
            e * e
        })
        .sum();
    let pen = a.as_slice().iter().chain(b.as_slice()).map(|&x| x * x).sum::<T>();
    fit + ridge * pen
}

/// Exact ridge update of one factor row against the other side's rows.
fn solve_row<T: Real>(entries: &[(usize, T)], other: &Matrix<T>, ridge: T, k: usize) -> Result<Vec<T>> {
    let mut g = Matrix::identity(k).scale(ridge);
    let mut h = vec![T::zero(); k];
    for &(j, y) in entries {
        let v = other.row(j);
        for a in 0..k {
            h[a] = h[a] + v[a] * y;
            for c in 0..k {
                g[(a, c)] = g[(a, c)] + v[a] * v[c];
            }
        }
    }
    if ridge == T::zero() {
        // Tiny jitter keeps the unregularized problem solvable when a row's
        // observed design is rank deficient.
        for a in 0..k {
            g[(a, a)] = g[(a, a)] + T::epsilon();
        }
    }
    Ok(Cholesky::new(&g, "ALS normal equations")?.solve(&h))
}

/// Low-rank completion of `panel` treating `missing` (and missing outcomes)
/// as unobserved.
pub fn als_complete<T: Real>(panel: &PanelData<T>, missing: &CellMask, settings: AlsSettings, seed: u64) -> Result<MCFit<T>> {
    let (n, nt, k) = (panel.n_units(), panel.n_times(), settings.k);
    if k == 0 || k > n.min(nt) {
        return Err(Error::InvalidArgument(format!("rank K = {k} must lie in 1..={}", n.min(nt))));
    }
    if !(settings.ridge >= 0.0 && settings.ridge.is_finite()) || !(settings.tol > 0.0) || settings.max_iter == 0 {
        return Err(Error::InvalidArgument("ALS settings must have ridge ≥ 0, tol > 0, max_iter ≥ 1".into()));
    }
    if (missing.n_units(), missing.n_times()) != (n, nt) {
        return Err(Error::InvalidArgument("mask shape differs from the panel".into()));
    }
    let obs = observed(panel, missing);
    if let Some(i) = obs.by_row.iter().position(Vec::is_empty) {
        return Err(Error::Completion(format!("unit {i} has no observed cells")));
    }
    if let Some(t) = obs.by_col.iter().position(Vec::is_empty) {
        return Err(Error::Completion(format!("period {t} has no observed cells")));
    }
    let ridge = T::lit(settings.ridge);

    let mut z = Matrix::zeros(n, nt);
    for (i, row) in obs.by_row.iter().enumerate() {
        for &(t, y) in row {
            z[(i, t)] = y;
        }
    }
    let mut rng = stream(seed, "als-init", 0);
    let svd = truncated_svd(&z, k, 30, &mut rng);
    let mut a = Matrix::zeros(n, k);
    let mut b = Matrix::zeros(nt, k);
    for c in 0..k {
        let s = svd.singular_values[c].sqrt();
        for i in 0..n {
            a[(i, c)] = svd.u[(i, c)] * s;
        }
        for t in 0..nt {
            b[(t, c)] = svd.v[(t, c)] * s;
        }
    }

    let mut trace = vec![objective(&obs, &a, &b, ridge)];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..settings.max_iter {
        iterations += 1;
        for i in 0..n {
            let r = solve_row(&obs.by_row[i], &b, ridge, k)?;
            a.row_mut(i).copy_from_slice(&r);
        }
        for t in 0..nt {
            let r = solve_row(&obs.by_col[t], &a, ridge, k)?;
            b.row_mut(t).copy_from_slice(&r);
        }
        let obj = objective(&obs, &a, &b, ridge);
        if !obj.is_finite() {
            return Err(Error::NonFinite("ALS objective".into()));
        }
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(obj);
        let rel = (prev - obj).abs() / prev.max(T::min_positive_value());
        if rel < T::lit(settings.tol) {
            converged = true;
            break;
        }
    }
    let completed = a.matmul(&b.transpose());
    Ok(MCFit {
        completed,
        row_factors: a,
        col_factors: b,
        settings,
        excluded: missing.clone(),
        converged,
        iterations,
        objective_trace: trace,
        seed,
    })
}

/// How bootstrap replicates are formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BootstrapScheme {
    /// Unit-wise sign flips of degrees-of-freedom-corrected residuals on the
    /// observed cells, refit with the masked cells held out, and a flipped
    /// residual of the same unit added to each replicate prediction.
    #[default]
    Predictive,
    /// Residuals taken on the masked cells against their held-out values;
    /// the flipped values are written into the masked cells and refit as
    /// observed.
    MaskedResidual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub alpha: f64,
    pub scheme: BootstrapScheme,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { replicates: DEFAULT_REPLICATES, alpha: 0.05, scheme: BootstrapScheme::Predictive }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapIntervals<T> {
    pub cells: Vec<(usize, usize)>,
    pub point: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub alpha: T,
    pub replicates_requested: usize,
    pub replicates_used: usize,
    pub failures: Vec<String>,
    pub scheme: BootstrapScheme,
    pub seed: u64,
}

impl<T: Real> BootstrapIntervals<T> {
    pub fn summaries(&self) -> Result<Vec<PosteriorSummary<T>>> {
        (0..self.cells.len())
            .map(|j| PosteriorSummary::new(self.point[j], self.lower[j], self.upper[j], self.alpha))
            .collect()
    }
}

fn rademacher<R: Rng + ?Sized>(rng: &mut R) -> bool {
    rng.random::<bool>()
}

/// One replicate's values at the masked cells.
fn replicate<T: Real>(
    panel: &PanelData<T>,
    fit: &MCFit<T>,
    masked: &[Cell],
    scheme: BootstrapScheme,
    dof: T,
    obs: &Observed<T>,
    master: u64,
    b: usize,
) -> Result<Vec<T>> {
    let mut rng = stream(master, "wild-bootstrap", b as u64);
    let flips: Vec<T> = (0..panel.n_units()).map(|_| if rademacher(&mut rng) { T::one() } else { -T::one() }).collect();
    match scheme {
        BootstrapScheme::Predictive => {
            let starred = obs.by_row.iter().enumerate().flat_map(|(i, row)| {
                let f = &flips;
                row.iter().map(move |&(t, y)| {
                    let yhat = fit.completed[(i, t)];
                    (Cell::new(i, t), Some(yhat + f[i] * dof * (y - yhat)))
                })
            });
            let star = panel.with_outcome_overrides(starred)?;
            let refit = als_complete(&star, &fit.excluded, fit.settings, fit.seed)?;
            Ok(masked
                .iter()
                .map(|c| {
                    let row = &obs.by_row[c.unit];
                    let (s, y) = row[rng.random_range(0..row.len())];
                    let sign = if rademacher(&mut rng) { T::one() } else { -T::one() };
                    refit.value(*c) + sign * dof * (y - fit.completed[(c.unit, s)])
                })
                .collect())
        }
        BootstrapScheme::MaskedResidual => {
            let mut starred = Vec::with_capacity(masked.len());
            for c in masked {
                let y = panel.outcome(c.unit, c.time).ok_or(Error::MissingReference { unit: c.unit, time: c.time })?;
                let yhat = fit.value(*c);
                starred.push((*c, Some(yhat + flips[c.unit] * (y - yhat))));
            }
            let star = panel.with_outcome_overrides(starred)?;
            let keep: Vec<Cell> = fit.excluded.iter().filter(|c| !masked.contains(c)).collect();
            let still_missing = CellMask::new(panel.n_units(), panel.n_times(), keep)?;
            let refit = als_complete(&star, &still_missing, fit.settings, fit.seed)?;
            Ok(masked.iter().map(|c| refit.value(*c)).collect())
        }
    }
}

/// Wild (unit-wise Rademacher) bootstrap intervals at the masked cells.
/// Replicates run in parallel with per-replicate seeds; failed refits are
/// dropped, and more than 20% failures is an error.
pub fn wild_bootstrap<T: Real>(
    panel: &PanelData<T>,
    fit: &MCFit<T>,
    masked: &CellMask,
    config: &BootstrapConfig,
    seed: u64,
) -> Result<BootstrapIntervals<T>> {
    if config.replicates < 2 {
        return Err(Error::InvalidArgument("at least 2 bootstrap replicates are required".into()));
    }
    let alpha = T::lit(config.alpha);
    crate::panel::check_alpha(alpha)?;
    let cells: Vec<Cell> = masked.iter().collect();
    if cells.is_empty() {
        return Err(Error::EmptyInput("bootstrap cells".into()));
    }
    if !masked.is_subset(&fit.excluded) {
        return Err(Error::InvalidArgument("bootstrap cells must be held out of the fit".into()));
    }
    let obs = observed(panel, &fit.excluded);
    let n_obs: usize = obs.by_row.iter().map(Vec::len).sum();
    let k = fit.settings.k;
    let params = k * (panel.n_units() + panel.n_times() - k);
    let dof = if n_obs > params { T::lit((n_obs as f64 / (n_obs - params) as f64).sqrt()) } else { T::one() };

    let results: Vec<Result<Vec<T>>> = (0..config.replicates)
        .into_par_iter()
        .map(|b| replicate(panel, fit, &cells, config.scheme, dof, &obs, seed, b))
        .collect();
    let mut failures = Vec::new();
    let mut draws: Vec<Vec<T>> = vec![Vec::with_capacity(config.replicates); cells.len()];
    for (b, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) if v.iter().all(|x| x.is_finite()) => {
                for (d, x) in draws.iter_mut().zip(v) {
                    d.push(x);
                }
            }
            Ok(_) => failures.push(format!("replicate {b}: non-finite predictions")),
            Err(e) => failures.push(format!("replicate {b}: {e}")),
        }
    }
    if failures.len() * 5 > config.replicates {
        return Err(Error::BootstrapFailed { failed: failures.len(), total: config.replicates });
    }
    let half = alpha / T::lit(2.0);
    let mut lower = Vec::with_capacity(cells.len());
    let mut upper = Vec::with_capacity(cells.len());
    for d in &mut draws {
        d.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let lo = quantile_sorted(d, half);
        lower.push(lo);
        upper.push(quantile_sorted(d, T::one() - half).max(lo));
    }
    Ok(BootstrapIntervals {
        point: cells.iter().map(|&c| fit.value(c)).collect(),
        cells: cells.iter().map(|c| (c.unit, c.time)).collect(),
        lower,
        upper,
        alpha,
        replicates_requested: config.replicates,
        replicates_used: config.replicates - failures.len(),
        failures,
        scheme: config.scheme,
        seed,
    })
}

/// Scores the baseline on the bootstrap cells through the same path as the
/// Bayesian evaluation. `truth` holds the held-out outcomes.
pub fn mc_evaluate<T: Real>(
    truth: &PanelData<T>,
    intervals: &BootstrapIntervals<T>,
    starts: &[Option<usize>],
    k: usize,
) -> Result<PlaceboEvaluation<T>> {
    let mask = CellMask::new(truth.n_units(), truth.n_times(), intervals.cells.iter().map(|&(u, t)| Cell::new(u, t)))?;
    // Masks iterate in (unit, time) order, as do the interval cells.
    evaluate_cells(truth, intervals.summaries()?, &mask, starts, k, T::one())
}
