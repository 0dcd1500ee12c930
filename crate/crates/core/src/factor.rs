//! Tempered latent-factor model for the untreated regime of a panel,
//!
//! `Y_it = λ_iᵀ f_t + X_itᵀ β + ε_it`, `ε_it ~ N(0, σ_i²)`,
//!
//! fitted by Gibbs sampling on the cells outside an exclusion mask. Every
//! data-precision term of the Gaussian conditionals is multiplied by `ω`,
//! and each variance update uses shape `a + ω n_i / 2` and rate
//! `b + ω RSS_i / 2`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::panel::{summarize_split, Cell, CellMask, PanelData, PosteriorSummary};
use crate::rng::stream;
use crate::scalar::Real;

pub const DEFAULT_ITERATIONS: usize = 4000;
pub const DEFAULT_BURNIN: usize = 1500;

#[derive(Clone, Debug, PartialEq)]
pub struct FactorPriors<T> {
    /// Loadings prior `λ_i ~ N(0, loading_scale · I_K)`.
    pub loading_scale: T,
    pub a: T,
    pub b: T,
    /// Covariance of `β`; `None` means `100 I` when covariates are present.
    pub beta_cov: Option<Matrix<T>>,
}

impl<T: Real> Default for FactorPriors<T> {
    fn default() -> Self {
        Self { loading_scale: T::one(), a: T::lit(0.01), b: T::lit(0.01), beta_cov: None }
    }
}

/// How the noise variance is parameterized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VarianceModel<T> {
    /// One `σ_i²` per unit.
    UnitSpecific,
    /// A single `σ²` shared by every unit.
    Shared,
    /// Known, fixed `σ²` for every unit.
    Fixed(T),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel<T> {
    pub k: usize,
    pub omega: T,
    pub priors: FactorPriors<T>,
    pub variance: VarianceModel<T>,
    pub iterations: usize,
    pub burnin: usize,
}

impl<T: Real> FactorModel<T> {
    pub fn new(k: usize, omega: T) -> Self {
        Self {
            k,
            omega,
            priors: FactorPriors::default(),
            variance: VarianceModel::UnitSpecific,
            iterations: DEFAULT_ITERATIONS,
            burnin: DEFAULT_BURNIN,
        }
    }

    pub fn with_chain(mut self, iterations: usize, burnin: usize) -> Self {
        self.iterations = iterations;
        self.burnin = burnin;
        self
    }

    pub fn with_variance(mut self, variance: VarianceModel<T>) -> Self {
        self.variance = variance;
        self
    }

    pub fn with_priors(mut self, priors: FactorPriors<T>) -> Self {
        self.priors = priors;
        self
    }
}

/// Retained draws, stored flat: draw-major, then unit/time, then factor.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorFit<T> {
    pub k: usize,
    pub omega: T,
    pub n_units: usize,
    pub n_times: usize,
    pub n_covariates: usize,
    pub retained: usize,
    pub loadings: Vec<T>,
    pub factors: Vec<T>,
    pub beta: Vec<T>,
    pub sigma2: Vec<T>,
    /// Variance-update shape per unit, `a + ω n_i / 2` (the pooled shape
    /// under a shared variance).
    pub precision_shapes: Vec<T>,
    /// Number of cells informing each unit.
    pub included_per_unit: Vec<usize>,
    pub iterations: usize,
    pub burnin: usize,
    pub seed: u64,
    pub diagnostics: Vec<String>,
}

impl<T: Real> FactorFit<T> {
    #[inline]
    pub fn loading(&self, m: usize, unit: usize) -> &[T] {
        let off = (m * self.n_units + unit) * self.k;
        &self.loadings[off..off + self.k]
    }

    #[inline]
    pub fn factor(&self, m: usize, time: usize) -> &[T] {
        let off = (m * self.n_times + time) * self.k;
        &self.factors[off..off + self.k]
    }

    #[inline]
    pub fn beta_draw(&self, m: usize) -> &[T] {
        &self.beta[m * self.n_covariates..(m + 1) * self.n_covariates]
    }

    #[inline]
    pub fn sigma2_draw(&self, m: usize, unit: usize) -> T {
        self.sigma2[m * self.n_units + unit]
    }

    /// `λ_iᵀ f_t + X_itᵀ β` at draw `m`.
    #[inline]
    pub fn mean_at(&self, panel: &PanelData<T>, m: usize, cell: Cell) -> T {
        let mut mu = dot(self.loading(m, cell.unit), self.factor(m, cell.time));
        if self.n_covariates > 0 {
            mu = mu + dot(panel.covariate(cell.unit, cell.time), self.beta_draw(m));
        }
        mu
    }

    /// Posterior mean of the fitted value at a cell.
    pub fn fitted(&self, panel: &PanelData<T>, cell: Cell) -> T {
        (0..self.retained).map(|m| self.mean_at(panel, m, cell)).sum::<T>() / T::from_usize_lossy(self.retained)
    }
}

struct Included<T> {
    by_unit: Vec<Vec<(usize, T)>>,
    by_time: Vec<Vec<(usize, T)>>,
}

fn included_cells<T: Real>(panel: &PanelData<T>, excluded: &CellMask) -> Included<T> {
    let (n, t) = (panel.n_units(), panel.n_times());
    let mut by_unit = vec![Vec::new(); n];
    let mut by_time = vec![Vec::new(); t];
    for i in 0..n {
        for s in 0..t {
            if excluded.contains(Cell::new(i, s)) {
                continue;
            }
            if let Some(y) = panel.outcome(i, s) {
                by_unit[i].push((s, y));
                by_time[s].push((i, y));
            }
        }
    }
    Included { by_unit, by_time }
}

fn validate<T: Real>(panel: &PanelData<T>, excluded: &CellMask, model: &FactorModel<T>) -> Result<()> {
    let (n, t) = (panel.n_units(), panel.n_times());
    if (excluded.n_units(), excluded.n_times()) != (n, t) {
        return Err(Error::InvalidArgument("exclusion mask shape differs from the panel".into()));
    }
    if model.k == 0 || model.k > n.min(t) {
        return Err(Error::InvalidArgument(format!("K = {} must lie in 1..={}", model.k, n.min(t))));
    }
    if !(model.omega > T::zero() && model.omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("omega {} must be positive", model.omega)));
    }
    if model.iterations <= model.burnin {
        return Err(Error::InvalidArgument("iterations must exceed burnin".into()));
    }
    let p = &model.priors;
    if !(p.loading_scale > T::zero() && p.a > T::zero() && p.b > T::zero()) {
        return Err(Error::InvalidArgument("factor priors must be positive".into()));
    }
    if let VarianceModel::Fixed(s2) = model.variance {
        if !(s2 > T::zero() && s2.is_finite()) {
            return Err(Error::InvalidArgument(format!("fixed variance {s2} must be positive")));
        }
    }
    if let Some(c) = panel.treated_cells().iter().find(|&c| !excluded.contains(c)) {
        return Err(Error::InvalidArgument(format!(
            "treated cell ({}, {}) is not excluded from the untreated-regime fit",
            c.unit, c.time
        )));
    }
    Ok(())
}

fn beta_prior_precision<T: Real>(priors: &FactorPriors<T>, p: usize) -> Result<Matrix<T>> {
    match &priors.beta_cov {
        None => Ok(Matrix::identity(p).scale(T::lit(0.01))),
        Some(cov) if cov.rows() == p && cov.cols() == p => Ok(Cholesky::new(cov, "beta prior covariance")?.inverse()),
        Some(_) => Err(Error::InvalidArgument("beta prior covariance has wrong dimension".into())),
    }
}

fn draw_prior<T: Real, R: Rng + ?Sized>(k: usize, scale: T, rng: &mut R) -> Vec<T> {
    (0..k).map(|_| scale * T::sample_std_normal(rng)).collect()
}

/// Runs the tempered factor-model Gibbs sampler on the cells of `panel`
/// outside `excluded` (missing outcomes are skipped as well). `excluded`
/// must cover every treated cell.
pub fn gibbs_factor<T: Real>(
    panel: &PanelData<T>,
    excluded: &CellMask,
    model: &FactorModel<T>,
    seed: u64,
) -> Result<FactorFit<T>> {
    validate(panel, excluded, model)?;
    let (n, nt, k, p) = (panel.n_units(), panel.n_times(), model.k, panel.n_covariates());
    let omega = model.omega;
    let priors = &model.priors;
    let inc = included_cells(panel, excluded);
    let counts: Vec<usize> = inc.by_unit.iter().map(Vec::len).collect();
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!("unit {i} has no included cells")));
    }
    let mut diagnostics = Vec::new();
    let thin_units = counts.iter().filter(|&&c| c < k).count();
    if thin_units > 0 {
        diagnostics.push(format!("{thin_units} unit(s) have fewer than K = {k} included cells"));
    }
    let empty_times = inc.by_time.iter().filter(|v| v.is_empty()).count();
    if empty_times > 0 {
        diagnostics.push(format!("{empty_times} period(s) have no included cells; their factors follow the prior"));
    }
    let beta_prec = if p > 0 { Some(beta_prior_precision(priors, p)?) } else { None };
    let total: usize = counts.iter().sum();

    let half = T::lit(0.5);
    let precision_shapes: Vec<T> = match model.variance {
        VarianceModel::Shared => vec![priors.a + omega * T::from_usize_lossy(total) * half; n],
        _ => counts.iter().map(|&c| priors.a + omega * T::from_usize_lossy(c) * half).collect(),
    };

    let mut rng = stream(seed, "gibbs-factor", 0);
    let sd_load = priors.loading_scale.sqrt();
    let mut lam: Vec<Vec<T>> = (0..n).map(|_| draw_prior(k, sd_load, &mut rng)).collect();
    let mut fac: Vec<Vec<T>> = (0..nt).map(|_| draw_prior(k, T::one(), &mut rng)).collect();
    let mut beta = vec![T::zero(); p];
    let mut sig2 = match model.variance {
        VarianceModel::Fixed(s2) => vec![s2; n],
        _ => vec![T::one(); n],
    };

    let kept = model.iterations - model.burnin;
    let mut out_l = Vec::with_capacity(kept * n * k);
    let mut out_f = Vec::with_capacity(kept * nt * k);
    let mut out_b = Vec::with_capacity(kept * p);
    let mut out_s = Vec::with_capacity(kept * n);

    let xb = |beta: &[T], i: usize, t: usize| -> T {
        if p == 0 {
            T::zero()
        } else {
            dot(panel.covariate(i, t), beta)
        }
    };
    let inv_load = T::one() / priors.loading_scale;

    for it in 0..model.iterations {
        // Loadings, one unit at a time.
        for i in 0..n {
            let w = omega / sig2[i];
            let mut prec = Matrix::identity(k).scale(inv_load);
            let mut h = vec![T::zero(); k];
            for &(t, y) in &inc.by_unit[i] {
                let f = &fac[t];
                let r = y - xb(&beta, i, t);
                for a in 0..k {
                    h[a] = h[a] + w * f[a] * r;
                    for b in 0..=a {
                        prec[(a, b)] = prec[(a, b)] + w * f[a] * f[b];
                    }
                }
            }
            symmetrize(&mut prec);
            lam[i] = Cholesky::new(&prec, "loading conditional precision")?.sample_from_precision(&h, &mut rng);
        }
        // Factors, one period at a time.
        for t in 0..nt {
            let mut prec = Matrix::identity(k);
            let mut h = vec![T::zero(); k];
            for &(i, y) in &inc.by_time[t] {
                let w = omega / sig2[i];
                let l = &lam[i];
                let r = y - xb(&beta, i, t);
                for a in 0..k {
                    h[a] = h[a] + w * l[a] * r;
                    for b in 0..=a {
                        prec[(a, b)] = prec[(a, b)] + w * l[a] * l[b];
                    }
                }
            }
            symmetrize(&mut prec);
            fac[t] = Cholesky::new(&prec, "factor conditional precision")?.sample_from_precision(&h, &mut rng);
        }
        // Covariate coefficients.
        if let Some(bp) = &beta_prec {
            let mut prec = bp.clone();
            let mut h = vec![T::zero(); p];
            for i in 0..n {
                let w = omega / sig2[i];
                for &(t, y) in &inc.by_unit[i] {
                    let x = panel.covariate(i, t);
                    let r = y - dot(&lam[i], &fac[t]);
                    for a in 0..p {
                        h[a] = h[a] + w * x[a] * r;
                        for b in 0..=a {
                            prec[(a, b)] = prec[(a, b)] + w * x[a] * x[b];
                        }
                    }
                }
            }
            symmetrize(&mut prec);
            beta = Cholesky::new(&prec, "beta conditional precision")?.sample_from_precision(&h, &mut rng);
        }
        // Noise precisions.
        if !matches!(model.variance, VarianceModel::Fixed(_)) {
            let rss: Vec<T> = (0..n)
                .map(|i| {
                    inc.by_unit[i]
                        .iter()
                        .map(|&(t, y)| {
                            let e = y - dot(&lam[i], &fac[t]) - xb(&beta, i, t);
                            e * e
                        })
                        .sum()
                })
                .collect();
            match model.variance {
                VarianceModel::UnitSpecific => {
                    for i in 0..n {
                        let rate = priors.b + omega * rss[i] * half;
                        sig2[i] = T::one() / T::sample_gamma(precision_shapes[i], rate, &mut rng);
                    }
                }
                VarianceModel::Shared => {
                    let rate = priors.b + omega * rss.iter().copied().sum::<T>() * half;
                    let s = T::one() / T::sample_gamma(precision_shapes[0], rate, &mut rng);
                    sig2.iter_mut().for_each(|v| *v = s);
                }
                VarianceModel::Fixed(_) => unreachable!(),
            }
        }
        if it >= model.burnin {
            lam.iter().for_each(|l| out_l.extend_from_slice(l));
            fac.iter().for_each(|f| out_f.extend_from_slice(f));
            out_b.extend_from_slice(&beta);
            out_s.extend_from_slice(&sig2);
        }
    }

    if out_l.iter().chain(&out_f).chain(&out_b).chain(&out_s).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("factor-model draws".into()));
    }
    Ok(FactorFit {
        k,
        omega,
        n_units: n,
        n_times: nt,
        n_covariates: p,
        retained: kept,
        loadings: out_l,
        factors: out_f,
        beta: out_b,
        sigma2: out_s,
        precision_shapes,
        included_per_unit: counts,
        iterations: model.iterations,
        burnin: model.burnin,
        seed,
        diagnostics,
    })
}

fn symmetrize<T: Real>(m: &mut Matrix<T>) {
    for a in 0..m.rows() {
        for b in 0..a {
            m[(b, a)] = m[(a, b)];
        }
    }
}

/// Posterior-predictive draws at a set of cells.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveDraws<T> {
    pub cells: Vec<Cell>,
    /// `μ_it^(m)` per cell.
    pub mean_draws: Vec<Vec<T>>,
    /// `μ_it^(m) + ε̃`, `ε̃ ~ N(0, σ_i²(m)/ω)`, per cell.
    pub outcome_draws: Vec<Vec<T>>,
}

impl<T: Real> PredictiveDraws<T> {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

pub fn posterior_predict<T: Real>(fit: &FactorFit<T>, panel: &PanelData<T>, cells: &CellMask) -> Result<PredictiveDraws<T>> {
    if (cells.n_units(), cells.n_times()) != (fit.n_units, fit.n_times)
        || (panel.n_units(), panel.n_times(), panel.n_covariates()) != (fit.n_units, fit.n_times, fit.n_covariates)
    {
        return Err(Error::InvalidArgument("prediction cells or panel do not match the fit".into()));
    }
    let mut rng = stream(fit.seed, "posterior-predict", 0);
    let mut mean_draws = Vec::with_capacity(cells.len());
    let mut outcome_draws = Vec::with_capacity(cells.len());
    for c in cells {
        let mut mu = Vec::with_capacity(fit.retained);
        let mut yy = Vec::with_capacity(fit.retained);
        for m in 0..fit.retained {
            let mean = fit.mean_at(panel, m, c);
            let sd = (fit.sigma2_draw(m, c.unit) / fit.omega).sqrt();
            mu.push(mean);
            yy.push(mean + sd * T::sample_std_normal(&mut rng));
        }
        mean_draws.push(mu);
        outcome_draws.push(yy);
    }
    Ok(PredictiveDraws { cells: cells.iter().collect(), mean_draws, outcome_draws })
}

/// Point estimate from the mean draws, interval from the predictive draws.
pub fn cell_summaries<T: Real>(pred: &PredictiveDraws<T>, alpha: T) -> Result<Vec<PosteriorSummary<T>>> {
    pred.mean_draws
        .iter()
        .zip(&pred.outcome_draws)
        .map(|(mu, y)| summarize_split(mu, y, alpha))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rank_one(n: usize, t: usize) -> PanelData<f64> {
        let u: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        let v: Vec<f64> = (0..t).map(|s| (s as f64 * 0.7).sin() + 0.5).collect();
        let y = (0..n).map(|i| (0..t).map(|s| Some(u[i] * v[s])).collect()).collect();
        PanelData::new(
            (0..n).map(|i| format!("u{i}")).collect(),
            (0..t).map(|s| format!("t{s}")).collect(),
            y,
            vec![None; n],
        )
        .unwrap()
    }

    #[test]
    fn recovers_noiseless_rank_one() {
        let panel = rank_one(8, 12);
        let model = FactorModel::new(1, 1.0).with_chain(600, 300);
        let fit = gibbs_factor(&panel, &CellMask::empty(8, 12), &model, 4).unwrap();
        let ymax = (0..8).flat_map(|i| (0..12).map(move |t| (i, t))).map(|(i, t)| panel.outcome(i, t).unwrap().abs()).fold(0.0, f64::max);
        for i in 0..8 {
            for t in 0..12 {
                let err = (fit.fitted(&panel, Cell::new(i, t)) - panel.outcome(i, t).unwrap()).abs();
                assert!(err < 0.05 * ymax, "cell ({i},{t}) err {err}");
            }
        }
    }

    #[test]
    fn treated_cells_must_be_excluded() {
        let panel = rank_one(4, 5).with_treatment_start(vec![Some(3), None, None, None]).unwrap();
        let model = FactorModel::new(1, 1.0).with_chain(20, 10);
        assert!(gibbs_factor(&panel, &CellMask::empty(4, 5), &model, 1).is_err());
        assert!(gibbs_factor(&panel, &panel.treated_cells(), &model, 1).is_ok());
    }

    #[test]
    fn shapes_follow_included_counts() {
        let panel = rank_one(4, 6);
        let mask = CellMask::new(4, 6, [Cell::new(0, 0), Cell::new(0, 1), Cell::new(2, 5)]).unwrap();
        let model = FactorModel::new(2, 0.5).with_chain(30, 10);
        let fit = gibbs_factor(&panel, &mask, &model, 2).unwrap();
        assert_eq!(fit.included_per_unit, vec![4, 6, 5, 6]);
        for (i, &c) in fit.included_per_unit.iter().enumerate() {
            assert_eq!(fit.precision_shapes[i], 0.01 + 0.5 * c as f64 / 2.0);
        }
        assert!(fit.sigma2.iter().all(|&s| s > 0.0));
        assert_eq!(fit.loadings.len(), 20 * 4 * 2);
    }

    #[test]
    fn invalid_k_or_omega() {
        let panel = rank_one(3, 4);
        let mask = CellMask::empty(3, 4);
        assert!(gibbs_factor(&panel, &mask, &FactorModel::new(4, 1.0), 1).is_err());
        assert!(gibbs_factor(&panel, &mask, &FactorModel::new(0, 1.0), 1).is_err());
        assert!(gibbs_factor(&panel, &mask, &FactorModel::new(1, 0.0), 1).is_err());
        let all = CellMask::new(3, 4, (0..4).map(|t| Cell::new(1, t))).unwrap();
        assert!(gibbs_factor(&panel, &all, &FactorModel::new(1, 1.0).with_chain(10, 5), 1).is_err());
    }

    #[test]
    fn prediction_noise_scales_with_omega() {
        let panel = rank_one(4, 6);
        let model = FactorModel::new(1, 4.0).with_chain(40, 10).with_variance(VarianceModel::Fixed(1.0));
        let fit = gibbs_factor(&panel, &CellMask::empty(4, 6), &model, 3).unwrap();
        let cells = CellMask::new(4, 6, [Cell::new(1, 2)]).unwrap();
        let pred = posterior_predict(&fit, &panel, &cells).unwrap();
        let mut again = stream(fit.seed, "posterior-predict", 0);
        for m in 0..fit.retained {
            let z: f64 = f64::sample_std_normal(&mut again);
            let expect = pred.mean_draws[0][m] + 0.5 * z;
            assert!((pred.outcome_draws[0][m] - expect).abs() < 1e-12);
            let bil = dot(fit.loading(m, 1), fit.factor(m, 2));
            assert_eq!(pred.mean_draws[0][m], bil);
        }
        let s = cell_summaries(&pred, 0.05).unwrap();
        assert!(s[0].lower <= s[0].upper);
    }
}
