//! Tempered Gaussian linear regression.
//!
//! The likelihood is raised to the power `ω`, which for a Gaussian model is
//! the same as inflating the noise variance to `σ²/ω`. Conditionals stay
//! conjugate:
//!
//! * `β | σ², y ~ N(m_ω, V_ω)`, `V_ω = (V₀⁻¹ + ωσ⁻²XᵀX)⁻¹`,
//!   `m_ω = V_ω(V₀⁻¹m₀ + ωσ⁻²Xᵀy)`
//! * `σ⁻² | β, y ~ Gamma(a₀ + ωN/2, b₀ + ω‖y − Xβ‖²/2)`
//!
//! The sampler only touches `XᵀX`, `Xᵀy` and `yᵀy`, so an iteration costs
//! `O(q²)` once those are formed.

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::panel::{summarize, DrawStore, PosteriorSummary};
use crate::rng::stream;
use crate::scalar::Real;

pub const DEFAULT_ITERATIONS: usize = 5000;
pub const DEFAULT_BURNIN: usize = 2000;

/// `β ~ N(m₀, V₀)`, `σ⁻² ~ Gamma(a₀, b₀)`. Stored via the prior precision
/// so the improper flat prior (zero precision) is representable.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionPriors<T> {
    m0: Vec<T>,
    precision: Matrix<T>,
    a0: T,
    b0: T,
}

impl<T: Real> RegressionPriors<T> {
    pub fn new(m0: Vec<T>, v0: &Matrix<T>, a0: T, b0: T) -> Result<Self> {
        if v0.rows() != m0.len() || v0.cols() != m0.len() {
            return Err(Error::InvalidArgument("prior mean and covariance dimensions differ".into()));
        }
        if !v0.is_symmetric(T::lit(1e-10)) {
            return Err(Error::InvalidArgument("prior covariance is not symmetric".into()));
        }
        let precision = Cholesky::new(v0, "prior covariance V0")?.inverse();
        Self::from_precision(m0, precision, a0, b0)
    }

    pub fn from_precision(m0: Vec<T>, precision: Matrix<T>, a0: T, b0: T) -> Result<Self> {
        if !(a0 > T::zero() && b0 > T::zero()) {
            return Err(Error::InvalidArgument(format!("a0 = {a0}, b0 = {b0} must be positive")));
        }
        if !precision.all_finite() || m0.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("regression priors".into()));
        }
        Ok(Self { m0, precision, a0, b0 })
    }

    /// `m₀ = 0`, `V₀ = 100 I`, `a₀ = b₀ = 0.01`.
    pub fn weakly_informative(q: usize) -> Self {
        Self::isotropic(q, T::lit(100.0))
    }

    pub fn isotropic(q: usize, variance: T) -> Self {
        Self {
            m0: vec![T::zero(); q],
            precision: Matrix::identity(q).scale(T::one() / variance),
            a0: T::lit(0.01),
            b0: T::lit(0.01),
        }
    }

    /// Improper flat prior on `β`.
    pub fn flat(q: usize) -> Self {
        Self { m0: vec![T::zero(); q], precision: Matrix::zeros(q, q), a0: T::lit(0.01), b0: T::lit(0.01) }
    }

    pub fn dim(&self) -> usize {
        self.m0.len()
    }

    pub fn m0(&self) -> &[T] {
        &self.m0
    }

    pub fn prior_precision(&self) -> &Matrix<T> {
        &self.precision
    }

    pub fn a0(&self) -> T {
        self.a0
    }

    pub fn b0(&self) -> T {
        self.b0
    }
}

#[derive(Clone, Debug)]
pub struct RegressionFit<T> {
    pub beta_draws: Vec<DrawStore<T>>,
    pub sigma2_draws: DrawStore<T>,
    pub omega: T,
    pub iterations: usize,
    pub burnin: usize,
    pub seed: u64,
    /// Shape of the `σ⁻²` conditional, `a₀ + ωN/2`.
    pub precision_shape: T,
    pub diagnostics: Vec<String>,
}

impl<T: Real> RegressionFit<T> {
    pub fn retained(&self) -> usize {
        self.iterations - self.burnin
    }
}

struct SufficientStats<T> {
    xtx: Matrix<T>,
    xty: Vec<T>,
    yty: T,
    n: usize,
}

fn validate<T: Real>(design: &Matrix<T>, y: &[T], priors: &RegressionPriors<T>, omega: T, iterations: usize, burnin: usize) -> Result<()> {
    let (n, q) = (design.rows(), design.cols());
    if q == 0 || n <= q {
        return Err(Error::InvalidArgument(format!("need N > q ≥ 1, got N = {n}, q = {q}")));
    }
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("y has {} entries, design has {n} rows", y.len())));
    }
    if priors.dim() != q {
        return Err(Error::InvalidArgument(format!("priors are {}-dimensional, design has {q} columns", priors.dim())));
    }
    if !(omega > T::zero() && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("omega {omega} must be positive")));
    }
    if iterations <= burnin {
        return Err(Error::InvalidArgument(format!("iterations {iterations} must exceed burnin {burnin}")));
    }
    if !design.all_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression data".into()));
    }
    Ok(())
}

fn rank_diagnostics<T: Real>(xtx: &Matrix<T>) -> Vec<String> {
    match Cholesky::new(xtx, "XᵀX") {
        Ok(ch) if ch.condition_estimate() < 1e12 => Vec::new(),
        Ok(ch) => vec![format!(
            "design is numerically rank deficient (condition estimate {:.3e}); coefficients identified by the prior",
            ch.condition_estimate()
        )],
        Err(_) => vec!["design is not full column rank; coefficients identified by the prior".to_string()],
    }
}

/// Tempered Gibbs sampler with unknown noise variance.
pub fn gibbs_regression<T: Real>(
    design: &Matrix<T>,
    y: &[T],
    priors: &RegressionPriors<T>,
    omega: T,
    iterations: usize,
    burnin: usize,
    seed: u64,
) -> Result<RegressionFit<T>> {
    run(design, y, priors, omega, iterations, burnin, seed, None)
}

/// Same sampler with `σ²` held at a known value; only the `β` block moves.
pub fn gibbs_regression_known_variance<T: Real>(
    design: &Matrix<T>,
    y: &[T],
    priors: &RegressionPriors<T>,
    omega: T,
    sigma2: T,
    iterations: usize,
    burnin: usize,
    seed: u64,
) -> Result<RegressionFit<T>> {
    if !(sigma2 > T::zero() && sigma2.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma2 {sigma2} must be positive")));
    }
    run(design, y, priors, omega, iterations, burnin, seed, Some(sigma2))
}

#[allow(clippy::too_many_arguments)]
fn run<T: Real>(
    design: &Matrix<T>,
    y: &[T],
    priors: &RegressionPriors<T>,
    omega: T,
    iterations: usize,
    burnin: usize,
    seed: u64,
    fixed_sigma2: Option<T>,
) -> Result<RegressionFit<T>> {
    validate(design, y, priors, omega, iterations, burnin)?;
    let stats = SufficientStats { xtx: design.gram(), xty: design.tmatvec(y), yty: dot(y, y), n: y.len() };
    let diagnostics = rank_diagnostics(&stats.xtx);
    let q = design.cols();
    let prior_h = priors.precision.matvec(&priors.m0);
    let shape = priors.a0 + omega * T::from_usize_lossy(stats.n) / T::lit(2.0);
    let mut rng = stream(seed, "gibbs-regression", 0);

    let kept = iterations - burnin;
    let mut beta_out: Vec<Vec<T>> = (0..q).map(|_| Vec::with_capacity(kept)).collect();
    let mut sigma2_out = Vec::with_capacity(kept);

    // With σ² fixed the β conditional never changes; factor it once.
    let fixed_factor = match fixed_sigma2 {
        Some(s2) => Some(conditional(&stats, priors, &prior_h, omega / s2)?),
        None => None,
    };
    let mut sigma2 = fixed_sigma2.unwrap_or(T::one());
    for it in 0..iterations {
        let beta = match &fixed_factor {
            Some((ch, h)) => ch.sample_from_precision(h, &mut rng),
            None => {
                let (ch, h) = conditional(&stats, priors, &prior_h, omega / sigma2)?;
                ch.sample_from_precision(&h, &mut rng)
            }
        };
        if fixed_sigma2.is_none() {
            let xtxb = stats.xtx.matvec(&beta);
            let rss = (stats.yty - T::lit(2.0) * dot(&beta, &stats.xty) + dot(&beta, &xtxb)).max(T::zero());
            let rate = priors.b0 + omega * rss / T::lit(2.0);
            sigma2 = T::one() / T::sample_gamma(shape, rate, &mut rng);
        }
        if it >= burnin {
            for (store, b) in beta_out.iter_mut().zip(&beta) {
                store.push(*b);
            }
            sigma2_out.push(sigma2);
        }
    }

    let beta_draws = beta_out
        .into_iter()
        .enumerate()
        .map(|(j, d)| DrawStore::new(format!("beta[{j}]"), d))
        .collect::<Result<Vec<_>>>()?;
    Ok(RegressionFit {
        beta_draws,
        sigma2_draws: DrawStore::new("sigma2", sigma2_out)?,
        omega,
        iterations,
        burnin,
        seed,
        precision_shape: shape,
        diagnostics,
    })
}

/// Cholesky factor of the β-conditional precision and its linear term, for
/// data weight `w = ω/σ²`.
fn conditional<T: Real>(
    stats: &SufficientStats<T>,
    priors: &RegressionPriors<T>,
    prior_h: &[T],
    w: T,
) -> Result<(Cholesky<T>, Vec<T>)> {
    let prec = priors.precision.add(&stats.xtx.scale(w));
    let ch = Cholesky::new(&prec, "beta conditional precision V_ω⁻¹")?;
    let h = prior_h.iter().zip(&stats.xty).map(|(&a, &b)| a + w * b).collect();
    Ok((ch, h))
}

/// Closed-form `(m_ω, V_ω)` of the β conditional at known `σ²`.
pub fn conjugate_moments<T: Real>(
    design: &Matrix<T>,
    y: &[T],
    priors: &RegressionPriors<T>,
    omega: T,
    sigma2: T,
) -> Result<(Vec<T>, Matrix<T>)> {
    validate(design, y, priors, omega, 1, 0)?;
    let stats = SufficientStats { xtx: design.gram(), xty: design.tmatvec(y), yty: dot(y, y), n: y.len() };
    let prior_h = priors.precision.matvec(&priors.m0);
    let (ch, h) = conditional(&stats, priors, &prior_h, omega / sigma2)?;
    Ok((ch.solve(&h), ch.inverse()))
}

/// Flat-prior intercept-only posterior `N(Ȳ, σ²/(ωn))`.
pub fn closed_form_tau_posterior<T: Real>(y: &[T], omega: T, sigma2: T) -> Result<(T, T)> {
    if y.is_empty() {
        return Err(Error::EmptyInput("closed-form posterior needs at least one observation".into()));
    }
    if !(omega > T::zero()) {
        return Err(Error::InvalidArgument(format!("omega {omega} must be positive")));
    }
    let n = T::from_usize_lossy(y.len());
    Ok((y.iter().copied().sum::<T>() / n, sigma2 / (omega * n)))
}

pub fn tau_summary<T: Real>(fit: &RegressionFit<T>, coefficient: usize, alpha: T) -> Result<PosteriorSummary<T>> {
    let store = fit
        .beta_draws
        .get(coefficient)
        .ok_or_else(|| Error::OutOfRange(format!("coefficient {coefficient} of {}", fit.beta_draws.len())))?;
    summarize(store, alpha)
}
