//! Proper scoring rules for posterior summaries of a scalar estimand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{check_alpha, DrawStore, PosteriorSummary};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport<T> {
    pub squared_bias: T,
    pub interval_score: T,
    pub combined: T,
    pub alpha: T,
}

/// Interval score of the central `(1 − α)` interval `[lower, upper]`.
pub fn interval_score<T: Real>(lower: T, upper: T, tau: T, alpha: T) -> Result<T> {
    check_alpha(alpha)?;
    if !(lower <= upper) {
        return Err(Error::InvalidArgument(format!("interval lower {lower} > upper {upper}")));
    }
    let k = T::lit(2.0) / alpha;
    let mut s = upper - lower;
    if tau > upper {
        s = s + k * (tau - upper);
    }
    if tau < lower {
        s = s + k * (lower - tau);
    }
    Ok(s)
}

/// Squared bias of the posterior mean plus the interval score.
pub fn combined_score<T: Real>(summary: &PosteriorSummary<T>, tau: T) -> Result<ScoreReport<T>> {
    let is = interval_score(summary.lower, summary.upper, tau, summary.alpha)?;
    let b = summary.mean - tau;
    Ok(ScoreReport { squared_bias: b * b, interval_score: is, combined: b * b + is, alpha: summary.alpha })
}

/// `(mean − τ)² + variance`.
pub fn mse_score<T: Real>(mean: T, variance: T, tau: T) -> Result<T> {
    if !(variance >= T::zero()) {
        return Err(Error::InvalidArgument(format!("negative variance {variance}")));
    }
    Ok((mean - tau) * (mean - tau) + variance)
}

/// Sample CRPS `mean|X − τ| − ½ mean|X − X′|`, the pair term taken over all
/// `M²` ordered pairs. Computed exactly in `O(M log M)` from order
/// statistics.
pub fn empirical_crps<T: Real>(draws: &DrawStore<T>, tau: T) -> Result<T> {
    crps_slice(draws.draws(), tau)
}

pub fn crps_slice<T: Real>(draws: &[T], tau: T) -> Result<T> {
    if draws.is_empty() {
        return Err(Error::EmptyInput("crps draws".into()));
    }
    let m = draws.len();
    let mf = T::from_usize_lossy(m);
    let first = draws.iter().map(|&x| (x - tau).abs()).sum::<T>() / mf;
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    // Σ_{i,j} |x_i − x_j| = 2 Σ_i (2i − M + 1) x_(i)
    let mut acc = T::zero();
    for (i, &x) in sorted.iter().enumerate() {
        acc = acc + (T::from_usize_lossy(2 * i + 1) - mf) * x;
    }
    let pair = T::lit(2.0) * acc / (mf * mf);
    Ok((first - T::lit(0.5) * pair).max(T::zero()))
}

/// Component-wise mean of reports sharing one α.
pub fn average_score<T: Real>(reports: &[ScoreReport<T>]) -> Result<ScoreReport<T>> {
    let first = reports.first().ok_or_else(|| Error::EmptyInput("score reports".into()))?;
    if reports.iter().any(|r| r.alpha != first.alpha) {
        return Err(Error::InvalidArgument("score reports mix alpha levels".into()));
    }
    let n = T::from_usize_lossy(reports.len());
    let sb = reports.iter().map(|r| r.squared_bias).sum::<T>() / n;
    let is = reports.iter().map(|r| r.interval_score).sum::<T>() / n;
    Ok(ScoreReport { squared_bias: sb, interval_score: is, combined: sb + is, alpha: first.alpha })
}
