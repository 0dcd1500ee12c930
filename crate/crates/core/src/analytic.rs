//! Closed-form expected score for the flat-prior, known-variance Gaussian
//! mean problem, where the tempered posterior is `N(Ȳ, σ²/(ωn))`.

use crate::error::{Error, Result};
use crate::scalar::{norm_pdf, norm_quantile, norm_sf, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianRiskParams<T> {
    pub n: usize,
    pub sigma: T,
    pub alpha: T,
}

impl<T: Real> GaussianRiskParams<T> {
    pub fn new(n: usize, sigma: T, alpha: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if !(sigma > T::zero() && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma {sigma} must be positive")));
        }
        crate::panel::check_alpha(alpha)?;
        Ok(Self { n, sigma, alpha })
    }

    fn z(&self) -> T {
        norm_quantile(T::one() - self.alpha / T::lit(2.0))
    }

    fn scale(&self) -> T {
        self.sigma / T::from_usize_lossy(self.n).sqrt()
    }
}

fn check_omega<T: Real>(omega: T) -> Result<()> {
    if omega > T::zero() && omega.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("omega {omega} must be positive")))
    }
}

/// Expected interval score `(2σ/√n)[t + (2/α)(φ(t) − tΦ̄(t))]`, `t = z/√ω`.
pub fn f_n<T: Real>(omega: T, p: &GaussianRiskParams<T>) -> Result<T> {
    check_omega(omega)?;
    let t = p.z() / omega.sqrt();
    let two = T::lit(2.0);
    Ok(two * p.scale() * (t + two / p.alpha * (norm_pdf(t) - t * norm_sf(t))))
}

/// `−(σ/√n)(z/ω^{3/2})[1 − (2/α)Φ̄(z/√ω)]`.
pub fn f_n_prime<T: Real>(omega: T, p: &GaussianRiskParams<T>) -> Result<T> {
    check_omega(omega)?;
    let z = p.z();
    let bracket = T::one() - T::lit(2.0) / p.alpha * norm_sf(z / omega.sqrt());
    Ok(-p.scale() * z / omega.powf(T::lit(1.5)) * bracket)
}

/// Expected combined score `σ²/n + f_n(ω)`.
pub fn risk<T: Real>(omega: T, p: &GaussianRiskParams<T>) -> Result<T> {
    let s = p.scale();
    Ok(s * s + f_n(omega, p)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> GaussianRiskParams<f64> {
        GaussianRiskParams::new(1, 1.0, 0.05).unwrap()
    }

    #[test]
    fn derivative_vanishes_at_one() {
        assert!(f_n_prime(1.0, &unit()).unwrap().abs() < 1e-10);
        assert!(f_n_prime(0.25, &unit()).unwrap() < 0.0);
    }

    #[test]
    fn scaling_in_n() {
        let p4 = GaussianRiskParams::new(4, 1.0, 0.05).unwrap();
        for &w in &[0.3, 1.0, 2.5] {
            let ratio = f_n(w, &p4).unwrap() / f_n(w, &unit()).unwrap();
            assert!((ratio - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_nonpositive_omega() {
        assert!(f_n(0.0, &unit()).is_err());
        assert!(f_n_prime(-1.0, &unit()).is_err());
        assert!(risk(f64::NAN, &unit()).is_err());
    }
}
