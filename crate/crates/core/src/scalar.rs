//! Floating-point scalar abstraction shared by every numerical routine.
//!
//! All samplers, scores and risk curves are generic over [`Real`]. The trait
//! is implemented for `f32` and `f64`; special functions are evaluated in
//! `f64` and narrowed, which is exact enough for single precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Real scalar usable by the samplers.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + FromStr + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the value is unrepresentable.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Lossy widening used by special functions and reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma variate with the given shape and *rate*.
    fn sample_gamma<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Self;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn sample_gamma<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Self {
                Gamma::new(shape, 1.0 / rate)
                    .expect("gamma parameters validated by caller")
                    .sample(rng)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Standard normal density.
pub fn norm_pdf<T: Real>(x: T) -> T {
    let x = x.as_f64();
    T::lit((-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt())
}

/// Standard normal upper tail `1 − Φ(x)`, accurate in the far tail.
pub fn norm_sf<T: Real>(x: T) -> T {
    T::lit(0.5 * libm::erfc(x.as_f64() / std::f64::consts::SQRT_2))
}

pub fn norm_cdf<T: Real>(x: T) -> T {
    T::lit(0.5 * libm::erfc(-x.as_f64() / std::f64::consts::SQRT_2))
}

/// Standard normal quantile `Φ⁻¹(p)` for `0 < p < 1`.
///
/// The inverse-erfc estimate is polished with two Newton steps against
/// `erfc`, so `norm_sf(norm_quantile(1 − a)) == a` to near machine precision.
pub fn norm_quantile<T: Real>(p: T) -> T {
    let p = p.as_f64();
    debug_assert!(p > 0.0 && p < 1.0);
    let mut x = -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    for _ in 0..2 {
        // Φ(x) − p, evaluated on the smaller tail to avoid cancellation.
        let err = if x > 0.0 {
            (1.0 - p) - 0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
        } else {
            0.5 * libm::erfc(-x / std::f64::consts::SQRT_2) - p
        };
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf > 0.0 {
            x -= err / pdf;
        }
    }
    T::lit(x)
}
