use serde::{Deserialize, Serialize};

use super::GpError;
use crate::scalar::Real;

/// Smallest admissible polar-kernel shape parameter; below it the kernel is
/// not guaranteed to be positive definite on the circle.
pub const POLAR_TAU_MIN: f64 = 4.0;

/// Covariance function of a [`GpModel`](super::GpModel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub enum KernelSpec<T> {
    /// `σ² exp(−½ Σ ((xᵢ − x′ᵢ)/ℓᵢ)²)`
    ArdSquaredExponential {
        lengthscales: Vec<T>,
        signal_variance: T,
    },
    /// Correlation on the circle; inputs are single angles in radians.
    Polar { tau: T },
}

impl<T: Real> KernelSpec<T> {
    pub fn ard(lengthscales: Vec<T>, signal_variance: T) -> Self {
        Self::ArdSquaredExponential {
            lengthscales,
            signal_variance,
        }
    }

    pub fn polar(tau: T) -> Self {
        Self::Polar { tau }
    }

    /// Input dimension the kernel expects.
    pub fn input_dim(&self) -> usize {
        match self {
            Self::ArdSquaredExponential { lengthscales, .. } => lengthscales.len(),
            Self::Polar { .. } => 1,
        }
    }

    /// Prior variance `k(x, x)`.
    pub fn prior_variance(&self) -> T {
        match self {
            Self::ArdSquaredExponential {
                signal_variance, ..
            } => *signal_variance,
            Self::Polar { .. } => T::one(),
        }
    }

    pub fn validate(&self) -> Result<(), GpError> {
        match self {
            Self::ArdSquaredExponential {
                lengthscales,
                signal_variance,
            } => {
                if lengthscales.is_empty() {
                    return Err(GpError::InvalidKernel("no lengthscales".into()));
                }
                if let Some(l) = lengthscales
                    .iter()
                    .find(|l| !(**l > T::zero()) || !l.is_finite())
                {
                    return Err(GpError::InvalidKernel(format!(
                        "lengthscale {l} must be strictly positive"
                    )));
                }
                if !(*signal_variance > T::zero()) || !signal_variance.is_finite() {
                    return Err(GpError::InvalidKernel(format!(
                        "signal variance {signal_variance} must be strictly positive"
                    )));
                }
                Ok(())
            }
            Self::Polar { tau } => check_tau(*tau),
        }
    }

    /// Evaluates the kernel. Dimensions are assumed to have been checked.
    #[inline]
    pub fn eval(&self, a: &[T], b: &[T]) -> T {
        match self {
            Self::ArdSquaredExponential {
                lengthscales,
                signal_variance,
            } => *signal_variance * (-T::lit(0.5) * scaled_sq_dist(a, b, lengthscales)).exp(),
            Self::Polar { tau } => polar_correlation(polar_distance(a[0], b[0]), *tau),
        }
    }

    /// Kernel value divided by the prior variance, in `[0, 1]`.
    pub fn correlation(&self, a: &[T], b: &[T]) -> T {
        self.eval(a, b) / self.prior_variance()
    }
}

fn check_tau<T: Real>(tau: T) -> Result<(), GpError> {
    if tau >= T::lit(POLAR_TAU_MIN) && tau.is_finite() {
        Ok(())
    } else {
        Err(GpError::InvalidKernel(format!(
            "polar kernel requires tau >= {POLAR_TAU_MIN}, got {tau}"
        )))
    }
}

#[inline]
pub(crate) fn scaled_sq_dist<T: Real>(a: &[T], b: &[T], lengthscales: &[T]) -> T {
    a.iter()
        .zip(b)
        .zip(lengthscales)
        .map(|((&x, &y), &l)| {
            let d = (x - y) / l;
            d * d
        })
        .sum()
}

/// Floored modulus, always in `[0, m)`.
#[inline]
fn floor_mod<T: Real>(x: T, m: T) -> T {
    let r = x % m;
    let r = if r < T::zero() { r + m } else { r };
    // `r + m` can round up to exactly `m` for tiny negative `r`.
    if r >= m {
        T::zero()
    } else {
        r
    }
}

/// Angular distance on the circle, `|(θ − θ′ + π) mod 2π − π|`, in `[0, π]`.
///
/// Both angles are reduced to `[0, 2π)` first and the shorter arc is taken,
/// which equals the closed form and is exactly symmetric in its arguments.
#[inline]
pub fn polar_distance<T: Real>(theta: T, theta_prime: T) -> T {
    let two_pi = T::TAU();
    let a = floor_mod(theta, two_pi);
    let b = floor_mod(theta_prime, two_pi);
    let diff = (a - b).abs();
    diff.min(two_pi - diff)
}

#[inline]
fn polar_correlation<T: Real>(d: T, tau: T) -> T {
    let x = d / T::PI();
    ((T::one() + tau * x) * (T::one() - x).powf(tau)).abs()
}

/// Polar covariance `|(1 + τ d/π)(1 − d/π)^τ|` with `d` the angular distance.
pub fn polar_kernel<T: Real>(theta: T, theta_prime: T, tau: T) -> Result<T, GpError> {
    check_tau(tau)?;
    Ok(polar_correlation(polar_distance(theta, theta_prime), tau))
}

/// ARD squared-exponential covariance between two input vectors.
pub fn ard_se_kernel<T: Real>(x: &[T], x_prime: &[T], spec: &KernelSpec<T>) -> Result<T, GpError> {
    match spec {
        KernelSpec::ArdSquaredExponential { lengthscales, .. } => {
            spec.validate()?;
            if x.len() != lengthscales.len() || x_prime.len() != lengthscales.len() {
                return Err(GpError::DimensionMismatch {
                    expected: lengthscales.len(),
                    found: if x.len() != lengthscales.len() {
                        x.len()
                    } else {
                        x_prime.len()
                    },
                });
            }
            Ok(spec.eval(x, x_prime))
        }
        KernelSpec::Polar { .. } => Err(GpError::InvalidKernel(
            "expected an ARD squared-exponential kernel".into(),
        )),
    }
}

/// Derivative of the polar correlation with respect to `ln τ`.
pub(crate) fn polar_dlog_tau<T: Real>(d: T, tau: T) -> T {
    let x = d / T::PI();
    let u = T::one() - x;
    if u <= T::zero() {
        return T::zero();
    }
    let p = u.powf(tau);
    tau * (x * p + (T::one() + tau * x) * p * u.ln())
}
