//! Gaussian-process regression with an ARD squared-exponential kernel for box
//! domains and a polar kernel for angles.

mod fit;
mod kernel;
pub mod linalg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fit::{fit_hyperparameters, FitSettings, FittedGp, HyperParameters, KernelKind};
pub use kernel::{ard_se_kernel, polar_distance, polar_kernel, KernelSpec, POLAR_TAU_MIN};
use linalg::Cholesky;

use crate::scalar::Real;

/// Diagonal jitter ladder, relative to the mean prior variance.
pub const JITTER_LADDER: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{inputs} training inputs but {targets} targets")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("invalid noise variance {0}")]
    InvalidNoise(f64),
    #[error("non-finite training data")]
    NonFinite,
    #[error("need at least {needed} data points, got {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error(
        "covariance of {size} points not positive definite after jitter {max_jitter:e} \
         (diagonal range {min_diagonal:e}..{max_diagonal:e}, max |off-diagonal| {max_offdiag:e})"
    )]
    Factorization {
        size: usize,
        max_jitter: f64,
        min_diagonal: f64,
        max_diagonal: f64,
        max_offdiag: f64,
    },
}

/// Posterior predictive means and standard deviations at a set of queries.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior<T> {
    pub means: Vec<T>,
    pub stds: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
struct GpModelData<T> {
    kernel: KernelSpec<T>,
    train_inputs: Vec<Vec<T>>,
    train_targets: Vec<T>,
    noise_variance: T,
    prior_mean: T,
}

/// Conditioned Gaussian process with constant prior mean.
///
/// Immutable once built; the Cholesky factor of `K + σₙ²I` is computed on
/// construction and reused by every query.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(
    try_from = "GpModelData<T>",
    into = "GpModelData<T>",
    bound(serialize = "T: Real", deserialize = "T: Real")
)]
pub struct GpModel<T: Real> {
    kernel: KernelSpec<T>,
    train_inputs: Vec<Vec<T>>,
    train_targets: Vec<T>,
    noise_variance: T,
    prior_mean: T,
    factor: Option<Cholesky<T>>,
    alpha: Vec<T>,
    jitter: T,
}

impl<T: Real> TryFrom<GpModelData<T>> for GpModel<T> {
    type Error = GpError;

    fn try_from(d: GpModelData<T>) -> Result<Self, GpError> {
        GpModel::new(
            d.kernel,
            d.train_inputs,
            d.train_targets,
            d.noise_variance,
            d.prior_mean,
        )
    }
}

impl<T: Real> From<GpModel<T>> for GpModelData<T> {
    fn from(m: GpModel<T>) -> Self {
        Self {
            kernel: m.kernel,
            train_inputs: m.train_inputs,
            train_targets: m.train_targets,
            noise_variance: m.noise_variance,
            prior_mean: m.prior_mean,
        }
    }
}

pub(crate) fn covariance_matrix<T: Real>(kernel: &KernelSpec<T>, xs: &[Vec<T>]) -> Vec<T> {
    let n = xs.len();
    let mut k = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&xs[i], &xs[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Factorises `k + noise·I`, walking the jitter ladder on failure.
pub(crate) fn factor_with_jitter<T: Real>(
    k: &[T],
    n: usize,
    noise: T,
) -> Result<(Cholesky<T>, T), GpError> {
    let mean_diag = if n == 0 {
        T::one()
    } else {
        (0..n).map(|i| k[i * n + i]).sum::<T>() / T::from_usize_lossy(n)
    };
    let scale = mean_diag.max(T::min_positive_value());
    let mut work = k.to_vec();
    for &rel in JITTER_LADDER.iter() {
        let jitter = T::lit(rel) * scale;
        for i in 0..n {
            work[i * n + i] = k[i * n + i] + noise + jitter;
        }
        if let Some(c) = Cholesky::factor(&work, n) {
            return Ok((c, jitter));
        }
    }
    let diag: Vec<f64> = (0..n).map(|i| k[i * n + i].as_f64()).collect();
    let max_offdiag = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| k[i * n + j].as_f64().abs())
        .fold(0.0, f64::max);
    Err(GpError::Factorization {
        size: n,
        max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1] * scale.as_f64(),
        min_diagonal: diag.iter().cloned().fold(f64::INFINITY, f64::min),
        max_diagonal: diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        max_offdiag,
    })
}

impl<T: Real> GpModel<T> {
    pub fn new(
        kernel: KernelSpec<T>,
        train_inputs: Vec<Vec<T>>,
        train_targets: Vec<T>,
        noise_variance: T,
        prior_mean: T,
    ) -> Result<Self, GpError> {
        kernel.validate()?;
        if train_inputs.len() != train_targets.len() {
            return Err(GpError::LengthMismatch {
                inputs: train_inputs.len(),
                targets: train_targets.len(),
            });
        }
        let dim = kernel.input_dim();
        if let Some(x) = train_inputs.iter().find(|x| x.len() != dim) {
            return Err(GpError::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if !(noise_variance >= T::zero()) || !noise_variance.is_finite() {
            return Err(GpError::InvalidNoise(noise_variance.as_f64()));
        }
        let finite = train_inputs.iter().flatten().all(|v| v.is_finite())
            && train_targets.iter().all(|v| v.is_finite())
            && prior_mean.is_finite();
        if !finite {
            return Err(GpError::NonFinite);
        }

        let n = train_inputs.len();
        let (factor, alpha, jitter) = if n == 0 {
            (None, Vec::new(), T::zero())
        } else {
            let k = covariance_matrix(&kernel, &train_inputs);
            let (chol, jitter) = factor_with_jitter(&k, n, noise_variance)?;
            let centred: Vec<T> = train_targets.iter().map(|&y| y - prior_mean).collect();
            let alpha = chol.solve(&centred);
            (Some(chol), alpha, jitter)
        };
        Ok(Self {
            kernel,
            train_inputs,
            train_targets,
            noise_variance,
            prior_mean,
            factor,
            alpha,
            jitter,
        })
    }

    /// Model whose constant prior mean is the arithmetic mean of the targets.
    pub fn with_mean_prior(
        kernel: KernelSpec<T>,
        train_inputs: Vec<Vec<T>>,
        train_targets: Vec<T>,
        noise_variance: T,
    ) -> Result<Self, GpError> {
        let mean = if train_targets.is_empty() {
            T::zero()
        } else {
            train_targets.iter().copied().sum::<T>() / T::from_usize_lossy(train_targets.len())
        };
        Self::new(kernel, train_inputs, train_targets, noise_variance, mean)
    }

    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }

    pub fn train_inputs(&self) -> &[Vec<T>] {
        &self.train_inputs
    }

    pub fn train_targets(&self) -> &[T] {
        &self.train_targets
    }

    pub fn noise_variance(&self) -> T {
        self.noise_variance
    }

    pub fn prior_mean(&self) -> T {
        self.prior_mean
    }

    /// Diagonal jitter that was needed to factorise the training covariance.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.train_inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_inputs.is_empty()
    }

    fn check_query(&self, x: &[T]) -> Result<(), GpError> {
        let dim = self.kernel.input_dim();
        if x.len() != dim {
            return Err(GpError::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn cross_cov(&self, x: &[T]) -> Vec<T> {
        self.train_inputs
            .iter()
            .map(|xi| self.kernel.eval(x, xi))
            .collect()
    }

    /// Posterior mean only; `O(n)` per query.
    pub fn mean_at(&self, x: &[T]) -> T {
        self.prior_mean
            + self
                .train_inputs
                .iter()
                .zip(&self.alpha)
                .map(|(xi, &a)| self.kernel.eval(x, xi) * a)
                .sum::<T>()
    }

    /// Posterior mean and standard deviation at a single query.
    pub fn predict_one(&self, x: &[T]) -> (T, T) {
        let prior_var = self.kernel.eval(x, x);
        let Some(chol) = &self.factor else {
            return (self.prior_mean, prior_var.max(T::zero()).sqrt());
        };
        let ks = self.cross_cov(x);
        let mean = self.prior_mean + ks.iter().zip(&self.alpha).map(|(&k, &a)| k * a).sum::<T>();
        let v = chol.solve_lower(&ks);
        let var = prior_var - v.iter().map(|&w| w * w).sum::<T>();
        (mean, var.max(T::zero()).sqrt())
    }

    /// Posterior mean and standard deviation at each query point.
    pub fn predict(&self, query: &[Vec<T>]) -> Result<Posterior<T>, GpError> {
        for q in query {
            self.check_query(q)?;
        }
        let (means, stds) = query.iter().map(|q| self.predict_one(q)).unzip();
        Ok(Posterior { means, stds })
    }

    /// `log p(y | X, θ)` under the model's hyper-parameters.
    pub fn log_marginal_likelihood(&self) -> T {
        let Some(chol) = &self.factor else {
            return T::zero();
        };
        let n = T::from_usize_lossy(self.len());
        let fit: T = self
            .train_targets
            .iter()
            .zip(&self.alpha)
            .map(|(&y, &a)| (y - self.prior_mean) * a)
            .sum();
        -T::lit(0.5) * fit - T::lit(0.5) * chol.log_det() - T::lit(0.5) * n * (T::TAU()).ln()
    }
}

/// Standard GP conditioning at a batch of query points.
pub fn gp_posterior<T: Real>(model: &GpModel<T>, query: &[Vec<T>]) -> Result<Posterior<T>, GpError> {
    model.predict(query)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn noiseless_interpolation_of_training_targets() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![TAU * i as f64 / 6.0]).collect();
        let ys = vec![2.0, 4.0, 2.5, 3.7, 3.1, 2.2];
        let m = GpModel::with_mean_prior(KernelSpec::polar(4.0), xs.clone(), ys.clone(), 0.0).unwrap();
        let post = m.predict(&xs).unwrap();
        for (mu, y) in post.means.iter().zip(&ys) {
            assert!((mu - y).abs() < 1e-8);
        }
        for s in post.stds {
            assert!(s * s <= 1e-8);
        }
    }

    #[test]
    fn empty_training_set_recovers_prior() {
        let m = GpModel::new(KernelSpec::ard(vec![0.5, 1.5], 2.0), vec![], vec![], 0.0, 1.25).unwrap();
        let post = m.predict(&[vec![0.1, 0.2], vec![9.0, -4.0]]).unwrap();
        assert_eq!(post.means, vec![1.25, 1.25]);
        for s in post.stds {
            assert!((s - 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn sine_midpoints_close_to_truth() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![TAU * i as f64 / 9.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0].sin()).collect();
        // lengthscale of the order of the spacing between samples
        let m = GpModel::new(KernelSpec::ard(vec![1.2], 1.0), xs, ys, 0.0, 0.0).unwrap();
        let mids: Vec<Vec<f64>> = (0..9).map(|i| vec![TAU * (i as f64 + 0.5) / 9.0]).collect();
        let post = m.predict(&mids).unwrap();
        let err = mids
            .iter()
            .zip(&post.means)
            .map(|(x, mu)| (mu - x[0].sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.05, "max midpoint error {err}");
    }

    #[test]
    fn duplicate_points_need_jitter() {
        let xs = vec![vec![0.3], vec![0.3], vec![0.7]];
        let m = GpModel::new(KernelSpec::ard(vec![0.4], 1.0), xs, vec![1.0, 1.0, 0.0], 0.0, 0.0).unwrap();
        assert!(m.jitter() > 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            GpModel::new(KernelSpec::polar(2.0), vec![vec![0.0]], vec![1.0], 0.0, 0.0),
            Err(GpError::InvalidKernel(_))
        ));
        assert!(matches!(
            GpModel::new(KernelSpec::ard(vec![1.0], 1.0), vec![vec![0.0]], vec![], 0.0, 0.0),
            Err(GpError::LengthMismatch { .. })
        ));
        assert!(matches!(
            GpModel::new(KernelSpec::ard(vec![1.0], 1.0), vec![vec![0.0]], vec![1.0], -1.0, 0.0),
            Err(GpError::InvalidNoise(_))
        ));
    }

    #[test]
    fn serde_round_trip_rebuilds_factor() {
        let xs = vec![vec![0.1, 0.2], vec![0.5, 0.9], vec![0.8, 0.4]];
        let m = GpModel::with_mean_prior(KernelSpec::ard(vec![0.3, 0.7], 1.3), xs, vec![1.0, -2.0, 0.5], 1e-4)
            .unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: GpModel<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back.predict_one(&[0.3, 0.3]), m.predict_one(&[0.3, 0.3]));
        assert!(json.contains("\"kind\":\"ard-squared-exponential\""));
    }
}
