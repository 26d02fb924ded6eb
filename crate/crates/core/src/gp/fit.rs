//! Maximum-marginal-likelihood hyper-parameter fitting.
//!
//! Inputs are mapped to the unit box given by the caller's bounds and targets
//! are standardised before fitting; [`FittedGp`] undoes both on prediction.
//! Hyper-parameters are searched in log space from Latin-hypercube restarts,
//! each refined with L-BFGS on a sigmoid reparameterisation of the box.

use serde::{Deserialize, Serialize};

use super::kernel::{polar_dlog_tau, polar_distance};
use super::{covariance_matrix, factor_with_jitter, GpError, GpModel, KernelSpec};
use crate::optim::{latin_hypercube, lbfgs, rng_from_seed};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    ArdSquaredExponential,
    Polar,
}

/// Search box and effort for [`fit_hyperparameters`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    /// Lengthscale range, in units of the normalised (unit-box) input.
    pub lengthscale_bounds: (f64, f64),
    /// Signal variance range, in units of the standardised target.
    pub signal_variance_bounds: (f64, f64),
    pub noise_bounds: (f64, f64),
    pub tau_bounds: (f64, f64),
    /// Pins the noise variance instead of fitting it.
    pub fixed_noise: Option<f64>,
    /// Latin-hypercube restarts (a warm start, when given, is tried in addition).
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            lengthscale_bounds: (1e-2, 1e2),
            signal_variance_bounds: (1e-2, 1e2),
            noise_bounds: (1e-8, 1e-1),
            tau_bounds: (4.0, 64.0),
            fixed_noise: None,
            restarts: 4,
            max_iterations: 60,
        }
    }
}

/// Fitted hyper-parameters in normalised units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct HyperParameters<T> {
    pub kind: KernelKind,
    /// One per input dimension (ARD only, empty for polar).
    pub lengthscales: Vec<T>,
    pub signal_variance: T,
    pub noise_variance: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<T>,
}

impl<T: Real> HyperParameters<T> {
    fn kernel(&self) -> KernelSpec<T> {
        match self.kind {
            KernelKind::ArdSquaredExponential => {
                KernelSpec::ard(self.lengthscales.clone(), self.signal_variance)
            }
            KernelKind::Polar => KernelSpec::polar(self.tau.unwrap_or(T::lit(4.0))),
        }
    }
}

/// A GP fitted in normalised coordinates together with the transforms that map
/// raw inputs and targets in and out of them.
#[derive(Debug, Clone)]
pub struct FittedGp<T: Real> {
    /// Model over unit-box inputs and standardised targets.
    pub model: GpModel<T>,
    pub input_bounds: Vec<(T, T)>,
    pub target_mean: T,
    pub target_scale: T,
    pub hyper: HyperParameters<T>,
    pub log_marginal_likelihood: T,
    /// Set when no restart improved on the default hyper-parameters.
    pub used_fallback: bool,
}

impl<T: Real> FittedGp<T> {
    /// Builds the model for fixed hyper-parameters, without any search.
    pub fn from_hyper(
        inputs: &[Vec<T>],
        targets: &[T],
        input_bounds: &[(T, T)],
        hyper: HyperParameters<T>,
    ) -> Result<Self, GpError> {
        let data = Prepared::new(inputs, targets, hyper.kind, input_bounds)?;
        let model = GpModel::new(
            hyper.kernel(),
            data.x.clone(),
            data.y.clone(),
            hyper.noise_variance,
            T::zero(),
        )?;
        let lml = model.log_marginal_likelihood();
        Ok(Self {
            model,
            input_bounds: input_bounds.to_vec(),
            target_mean: data.mean,
            target_scale: data.scale,
            hyper,
            log_marginal_likelihood: lml,
            used_fallback: false,
        })
    }

    pub fn normalize(&self, x: &[T]) -> Vec<T> {
        match self.hyper.kind {
            KernelKind::Polar => x.to_vec(),
            KernelKind::ArdSquaredExponential => x
                .iter()
                .zip(&self.input_bounds)
                .map(|(&v, &(lo, hi))| (v - lo) / (hi - lo))
                .collect(),
        }
    }

    /// Posterior mean and standard deviation in raw target units.
    pub fn predict(&self, x: &[T]) -> (T, T) {
        let (m, s) = self.model.predict_one(&self.normalize(x));
        (self.target_mean + self.target_scale * m, self.target_scale * s)
    }

    pub fn mean(&self, x: &[T]) -> T {
        self.target_mean + self.target_scale * self.model.mean_at(&self.normalize(x))
    }

    /// Prior mean in raw target units.
    pub fn prior_mean(&self) -> T {
        self.target_mean
    }

    /// Kernel correlation `k(a, b) / k(a, a)` between two raw inputs.
    pub fn correlation(&self, a: &[T], b: &[T]) -> T {
        self.model
            .kernel()
            .correlation(&self.normalize(a), &self.normalize(b))
    }
}

struct Prepared<T> {
    x: Vec<Vec<T>>,
    y: Vec<T>,
    mean: T,
    scale: T,
}

impl<T: Real> Prepared<T> {
    fn new(inputs: &[Vec<T>], targets: &[T], kind: KernelKind, bounds: &[(T, T)]) -> Result<Self, GpError> {
        if inputs.len() != targets.len() {
            return Err(GpError::LengthMismatch {
                inputs: inputs.len(),
                targets: targets.len(),
            });
        }
        let dim = match kind {
            KernelKind::Polar => 1,
            KernelKind::ArdSquaredExponential => bounds.len(),
        };
        if let Some(x) = inputs.iter().find(|x| x.len() != dim) {
            return Err(GpError::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if kind == KernelKind::ArdSquaredExponential
            && bounds.iter().any(|&(lo, hi)| !(hi > lo) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(GpError::InvalidKernel("input bounds must satisfy low < high".into()));
        }
        let x = match kind {
            KernelKind::Polar => inputs.to_vec(),
            KernelKind::ArdSquaredExponential => inputs
                .iter()
                .map(|v| {
                    v.iter()
                        .zip(bounds)
                        .map(|(&a, &(lo, hi))| (a - lo) / (hi - lo))
                        .collect()
                })
                .collect(),
        };
        let n = T::from_usize_lossy(targets.len().max(1));
        let mean = targets.iter().copied().sum::<T>() / n;
        let var = targets.iter().map(|&t| (t - mean) * (t - mean)).sum::<T>() / n;
        let sd = var.sqrt();
        let scale = if sd > T::lit(1e-12) * mean.abs().max(T::one()) {
            sd
        } else {
            T::one()
        };
        let y = targets.iter().map(|&t| (t - mean) / scale).collect();
        Ok(Self { x, y, mean, scale })
    }
}

/// Log-space box of the free hyper-parameters, in optimiser order:
/// ARD `[ln ℓ₁ … ln ℓ_D, ln σ², (ln σₙ²)]`, polar `[ln τ, (ln σₙ²)]`.
struct Layout {
    kind: KernelKind,
    dim: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    fixed_noise: Option<f64>,
}

impl Layout {
    fn new(kind: KernelKind, dim: usize, s: &FitSettings) -> Self {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        let mut push = |(a, b): (f64, f64)| {
            lo.push(a.ln());
            hi.push(b.ln());
        };
        match kind {
            KernelKind::ArdSquaredExponential => {
                for _ in 0..dim {
                    push(s.lengthscale_bounds);
                }
                push(s.signal_variance_bounds);
            }
            KernelKind::Polar => push(s.tau_bounds),
        }
        if s.fixed_noise.is_none() {
            push(s.noise_bounds);
        }
        Self {
            kind,
            dim,
            lo,
            hi,
            fixed_noise: s.fixed_noise,
        }
    }

    fn len(&self) -> usize {
        self.lo.len()
    }

    /// Unconstrained optimiser variable → log hyper-parameter.
    fn to_log(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &v)| self.lo[i] + (self.hi[i] - self.lo[i]) * sigmoid(v))
            .collect()
    }

    fn from_log(&self, logs: &[f64]) -> Vec<f64> {
        logs.iter()
            .enumerate()
            .map(|(i, &l)| {
                let p = ((l - self.lo[i]) / (self.hi[i] - self.lo[i])).clamp(1e-4, 1.0 - 1e-4);
                (p / (1.0 - p)).ln()
            })
            .collect()
    }

    fn hyper<T: Real>(&self, logs: &[f64]) -> HyperParameters<T> {
        let noise = match self.fixed_noise {
            Some(v) => v,
            None => logs[self.len() - 1].exp(),
        };
        match self.kind {
            KernelKind::ArdSquaredExponential => HyperParameters {
                kind: self.kind,
                lengthscales: logs[..self.dim].iter().map(|l| T::lit(l.exp())).collect(),
                signal_variance: T::lit(logs[self.dim].exp()),
                noise_variance: T::lit(noise),
                tau: None,
            },
            KernelKind::Polar => HyperParameters {
                kind: self.kind,
                lengthscales: Vec::new(),
                signal_variance: T::one(),
                noise_variance: T::lit(noise),
                tau: Some(T::lit(logs[0].exp())),
            },
        }
    }

    fn logs_of<T: Real>(&self, h: &HyperParameters<T>) -> Option<Vec<f64>> {
        if h.kind != self.kind {
            return None;
        }
        let mut v = match self.kind {
            KernelKind::ArdSquaredExponential => {
                if h.lengthscales.len() != self.dim {
                    return None;
                }
                let mut v: Vec<f64> = h.lengthscales.iter().map(|l| l.as_f64().ln()).collect();
                v.push(h.signal_variance.as_f64().ln());
                v
            }
            KernelKind::Polar => vec![h.tau?.as_f64().ln()],
        };
        if self.fixed_noise.is_none() {
            v.push(h.noise_variance.as_f64().ln());
        }
        Some(v)
    }

    fn midpoint(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Negative log marginal likelihood and its gradient with respect to the log
/// hyper-parameters.
fn neg_lml_and_grad<T: Real>(layout: &Layout, x: &[Vec<T>], y: &[T], logs: &[f64]) -> Option<(f64, Vec<f64>)> {
    let hyper: HyperParameters<T> = layout.hyper(logs);
    let kernel = hyper.kernel();
    let n = x.len();
    let k = covariance_matrix(&kernel, x);
    let (chol, _) = factor_with_jitter(&k, n, hyper.noise_variance).ok()?;
    let alpha = chol.solve(y);
    let fit: T = y.iter().zip(&alpha).map(|(&a, &b)| a * b).sum();
    let nll = T::lit(0.5) * fit
        + T::lit(0.5) * chol.log_det()
        + T::lit(0.5) * T::from_usize_lossy(n) * T::TAU().ln();
    let nll = nll.as_f64();
    if !nll.is_finite() {
        return None;
    }
    // W = α αᵀ − K⁻¹ ; ∂L/∂θ = ½ tr(W ∂K/∂θ)
    let kinv = chol.inverse();
    let w = |i: usize, j: usize| alpha[i] * alpha[j] - kinv[i * n + j];
    let mut grad = vec![0.0; layout.len()];
    match layout.kind {
        KernelKind::ArdSquaredExponential => {
            let ls = &hyper.lengthscales;
            let d = layout.dim;
            let mut acc = vec![T::zero(); d + 1];
            for i in 0..n {
                for j in 0..n {
                    let wij = w(i, j);
                    let kij = k[i * n + j];
                    let wk = wij * kij;
                    acc[d] += wk;
                    for dd in 0..d {
                        let delta = (x[i][dd] - x[j][dd]) / ls[dd];
                        acc[dd] += wk * delta * delta;
                    }
                }
            }
            for (g, a) in grad.iter_mut().zip(&acc) {
                *g = -0.5 * a.as_f64();
            }
        }
        KernelKind::Polar => {
            let tau = hyper.tau.unwrap_or(T::lit(4.0));
            let mut acc = T::zero();
            for i in 0..n {
                for j in 0..n {
                    let dist = polar_distance(x[i][0], x[j][0]);
                    acc += w(i, j) * polar_dlog_tau(dist, tau);
                }
            }
            grad[0] = -0.5 * acc.as_f64();
        }
    }
    if layout.fixed_noise.is_none() {
        let tr: T = (0..n).map(|i| w(i, i)).sum();
        let last = layout.len() - 1;
        grad[last] = -0.5 * (tr * hyper.noise_variance).as_f64();
    }
    Some((nll, grad))
}

/// Fits kernel hyper-parameters by maximising the log marginal likelihood.
///
/// `input_bounds` defines the unit box inputs are mapped to (ignored for the
/// polar kernel, whose inputs are angles). Deterministic for a given `seed`.
/// `warm_start`, when supplied, is tried as an extra starting point.
pub fn fit_hyperparameters<T: Real>(
    inputs: &[Vec<T>],
    targets: &[T],
    kind: KernelKind,
    input_bounds: &[(T, T)],
    settings: &FitSettings,
    seed: u64,
    warm_start: Option<&HyperParameters<T>>,
) -> Result<FittedGp<T>, GpError> {
    if inputs.len() < 2 {
        return Err(GpError::InsufficientData {
            needed: 2,
            found: inputs.len(),
        });
    }
    let data = Prepared::new(inputs, targets, kind, input_bounds)?;
    let dim = match kind {
        KernelKind::Polar => 1,
        KernelKind::ArdSquaredExponential => input_bounds.len(),
    };
    let layout = Layout::new(kind, dim, settings);

    let objective = |u: &[f64]| -> (f64, Vec<f64>) {
        let logs = layout.to_log(u);
        match neg_lml_and_grad(&layout, &data.x, &data.y, &logs) {
            Some((v, g)) => {
                // chain rule through the sigmoid box map
                let gu = g
                    .iter()
                    .zip(u)
                    .enumerate()
                    .map(|(i, (&gi, &ui))| {
                        let s = sigmoid(ui);
                        gi * (layout.hi[i] - layout.lo[i]) * s * (1.0 - s)
                    })
                    .collect();
                (v, gu)
            }
            None => (f64::INFINITY, vec![0.0; u.len()]),
        }
    };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(logs) = warm_start.and_then(|h| layout.logs_of(h)) {
        starts.push(layout.from_log(&logs));
    }
    let mut rng = rng_from_seed(seed);
    for p in latin_hypercube(settings.restarts, layout.len(), &mut rng) {
        let logs: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(i, &q)| layout.lo[i] + q * (layout.hi[i] - layout.lo[i]))
            .collect();
        starts.push(layout.from_log(&logs));
    }

    let default_logs = layout.midpoint();
    let default_nll = neg_lml_and_grad(&layout, &data.x, &data.y, &default_logs).map(|(v, _)| v);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for u0 in &starts {
        let m = lbfgs(objective, u0, settings.max_iterations, 1e-6);
        if m.value.is_finite() && best.as_ref().is_none_or(|(b, _)| m.value < *b) {
            best = Some((m.value, m.x));
        }
    }

    let (logs, fallback) = match (best, default_nll) {
        (Some((v, u)), Some(d)) if v <= d => (layout.to_log(&u), false),
        (Some((_, _)), Some(_)) | (None, Some(_)) => (default_logs, true),
        (Some((_, u)), None) => (layout.to_log(&u), false),
        (None, None) => {
            // Nothing factorises; report the failure from the default model.
            let hyper: HyperParameters<T> = layout.hyper(&default_logs);
            GpModel::new(hyper.kernel(), data.x.clone(), data.y.clone(), hyper.noise_variance, T::zero())?;
            unreachable!("default model factorised but likelihood was non-finite");
        }
    };
    if fallback {
        log::warn!("GP hyper-parameter search did not improve on the default; using prior defaults");
    }
    let hyper: HyperParameters<T> = layout.hyper(&logs);
    let mut fitted = FittedGp::from_hyper(inputs, targets, input_bounds, hyper)?;
    fitted.used_fallback = fallback;
    Ok(fitted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    fn ard_layout_check(logs: &[f64], x: &[Vec<f64>], y: &[f64]) {
        let layout = Layout::new(KernelKind::ArdSquaredExponential, 2, &FitSettings::default());
        let (_, g) = neg_lml_and_grad(&layout, x, y, logs).unwrap();
        for i in 0..logs.len() {
            let h = 1e-6;
            let mut up = logs.to_vec();
            up[i] += h;
            let mut dn = logs.to_vec();
            dn[i] -= h;
            let fd = (neg_lml_and_grad(&layout, x, y, &up).unwrap().0
                - neg_lml_and_grad(&layout, x, y, &dn).unwrap().0)
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()), "param {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64 * 0.37) % 1.0, (i as f64 * 0.61) % 1.0])
            .collect();
        let y: Vec<f64> = x.iter().map(|v| (4.0 * v[0]).sin() + 0.3 * v[1]).collect();
        ard_layout_check(&[(-1.0f64), 0.5, 0.2, (1e-3f64).ln()], &x, &y);
    }

    #[test]
    fn polar_gradient_matches_finite_differences() {
        let layout = Layout::new(KernelKind::Polar, 1, &FitSettings::default());
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.7]).collect();
        let y: Vec<f64> = x.iter().map(|v| v[0].cos()).collect();
        let logs = [(6.0f64).ln(), (1e-3f64).ln()];
        let (_, g) = neg_lml_and_grad(&layout, &x, &y, &logs).unwrap();
        for i in 0..2 {
            let h = 1e-6;
            let mut up = logs;
            up[i] += h;
            let mut dn = logs;
            dn[i] -= h;
            let fd = (neg_lml_and_grad(&layout, &x, &y, &up).unwrap().0
                - neg_lml_and_grad(&layout, &x, &y, &dn).unwrap().0)
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn constant_targets_push_signal_variance_to_lower_bound() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
        let y = vec![3.5; 8];
        let s = FitSettings::default();
        let fit = fit_hyperparameters(&x, &y, KernelKind::ArdSquaredExponential, &[(0.0, 1.0)], &s, 1, None).unwrap();
        assert!(fit.hyper.signal_variance < 1.1 * s.signal_variance_bounds.0, "{:?}", fit.hyper);
        assert!((fit.prior_mean() - 3.5).abs() < 1e-12);
        assert!((fit.predict(&[0.33]).0 - 3.5).abs() < 1e-9);
    }

    #[test]
    fn same_seed_same_hyperparameters() {
        let x: Vec<Vec<f64>> = (0..15).map(|i| vec![(i as f64 * 0.173) % 1.0]).collect();
        let y: Vec<f64> = x.iter().map(|v| (6.0 * v[0]).sin()).collect();
        let s = FitSettings::default();
        let a = fit_hyperparameters(&x, &y, KernelKind::ArdSquaredExponential, &[(0.0, 1.0)], &s, 9, None).unwrap();
        let b = fit_hyperparameters(&x, &y, KernelKind::ArdSquaredExponential, &[(0.0, 1.0)], &s, 9, None).unwrap();
        assert_eq!(a.hyper, b.hyper);
    }

    /// Draw from a GP prior with a known lengthscale and refit.
    #[test]
    fn recovers_known_lengthscale_within_factor_two() {
        let n = 60;
        let truth = 0.5;
        let mut hits = 0;
        for seed in 0..5u64 {
            let mut rng = rng_from_seed(100 + seed);
            let x: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64 + 0.5) / n as f64]).collect();
            let k = covariance_matrix(&KernelSpec::ard(vec![truth], 1.0), &x);
            let (chol, _) = factor_with_jitter(&k, n, 1e-6).unwrap();
            let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let l = chol.lower();
            let y: Vec<f64> = (0..n).map(|i| (0..=i).map(|j| l[i * n + j] * z[j]).sum()).collect();
            let fit = fit_hyperparameters(
                &x,
                &y,
                KernelKind::ArdSquaredExponential,
                &[(0.0, 1.0)],
                &FitSettings::default(),
                seed,
                None,
            )
            .unwrap();
            let l_hat = fit.hyper.lengthscales[0];
            if l_hat > truth / 2.0 && l_hat < truth * 2.0 {
                hits += 1;
            }
        }
        assert!(hits >= 4, "recovered in only {hits}/5 draws");
    }
}
