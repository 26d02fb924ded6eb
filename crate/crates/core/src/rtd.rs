//! Residence-time distributions, the tanks-in-series model and the composite
//! design objective `f = α·MSE − N*`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::golden_section;
use crate::scalar::Real;

/// Number of uniform θ samples every normalised curve is resampled to.
pub const RESAMPLE_POINTS: usize = 100;
/// Weight on the mean squared residual.
pub const DEFAULT_ALPHA: f64 = 100.0;
/// Search interval for the equivalent number of tanks.
pub const TANKS_BOUNDS: (f64, f64) = (1.0, 600.0);
const GRID_POINTS: usize = 50;
const REFINE_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RtdError {
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("time and concentration series differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },
    #[error("sample {index}: time must be finite, non-negative and strictly increasing")]
    BadTime { index: usize },
    #[error("sample {index}: concentration must be finite and non-negative")]
    BadConcentration { index: usize },
    #[error("trace has zero total area")]
    EmptyTrace,
}

/// Dimensionless residence-time distribution `E(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct RtdCurve<T> {
    pub theta: Vec<T>,
    pub e: Vec<T>,
}

impl<T: Real> RtdCurve<T> {
    /// Checks ordering and sign invariants.
    pub fn new(theta: Vec<T>, e: Vec<T>) -> Result<Self, RtdError> {
        if theta.len() != e.len() {
            return Err(RtdError::LengthMismatch {
                times: theta.len(),
                values: e.len(),
            });
        }
        if theta.len() < 2 {
            return Err(RtdError::TooFewSamples {
                needed: 2,
                found: theta.len(),
            });
        }
        check_series(&theta, &e)?;
        Ok(Self { theta, e })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Trapezoidal `∫E dθ` and `∫θE dθ`.
    pub fn moments(&self) -> (T, T) {
        let first: Vec<T> = self.theta.iter().zip(&self.e).map(|(&t, &e)| t * e).collect();
        (trapezoid(&self.theta, &self.e), trapezoid(&self.theta, &first))
    }
}

fn check_series<T: Real>(t: &[T], c: &[T]) -> Result<(), RtdError> {
    for (i, &ti) in t.iter().enumerate() {
        let increasing = i == 0 || ti > t[i - 1];
        if !ti.is_finite() || ti < T::zero() || !increasing {
            return Err(RtdError::BadTime { index: i });
        }
    }
    if let Some(i) = c.iter().position(|&v| !v.is_finite() || v < T::zero()) {
        return Err(RtdError::BadConcentration { index: i });
    }
    Ok(())
}

/// Trapezoidal integral of `y` over the abscissae `x`.
pub fn trapezoid<T: Real>(x: &[T], y: &[T]) -> T {
    let half = T::lit(0.5);
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| half * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

fn interp<T: Real>(x: &[T], y: &[T], q: T) -> T {
    if q < x[0] || q > x[x.len() - 1] {
        return T::zero();
    }
    let idx = x.partition_point(|&v| v <= q);
    if idx == 0 {
        return y[0];
    }
    if idx >= x.len() {
        return y[y.len() - 1];
    }
    let (x0, x1) = (x[idx - 1], x[idx]);
    let w = (q - x0) / (x1 - x0);
    y[idx - 1] + w * (y[idx] - y[idx - 1])
}

/// Converts a raw outlet trace `(t, C(t))` into `E(θ)`.
///
/// `t̄ = ∫tC dt / ∫C dt`, `θ = t/t̄`, `E = C·t̄/∫C dt`, resampled by linear
/// interpolation to [`RESAMPLE_POINTS`] uniform points on `[0, θ_last]`. Points
/// before the first sample read zero. The result is then rescaled to unit
/// trapezoidal area and mean on its own grid.
pub fn normalize_rtd<T: Real>(times: &[T], conc: &[T]) -> Result<RtdCurve<T>, RtdError> {
    if times.len() != conc.len() {
        return Err(RtdError::LengthMismatch {
            times: times.len(),
            values: conc.len(),
        });
    }
    if times.len() < 8 {
        return Err(RtdError::TooFewSamples {
            needed: 8,
            found: times.len(),
        });
    }
    check_series(times, conc)?;
    let area = trapezoid(times, conc);
    if !(area > T::zero()) {
        return Err(RtdError::EmptyTrace);
    }
    let tc: Vec<T> = times.iter().zip(conc).map(|(&t, &c)| t * c).collect();
    let t_mean = trapezoid(times, &tc) / area;
    if !(t_mean > T::zero()) {
        return Err(RtdError::EmptyTrace);
    }
    let theta: Vec<T> = times.iter().map(|&t| t / t_mean).collect();
    let e: Vec<T> = conc.iter().map(|&c| c * t_mean / area).collect();
    let last = theta[theta.len() - 1];
    let d = RESAMPLE_POINTS;
    // the last node is pinned so rounding cannot push it past the data
    let grid: Vec<T> = (0..d)
        .map(|k| if k == d - 1 { last } else { last * T::from_usize_lossy(k) / T::from_usize_lossy(d - 1) })
        .collect();
    let values = grid.iter().map(|&q| interp(&theta, &e, q)).collect();
    // Rescale so the resampled curve itself has unit moments. This makes a
    // second pass over an already normalised curve a no-op.
    let curve = RtdCurve { theta: grid, e: values };
    let (area, first) = curve.moments();
    let mean = first / area;
    if !(area > T::zero() && mean > T::zero()) {
        return Err(RtdError::EmptyTrace);
    }
    Ok(RtdCurve {
        theta: curve.theta.iter().map(|&t| t / mean).collect(),
        e: curve.e.iter().map(|&v| v * mean / area).collect(),
    })
}

/// Lanczos coefficients (g = 7, n = 9).
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`. Integer arguments up to 171 use the exact factorial.
pub fn ln_gamma<T: Real>(x: T) -> T {
    if x == x.floor() && x >= T::one() && x <= T::lit(171.0) {
        let n = x.to_usize().unwrap_or(1);
        let mut fact = T::one();
        for k in 2..n {
            fact *= T::from_usize_lossy(k);
        }
        return fact.ln();
    }
    if x < T::lit(0.5) {
        // reflection
        let pi = T::PI();
        return (pi / (pi * x).sin().abs()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let g = T::lit(7.0);
    let mut a = T::lit(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += T::lit(c) / (x + T::from_usize_lossy(i));
    }
    let t = x + g + T::lit(0.5);
    T::lit(0.5) * T::TAU().ln() + (x + T::lit(0.5)) * t.ln() - t + a.ln()
}

/// Tanks-in-series response `N(Nθ)^{N−1} e^{−Nθ} / Γ(N)`, evaluated in log space.
pub fn tanks_model<T: Real>(n: T, theta: T) -> T {
    if theta <= T::zero() {
        return if n == T::one() { T::one() } else { T::zero() };
    }
    let nt = n * theta;
    (n.ln() + (n - T::one()) * nt.ln() - nt - ln_gamma(n)).exp()
}

/// Mean squared residual between a curve and the tanks model with `n` tanks.
pub fn tanks_mse<T: Real>(curve: &RtdCurve<T>, n: T) -> T {
    let d = T::from_usize_lossy(curve.len());
    curve
        .theta
        .iter()
        .zip(&curve.e)
        .map(|(&t, &e)| {
            let r = e - tanks_model(n, t);
            r * r
        })
        .sum::<T>()
        / d
}

/// Least-squares estimate of the equivalent number of tanks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TanksEstimate<T> {
    pub n_star: T,
    pub mse: T,
    /// The residual was flat across the search grid; `n_star` is pinned to 1.
    pub ill_posed: bool,
}

/// Fits `N*` by a log-spaced scan over `[1, 600]` followed by golden-section
/// refinement inside the bracketing grid cells.
pub fn fit_tanks<T: Real>(curve: &RtdCurve<T>) -> TanksEstimate<T> {
    let (lo, hi) = (T::lit(TANKS_BOUNDS.0), T::lit(TANKS_BOUNDS.1));
    let ratio = (hi / lo).ln() / T::from_usize_lossy(GRID_POINTS - 1);
    let grid: Vec<T> = (0..GRID_POINTS)
        .map(|k| (lo.ln() + ratio * T::from_usize_lossy(k)).exp().min(hi))
        .collect();
    let residuals: Vec<T> = grid.iter().map(|&n| tanks_mse(curve, n)).collect();
    let (mut best_k, mut best_r) = (0, residuals[0]);
    for (k, &r) in residuals.iter().enumerate() {
        if r < best_r {
            best_k = k;
            best_r = r;
        }
    }
    let max_r = residuals.iter().copied().fold(T::neg_infinity(), T::max);
    if max_r - best_r < T::lit(1e-12) {
        return TanksEstimate {
            n_star: T::one(),
            mse: tanks_mse(curve, T::one()),
            ill_posed: true,
        };
    }
    let a = grid[best_k.saturating_sub(1)];
    let b = grid[(best_k + 1).min(GRID_POINTS - 1)];
    let (n, r) = golden_section(|n| tanks_mse(curve, n), a, b, T::lit(REFINE_TOL));
    let (n_star, mse) = if r <= best_r { (n, r) } else { (grid[best_k], best_r) };
    TanksEstimate {
        n_star,
        mse,
        ill_posed: false,
    }
}

/// Tanks fit plus the composite objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TanksFit<T> {
    pub n_star: T,
    pub mse: T,
    /// `alpha·mse − n_star`; lower is better.
    pub f: T,
    pub alpha: T,
    pub ill_posed: bool,
}

/// `f = (α/d) Σ (Eᵢ − Ê(N*, θᵢ))² − N*`.
pub fn composite_objective<T: Real>(curve: &RtdCurve<T>, alpha: T) -> TanksFit<T> {
    let est = fit_tanks(curve);
    TanksFit {
        n_star: est.n_star,
        mse: est.mse,
        f: alpha * est.mse - est.n_star,
        alpha,
        ill_posed: est.ill_posed,
    }
}
