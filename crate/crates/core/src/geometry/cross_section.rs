use std::f64::consts::TAU;

use crate::gp::{GpModel, KernelSpec, POLAR_TAU_MIN};

use super::{GeometryError, Result};

/// Posterior radii at or below this value are rejected (mm).
pub const MIN_RADIUS: f64 = 0.1;

/// Closed polar curve sampled at `2πk/resolution`, `k = 0 … resolution − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSectionCurve {
    pub angles: Vec<f64>,
    pub radii: Vec<f64>,
}

impl CrossSectionCurve {
    pub fn circle(radius: f64, resolution: usize) -> Self {
        Self {
            angles: sample_angles(resolution),
            radii: vec![radius; resolution],
        }
    }

    pub fn resolution(&self) -> usize {
        self.radii.len()
    }

    /// Polygon area `½ Σ rₖ rₖ₊₁ sin Δθ`.
    pub fn area(&self) -> f64 {
        let n = self.radii.len();
        let s = (TAU / n as f64).sin();
        (0..n).map(|k| 0.5 * self.radii[k] * self.radii[(k + 1) % n] * s).sum()
    }
}

fn sample_angles(resolution: usize) -> Vec<f64> {
    (0..resolution).map(|k| TAU * k as f64 / resolution as f64).collect()
}

/// Noiseless polar-kernel GP through `(2πi/n, rᵢ)` evaluated on a uniform
/// angular grid.
pub fn interpolate_cross_section(radii_row: &[f64], resolution: usize) -> Result<CrossSectionCurve> {
    if resolution < 16 {
        return Err(GeometryError::InvalidSettings("cross-section resolution must be at least 16".into()));
    }
    if radii_row.is_empty() || radii_row.iter().any(|r| !r.is_finite()) {
        return Err(GeometryError::InvalidSettings("cross-section radii must be finite".into()));
    }
    let n = radii_row.len();
    let inputs = (0..n).map(|i| vec![TAU * i as f64 / n as f64]).collect();
    let gp = GpModel::with_mean_prior(KernelSpec::polar(POLAR_TAU_MIN), inputs, radii_row.to_vec(), 0.0)?;
    let angles = sample_angles(resolution);
    let mut radii = Vec::with_capacity(resolution);
    for &a in &angles {
        let r = gp.mean_at(&[a]);
        if !(r > MIN_RADIUS) {
            return Err(GeometryError::DegenerateCrossSection { angle: a, radius: r });
        }
        radii.push(r);
    }
    Ok(CrossSectionCurve { angles, radii })
}
