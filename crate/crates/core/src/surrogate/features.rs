use serde::{Deserialize, Serialize};

use crate::evaluator::EvaluationError;
use crate::geometry::{Centerline, ReactorGeometry, StationProfile};

/// Per-cell geometric inputs to the flow model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryFeatures {
    /// Axial cell length (mm).
    pub cell_length: f64,
    /// Cross-sectional area (mm²).
    pub area: Vec<f64>,
    /// `2A/P`, equal to the radius for a circle (mm).
    pub hydraulic_radius: Vec<f64>,
    /// Centreline curvature (1/mm).
    pub curvature: Vec<f64>,
    /// Smallest over largest ring radius.
    pub pinch: Vec<f64>,
    /// `Re·sqrt(R_h·κ)`.
    pub dean: Vec<f64>,
}

impl GeometryFeatures {
    pub fn cells(&self) -> usize {
        self.area.len()
    }

    pub fn length(&self) -> f64 {
        self.cell_length * self.cells() as f64
    }
}

/// Samples the radius profile and centreline at `n_cells` cell centres.
pub fn features_from(
    profile: &StationProfile,
    centerline: &Centerline,
    n_cells: usize,
    reynolds: f64,
) -> Result<GeometryFeatures, EvaluationError> {
    if n_cells == 0 {
        return Err(EvaluationError::InvalidInput("need at least one cell".into()));
    }
    let length = centerline.length();
    let kappa = centerline.curvature();
    let m = profile.resolution();
    let dtheta = std::f64::consts::TAU / m as f64;
    let cos_step = dtheta.cos();
    let mut f = GeometryFeatures {
        cell_length: length / n_cells as f64,
        area: Vec::with_capacity(n_cells),
        hydraulic_radius: Vec::with_capacity(n_cells),
        curvature: Vec::with_capacity(n_cells),
        pinch: Vec::with_capacity(n_cells),
        dean: Vec::with_capacity(n_cells),
    };
    for i in 0..n_cells {
        let s = (i as f64 + 0.5) * length / n_cells as f64;
        let ring = profile.ring(s * profile.length() / length);
        let (lo, hi) = ring
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
        if !(lo > 0.0) {
            return Err(EvaluationError::Geometry(crate::geometry::GeometryError::DegenerateCrossSection {
                angle: 0.0,
                radius: lo,
            }));
        }
        let area = 0.5 * dtheta * ring.iter().map(|r| r * r).sum::<f64>();
        let perimeter: f64 = (0..m)
            .map(|k| {
                let (a, b) = (ring[k], ring[(k + 1) % m]);
                (a * a + b * b - 2.0 * a * b * cos_step).max(0.0).sqrt()
            })
            .sum();
        let rh = 2.0 * area / perimeter;
        let k = centerline.interpolate(&kappa, s);
        f.area.push(area);
        f.hydraulic_radius.push(rh);
        f.curvature.push(k);
        f.pinch.push(lo / hi);
        f.dean.push(reynolds * (rh * k).sqrt());
    }
    Ok(f)
}

/// [`features_from`] on a built reactor.
pub fn extract_features(
    geometry: &ReactorGeometry,
    n_cells: usize,
    reynolds: f64,
) -> Result<GeometryFeatures, EvaluationError> {
    features_from(&geometry.profile, &geometry.centerline, n_cells, reynolds)
}
