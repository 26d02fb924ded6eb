use serde::{Deserialize, Serialize};

use super::{GeometryFeatures, SurrogateConfig};

/// Per-cell axial dispersion and the secondary-flow modifier behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionProfile {
    /// Effective axial dispersion `D_base·g` (mm²/s).
    pub coefficient: Vec<f64>,
    /// `g ∈ [g_min, 1]`.
    pub modifier: Vec<f64>,
}

/// `g = g_min + (1 − g_min)·exp(−a·De − b·(1 − pinch))`.
pub fn mixing_modifier(dean: f64, pinch: f64, config: &SurrogateConfig) -> f64 {
    let decay = (-config.dean_coefficient * dean.max(0.0) - config.pinch_coefficient * (1.0 - pinch).max(0.0)).exp();
    config.g_min + (1.0 - config.g_min) * decay
}

/// Taylor–Aris dispersion `D_m + u²R²/(48·D_t)` with `u = Q/A`, `R = sqrt(A/π)`.
pub fn base_dispersion(area: f64, flow_rate: f64, config: &SurrogateConfig) -> f64 {
    let u = flow_rate / area;
    let r2 = area / std::f64::consts::PI;
    config.molecular_diffusivity + u * u * r2 / (48.0 * config.taylor_diffusivity)
}

pub fn dispersion_profile(features: &GeometryFeatures, flow_rate: f64, config: &SurrogateConfig) -> DispersionProfile {
    let modifier: Vec<f64> = features
        .dean
        .iter()
        .zip(&features.pinch)
        .map(|(&de, &p)| mixing_modifier(de, p, config))
        .collect();
    let coefficient = features
        .area
        .iter()
        .zip(&modifier)
        .map(|(&a, &g)| base_dispersion(a, flow_rate, config) * g)
        .collect();
    DispersionProfile { coefficient, modifier }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neutral_geometry_keeps_base_dispersion() {
        let c = SurrogateConfig::default();
        assert_eq!(mixing_modifier(0.0, 1.0, &c), 1.0);
    }

    #[test]
    fn modifier_is_bounded_and_decreasing() {
        let c = SurrogateConfig::default();
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let g = mixing_modifier(i as f64 * 4.0, 0.8, &c);
            assert!(g < prev && g >= c.g_min && g <= 1.0);
            prev = g;
        }
        assert!(mixing_modifier(10.0, 0.5, &c) < mixing_modifier(10.0, 0.6, &c));
        assert!(mixing_modifier(2.0 * 17.0, 0.7, &c) <= mixing_modifier(17.0, 0.7, &c));
    }
}
