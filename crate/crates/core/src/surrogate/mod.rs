//! Reduced-order flow evaluator: a multi-channel 1D advection–dispersion model
//! driven by geometric features of the lofted reactor.
//!
//! The constants below are surrogate-only; they are not fitted to CFD.

mod dispersion;
mod features;
mod solver;

use serde::{Deserialize, Serialize};

use crate::evaluator::{EvaluationError, Evaluator, FidelityVector, Parameterisation, SimulationResult};
use crate::geometry::{NominalCoil, ReactorGeometry, Tessellation};

pub use dispersion::{base_dispersion, dispersion_profile, mixing_modifier, DispersionProfile};
pub use features::{extract_features, features_from, GeometryFeatures};
pub use solver::{simulate_rtd, velocity_factors};

/// Surrogate constants (mm, s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub reynolds: f64,
    /// Kinematic viscosity (mm²/s).
    pub kinematic_viscosity: f64,
    /// Molecular diffusivity of the tracer (mm²/s).
    pub molecular_diffusivity: f64,
    /// Effective diffusivity in the Taylor term `u²R²/(48 D)` (mm²/s).
    pub taylor_diffusivity: f64,
    pub g_min: f64,
    pub dean_coefficient: f64,
    pub pinch_coefficient: f64,
    /// Velocity spread across sub-channels.
    pub shear_fraction: f64,
    /// Transverse mixing rate across the whole section at `g = 1` (1/s).
    /// Adjacent sub-channels exchange at `K²` times this.
    pub exchange_rate: f64,
    pub base_cells_per_turn: usize,
    /// Simulated seconds per cell·channel² at nominal length.
    pub cost_coefficient: f64,
    pub courant: f64,
    /// Stop once the post-peak outlet falls below this fraction of the peak...
    pub termination_fraction: f64,
    /// ...and at most this fraction of the tracer is still inside.
    pub residual_mass: f64,
    /// Noise standard deviation at the lowest fidelity, relative to the peak.
    pub noise_fraction: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            reynolds: 50.0,
            kinematic_viscosity: 1.0,
            molecular_diffusivity: 1e-3,
            taylor_diffusivity: 0.4,
            g_min: 0.2,
            dean_coefficient: 0.05,
            pinch_coefficient: 1.0,
            shear_fraction: 0.5,
            exchange_rate: 0.5 / 16.0,
            base_cells_per_turn: 50,
            cost_coefficient: 10.0 / 6400.0,
            courant: 0.9,
            termination_fraction: 0.01,
            residual_mass: 0.0025,
            noise_fraction: 0.02,
        }
    }
}

impl SurrogateConfig {
    /// Mean inlet velocity from the Reynolds number and the end radius.
    pub fn mean_velocity(&self, tube_radius: f64) -> f64 {
        self.reynolds * self.kinematic_viscosity / (2.0 * tube_radius)
    }

    /// Volumetric flow rate (mm³/s).
    pub fn flow_rate(&self, tube_radius: f64) -> f64 {
        self.mean_velocity(tube_radius) * std::f64::consts::PI * tube_radius * tube_radius
    }

    pub fn base_cells(&self, nominal: &NominalCoil) -> usize {
        self.base_cells_per_turn * nominal.turns as usize
    }
}

/// Predicted compute seconds `c₀·(base_cells·axial)·radial²·(L/L_nominal)`.
pub fn cost_model(config: &SurrogateConfig, nominal: &NominalCoil, z: FidelityVector, path_length: f64) -> f64 {
    config.cost_coefficient
        * (config.base_cells(nominal) as f64 * z.axial)
        * z.radial
        * z.radial
        * (path_length / nominal.helix_length())
}

/// The built-in evaluator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurrogateEvaluator {
    pub config: SurrogateConfig,
    pub tessellation: Tessellation,
}

impl SurrogateEvaluator {
    /// Runs the surrogate on an already built geometry at a rounded fidelity.
    pub fn simulate(
        &self,
        geometry: &ReactorGeometry,
        nominal: &NominalCoil,
        z: FidelityVector,
        seed: u64,
    ) -> Result<SimulationResult, EvaluationError> {
        let cells = self.config.base_cells(nominal) * z.axial as usize;
        let feats = extract_features(geometry, cells, self.config.reynolds)?;
        let flow = self.config.flow_rate(nominal.tube_radius);
        let disp = dispersion_profile(&feats, flow, &self.config);
        let mut result = simulate_rtd(&feats, &disp, z, seed, flow, &self.config)?;
        result.cost = cost_model(&self.config, nominal, z, geometry.length());
        Ok(result)
    }
}

impl Evaluator for SurrogateEvaluator {
    fn evaluate(
        &self,
        space: &Parameterisation,
        x: &[f64],
        z: &FidelityVector,
        seed: u64,
    ) -> Result<SimulationResult, EvaluationError> {
        space.validate()?;
        let bounds = self.fidelity_bounds();
        z.check(&bounds)?;
        let Some(nominal) = space.nominal() else {
            return Err(EvaluationError::InvalidInput(
                "the surrogate needs a reactor parameterisation".into(),
            ));
        };
        let geometry = space.geometry(x, &self.tessellation)?;
        self.simulate(&geometry, nominal, z.rounded(&bounds), seed)
    }

    fn name(&self) -> String {
        "surrogate".into()
    }
}
