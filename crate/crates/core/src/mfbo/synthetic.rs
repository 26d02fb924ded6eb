use serde::{Deserialize, Serialize};

use crate::evaluator::{
    EvaluationError, Evaluator, FidelityVector, OutletSeries, Parameterisation, SimulationResult, FIDELITY_BOUNDS,
};
use crate::optim::rng_from_seed;
use crate::rtd::tanks_model;

/// Synthetic evaluator for `Box` spaces whose tracer response is an exact
/// tanks-in-series curve.
///
/// `N = n_min + (n_max − n_min)·Σ wᵢuᵢ² / Σ wᵢ` with `u` the design mapped to
/// the unit box, so dimensions with zero weight are inert. Lower fidelities
/// shrink `N` and add noise; cost is `c·axial·radial²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TanksEvaluator {
    pub weights: Vec<f64>,
    pub n_min: f64,
    pub n_max: f64,
    /// Relative shrink of `N` at the lowest fidelity.
    pub fidelity_bias: f64,
    /// Noise deviation at the lowest fidelity, relative to the peak.
    pub noise_fraction: f64,
    pub cost_coefficient: f64,
}

impl TanksEvaluator {
    pub fn new(weights: Vec<f64>) -> Self {
        Self {
            weights,
            n_min: 5.0,
            n_max: 50.0,
            fidelity_bias: 0.1,
            noise_fraction: 0.02,
            cost_coefficient: 0.1,
        }
    }

    pub fn tanks(&self, bounds: &[(f64, f64)], x: &[f64]) -> f64 {
        let total: f64 = self.weights.iter().sum();
        let s: f64 = x
            .iter()
            .zip(bounds)
            .zip(&self.weights)
            .map(|((&v, &(lo, hi)), w)| {
                let u = (v - lo) / (hi - lo);
                w * u * u
            })
            .sum();
        self.n_min + (self.n_max - self.n_min) * s / total
    }
}

impl Evaluator for TanksEvaluator {
    fn evaluate(
        &self,
        space: &Parameterisation,
        x: &[f64],
        z: &FidelityVector,
        seed: u64,
    ) -> Result<SimulationResult, EvaluationError> {
        use rand_distr::{Distribution, Normal};
        space.validate()?;
        space.check(x)?;
        if x.len() != self.weights.len() {
            return Err(EvaluationError::InvalidInput("one weight per dimension required".into()));
        }
        let bounds = self.fidelity_bounds();
        z.check(&bounds)?;
        let z = z.rounded(&bounds);
        let [a, r] = z.normalized(&bounds);
        let coarse = 1.0 - 0.5 * (a + r);
        let n = self.tanks(&space.bounds(), x) * (1.0 - self.fidelity_bias * coarse);
        let time: Vec<f64> = (0..400).map(|i| 4.0 * i as f64 / 399.0).collect();
        let mut concentration: Vec<f64> = time.iter().map(|&t| tanks_model(n, t)).collect();
        let peak = concentration.iter().copied().fold(0.0, f64::max);
        let sigma = self.noise_fraction * peak * coarse;
        if sigma > 0.0 {
            let mut rng = rng_from_seed(seed);
            let normal = Normal::new(0.0, sigma).expect("positive deviation");
            for c in concentration.iter_mut() {
                *c = (*c + normal.sample(&mut rng)).max(0.0);
            }
        }
        Ok(SimulationResult {
            outlet_series: OutletSeries { time, concentration },
            cost: self.cost_coefficient * z.axial * z.radial * z.radial,
            fidelity_used: z,
            seed,
        })
    }

    fn fidelity_bounds(&self) -> [(f64, f64); 2] {
        FIDELITY_BOUNDS
    }

    fn name(&self) -> String {
        "synthetic-tanks".into()
    }
}
