use serde::{Deserialize, Serialize};

use crate::evaluator::FidelityVector;
use crate::gp::FittedGp;
use crate::optim::{latin_hypercube, pattern_search_max, rng_from_seed, scale_to_box};

use super::{CampaignModels, CampaignState, DesignSpace};

/// Smallest optimistic gain, relative to the objective's target scale.
const MIN_GAIN: f64 = 1e-9;

/// `gain / (cost · max(ε_γ, sqrt(1 − k²)))`.
pub fn cost_adjusted(gain: f64, cost: f64, correlation: f64, epsilon_gamma: f64) -> f64 {
    let k = correlation.clamp(-1.0, 1.0);
    gain / (cost * epsilon_gamma.max((1.0 - k * k).sqrt()))
}

/// Terms of one acquisition evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionParts {
    /// Posterior mean and deviation of `−f` at `(x, z_•)`.
    pub mean: f64,
    pub std: f64,
    /// `mean + sqrt(β)·std`.
    pub bound: f64,
    /// `bound − floor`, kept positive.
    pub gain: f64,
    /// Predicted cost at `(x, z)`.
    pub cost: f64,
    /// Objective-kernel correlation between `(x, z)` and `(x, z_•)`.
    pub correlation: f64,
    pub value: f64,
}

/// Cost-adjusted acquisition over `(x, z)`.
///
/// Sign convention: campaigns minimise `f`, while both GPs and this score work
/// with `y = −f`, so the optimistic bound is the upper bound on `y` at the
/// highest fidelity. The bound is measured from `floor` (the worst observed
/// `y`) so that dividing by cost always prefers cheaper points.
pub struct Acquisition<'a> {
    pub objective: &'a FittedGp<f64>,
    /// Model of log cost.
    pub cost: &'a FittedGp<f64>,
    pub beta: f64,
    pub epsilon_gamma: f64,
    pub top: FidelityVector,
    pub floor: f64,
    /// Lower fidelities whose posterior deviation at `(x, z)` falls below this
    /// are ineligible.
    pub min_std: f64,
    /// Fidelity box, for rounding candidates.
    pub z_bounds: [(f64, f64); 2],
}

impl<'a> Acquisition<'a> {
    pub fn new(models: &'a CampaignModels, state: &CampaignState) -> Self {
        let floor = state
            .successful()
            .filter_map(|e| e.f)
            .map(|f| -f)
            .fold(f64::INFINITY, f64::min);
        Self {
            objective: &models.objective,
            cost: &models.cost,
            beta: state.config.beta,
            epsilon_gamma: state.config.epsilon_gamma,
            top: state.space.top_fidelity(),
            floor: if floor.is_finite() { floor } else { models.objective.prior_mean() },
            min_std: state.config.low_fidelity_threshold
                * models.objective.hyper.noise_variance.sqrt()
                * models.objective.target_scale,
            z_bounds: state.space.z_bounds,
        }
    }

    /// The top fidelity is always eligible. A lower one is eligible only while
    /// the model is still unsure about it at `x`, so cheap runs stop repeating
    /// once they can no longer tell the model anything.
    pub fn eligible(&self, x: &[f64], z: FidelityVector) -> bool {
        z.rounded(&self.z_bounds) == self.top
            || self.objective.predict(&DesignSpace::joint_point(x, z)).1 >= self.min_std
    }

    pub fn predicted_cost(&self, x: &[f64], z: FidelityVector) -> f64 {
        self.cost.mean(&DesignSpace::joint_point(x, z)).exp()
    }

    pub fn parts(&self, x: &[f64], z: FidelityVector) -> AcquisitionParts {
        let at_top = DesignSpace::joint_point(x, self.top);
        let here = DesignSpace::joint_point(x, z);
        let (mean, std) = self.objective.predict(&at_top);
        let bound = mean + self.beta.sqrt() * std;
        let gain = (bound - self.floor).max(MIN_GAIN * self.objective.target_scale);
        let cost = self.predicted_cost(x, z);
        let correlation = self.objective.correlation(&here, &at_top);
        AcquisitionParts {
            mean,
            std,
            bound,
            gain,
            cost,
            correlation,
            value: cost_adjusted(gain, cost, correlation, self.epsilon_gamma),
        }
    }

    pub fn value(&self, x: &[f64], z: FidelityVector) -> f64 {
        self.parts(x, z).value
    }
}

/// Result of [`maximize_acquisition`].
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionChoice {
    pub x: Vec<f64>,
    /// Continuous; the evaluator rounds it.
    pub z: FidelityVector,
    pub value: f64,
    /// Acquisition at each multi-start point before polishing.
    pub start_values: Vec<f64>,
    /// No start produced a finite value; `x`, `z` is the first start.
    pub fallback: bool,
}

fn split(space: &DesignSpace, unit: &[f64]) -> (Vec<f64>, FidelityVector) {
    let mut p = scale_to_box(unit, &space.joint_bounds());
    let z = FidelityVector::new(p[space.x_dim()], p[space.x_dim() + 1]);
    p.truncate(space.x_dim());
    (p, z)
}

fn score(acq: &Acquisition, space: &DesignSpace, unit: &[f64]) -> f64 {
    let (x, z) = split(space, unit);
    if !acq.eligible(&x, z) {
        return 0.0;
    }
    let v = acq.value(&x, z);
    if v.is_finite() {
        v
    } else {
        f64::NEG_INFINITY
    }
}

/// Multi-start maximisation over the joint box: Latin-hypercube starts, each
/// polished by coordinate-wise pattern search. Ineligible points score zero.
pub fn maximize_acquisition(acq: &Acquisition, space: &DesignSpace, starts: usize, seed: u64) -> AcquisitionChoice {
    let dim = space.joint_dim();
    let mut rng = rng_from_seed(seed);
    let points = latin_hypercube(starts.max(1), dim, &mut rng);
    let start_values: Vec<f64> = points.iter().map(|u| score(acq, space, u)).collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (u, &v) in points.iter().zip(&start_values) {
        if !v.is_finite() {
            continue;
        }
        let (pu, pv) = pattern_search_max(|q| score(acq, space, q), u, v, 0.1, 1e-3, 40 * dim);
        if best.as_ref().is_none_or(|(_, b)| pv > *b) {
            best = Some((pu, pv));
        }
    }
    let fallback = best.is_none();
    if fallback {
        log::warn!("acquisition was non-finite at every start; using the first start");
    }
    let (u, value) = best.unwrap_or_else(|| (points[0].clone(), start_values[0]));
    let (x, z) = split(space, &u);
    AcquisitionChoice {
        x,
        z,
        value,
        start_values,
        fallback,
    }
}

/// Maximiser of the posterior mean of `−f` over `X` at `z_•`.
///
/// `seeds` are extra raw starting points, typically evaluated designs.
pub fn posterior_best(
    objective: &FittedGp<f64>,
    space: &DesignSpace,
    seeds: &[Vec<f64>],
    seed: u64,
) -> (Vec<f64>, f64) {
    let top = space.top_fidelity();
    let dim = space.x_dim();
    let mean = |u: &[f64]| objective.mean(&DesignSpace::joint_point(&scale_to_box(u, &space.x_bounds), top));
    let mut rng = rng_from_seed(seed);
    let mut starts = latin_hypercube(16, dim, &mut rng);
    starts.extend(seeds.iter().map(|x| {
        x.iter()
            .zip(&space.x_bounds)
            .map(|(&v, &(lo, hi))| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect()
    }));
    let mut scored: Vec<(Vec<f64>, f64)> = starts.into_iter().map(|u| (u.clone(), mean(&u))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut best = scored[0].clone();
    for (u, v) in scored.into_iter().take(4) {
        let (pu, pv) = pattern_search_max(mean, &u, v, 0.1, 1e-4, 60 * dim);
        if pv > best.1 {
            best = (pu, pv);
        }
    }
    (scale_to_box(&best.0, &space.x_bounds), best.1)
}

/// `remaining < p_c · predicted`: stop when the budget no longer holds `p_c`
/// top-fidelity runs.
pub fn stop_rule(remaining: f64, predicted_top_cost: f64, p_c: f64) -> bool {
    remaining < p_c * predicted_top_cost
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopDecision {
    pub stop: bool,
    pub remaining: f64,
    /// Predicted cost of one top-fidelity run at `best_x`.
    pub predicted_top_cost: f64,
    /// Posterior-mean best design at `z_•`.
    pub best_x: Vec<f64>,
    pub best_mean: f64,
}

pub fn should_stop(state: &CampaignState, models: &CampaignModels, seed: u64) -> StopDecision {
    let evaluated: Vec<Vec<f64>> = state.successful().map(|e| e.x.clone()).collect();
    let (best_x, best_mean) = posterior_best(&models.objective, &state.space, &evaluated, seed);
    let top = state.space.top_fidelity();
    let predicted_top_cost = models.cost.mean(&DesignSpace::joint_point(&best_x, top)).exp();
    let remaining = state.remaining_budget();
    StopDecision {
        stop: stop_rule(remaining, predicted_top_cost, state.config.p_c),
        remaining,
        predicted_top_cost,
        best_x,
        best_mean,
    }
}
