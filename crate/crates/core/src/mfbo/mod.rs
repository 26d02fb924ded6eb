//! Multi-fidelity Bayesian optimisation over a joint design × fidelity box.
//!
//! Objective and cost are each modelled by a GP over `(x, z)`. The next point
//! maximises an optimistic bound on the objective at the highest fidelity,
//! divided by the predicted cost and by how decorrelated the candidate
//! fidelity is from the highest one. Campaigns stop once the remaining budget
//! no longer covers `p_c` top-fidelity runs and always finish with an actual
//! top-fidelity evaluation.

mod acquisition;
mod campaign;
mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{EvaluationError, FidelityVector, OutletSeries, Parameterisation, FIDELITY_BOUNDS};
use crate::gp::{FitSettings, HyperParameters};
use crate::rtd::{RtdCurve, DEFAULT_ALPHA};

pub use acquisition::{
    cost_adjusted, maximize_acquisition, posterior_best, should_stop, stop_rule, Acquisition, AcquisitionChoice,
    AcquisitionParts, StopDecision,
};
pub use campaign::{
    advance, doe_sample, evaluate_point, finalize, fit_cost_gp, fit_models, fit_objective_gp, load_checkpoint,
    parse_checkpoint, random_search, run_campaign, run_sequential_joint, save_checkpoint, CampaignModels,
    RandomSearch, RunOptions,
};
pub use synthetic::TanksEvaluator;

/// Version written into every checkpoint.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid design space: {0}")]
    InvalidSpace(String),
    #[error("{failed} of the last {window} evaluations failed; last error: {last}")]
    TooManyFailures { failed: usize, window: usize, last: String },
    #[error("first stage did not complete: {0}")]
    StageIncomplete(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("unsupported schema version {found} (expected {expected})")]
    Schema { found: u32, expected: u32 },
}

/// Decision box `X` and fidelity box `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    pub parameterisation: Parameterisation,
    pub x_bounds: Vec<(f64, f64)>,
    pub z_bounds: [(f64, f64); 2],
    pub labels: Vec<String>,
}

impl DesignSpace {
    pub fn new(parameterisation: Parameterisation) -> Result<Self, CampaignError> {
        Self::with_fidelity(parameterisation, FIDELITY_BOUNDS)
    }

    pub fn with_fidelity(parameterisation: Parameterisation, z_bounds: [(f64, f64); 2]) -> Result<Self, CampaignError> {
        parameterisation
            .validate()
            .map_err(|e| CampaignError::InvalidSpace(e.to_string()))?;
        let space = Self {
            x_bounds: parameterisation.bounds(),
            labels: parameterisation.labels(),
            parameterisation,
            z_bounds,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: String| Err(CampaignError::InvalidSpace(m));
        if self.x_bounds.is_empty() || self.labels.len() != self.x_bounds.len() {
            return bad("need one label per decision dimension".into());
        }
        for (i, &(lo, hi)) in self.x_bounds.iter().chain(&self.z_bounds).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("bound {i} is not a finite interval with low < high"));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for l in self.joint_labels() {
            if !seen.insert(l.clone()) {
                return bad(format!("duplicate label {l}"));
            }
        }
        Ok(())
    }

    pub fn x_dim(&self) -> usize {
        self.x_bounds.len()
    }

    pub fn joint_dim(&self) -> usize {
        self.x_dim() + 2
    }

    /// `X × Z` bounds, fidelities last.
    pub fn joint_bounds(&self) -> Vec<(f64, f64)> {
        let mut b = self.x_bounds.clone();
        b.extend(self.z_bounds);
        b
    }

    pub fn joint_labels(&self) -> Vec<String> {
        let mut l = self.labels.clone();
        l.extend(["axial".to_string(), "radial".to_string()]);
        l
    }

    /// `z_•`, the highest fidelity.
    pub fn top_fidelity(&self) -> FidelityVector {
        FidelityVector::highest(&self.z_bounds)
    }

    pub fn joint_point(x: &[f64], z: FidelityVector) -> Vec<f64> {
        let mut p = x.to_vec();
        p.extend([z.axial, z.radial]);
        p
    }
}

/// Loop parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    /// Exploration weight; the bound uses `sqrt(beta)`.
    pub beta: f64,
    /// Stop once fewer than `p_c` top-fidelity runs fit in the remaining budget.
    pub p_c: f64,
    /// Floor on the fidelity-decorrelation factor.
    pub epsilon_gamma: f64,
    /// A lower fidelity is eligible only where the objective's posterior
    /// deviation is at least this multiple of the fitted noise deviation.
    /// Zero disables the check.
    pub low_fidelity_threshold: f64,
    /// Weight of the shape error in the composite objective.
    pub alpha: f64,
    /// Initial design size; `max(10, dim(X) + 2)` when unset.
    pub doe_size: Option<usize>,
    pub acquisition_starts: usize,
    pub fit: FitSettings,
    /// Abort when more than half of this many most recent evaluations failed.
    pub failure_window: usize,
    /// Cap on model-guided iterations, on top of the budget rule. Bounds the
    /// run time when cheap fidelities dominate.
    pub max_iterations: Option<usize>,
    /// Keep raw solver output in the history.
    pub keep_raw: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            beta: 1.5,
            p_c: 2.0,
            epsilon_gamma: 1e-2,
            low_fidelity_threshold: 1.0,
            alpha: DEFAULT_ALPHA,
            doe_size: None,
            acquisition_starts: 32,
            fit: FitSettings {
                restarts: 2,
                max_iterations: 40,
                ..FitSettings::default()
            },
            failure_window: 10,
            max_iterations: Some(150),
            keep_raw: false,
        }
    }
}

impl CampaignConfig {
    pub fn doe_size_for(&self, space: &DesignSpace) -> usize {
        self.doe_size.unwrap_or_else(|| (space.x_dim() + 2).max(10)).max(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Doe,
    Acquisition,
    Final,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: String,
    pub message: String,
}

/// One evaluator call and what the campaign derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Design-of-experiments points are numbered `−n … −1`, guided ones from 1.
    pub iteration: i64,
    pub phase: Phase,
    pub x: Vec<f64>,
    pub z_rounded: FidelityVector,
    /// `None` when the evaluation failed.
    pub f: Option<f64>,
    pub n_star: Option<f64>,
    pub mse: Option<f64>,
    /// Simulated seconds; zero for failures.
    pub cost: f64,
    /// Normalised curve at the resampled resolution.
    pub rtd: Option<RtdCurve<f64>>,
    /// FNV-1a hash of the stored curve.
    pub rtd_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<OutletSeries>,
    pub seed: u64,
    /// Simulated clock: budget spent once this evaluation finished.
    pub wall_clock_stamp: f64,
    pub failure: Option<Failure>,
}

impl Evaluation {
    pub fn succeeded(&self) -> bool {
        self.f.is_some()
    }

    pub fn joint_point(&self) -> Vec<f64> {
        DesignSpace::joint_point(&self.x, self.z_rounded)
    }
}

/// Hyper-parameters fitted at one guided iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSnapshot {
    pub iteration: usize,
    pub n_data: usize,
    pub objective: HyperParameters<f64>,
    pub cost: HyperParameters<f64>,
    pub objective_lml: f64,
    pub cost_lml: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CampaignStatus {
    Running,
    Complete,
    /// Finished without any successful top-fidelity evaluation.
    Incomplete,
    Aborted,
}

/// Everything needed to resume or analyse a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignState {
    pub schema_version: u32,
    /// `cross-section`, `coil-path`, `box`, or `joint-sequential` for the
    /// second stage of a sequential campaign.
    pub parameterisation: String,
    pub space: DesignSpace,
    pub config: CampaignConfig,
    pub rng_seed: u64,
    pub budget_total: f64,
    pub budget_spent: f64,
    pub history: Vec<Evaluation>,
    pub gp_snapshots: Vec<GpSnapshot>,
    /// Index into `history` of the best successful top-fidelity evaluation.
    pub incumbent: Option<usize>,
    pub status: CampaignStatus,
    /// Set when the final evaluation pushed spending past the budget.
    pub budget_exceeded: bool,
    pub warnings: Vec<String>,
    /// First stage of a sequential campaign.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous_stage: Option<Box<CampaignState>>,
}

impl CampaignState {
    pub fn new(space: DesignSpace, config: CampaignConfig, budget: f64, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            parameterisation: space.parameterisation.id().to_string(),
            space,
            config,
            rng_seed: seed,
            budget_total: budget,
            budget_spent: 0.0,
            history: Vec::new(),
            gp_snapshots: Vec::new(),
            incumbent: None,
            status: CampaignStatus::Running,
            budget_exceeded: false,
            warnings: Vec::new(),
            previous_stage: None,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.status != CampaignStatus::Running
    }

    pub fn remaining_budget(&self) -> f64 {
        self.budget_total - self.budget_spent
    }

    pub fn incumbent_evaluation(&self) -> Option<&Evaluation> {
        self.incumbent.map(|i| &self.history[i])
    }

    pub fn successful(&self) -> impl Iterator<Item = &Evaluation> {
        self.history.iter().filter(|e| e.succeeded())
    }

    /// Running minimum of `f` over top-fidelity evaluations, one entry per
    /// evaluation (`None` until the first one).
    pub fn best_so_far(&self) -> Vec<Option<f64>> {
        let top = self.space.top_fidelity();
        let mut best: Option<f64> = None;
        self.history
            .iter()
            .map(|e| {
                if let (Some(f), true) = (e.f, e.z_rounded == top) {
                    best = Some(best.map_or(f, |b: f64| b.min(f)));
                }
                best
            })
            .collect()
    }

    /// Per-evaluation trace as CSV:
    /// `index,iteration,phase,axial,radial,cost,f,best_so_far`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("index,iteration,phase,axial,radial,cost,f,best_so_far\n");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for (i, (e, b)) in self.history.iter().zip(self.best_so_far()).enumerate() {
            let phase = serde_json::to_value(e.phase).ok().and_then(|v| v.as_str().map(String::from));
            out.push_str(&format!(
                "{i},{},{},{},{},{},{},{}\n",
                e.iteration,
                phase.unwrap_or_default(),
                e.z_rounded.axial,
                e.z_rounded.radial,
                e.cost,
                opt(e.f),
                opt(b)
            ));
        }
        out
    }

    pub(crate) fn recompute_spent(&mut self) {
        self.budget_spent = self.history.iter().map(|e| e.cost).sum();
    }

    pub(crate) fn update_incumbent(&mut self) {
        let top = self.space.top_fidelity();
        self.incumbent = self
            .history
            .iter()
            .enumerate()
            .filter(|(_, e)| e.z_rounded == top)
            .filter_map(|(i, e)| e.f.map(|f| (i, f)))
            .fold(None, |best: Option<(usize, f64)>, (i, f)| match best {
                Some((_, bf)) if bf <= f => best,
                _ => Some((i, f)),
            })
            .map(|(i, _)| i);
    }
}

impl From<EvaluationError> for Failure {
    fn from(e: EvaluationError) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}
