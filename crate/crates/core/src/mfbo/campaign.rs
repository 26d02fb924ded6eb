use std::path::{Path, PathBuf};

use crate::evaluator::{Evaluator, FidelityVector, Parameterisation};
use crate::geometry::PathParams;
use crate::gp::{fit_hyperparameters, FittedGp, GpError, HyperParameters, KernelKind};
use crate::optim::{derive_seed, latin_hypercube, rng_from_seed, scale_to_box};
use crate::rtd::{composite_objective, normalize_rtd, RtdCurve};

use super::{
    maximize_acquisition, posterior_best, should_stop, Acquisition, CampaignConfig, CampaignError, CampaignState,
    CampaignStatus, DesignSpace, Evaluation, Failure, GpSnapshot, Phase, SCHEMA_VERSION,
};

// Seed streams.
const DOE_STREAM: u64 = 1;
const SECOND_STAGE_STREAM: u64 = 2;
const BASELINE_STREAM: u64 = 3;
const EVAL_STREAM: u64 = 1 << 20;
const FIT_STREAM: u64 = 2 << 20;
const ACQ_STREAM: u64 = 3 << 20;
const BEST_STREAM: u64 = 4 << 20;

/// Latin-hypercube sample over `X × Z` jointly, deterministic per seed.
pub fn doe_sample(space: &DesignSpace, n: usize, seed: u64) -> Vec<(Vec<f64>, FidelityVector)> {
    let mut rng = rng_from_seed(seed);
    let bounds = space.joint_bounds();
    latin_hypercube(n.max(2), space.joint_dim(), &mut rng)
        .into_iter()
        .map(|u| {
            let mut p = scale_to_box(&u, &bounds);
            let z = FidelityVector::new(p[space.x_dim()], p[space.x_dim() + 1]);
            p.truncate(space.x_dim());
            (p, z)
        })
        .collect()
}

fn digest(curve: &RtdCurve<f64>) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in curve.theta.iter().chain(&curve.e) {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Calls the evaluator and scores the outlet trace.
///
/// The returned record has `iteration`, `phase` and `wall_clock_stamp` unset.
pub fn evaluate_point<E: Evaluator + ?Sized>(
    space: &DesignSpace,
    evaluator: &E,
    x: &[f64],
    z: FidelityVector,
    seed: u64,
    config: &CampaignConfig,
) -> Evaluation {
    let z_rounded = z.rounded(&space.z_bounds);
    let mut e = Evaluation {
        iteration: 0,
        phase: Phase::Acquisition,
        x: x.to_vec(),
        z_rounded,
        f: None,
        n_star: None,
        mse: None,
        cost: 0.0,
        rtd: None,
        rtd_digest: None,
        raw: None,
        seed,
        wall_clock_stamp: 0.0,
        failure: None,
    };
    let result = evaluator
        .evaluate(&space.parameterisation, x, &z_rounded, seed)
        .and_then(|r| r.validate().map(|_| r));
    let result = match result {
        Ok(r) => r,
        Err(err) => {
            e.failure = Some(err.into());
            return e;
        }
    };
    let series = &result.outlet_series;
    match normalize_rtd(&series.time, &series.concentration) {
        Ok(curve) => {
            let fit = composite_objective(&curve, config.alpha);
            if fit.f.is_finite() {
                e.f = Some(fit.f);
                e.n_star = Some(fit.n_star);
                e.mse = Some(fit.mse);
                e.cost = result.cost;
                e.rtd_digest = Some(digest(&curve));
                e.rtd = Some(curve);
            } else {
                e.failure = Some(Failure {
                    kind: "objective".into(),
                    message: "composite objective is not finite".into(),
                });
            }
        }
        Err(err) => {
            e.failure = Some(Failure {
                kind: "objective".into(),
                message: err.to_string(),
            })
        }
    }
    if e.succeeded() && config.keep_raw {
        e.raw = Some(result.outlet_series);
    }
    e
}

fn training(state: &CampaignState) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let mut inputs = Vec::new();
    let mut y = Vec::new();
    let mut log_cost = Vec::new();
    for e in state.successful() {
        inputs.push(e.joint_point());
        y.push(-e.f.unwrap_or_default());
        log_cost.push(e.cost.ln());
    }
    (inputs, y, log_cost)
}

/// ARD GP on `y = −f` over the unit-normalised joint box.
pub fn fit_objective_gp(
    state: &CampaignState,
    seed: u64,
    warm_start: Option<&HyperParameters<f64>>,
) -> Result<FittedGp<f64>, GpError> {
    let (inputs, y, _) = training(state);
    fit_hyperparameters(
        &inputs,
        &y,
        KernelKind::ArdSquaredExponential,
        &state.space.joint_bounds(),
        &state.config.fit,
        seed,
        warm_start,
    )
}

/// ARD GP on log cost; predictions are positive once exponentiated.
pub fn fit_cost_gp(
    state: &CampaignState,
    seed: u64,
    warm_start: Option<&HyperParameters<f64>>,
) -> Result<FittedGp<f64>, GpError> {
    let (inputs, _, log_cost) = training(state);
    fit_hyperparameters(
        &inputs,
        &log_cost,
        KernelKind::ArdSquaredExponential,
        &state.space.joint_bounds(),
        &state.config.fit,
        seed,
        warm_start,
    )
}

/// Objective and cost models for one iteration.
#[derive(Debug, Clone)]
pub struct CampaignModels {
    pub objective: FittedGp<f64>,
    pub cost: FittedGp<f64>,
    pub snapshot: GpSnapshot,
}

/// Fits both models, warm-started from the previous snapshot. A failed fit
/// reuses the previous snapshot's hyper-parameters with a warning.
pub fn fit_models(state: &CampaignState, iteration: usize) -> Result<CampaignModels, GpError> {
    let prev = state.gp_snapshots.last();
    let seed = derive_seed(state.rng_seed, FIT_STREAM + iteration as u64);
    let (inputs, y, log_cost) = training(state);
    let bounds = state.space.joint_bounds();
    let mut warning = None;
    let mut fallback = |err: GpError, targets: &[f64], warm: Option<&HyperParameters<f64>>, what: &str| match warm {
        Some(h) => {
            warning = Some(format!("{what} GP fit failed ({err}); reusing previous hyper-parameters"));
            FittedGp::from_hyper(&inputs, targets, &bounds, h.clone())
        }
        None => Err(err),
    };
    let warm = prev.map(|p| &p.objective);
    let objective = fit_objective_gp(state, seed, warm).or_else(|e| fallback(e, &y, warm, "objective"))?;
    let warm = prev.map(|p| &p.cost);
    let cost = fit_cost_gp(state, derive_seed(seed, 1), warm).or_else(|e| fallback(e, &log_cost, warm, "cost"))?;
    let snapshot = GpSnapshot {
        iteration,
        n_data: inputs.len(),
        objective: objective.hyper.clone(),
        cost: cost.hyper.clone(),
        objective_lml: objective.log_marginal_likelihood,
        cost_lml: cost.log_marginal_likelihood,
        warning,
    };
    Ok(CampaignModels {
        objective,
        cost,
        snapshot,
    })
}

/// Checkpointing and interruption controls for [`advance`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Written after every evaluation.
    pub checkpoint: Option<PathBuf>,
    /// Return (still running) after this many evaluations in this call.
    pub max_evaluations: Option<usize>,
}

/// Writes the state as pretty JSON via a temporary file and rename.
pub fn save_checkpoint(state: &CampaignState, path: &Path) -> Result<(), CampaignError> {
    let json = serde_json::to_string_pretty(state).map_err(|e| CampaignError::Checkpoint(e.to_string()))?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, json + "\n").map_err(|e| CampaignError::Checkpoint(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| CampaignError::Checkpoint(format!("{}: {e}", path.display())))
}

/// Parses a checkpoint, rejecting unknown schema versions.
pub fn parse_checkpoint(text: &str) -> Result<CampaignState, CampaignError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CampaignError::Checkpoint(e.to_string()))?;
    let found = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != SCHEMA_VERSION {
        return Err(CampaignError::Schema {
            found,
            expected: SCHEMA_VERSION,
        });
    }
    serde_json::from_str(text).map_err(|e| CampaignError::Checkpoint(e.to_string()))
}

pub fn load_checkpoint(path: &Path) -> Result<CampaignState, CampaignError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CampaignError::Checkpoint(format!("{}: {e}", path.display())))?;
    parse_checkpoint(&text)
}

fn record(state: &mut CampaignState, mut e: Evaluation) {
    state.history.push(e.clone());
    state.recompute_spent();
    e.wall_clock_stamp = state.budget_spent;
    *state.history.last_mut().expect("just pushed") = e;
    state.update_incumbent();
}

fn check_failures(state: &mut CampaignState) -> Result<(), CampaignError> {
    let window = state.config.failure_window.max(1);
    if state.history.len() < window {
        return Ok(());
    }
    let recent = &state.history[state.history.len() - window..];
    let failed = recent.iter().filter(|e| !e.succeeded()).count();
    if 2 * failed > window {
        let last = recent
            .iter()
            .rev()
            .find_map(|e| e.failure.as_ref().map(|f| format!("{}: {}", f.kind, f.message)))
            .unwrap_or_default();
        state.status = CampaignStatus::Aborted;
        return Err(CampaignError::TooManyFailures { failed, window, last });
    }
    Ok(())
}

fn eval_seed(state: &CampaignState) -> u64 {
    derive_seed(state.rng_seed, EVAL_STREAM + state.history.len() as u64)
}

/// Evaluates the final design at `z_•` and sets the incumbent.
fn finalize_with<E: Evaluator + ?Sized>(state: &mut CampaignState, evaluator: &E, models: Option<&CampaignModels>) {
    let top = state.space.top_fidelity();
    let iteration = state.gp_snapshots.len() as i64 + 1;
    let candidate = match models {
        Some(m) => {
            let evaluated: Vec<Vec<f64>> = state.successful().map(|e| e.x.clone()).collect();
            let seed = derive_seed(state.rng_seed, BEST_STREAM + iteration as u64);
            let (x, predicted) = posterior_best(&m.objective, &state.space, &evaluated, seed);
            // An existing top-fidelity design predicted at least as good wins.
            let tol = 1e-12 * m.objective.target_scale;
            let existing = state
                .successful()
                .filter(|e| e.z_rounded == top)
                .any(|e| m.objective.mean(&e.joint_point()) >= predicted - tol);
            (!existing).then_some(x)
        }
        None => {
            state
                .warnings
                .push("no model available at finalisation; re-evaluating the best observed design".into());
            let best = state
                .successful()
                .min_by(|a, b| a.f.unwrap_or(f64::INFINITY).total_cmp(&b.f.unwrap_or(f64::INFINITY)));
            best.or(state.history.first()).map(|e| e.x.clone())
        }
    };
    if let Some(x) = candidate {
        let seed = eval_seed(state);
        let mut e = evaluate_point(&state.space, evaluator, &x, top, seed, &state.config);
        e.iteration = iteration;
        e.phase = Phase::Final;
        if let Some(f) = &e.failure {
            state
                .warnings
                .push(format!("final evaluation failed ({}: {}); falling back", f.kind, f.message));
        }
        record(state, e);
    }
    state.update_incumbent();
    state.budget_exceeded = state.budget_spent > state.budget_total;
    state.status = if state.incumbent.is_some() {
        CampaignStatus::Complete
    } else {
        state
            .warnings
            .push("no successful top-fidelity evaluation; campaign incomplete".into());
        CampaignStatus::Incomplete
    };
}

/// Finalises a campaign now, refitting the models if possible.
pub fn finalize<E: Evaluator + ?Sized>(state: &mut CampaignState, evaluator: &E) {
    let iteration = state.gp_snapshots.len() + 1;
    let models = if state.successful().count() >= 2 {
        fit_models(state, iteration).ok()
    } else {
        None
    };
    finalize_with(state, evaluator, models.as_ref());
}

/// One unit of work. Returns whether an evaluation was recorded.
fn step<E: Evaluator + ?Sized>(state: &mut CampaignState, evaluator: &E) -> Result<bool, CampaignError> {
    if state.is_finished() {
        return Ok(false);
    }
    let doe_n = state.config.doe_size_for(&state.space);
    let done = state.history.iter().filter(|e| e.phase == Phase::Doe).count();
    if done < doe_n {
        let plan = doe_sample(&state.space, doe_n, derive_seed(state.rng_seed, DOE_STREAM));
        let (x, z) = &plan[done];
        let mut e = evaluate_point(&state.space, evaluator, x, *z, eval_seed(state), &state.config);
        e.iteration = done as i64 - doe_n as i64;
        e.phase = Phase::Doe;
        record(state, e);
        check_failures(state)?;
        return Ok(true);
    }

    let before = state.history.len();
    let iteration = state.gp_snapshots.len() + 1;
    if state.successful().count() < 2 {
        finalize_with(state, evaluator, None);
        return Ok(state.history.len() > before);
    }
    let models = match fit_models(state, iteration) {
        Ok(m) => m,
        Err(err) => {
            state.warnings.push(format!("model fit failed at iteration {iteration}: {err}"));
            finalize_with(state, evaluator, None);
            return Ok(state.history.len() > before);
        }
    };
    let decision = should_stop(state, &models, derive_seed(state.rng_seed, BEST_STREAM + iteration as u64));
    let capped = state.config.max_iterations.is_some_and(|m| iteration > m);
    if decision.stop || capped {
        finalize_with(state, evaluator, Some(&models));
        return Ok(state.history.len() > before);
    }
    if let Some(w) = &models.snapshot.warning {
        state.warnings.push(format!("iteration {iteration}: {w}"));
    }
    let choice = {
        let acq = Acquisition::new(&models, state);
        let seed = derive_seed(state.rng_seed, ACQ_STREAM + iteration as u64);
        maximize_acquisition(&acq, &state.space, state.config.acquisition_starts, seed)
    };
    if choice.fallback {
        state
            .warnings
            .push(format!("iteration {iteration}: acquisition non-finite everywhere; used a random probe"));
    }
    state.gp_snapshots.push(models.snapshot);
    let mut e = evaluate_point(&state.space, evaluator, &choice.x, choice.z, eval_seed(state), &state.config);
    e.iteration = iteration as i64;
    e.phase = Phase::Acquisition;
    record(state, e);
    check_failures(state)?;
    Ok(true)
}

/// Runs (or resumes) a campaign until it finishes or the options interrupt it.
pub fn advance<E: Evaluator + ?Sized>(
    state: &mut CampaignState,
    evaluator: &E,
    options: &RunOptions,
) -> Result<(), CampaignError> {
    state.space.validate()?;
    let mut evaluated = 0;
    while !state.is_finished() {
        if options.max_evaluations.is_some_and(|m| evaluated >= m) {
            break;
        }
        let outcome = step(state, evaluator);
        if let Some(path) = &options.checkpoint {
            save_checkpoint(state, path)?;
        }
        if outcome? {
            evaluated += 1;
        }
    }
    Ok(())
}

/// DoE, guided iterations until the budget rule stops, then finalisation.
pub fn run_campaign<E: Evaluator + ?Sized>(
    space: DesignSpace,
    evaluator: &E,
    budget: f64,
    config: CampaignConfig,
    seed: u64,
) -> Result<CampaignState, CampaignError> {
    let mut state = CampaignState::new(space, config, budget, seed);
    advance(&mut state, evaluator, &RunOptions::default())?;
    Ok(state)
}

/// Uniform random designs at `z_•` until the budget is spent.
#[derive(Debug, Clone)]
pub struct RandomSearch {
    pub evaluations: Vec<Evaluation>,
    pub spent: f64,
}

impl RandomSearch {
    pub fn best(&self) -> Option<&Evaluation> {
        self.evaluations
            .iter()
            .filter(|e| e.succeeded())
            .min_by(|a, b| a.f.unwrap_or_default().total_cmp(&b.f.unwrap_or_default()))
    }
}

pub fn random_search<E: Evaluator + ?Sized>(
    space: &DesignSpace,
    evaluator: &E,
    budget: f64,
    config: &CampaignConfig,
    seed: u64,
) -> RandomSearch {
    use rand::Rng;
    let mut rng = rng_from_seed(derive_seed(seed, BASELINE_STREAM));
    let top = space.top_fidelity();
    let mut out = RandomSearch {
        evaluations: Vec::new(),
        spent: 0.0,
    };
    let window = config.failure_window.max(1);
    // stop before the next run (assumed to cost as much as the last) overdraws
    let mut next_cost = 0.0;
    while out.spent + next_cost <= budget {
        let x: Vec<f64> = space.x_bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect();
        let i = out.evaluations.len();
        let mut e = evaluate_point(space, evaluator, &x, top, derive_seed(seed, EVAL_STREAM + i as u64), config);
        e.iteration = i as i64 + 1;
        e.phase = Phase::Baseline;
        out.spent += e.cost;
        if e.cost > 0.0 {
            next_cost = e.cost;
        }
        e.wall_clock_stamp = out.spent;
        out.evaluations.push(e);
        let recent = &out.evaluations[out.evaluations.len().saturating_sub(window)..];
        if recent.len() == window && 2 * recent.iter().filter(|e| !e.succeeded()).count() > window {
            break;
        }
    }
    out
}

/// Path campaign, then a cross-section campaign on the frozen best path.
///
/// Returns the second stage, with the first attached as `previous_stage`.
pub fn run_sequential_joint<E: Evaluator + ?Sized>(
    path_space: DesignSpace,
    cross_space: DesignSpace,
    evaluator: &E,
    budgets: [f64; 2],
    config: CampaignConfig,
    seed: u64,
) -> Result<CampaignState, CampaignError> {
    let Parameterisation::CrossSection { nominal, .. } = &cross_space.parameterisation else {
        return Err(CampaignError::InvalidSpace("second stage must be a cross-section space".into()));
    };
    let Parameterisation::CoilPath { nominal: path_nominal } = &path_space.parameterisation else {
        return Err(CampaignError::InvalidSpace("first stage must be a coil-path space".into()));
    };
    if path_nominal != nominal {
        return Err(CampaignError::InvalidSpace("both stages must share the nominal coil".into()));
    }
    let first = run_campaign(path_space, evaluator, budgets[0], config.clone(), seed)?;
    let Some(best) = first.incumbent_evaluation() else {
        return Err(CampaignError::StageIncomplete(first.warnings.join("; ")));
    };
    let frozen = PathParams::from_flat(&best.x, nominal.n_p).map_err(|e| CampaignError::InvalidSpace(e.to_string()))?;
    let second_space = DesignSpace::with_fidelity(
        Parameterisation::CrossSection {
            nominal: nominal.clone(),
            path: Some(frozen),
        },
        cross_space.z_bounds,
    )?;
    let mut second = CampaignState::new(second_space, config, budgets[1], derive_seed(seed, SECOND_STAGE_STREAM));
    second.parameterisation = "joint-sequential".into();
    second.previous_stage = Some(Box::new(first));
    advance(&mut second, evaluator, &RunOptions::default())?;
    Ok(second)
}
