//! Command-line front end and benchmark service for `coilopt`.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for runtime failures. Both
//! error cases print a JSON diagnostic on standard error (argument-parsing
//! errors excepted, which print clap's usage text).

pub mod remote;
pub mod service;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use coilopt::analysis::{campaign_variability, export_embedding_data, lengthscale_history};
use coilopt::evaluator::{Evaluator, Parameterisation};
use coilopt::geometry::{build_reactor, export_stl, validate_geometry, NominalCoil, PathParams, Tessellation};
use coilopt::interface::{evaluate_request, ErrorBody, SpaceInfo};
use coilopt::mfbo::{
    advance, doe_sample, load_checkpoint, run_sequential_joint, CampaignConfig, CampaignState, DesignSpace,
    RunOptions,
};
use coilopt::rtd::{composite_objective, normalize_rtd, DEFAULT_ALPHA};
use coilopt::surrogate::SurrogateEvaluator;

use remote::{HttpEvaluator, SubprocessEvaluator};
use service::{parse_request, ServiceState};

#[derive(Debug, Parser)]
#[command(name = "coilopt", version, about = "Coiled-tube reactor design by multi-fidelity Bayesian optimisation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Emit an initial design over X × Z as JSON.
    Doe(DoeArgs),
    /// Run a campaign, checkpointing after every evaluation.
    Run(RunArgs),
    /// Continue a campaign from its checkpoint.
    Resume(ResumeArgs),
    /// Build a reactor and write it as binary STL.
    Geometry(GeometryArgs),
    /// Fit the tanks-in-series model to a tracer trace (CSV: time,concentration).
    FitRtd(FitRtdArgs),
    /// Lengthscale history, variability and embedding exports from a checkpoint.
    Analyze(AnalyzeArgs),
    /// Start the benchmark HTTP service.
    Serve(ServeArgs),
    /// Answer one evaluate request read from standard input.
    #[command(hide = true)]
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SpaceArgs {
    /// `cross-section`, `coil-path`, `joint-sequential`, or a JSON file
    /// holding a parameterisation.
    #[arg(long, default_value = "cross-section")]
    pub space: String,
    /// Override the number of inducing points per cross-section.
    #[arg(long)]
    pub nc: Option<usize>,
    /// Override the number of cross-sections along the coil.
    #[arg(long)]
    pub nl: Option<usize>,
    /// Override the number of path inducing points.
    #[arg(long)]
    pub np: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluatorArgs {
    /// Base URL of a benchmark service to evaluate against.
    #[arg(long, conflicts_with = "evaluator_cmd")]
    pub evaluator_url: Option<String>,
    /// Command that answers one evaluate request on stdin.
    #[arg(long)]
    pub evaluator_cmd: Option<String>,
    /// Parameterisation id sent to the external evaluator.
    #[arg(long)]
    pub remote_space: Option<String>,
}

#[derive(Debug, Args)]
pub struct DoeArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Sample size; `max(10, dim + 2)` by default.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    #[command(flatten)]
    pub evaluator: EvaluatorArgs,
    /// Budget in simulated cost seconds.
    #[arg(long, default_value_t = 600.0)]
    pub budget: f64,
    /// First-stage budget for `joint-sequential`; half the budget by default.
    #[arg(long)]
    pub path_budget: Option<f64>,
    #[arg(long, default_value_t = 1.5)]
    pub beta: f64,
    #[arg(long, default_value_t = 2.0)]
    pub pc: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Per-evaluation CSV trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Stop after this many evaluations, leaving the campaign resumable.
    #[arg(long)]
    pub max_evaluations: Option<usize>,
    /// Keep raw solver traces in the checkpoint.
    #[arg(long)]
    pub keep_raw: bool,
}

#[derive(Debug, Args)]
pub struct ResumeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub evaluator: EvaluatorArgs,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub max_evaluations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Parameter vector as a JSON array or CSV of numbers; nominal if omitted.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Check watertightness and self-intersection; failures exit with code 2.
    #[arg(long)]
    pub validate: bool,
    #[arg(long, default_value_t = 64)]
    pub rings_per_turn: usize,
    #[arg(long, default_value_t = 48)]
    pub ring_vertices: usize,
    /// Inlet and outlet extension (mm).
    #[arg(long, default_value_t = 10.0)]
    pub port_length: f64,
}

#[derive(Debug, Args)]
pub struct FitRtdArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Seed for requests that do not carry one.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// A runtime failure, reported as JSON on standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: String,
    pub message: String,
}

impl CliError {
    fn new(kind: &str, message: impl ToString) -> Self {
        Self {
            kind: kind.into(),
            message: message.to_string(),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::new("io", format!("{}: {e}", path.display()))
}

/// Parses arguments and runs; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let body = ErrorBody {
                error: e.kind,
                message: e.message,
                fields: Vec::new(),
            };
            eprintln!("{}", serde_json::to_string(&body).expect("error body serialises"));
            if body.error == "usage" {
                1
            } else {
                2
            }
        }
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serialises"));
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Doe(a) => doe(a),
        Cmd::Run(a) => run(a),
        Cmd::Resume(a) => resume(a),
        Cmd::Geometry(a) => geometry(a),
        Cmd::FitRtd(a) => fit_rtd(a),
        Cmd::Analyze(a) => analyze(a),
        Cmd::Serve(a) => serve(a),
        Cmd::Evaluate(a) => evaluate_stdin(a),
    }
}

/// Resolves `--space` and the nominal overrides.
pub fn resolve_space(args: &SpaceArgs) -> Result<Parameterisation, CliError> {
    let mut p = match args.space.as_str() {
        "cross-section" | "joint-sequential" => Parameterisation::cross_section(NominalCoil::default()),
        "coil-path" => Parameterisation::coil_path(NominalCoil::default()),
        path => {
            let text = std::fs::read_to_string(path).map_err(io_err(Path::new(path)))?;
            serde_json::from_str(&text).map_err(|e| CliError::new("usage", format!("{path}: {e}")))?
        }
    };
    if let Parameterisation::CrossSection { nominal, .. } | Parameterisation::CoilPath { nominal } = &mut p {
        nominal.n_c = args.nc.unwrap_or(nominal.n_c);
        nominal.n_l = args.nl.unwrap_or(nominal.n_l);
        nominal.n_p = args.np.unwrap_or(nominal.n_p);
    }
    p.validate().map_err(|e| CliError::new("usage", e))?;
    Ok(p)
}

fn design_space(p: Parameterisation) -> Result<DesignSpace, CliError> {
    DesignSpace::new(p).map_err(|e| CliError::new("usage", e))
}

fn doe(a: DoeArgs) -> Result<(), CliError> {
    let space = design_space(resolve_space(&a.space)?)?;
    let n = a.n.unwrap_or_else(|| CampaignConfig::default().doe_size_for(&space));
    if n < 2 {
        return Err(CliError::new("usage", "--n must be at least 2"));
    }
    let points: Vec<_> = doe_sample(&space, n, a.seed)
        .into_iter()
        .map(|(x, z)| serde_json::json!({ "x": x, "z": [z.axial, z.radial] }))
        .collect();
    print_json(&serde_json::json!({
        "space": SpaceInfo::new(space.parameterisation.id(), &space),
        "seed": a.seed,
        "points": points,
    }));
    Ok(())
}

fn evaluator(args: &EvaluatorArgs) -> Result<Box<dyn Evaluator>, CliError> {
    if let Some(url) = &args.evaluator_url {
        return Ok(Box::new(HttpEvaluator::new(url.clone(), args.remote_space.clone())));
    }
    if let Some(cmd) = &args.evaluator_cmd {
        let e = SubprocessEvaluator::from_command_line(cmd, args.remote_space.clone())
            .ok_or_else(|| CliError::new("usage", "--evaluator-cmd is empty"))?;
        return Ok(Box::new(e));
    }
    Ok(Box::new(SurrogateEvaluator::default()))
}

fn summary(state: &CampaignState) -> serde_json::Value {
    let inc = state.incumbent_evaluation();
    serde_json::json!({
        "status": state.status,
        "parameterisation": state.parameterisation,
        "evaluations": state.history.len(),
        "budget_total": state.budget_total,
        "budget_spent": state.budget_spent,
        "budget_exceeded": state.budget_exceeded,
        "incumbent": inc.map(|e| serde_json::json!({
            "x": e.x, "z": [e.z_rounded.axial, e.z_rounded.radial], "f": e.f, "n_star": e.n_star, "mse": e.mse,
        })),
        "warnings": state.warnings,
    })
}

fn write_trace(state: &CampaignState, path: &Option<PathBuf>) -> Result<(), CliError> {
    if let Some(p) = path {
        std::fs::write(p, state.trace_csv()).map_err(io_err(p))?;
    }
    Ok(())
}

fn campaign_error(e: coilopt::mfbo::CampaignError) -> CliError {
    CliError::new("campaign", e)
}

fn run(a: RunArgs) -> Result<(), CliError> {
    if !(a.budget > 0.0) {
        return Err(CliError::new("usage", "--budget must be positive"));
    }
    let config = CampaignConfig {
        beta: a.beta,
        p_c: a.pc,
        keep_raw: a.keep_raw,
        ..CampaignConfig::default()
    };
    let eval = evaluator(&a.evaluator)?;
    let p = resolve_space(&a.space)?;
    if a.space.space == "joint-sequential" {
        let Parameterisation::CrossSection { nominal, .. } = &p else {
            unreachable!("joint-sequential resolves to a cross-section space")
        };
        let path_space = design_space(Parameterisation::coil_path(nominal.clone()))?;
        let path_budget = a.path_budget.unwrap_or(a.budget / 2.0);
        let state = run_sequential_joint(
            path_space,
            design_space(p)?,
            eval.as_ref(),
            [path_budget, a.budget - path_budget],
            config,
            a.seed,
        )
        .map_err(campaign_error)?;
        coilopt::mfbo::save_checkpoint(&state, &a.checkpoint).map_err(campaign_error)?;
        write_trace(&state, &a.trace)?;
        print_json(&summary(&state));
        return Ok(());
    }
    let mut state = CampaignState::new(design_space(p)?, config, a.budget, a.seed);
    let options = RunOptions {
        checkpoint: Some(a.checkpoint.clone()),
        max_evaluations: a.max_evaluations,
    };
    let result = advance(&mut state, eval.as_ref(), &options);
    write_trace(&state, &a.trace)?;
    result.map_err(campaign_error)?;
    print_json(&summary(&state));
    Ok(())
}

fn resume(a: ResumeArgs) -> Result<(), CliError> {
    let mut state = load_checkpoint(&a.checkpoint).map_err(campaign_error)?;
    let eval = evaluator(&a.evaluator)?;
    let options = RunOptions {
        checkpoint: Some(a.checkpoint.clone()),
        max_evaluations: a.max_evaluations,
    };
    let result = advance(&mut state, eval.as_ref(), &options);
    write_trace(&state, &a.trace)?;
    result.map_err(campaign_error)?;
    print_json(&summary(&state));
    Ok(())
}

/// Reads numbers from a JSON array or from CSV (any layout, header-free).
fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).map_err(|e| CliError::new("usage", format!("{}: {e}", path.display())));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::new("usage", e))?;
        for field in rec.iter().filter(|f| !f.is_empty()) {
            values.push(
                field
                    .parse()
                    .map_err(|_| CliError::new("usage", format!("{}: {field:?} is not a number", path.display())))?,
            );
        }
    }
    Ok(values)
}

fn geometry(a: GeometryArgs) -> Result<(), CliError> {
    let p = resolve_space(&a.space)?;
    let nominal = p.nominal().cloned().ok_or_else(|| CliError::new("usage", "not a reactor space"))?;
    let x = match &a.params {
        Some(path) => read_vector(path)?,
        None => match &p {
            Parameterisation::CrossSection { .. } => vec![nominal.tube_radius; p.dim()],
            _ => vec![0.0; p.dim()],
        },
    };
    p.check(&x).map_err(|e| CliError::new("invalid-input", e))?;
    let tess = Tessellation {
        rings_per_turn: a.rings_per_turn,
        ring_vertices: a.ring_vertices,
        inlet_length: a.port_length,
        outlet_length: a.port_length,
    };
    let (radii, path) = match &p {
        Parameterisation::CrossSection { path, .. } => (
            Some(
                coilopt::geometry::CrossSectionParams::from_flat(&x, nominal.n_l, nominal.n_c)
                    .map_err(|e| CliError::new("invalid-input", e))?,
            ),
            path.clone().unwrap_or_else(|| PathParams::zero(nominal.n_p)),
        ),
        _ => (
            None,
            PathParams::from_flat(&x, nominal.n_p).map_err(|e| CliError::new("invalid-input", e))?,
        ),
    };
    let reactor =
        build_reactor(radii.as_ref(), &path, &nominal, &tess).map_err(|e| CliError::new("invalid-geometry", e))?;
    let mut report = serde_json::json!({ "triangles": reactor.surface.triangles.len() });
    if a.validate {
        let v = validate_geometry(&reactor.surface);
        report = serde_json::json!({
            "triangles": v.triangles,
            "watertight": v.watertight,
            "winding_consistent": v.winding_consistent,
            "self_intersections": v.self_intersections.len(),
            "volume": v.volume,
            "area": v.area,
            "min_radius": v.min_radius,
            "max_radius": v.max_radius,
        });
        if !v.is_valid() {
            return Err(CliError::new("invalid-geometry", report));
        }
    }
    let bytes = export_stl(&reactor.surface).map_err(|e| CliError::new("io", e))?;
    std::fs::write(&a.out, bytes).map_err(io_err(&a.out))?;
    print_json(&report);
    Ok(())
}

/// Reads `time,concentration` rows, skipping a non-numeric header.
pub fn read_trace(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
    let (mut t, mut c) = (Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::new("usage", e))?;
        let parsed: Option<(f64, f64)> = match (rec.get(0), rec.get(1)) {
            (Some(a), Some(b)) => a.parse().ok().zip(b.parse().ok()),
            _ => None,
        };
        match parsed {
            Some((a, b)) => {
                t.push(a);
                c.push(b);
            }
            None if i == 0 => continue,
            None => return Err(CliError::new("usage", format!("row {} is not two numbers", i + 1))),
        }
    }
    Ok((t, c))
}

fn fit_rtd(a: FitRtdArgs) -> Result<(), CliError> {
    let (t, c) = read_trace(&a.input)?;
    let curve = normalize_rtd(&t, &c).map_err(|e| CliError::new("invalid-input", e))?;
    let fit = composite_objective(&curve, a.alpha);
    print_json(&fit);
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let state = load_checkpoint(&a.checkpoint).map_err(campaign_error)?;
    std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let write = |name: &str, text: String| {
        let p = a.out.join(name);
        std::fs::write(&p, text).map_err(io_err(&p))
    };
    let analysis = |e: coilopt::analysis::AnalysisError| CliError::new("analysis", e);
    let embedding = export_embedding_data(&state).map_err(analysis)?;
    write("embedding.csv", embedding.to_csv().map_err(analysis)?)?;
    write("trace.csv", state.trace_csv())?;
    let mut written = vec!["embedding.csv", "trace.csv"];
    match lengthscale_history(&state) {
        Ok(h) => {
            write("lengthscales.csv", h.to_csv().map_err(analysis)?)?;
            write("lengthscales.svg", h.to_svg())?;
            write("lengthscales_heatmap.svg", h.to_heatmap_svg())?;
            write(
                "lengthscale_histograms.json",
                serde_json::to_string_pretty(&h.histograms(a.bins)).expect("histograms serialise"),
            )?;
            let v = campaign_variability(&state).map_err(analysis)?;
            write("variability.json", serde_json::to_string_pretty(&v).expect("report serialises"))?;
            written.extend([
                "lengthscales.csv",
                "lengthscales.svg",
                "lengthscales_heatmap.svg",
                "lengthscale_histograms.json",
                "variability.json",
            ]);
        }
        Err(e) => eprintln!("{e}; skipping lengthscale exports"),
    }
    print_json(&serde_json::json!({ "out": a.out, "files": written }));
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::new("io", e))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.addr)
            .await
            .map_err(|e| CliError::new("io", format!("{}: {e}", a.addr)))?;
        let addr = listener.local_addr().map_err(|e| CliError::new("io", e))?;
        eprintln!("listening on http://{addr}");
        service::serve(listener, Arc::new(ServiceState::new(a.seed)))
            .await
            .map_err(|e| CliError::new("io", e))
    })
}

fn evaluate_stdin(a: EvaluateArgs) -> Result<(), CliError> {
    use std::io::Read;
    let mut body = Vec::new();
    std::io::stdin()
        .read_to_end(&mut body)
        .map_err(|e| CliError::new("io", e))?;
    let state = ServiceState::new(a.seed);
    let outcome = parse_request(&body)
        .and_then(|req| evaluate_request(&state.evaluator, &state.spaces, &req, state.seed, state.alpha));
    match outcome {
        Ok(resp) => {
            println!("{}", serde_json::to_string(&resp).expect("response serialises"));
            Ok(())
        }
        Err(e) => Err(CliError {
            kind: e.body.error,
            message: e.body.message,
        }),
    }
}
