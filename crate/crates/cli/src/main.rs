//! `pipelayout`: scene generation, routing, training, evaluation,
//! benchmarking and rendering from the command line.
//!
//! Exit codes: 0 success, 1 domain failure (no path, generation exhausted,
//! invalid path), 2 usage or configuration error. Failures print one line
//! `error kind=<kind>: <message>` to stderr.

use clap::{Args, Parser, Subcommand, ValueEnum};
use pipelayout::bench::{
    as_path, path_metrics, render_layout, run_benchmark, run_layout, BenchConfig, BenchError, RenderFormat,
};
use pipelayout::fsutil::write_atomic;
use pipelayout::mdp::RewardWeights;
use pipelayout::observe::FeatureMask;
use pipelayout::planner::{parse_path, serialize_path, Algorithm, ConstraintSet};
use pipelayout::policy::{load_checkpoint, CheckpointError, NetShape, PolicyNet};
use pipelayout::scene::{generate_scene, parse_scene, serialize_scene, Dims, SceneError};
use pipelayout::trainer::{train_with, IterLog, TrainConfig, TrainError, TrainOutputs, TrainSummary};
use pipelayout::{Scalar, Scene, SceneConfig};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "pipelayout", version, about = "Pipeline routing on 10 cm voxel grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded solvable scene
    GenScene(GenSceneArgs),
    /// Route one pipe through a scene
    Route(RouteArgs),
    /// Train a policy with PPO
    Train(TrainArgs),
    /// Print metrics of a path as CSV
    Eval(EvalArgs),
    /// Compare algorithms over a seeded scene stream
    Bench(BenchArgs),
    /// Render a routed path
    Render(RenderArgs),
}

#[derive(Args)]
struct GenSceneArgs {
    #[arg(long)]
    seed: u64,
    /// Smallest room, cells: x,y,z
    #[arg(long, value_parser = parse_dims)]
    min_dims: Option<Dims>,
    /// Largest room, cells: x,y,z
    #[arg(long, value_parser = parse_dims)]
    max_dims: Option<Dims>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Svg,
    Ascii,
}

impl From<Format> for RenderFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Svg => RenderFormat::Svg,
            Format::Ascii => RenderFormat::Ascii,
        }
    }
}

#[derive(Args)]
struct RouteArgs {
    #[arg(long)]
    scene: PathBuf,
    /// dijkstra, astar or drl
    #[arg(long)]
    algo: Algorithm,
    /// Constraint numbers, e.g. 1,2,3
    #[arg(long)]
    constraints: ConstraintSet,
    /// Policy checkpoint, required for drl
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, requires = "render_out")]
    render: Option<Format>,
    #[arg(long, requires = "render")]
    render_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F64,
    F32,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    timesteps: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 28)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log: PathBuf,
    /// Observation blocks to zero out, e.g. angle,cross
    #[arg(long, default_value = "")]
    mask_features: FeatureMask,
    /// Elbow reward (default -5)
    #[arg(long, allow_hyphen_values = true)]
    reward_elbow: Option<f64>,
    /// Constraint set whose reward terms are active
    #[arg(long, default_value = "1,2,3")]
    constraints: ConstraintSet,
    /// Room size as x,y,z or min range x,y,z:x,y,z
    #[arg(long, value_parser = parse_dim_range)]
    scene_dims: Option<(Dims, Dims)>,
    #[arg(long, default_value_t = 8192)]
    rollout_size: usize,
    #[arg(long, default_value_t = 1024)]
    minibatch: usize,
    #[arg(long, default_value_t = 4)]
    epochs: usize,
    #[arg(long, default_value_t = 3e-4)]
    learning_rate: f64,
    #[arg(long, default_value_t = 512)]
    hidden: usize,
    /// Discount factor; 0.9 trains far more reliably on small rooms
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    /// Stop early once the trailing 500-episode success rate reaches this
    #[arg(long)]
    stop_at_success: Option<f64>,
    /// Arithmetic used in training; checkpoints are f32 either way
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
    /// Print one progress line per iteration to stderr
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    path: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    scenes: usize,
    #[arg(long)]
    seed: u64,
    /// Comma-separated algorithms
    #[arg(long, value_delimiter = ',')]
    algos: Vec<Algorithm>,
    /// Semicolon-separated constraint sets, e.g. "1;1,2;1,2,3"
    #[arg(long, value_delimiter = ';')]
    constraints: Vec<ConstraintSet>,
    #[arg(long)]
    model_1: Option<PathBuf>,
    #[arg(long)]
    model_12: Option<PathBuf>,
    #[arg(long)]
    model_123: Option<PathBuf>,
    #[arg(long, value_parser = parse_dim_range)]
    scene_dims: Option<(Dims, Dims)>,
    /// Threads running layouts; timings are per layout either way
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    path: PathBuf,
    #[arg(long, value_enum)]
    format: Format,
    #[arg(long)]
    out: PathBuf,
}

fn parse_dims(s: &str) -> Result<Dims, String> {
    let parts: Vec<i32> = s
        .split(',')
        .map(|p| p.trim().parse::<i32>().map_err(|_| format!("bad dimension `{p}`")))
        .collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| format!("expected x,y,z, got `{s}`"))
}

fn parse_dim_range(s: &str) -> Result<(Dims, Dims), String> {
    match s.split_once(':') {
        Some((lo, hi)) => Ok((parse_dims(lo)?, parse_dims(hi)?)),
        None => parse_dims(s).map(|d| (d, d)),
    }
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, kind: "usage", message: message.into() }
    }

    fn config(message: impl Into<String>) -> Self {
        Self { code: 2, kind: "config", message: message.into() }
    }

    fn domain(kind: &'static str, message: impl Into<String>) -> Self {
        Self { code: 1, kind, message: message.into() }
    }
}

impl From<SceneError> for Failure {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::GenerationExhausted { .. } => Failure::domain("generation_exhausted", e.to_string()),
            other => Failure::config(other.to_string()),
        }
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Self {
        Failure::config(format!("checkpoint: {e}"))
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::InvalidPath(_) | BenchError::SelfIntersecting(_) => Failure::domain("invalid_path", e.to_string()),
            BenchError::Scene(s) => s.into(),
            BenchError::MissingCheckpoint(cs) => {
                Failure::usage(format!("drl needs a model for constraints {cs}: pass --model-{}", flag_suffix(cs)))
            }
            other => Failure::config(other.to_string()),
        }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Scene(s) => s.into(),
            TrainError::NonFiniteLoss { .. } => Failure::domain("non_finite_loss", e.to_string()),
            other => Failure::config(other.to_string()),
        }
    }
}

fn flag_suffix(cs: ConstraintSet) -> String {
    cs.numbers().iter().map(u8::to_string).collect()
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    write_atomic(path, bytes).map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

fn load_scene(path: &Path) -> Result<Scene, Failure> {
    parse_scene(&read(path)?).map_err(|e| Failure::config(format!("scene {}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<PolicyNet<f64>, Failure> {
    Ok(load_checkpoint::<f64>(path, FeatureMask::NONE)?.net)
}

fn scene_config(range: Option<(Dims, Dims)>) -> SceneConfig {
    match range {
        Some((lo, hi)) => SceneConfig::with_dims(lo, hi),
        None => SceneConfig::default(),
    }
}

fn gen_scene(a: GenSceneArgs) -> Result<(), Failure> {
    let config = match (a.min_dims, a.max_dims) {
        (None, None) => SceneConfig::default(),
        (Some(lo), Some(hi)) => SceneConfig::with_dims(lo, hi),
        _ => return Err(Failure::usage("--min-dims and --max-dims go together")),
    };
    let scene = generate_scene(a.seed, &config)?;
    write(&a.out, &serialize_scene(&scene))
}

fn route(a: RouteArgs) -> Result<(), Failure> {
    let model = match (a.algo, &a.model) {
        (Algorithm::Drl, None) => return Err(Failure::usage("--algo drl requires --model")),
        (Algorithm::Drl, Some(p)) => Some(load_model(p)?),
        _ => None,
    };
    let scene = Arc::new(load_scene(&a.scene)?);
    let result = run_layout(&scene, a.algo, a.constraints, model.as_ref())?;
    let path = as_path(&result, a.algo, a.constraints)
        .ok_or_else(|| Failure::domain("no_path", format!("{} found no path", a.algo)))?;
    write(&a.out, &serialize_path(&path))?;
    if let (Some(fmt), Some(out)) = (a.render, &a.render_out) {
        write(out, render_layout(&scene, &path.cells, fmt.into()).as_bytes())?;
    }
    Ok(())
}

fn run_training<T: Scalar>(config: &TrainConfig, outputs: &TrainOutputs, verbose: bool) -> Result<TrainSummary<T>, Failure> {
    let progress = |r: &IterLog| {
        if verbose {
            eprintln!(
                "iter {} timesteps {} success {:.3} return {:.2} entropy {:.3} wall {:.1}s",
                r.iter, r.timesteps, r.success_rate, r.mean_return, r.entropy, r.wall_s
            );
        }
    };
    Ok(train_with::<T>(config, outputs, progress)?)
}

fn train(a: TrainArgs) -> Result<(), Failure> {
    let mut weights = RewardWeights::for_constraints(a.constraints);
    if let Some(r) = a.reward_elbow {
        weights.r_elbow = r;
    }
    let config = TrainConfig {
        total_timesteps: a.timesteps,
        workers: a.workers,
        rollout_size: a.rollout_size,
        minibatch: a.minibatch,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        gamma: a.gamma,
        seed: a.seed,
        feature_mask: a.mask_features,
        reward_weights: weights,
        scene_config: scene_config(a.scene_dims),
        net_shape: NetShape { hidden: a.hidden, ..NetShape::default() },
        stop_at_success_rate: a.stop_at_success,
        ..TrainConfig::default()
    };
    config.validate()?;
    let outputs = TrainOutputs { checkpoint: Some(a.out), log: Some(a.log) };
    let (timesteps, success, iters) = match a.precision {
        Precision::F64 => {
            let s = run_training::<f64>(&config, &outputs, a.verbose)?;
            (s.timesteps, s.trailing_success, s.log.len())
        }
        Precision::F32 => {
            let s = run_training::<f32>(&config, &outputs, a.verbose)?;
            (s.timesteps, s.trailing_success, s.log.len())
        }
    };
    println!("iterations={iters} timesteps={timesteps} trailing_success={success:.4}");
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let scene = load_scene(&a.scene)?;
    let path = parse_path(&read(&a.path)?).map_err(|e| Failure::config(format!("path {}: {e}", a.path.display())))?;
    let m = path_metrics(&scene, &path.cells)?;
    println!("length_cells,elbows,install_distance_cells,layout_time_s,success");
    println!("{},{},{:.6},{:.6},{}", m.length_cells, m.elbows, m.install_distance_cells, m.layout_time_s, m.success);
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    if a.algos.is_empty() || a.constraints.is_empty() {
        return Err(Failure::usage("--algos and --constraints must not be empty"));
    }
    let mut models = BTreeMap::new();
    for (cs, flag) in [
        (ConstraintSet::LENGTH, &a.model_1),
        (ConstraintSet::LENGTH_ELBOW, &a.model_12),
        (ConstraintSet::ALL, &a.model_123),
    ] {
        if a.algos.contains(&Algorithm::Drl) && a.constraints.contains(&cs) {
            match flag {
                Some(p) => {
                    models.insert(cs, load_model(p)?);
                }
                None => {
                    return Err(Failure::usage(format!("--algos drl with constraints {cs} requires --model-{}", flag_suffix(cs))));
                }
            }
        }
    }
    let config = BenchConfig {
        scenes: a.scenes,
        seed: a.seed,
        scene_config: scene_config(a.scene_dims),
        algorithms: a.algos,
        constraint_sets: a.constraints,
        models,
        workers: a.workers,
    };
    let report = run_benchmark(&config)?;
    write(&a.out, &report.to_csv()?)?;
    print!("{}", report.to_table());
    Ok(())
}

fn render(a: RenderArgs) -> Result<(), Failure> {
    let scene = load_scene(&a.scene)?;
    let path = parse_path(&read(&a.path)?).map_err(|e| Failure::config(format!("path {}: {e}", a.path.display())))?;
    pipelayout::planner::validate_path(&scene, &path.cells)
        .map_err(|e| Failure::domain("invalid_path", e.to_string()))?;
    write(&a.out, render_layout(&scene, &path.cells, a.format.into()).as_bytes())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let reason = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error kind=usage: {reason}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::GenScene(a) => gen_scene(a),
        Command::Route(a) => route(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Render(a) => render(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error kind={}: {}", f.kind, f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}
