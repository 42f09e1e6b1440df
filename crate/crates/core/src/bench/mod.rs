//! Layout metrics, the three-way benchmark, and rendering.
//!
//! Lengths and clearances are in cells (multiply by 0.1 for metres).

mod render;

pub use render::{render_ascii, render_layout, render_svg, RenderFormat};

use crate::geom::{is_elbow, Cell, Dir};
use crate::mdp::{PipeEnv, RewardWeights, Terminal};
use crate::observe::FeatureMask;
use crate::planner::{path_cost, plan, Algorithm, ConstraintSet, Path, PathError, Plan};
use crate::policy::{select_action, ActMode, PolicyError, PolicyNet};
use crate::rng::{derive_seed, stream, tags};
use crate::scene::{generate_scene, Scene, SceneConfig, SceneError};
use crate::Scalar;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid path: {0}")]
    InvalidPath(#[from] PathError),
    #[error("path passes through cell {0} twice")]
    SelfIntersecting(Cell),
    #[error("no model for constraint set {0}")]
    MissingCheckpoint(ConstraintSet),
    #[error("invalid benchmark config: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("report csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Metrics {
    pub length_cells: u32,
    pub elbows: u32,
    /// Mean smallest-axis clearance over every cell after the start.
    pub install_distance_cells: f64,
    pub layout_time_s: f64,
    pub success: bool,
}

/// Metrics of a complete start-to-end pipe. Timing is left at zero.
pub fn path_metrics(scene: &Scene, cells: &[Cell]) -> Result<Metrics, BenchError> {
    crate::planner::validate_path(scene, cells)?;
    let mut seen = std::collections::HashSet::with_capacity(cells.len());
    if let Some(c) = cells.iter().find(|c| !seen.insert(**c)) {
        return Err(BenchError::SelfIntersecting(*c));
    }
    Ok(measure(scene, cells))
}

/// A greedy policy rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct DrlLayout {
    pub cells: Vec<Cell>,
    pub terminal: Terminal,
}

/// Routes by following the policy's most likely masked action from start
/// until the episode ends. Observation extraction is part of the call.
pub fn drl_layout<T: Scalar>(scene: &Arc<Scene>, net: &PolicyNet<T>, mask: FeatureMask) -> Result<DrlLayout, BenchError> {
    let mut env = PipeEnv::new(Arc::clone(scene), RewardWeights::default(), mask);
    let mut obs = env.observe();
    // Greedy selection never consumes randomness.
    let mut rng = stream(0, 0, 0);
    loop {
        let x: Vec<T> = obs.values.iter().map(|v| T::lit(*v)).collect();
        let (logits, _) = net.forward(&x)?;
        let (action, _) = select_action(&logits, &env.action_mask(), ActMode::Greedy, &mut rng)?;
        let out = env.step(action).expect("greedy choice respects the mask");
        obs = out.observation;
        if out.terminal.is_done() {
            return Ok(DrlLayout { cells: env.state().path.clone(), terminal: out.terminal });
        }
    }
}

/// One algorithm run on one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct LayoutResult {
    pub metrics: Metrics,
    pub cells: Vec<Cell>,
    /// Cost under the constraint set; `None` when no layout was produced.
    pub cost: Option<f64>,
    /// Settled search nodes; `None` for the policy.
    pub expanded_nodes: Option<u64>,
}

/// Runs one layout, timing only the layout call itself.
pub fn run_layout<T: Scalar>(
    scene: &Arc<Scene>,
    algorithm: Algorithm,
    cs: ConstraintSet,
    model: Option<&PolicyNet<T>>,
) -> Result<LayoutResult, BenchError> {
    match algorithm {
        Algorithm::Dijkstra | Algorithm::Astar => {
            let t0 = Instant::now();
            let p = plan(scene, cs, algorithm).expect("planner algorithm");
            let elapsed = t0.elapsed().as_secs_f64();
            let expanded = Some(p.expanded_nodes());
            match p {
                Plan::Found(path) => {
                    // A planner path may revisit a cell when turning costs make a
                    // loop cheaper; it is still measured, and flagged on the path.
                    let mut metrics = measure(scene, &path.cells);
                    metrics.layout_time_s = elapsed;
                    Ok(LayoutResult { metrics, cost: Some(path.cost), cells: path.cells, expanded_nodes: expanded })
                }
                Plan::NoPath { .. } => Ok(LayoutResult {
                    metrics: Metrics { layout_time_s: elapsed, ..Metrics::default() },
                    cells: Vec::new(),
                    cost: None,
                    expanded_nodes: expanded,
                }),
            }
        }
        Algorithm::Drl => {
            let net = model.ok_or(BenchError::MissingCheckpoint(cs))?;
            let t0 = Instant::now();
            let out = drl_layout(scene, net, FeatureMask::NONE)?;
            let elapsed = t0.elapsed().as_secs_f64();
            if out.terminal == Terminal::Success {
                let mut metrics = path_metrics(scene, &out.cells)?;
                metrics.layout_time_s = elapsed;
                let cost = path_cost(scene, &out.cells, cs)?;
                Ok(LayoutResult { metrics, cost: Some(cost), cells: out.cells, expanded_nodes: None })
            } else {
                Ok(LayoutResult {
                    metrics: Metrics { layout_time_s: elapsed, ..Metrics::default() },
                    cells: out.cells,
                    cost: None,
                    expanded_nodes: None,
                })
            }
        }
    }
}

/// Metric definitions on adjacent cells; no collision or revisit checks.
fn measure(scene: &Scene, cells: &[Cell]) -> Metrics {
    let mut elbows = 0;
    let mut prev: Option<Dir> = None;
    for pair in cells.windows(2) {
        let d = pair[0].dir_to(pair[1]).expect("adjacent cells");
        elbows += u32::from(is_elbow(prev, d));
        prev = Some(d);
    }
    let moved = cells.get(1..).unwrap_or_default();
    let install = if moved.is_empty() {
        0.0
    } else {
        moved.iter().map(|c| f64::from(scene.min_free_distance(*c))).sum::<f64>() / moved.len() as f64
    };
    Metrics {
        length_cells: moved.len() as u32,
        elbows,
        install_distance_cells: install,
        layout_time_s: 0.0,
        success: true,
    }
}

/// Wraps a planner result as a [`Path`] for writing or rendering.
pub fn as_path(result: &LayoutResult, algorithm: Algorithm, cs: ConstraintSet) -> Option<Path> {
    result.cost.map(|cost| Path {
        cells: result.cells.clone(),
        algorithm,
        constraints: cs,
        cost,
        expanded_nodes: result.expanded_nodes.unwrap_or(0),
        self_intersecting: Path::has_repeated_cells(&result.cells),
    })
}

#[derive(Clone, Debug)]
pub struct BenchConfig<T> {
    pub scenes: usize,
    pub seed: u64,
    pub scene_config: SceneConfig,
    pub algorithms: Vec<Algorithm>,
    pub constraint_sets: Vec<ConstraintSet>,
    /// One policy per constraint set, required when `algorithms` has DRL.
    pub models: BTreeMap<ConstraintSet, PolicyNet<T>>,
    /// Threads running layouts concurrently (1 = sequential). Each timing
    /// still covers a single layout call.
    pub workers: usize,
}

/// Seed of benchmark scene `i`.
pub fn bench_scene_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, tags::BENCH_SCENE, i as u64)
}

/// The benchmark's scene stream.
pub fn bench_scenes(seed: u64, n: usize, config: &SceneConfig) -> Result<Vec<Scene>, SceneError> {
    (0..n).map(|i| generate_scene(bench_scene_seed(seed, i), config)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub algorithm: Algorithm,
    pub constraints: ConstraintSet,
    pub scene_index: usize,
    pub result: LayoutResult,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub algorithm: Algorithm,
    pub constraints: ConstraintSet,
    pub n: usize,
    pub failures: usize,
    pub success_rate: f64,
    /// Means over successful layouts.
    pub mean_length: f64,
    pub mean_elbows: f64,
    pub mean_install: f64,
    pub mean_cost: f64,
    /// Timing over every layout.
    pub mean_time_s: f64,
    pub p95_time_s: f64,
    pub mean_expanded_nodes: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub scene_seeds: Vec<u64>,
    pub rows: Vec<ReportRow>,
    pub instances: Vec<Instance>,
}

fn mean_of(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Nearest-rank percentile.
fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

impl ReportRow {
    fn summarise(algorithm: Algorithm, constraints: ConstraintSet, results: &[&LayoutResult]) -> Self {
        let ok: Vec<&&LayoutResult> = results.iter().filter(|r| r.metrics.success).collect();
        let times: Vec<f64> = results.iter().map(|r| r.metrics.layout_time_s).collect();
        let expanded: Vec<f64> = results.iter().filter_map(|r| r.expanded_nodes).map(|e| e as f64).collect();
        Self {
            algorithm,
            constraints,
            n: results.len(),
            failures: results.len() - ok.len(),
            success_rate: if results.is_empty() { f64::NAN } else { ok.len() as f64 / results.len() as f64 },
            mean_length: mean_of(ok.iter().map(|r| f64::from(r.metrics.length_cells))),
            mean_elbows: mean_of(ok.iter().map(|r| f64::from(r.metrics.elbows))),
            mean_install: mean_of(ok.iter().map(|r| r.metrics.install_distance_cells)),
            mean_cost: mean_of(ok.iter().filter_map(|r| r.cost)),
            mean_time_s: mean_of(times.iter().copied()),
            p95_time_s: percentile(&times, 0.95),
            mean_expanded_nodes: (!expanded.is_empty()).then(|| mean_of(expanded.into_iter())),
        }
    }
}

/// Runs every (algorithm, constraint set) pair on the same scene stream.
/// Missing models are reported before any scene is generated.
pub fn run_benchmark<T: Scalar>(config: &BenchConfig<T>) -> Result<Report, BenchError> {
    if config.algorithms.contains(&Algorithm::Drl) {
        if let Some(cs) = config.constraint_sets.iter().find(|cs| !config.models.contains_key(cs)) {
            return Err(BenchError::MissingCheckpoint(*cs));
        }
    }
    if config.algorithms.is_empty() || config.constraint_sets.is_empty() {
        return Err(BenchError::Config("need at least one algorithm and one constraint set".into()));
    }
    if config.workers == 0 {
        return Err(BenchError::Config("workers must be at least 1".into()));
    }
    config.scene_config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let scene_seeds: Vec<u64> = (0..config.scenes).map(|i| bench_scene_seed(config.seed, i)).collect();
    let scenes = bench_scenes(config.seed, config.scenes, &config.scene_config)?
        .into_iter()
        .map(Arc::new)
        .collect::<Vec<_>>();

    let mut instances = Vec::new();
    let mut rows = Vec::new();
    for &algorithm in &config.algorithms {
        for &cs in &config.constraint_sets {
            let model = config.models.get(&cs);
            let results: Vec<LayoutResult> = pool.install(|| {
                scenes.par_iter().map(|scene| run_layout(scene, algorithm, cs, model)).collect::<Result<_, _>>()
            })?;
            for (i, result) in results.iter().enumerate() {
                instances.push(Instance { algorithm, constraints: cs, scene_index: i, result: result.clone() });
            }
            rows.push(ReportRow::summarise(algorithm, cs, &results.iter().collect::<Vec<_>>()));
        }
    }
    Ok(Report { scene_seeds, rows, instances })
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.6}")
    }
}

impl Report {
    pub fn row(&self, algorithm: Algorithm, cs: ConstraintSet) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm && r.constraints == cs)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, BenchError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "algo", "constraints", "n", "success_rate", "mean_length", "mean_elbows", "mean_install", "mean_time_s",
            "p95_time_s", "mean_expanded_nodes",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.algorithm.name().to_string(),
                r.constraints.to_string(),
                r.n.to_string(),
                fmt_num(r.success_rate),
                fmt_num(r.mean_length),
                fmt_num(r.mean_elbows),
                fmt_num(r.mean_install),
                fmt_num(r.mean_time_s),
                fmt_num(r.p95_time_s),
                r.mean_expanded_nodes.map(fmt_num).unwrap_or_default(),
            ])?;
        }
        Ok(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?)
    }

    /// Aligned plain-text table; units are cells and seconds.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<9} {:<6} {:>4} {:>8} {:>9} {:>7} {:>8} {:>10} {:>10} {:>12}",
            "algo", "cons", "n", "success", "length", "elbows", "install", "time_s", "p95_s", "expanded"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<9} {:<6} {:>4} {:>8.3} {:>9.2} {:>7.2} {:>8.2} {:>10.5} {:>10.5} {:>12}",
                r.algorithm.name(),
                r.constraints.to_string(),
                r.n,
                r.success_rate,
                r.mean_length,
                r.mean_elbows,
                r.mean_install,
                r.mean_time_s,
                r.p95_time_s,
                r.mean_expanded_nodes.map_or("-".to_string(), |e| format!("{e:.1}")),
            );
        }
        out
    }
}
