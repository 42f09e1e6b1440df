//! The routing environment: reset, masked step and shaped reward.
//!
//! Each step moves the pipe head one cell. The reward is the sum of five
//! terms, kept separately in [`RewardBreakdown`]:
//!
//! * a constant per-step charge,
//! * +1/-1 for reducing/increasing the Manhattan distance to the end,
//! * an elbow charge when the move direction differs from the previous one,
//! * an installation charge proportional to the new cell's smallest axis
//!   clearance,
//! * a one-off success bonus on reaching the end.
//!
//! Because every axis move changes the Manhattan distance by exactly one,
//! the progress terms telescope and a successful episode's return has the
//! closed form computed by [`episode_return_identity`].

use crate::geom::{is_elbow, manhattan, Cell, Dir};
use crate::observe::{observe, FeatureMask, Observation};
use crate::planner::ConstraintSet;
use crate::scene::{generate_scene, Scene, SceneConfig, SceneError};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MdpError {
    #[error("action {action} is masked in the current state")]
    IllegalAction { action: usize },
    #[error("episode has already ended")]
    EpisodeOver,
    #[error("trajectory did not reach the end cell")]
    NotSuccessful,
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardWeights {
    pub r_success: f64,
    pub r_closer: f64,
    pub r_further: f64,
    pub r_base: f64,
    pub r_elbow: f64,
    pub w_install: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { r_success: 100.0, r_closer: 1.0, r_further: -1.0, r_base: -0.5, r_elbow: -5.0, w_install: 0.15 }
    }
}

impl RewardWeights {
    /// Default weights with the elbow and installation terms switched off
    /// unless the constraint set includes them.
    pub fn for_constraints(cs: ConstraintSet) -> Self {
        let d = Self::default();
        Self {
            r_elbow: if cs.elbow { d.r_elbow } else { 0.0 },
            w_install: if cs.install { d.w_install } else { 0.0 },
            ..d
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardBreakdown {
    pub base: f64,
    pub progress: f64,
    pub elbow: f64,
    pub install: f64,
    pub success: f64,
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        self.base + self.progress + self.elbow + self.install + self.success
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Terminal {
    Running,
    Success,
    Trapped,
    Truncated,
}

impl Terminal {
    pub fn is_done(self) -> bool {
        self != Terminal::Running
    }
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub terminal: Terminal,
    pub breakdown: RewardBreakdown,
}

/// Agent side of the state: head cell, last move and the pipe body.
#[derive(Clone, Debug)]
pub struct AgentState {
    pub cur: Cell,
    pub prev_dir: Option<Dir>,
    pub path: Vec<Cell>,
    pub steps: u32,
    occupied: Vec<bool>,
}

impl AgentState {
    fn new(scene: &Scene) -> Self {
        let mut occupied = vec![false; scene.volume()];
        occupied[scene.index(scene.start())] = true;
        Self { cur: scene.start(), prev_dir: None, path: vec![scene.start()], steps: 0, occupied }
    }

    pub fn is_visited(&self, scene: &Scene, c: Cell) -> bool {
        scene.in_bounds(c) && self.occupied[scene.index(c)]
    }
}

pub fn max_steps(scene: &Scene) -> u32 {
    let [lx, ly, lz] = scene.dims();
    4 * (lx + ly + lz) as u32
}

/// One single-stream routing episode at a time.
#[derive(Clone, Debug)]
pub struct PipeEnv {
    scene: Arc<Scene>,
    state: AgentState,
    weights: RewardWeights,
    mask: FeatureMask,
    status: Terminal,
}

impl PipeEnv {
    pub fn new(scene: Arc<Scene>, weights: RewardWeights, mask: FeatureMask) -> Self {
        let state = AgentState::new(&scene);
        Self { scene, state, weights, mask, status: Terminal::Running }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn status(&self) -> Terminal {
        self.status
    }

    pub fn weights(&self) -> RewardWeights {
        self.weights
    }

    pub fn feature_mask(&self) -> FeatureMask {
        self.mask
    }

    /// Restarts on `scene`.
    pub fn reset(&mut self, scene: Arc<Scene>) -> Observation {
        self.state = AgentState::new(&scene);
        self.scene = scene;
        self.status = Terminal::Running;
        self.observe()
    }

    /// Restarts on a freshly generated scene.
    pub fn reset_seeded(&mut self, seed: u64, config: &SceneConfig) -> Result<Observation, MdpError> {
        let scene = generate_scene(seed, config)?;
        Ok(self.reset(Arc::new(scene)))
    }

    pub fn observe(&self) -> Observation {
        observe(&self.scene, self.state.cur, self.state.prev_dir, self.mask)
    }

    /// `true` where the neighbour is inside the room, outside every obstacle
    /// and not already part of the pipe.
    pub fn action_mask(&self) -> [bool; 6] {
        Dir::ALL.map(|d| {
            let n = self.state.cur.step(d);
            !self.scene.is_blocked(n) && !self.state.is_visited(&self.scene, n)
        })
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome, MdpError> {
        if self.status.is_done() {
            return Err(MdpError::EpisodeOver);
        }
        let dir = Dir::from_index(action).ok_or(MdpError::IllegalAction { action })?;
        if !self.action_mask()[action] {
            return Err(MdpError::IllegalAction { action });
        }
        let scene = &self.scene;
        let end = scene.end();
        let from = self.state.cur;
        let to = from.step(dir);
        let w = &self.weights;

        let breakdown = RewardBreakdown {
            base: w.r_base,
            progress: if manhattan(to, end) < manhattan(from, end) { w.r_closer } else { w.r_further },
            elbow: if is_elbow(self.state.prev_dir, dir) { w.r_elbow } else { 0.0 },
            install: -w.w_install * f64::from(scene.min_free_distance(to)),
            success: if to == end { w.r_success } else { 0.0 },
        };

        let idx = scene.index(to);
        self.state.occupied[idx] = true;
        self.state.cur = to;
        self.state.prev_dir = Some(dir);
        self.state.path.push(to);
        self.state.steps += 1;

        self.status = if to == end {
            Terminal::Success
        } else if !self.action_mask().iter().any(|m| *m) {
            Terminal::Trapped
        } else if self.state.steps >= max_steps(&self.scene) {
            Terminal::Truncated
        } else {
            Terminal::Running
        };
        Ok(StepOutcome { observation: self.observe(), reward: breakdown.total(), terminal: self.status, breakdown })
    }
}

/// Closed-form return of a successful pipe `path` (start to end):
/// `r_success + progress + r_base*L + r_elbow*E - w_install*S`, where the
/// progress terms sum to `manhattan(start, end)` under default weights.
pub fn episode_return_identity(scene: &Scene, path: &[Cell], w: &RewardWeights) -> Result<f64, MdpError> {
    if path.len() < 2 || path.first() != Some(&scene.start()) || path.last() != Some(&scene.end()) {
        return Err(MdpError::NotSuccessful);
    }
    let steps = (path.len() - 1) as i32;
    let dist = manhattan(scene.start(), scene.end());
    let closer = (steps + dist) / 2;
    let further = (steps - dist) / 2;
    let mut elbows = 0;
    let mut clearance = 0i64;
    let mut prev = None;
    for pair in path.windows(2) {
        let d = pair[0].dir_to(pair[1]).ok_or(MdpError::NotSuccessful)?;
        if is_elbow(prev, d) {
            elbows += 1;
        }
        prev = Some(d);
        clearance += i64::from(scene.min_free_distance(pair[1]));
    }
    Ok(w.r_success
        + w.r_closer * f64::from(closer)
        + w.r_further * f64::from(further)
        + w.r_base * f64::from(steps)
        + w.r_elbow * f64::from(elbows)
        - w.w_install * clearance as f64)
}
