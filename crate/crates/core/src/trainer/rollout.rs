//! Lockstep rollout collection.
//!
//! All workers advance together: one batched forward pass scores every
//! worker's current observation, then each worker samples with its own rng
//! and steps its own env. Transitions are stored worker-major, so the buffer
//! depends only on the per-worker seeds.

use super::TrainError;
use crate::geom::{is_elbow, Dir};
use crate::mdp::{PipeEnv, RewardWeights, Terminal};
use crate::observe::{FeatureMask, Observation, OBS_DIM};
use crate::policy::{select_action, ActMode, PolicyNet, NUM_ACTIONS};
use crate::rng::{stream, tags};
use crate::scene::{generate_scene, SceneConfig};
use crate::Scalar;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;

/// How a transition ended, as far as bootstrapping is concerned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepEnd {
    Continue,
    /// Success or trapped: no future reward.
    Terminal,
    /// Step limit reached: bootstrap from the stored value.
    Truncated,
}

/// A worker's contiguous run of transitions; `bootstrap` is the value of the
/// state after the last transition when that transition is `Continue`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
    pub bootstrap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode_return: f64,
    pub success: bool,
    pub length: u32,
    pub elbows: u32,
}

#[derive(Clone, Debug, Default)]
pub struct RolloutBuffer {
    /// Row-major `len x OBS_DIM`.
    pub obs: Vec<f64>,
    pub actions: Vec<usize>,
    pub masks: Vec<[bool; NUM_ACTIONS]>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub ends: Vec<StepEnd>,
    pub segments: Vec<Segment>,
    /// Episodes finished during this rollout, worker-major.
    pub episodes: Vec<EpisodeRecord>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn obs_row(&self, i: usize) -> &[f64] {
        &self.obs[i * OBS_DIM..(i + 1) * OBS_DIM]
    }

    fn append(&mut self, other: RolloutBuffer, bootstrap: f64) {
        let start = self.len();
        let len = other.len();
        self.obs.extend(other.obs);
        self.actions.extend(other.actions);
        self.masks.extend(other.masks);
        self.log_probs.extend(other.log_probs);
        self.values.extend(other.values);
        self.rewards.extend(other.rewards);
        self.ends.extend(other.ends);
        self.episodes.extend(other.episodes);
        self.segments.push(Segment { start, len, bootstrap });
    }
}

/// One env with its private rng stream and running-episode tallies.
#[derive(Clone, Debug)]
pub struct Worker {
    pub env: PipeEnv,
    rng: ChaCha8Rng,
    scene_config: SceneConfig,
    obs: Observation,
    ep_return: f64,
    ep_elbows: u32,
}

impl Worker {
    pub fn new(
        index: usize,
        seed: u64,
        scene_config: &SceneConfig,
        weights: RewardWeights,
        mask: FeatureMask,
    ) -> Result<Self, TrainError> {
        let mut rng = stream(seed, tags::WORKER, index as u64);
        let scene = generate_scene(rng.random(), scene_config)?;
        let env = PipeEnv::new(Arc::new(scene), weights, mask);
        let obs = env.observe();
        Ok(Self { env, rng, scene_config: scene_config.clone(), obs, ep_return: 0.0, ep_elbows: 0 })
    }

    fn step<T: Scalar>(&mut self, logits: &[T], out: &mut RolloutBuffer) -> Result<(), TrainError> {
        let mask = self.env.action_mask();
        let (action, logp) = select_action(logits, &mask, ActMode::Sample, &mut self.rng)?;
        let prev = self.env.state().prev_dir;
        let dir = Dir::from_index(action).expect("action index below six");
        let outcome = self.env.step(action)?;

        out.obs.extend_from_slice(self.obs.as_slice());
        out.actions.push(action);
        out.masks.push(mask);
        out.log_probs.push(logp.as_f64());
        out.rewards.push(outcome.reward);
        out.ends.push(match outcome.terminal {
            Terminal::Running => StepEnd::Continue,
            Terminal::Success | Terminal::Trapped => StepEnd::Terminal,
            Terminal::Truncated => StepEnd::Truncated,
        });

        self.ep_return += outcome.reward;
        self.ep_elbows += u32::from(is_elbow(prev, dir));
        if outcome.terminal.is_done() {
            out.episodes.push(EpisodeRecord {
                episode_return: self.ep_return,
                success: outcome.terminal == Terminal::Success,
                length: self.env.state().steps,
                elbows: self.ep_elbows,
            });
            let scene = generate_scene(self.rng.random(), &self.scene_config)?;
            self.obs = self.env.reset(Arc::new(scene));
            self.ep_return = 0.0;
            self.ep_elbows = 0;
        } else {
            self.obs = outcome.observation;
        }
        Ok(())
    }
}

fn obs_matrix<T: Scalar>(rows: &[&Observation]) -> Array2<T> {
    Array2::from_shape_fn((rows.len(), OBS_DIM), |(r, c)| T::lit(rows[r].values[c]))
}

/// Transitions per worker: `rollout_size` split as evenly as possible, the
/// remainder going to the lowest-indexed workers.
pub fn worker_quotas(rollout_size: usize, workers: usize) -> Vec<usize> {
    (0..workers).map(|w| rollout_size / workers + usize::from(w < rollout_size % workers)).collect()
}

pub fn collect_rollouts<T: Scalar>(
    net: &PolicyNet<T>,
    workers: &mut [Worker],
    rollout_size: usize,
) -> Result<RolloutBuffer, TrainError> {
    let quotas = worker_quotas(rollout_size, workers.len());
    let mut parts: Vec<RolloutBuffer> = quotas.iter().map(|_| RolloutBuffer::default()).collect();
    let longest = quotas.iter().copied().max().unwrap_or(0);
    for k in 0..longest {
        let active: Vec<usize> = (0..workers.len()).filter(|&w| k < quotas[w]).collect();
        let x = obs_matrix::<T>(&active.iter().map(|&w| &workers[w].obs).collect::<Vec<_>>());
        let out = net.forward_batch(x.view())?;
        for (row, &w) in active.iter().enumerate() {
            parts[w].values.push(out.values[row].as_f64());
        }
        let mut chosen: Vec<(&mut Worker, &mut RolloutBuffer, usize)> = workers
            .iter_mut()
            .zip(parts.iter_mut())
            .enumerate()
            .filter(|(w, _)| k < quotas[*w])
            .enumerate()
            .map(|(row, (_, (worker, part)))| (worker, part, row))
            .collect();
        chosen
            .par_iter_mut()
            .map(|(worker, part, row)| {
                let logits = out.logits.row(*row);
                worker.step(logits.as_slice().expect("row-major logits"), part)
            })
            .collect::<Result<Vec<()>, TrainError>>()?;
    }

    let x = obs_matrix::<T>(&workers.iter().map(|w| &w.obs).collect::<Vec<_>>());
    let tail = net.forward_batch(x.view())?;
    let mut buffer = RolloutBuffer::default();
    for (w, part) in parts.into_iter().enumerate() {
        buffer.append(part, tail.values[w].as_f64());
    }
    Ok(buffer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotas_sum_to_rollout() {
        assert_eq!(worker_quotas(8192, 28).iter().sum::<usize>(), 8192);
        assert_eq!(worker_quotas(10, 4), vec![3, 3, 2, 2]);
        assert_eq!(worker_quotas(64, 1), vec![64]);
    }
}
