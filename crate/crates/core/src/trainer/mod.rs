//! PPO training: collect, estimate advantages, update, log.

mod gae;
mod ppo;
mod rollout;
mod scale;

pub use gae::{compute_gae, gae_with_rewards, normalize};
pub use ppo::{clip_grad_norm, grad_norm, ppo_loss, ppo_loss_and_grad, Adam, LossParts, Minibatch, PpoCoefs};
pub use scale::ReturnScaler;
pub use rollout::{collect_rollouts, worker_quotas, EpisodeRecord, RolloutBuffer, Segment, StepEnd, Worker};

use crate::fsutil::write_atomic;
use crate::mdp::{MdpError, RewardWeights};
use crate::observe::{FeatureMask, OBS_DIM};
use crate::policy::{save_checkpoint, Checkpoint, CheckpointError, NetShape, PolicyError, PolicyNet};
use crate::rng::{stream, tags};
use crate::scene::{SceneConfig, SceneError};
use crate::Scalar;
use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::Serialize;
use std::collections::VecDeque;
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] MdpError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("non-finite loss at iteration {iter}, epoch {epoch}: {detail}")]
    NonFiniteLoss { iter: usize, epoch: usize, detail: String },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("log io: {0}")]
    Io(#[from] std::io::Error),
    #[error("log csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub total_timesteps: u64,
    pub workers: usize,
    pub rollout_size: usize,
    pub minibatch: usize,
    pub epochs: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub learning_rate: f64,
    /// Divide rewards by the running spread of the discounted return before
    /// advantage estimation and value fitting.
    pub scale_rewards: bool,
    /// Global gradient-norm cap per minibatch step; `None` disables it.
    pub max_grad_norm: Option<f64>,
    pub seed: u64,
    pub feature_mask: FeatureMask,
    pub reward_weights: RewardWeights,
    pub scene_config: SceneConfig,
    pub net_shape: NetShape,
    pub checkpoint_every: usize,
    /// Episodes in the trailing success-rate window.
    pub success_window: usize,
    /// Stop once the trailing window is full and its success rate reaches
    /// this value.
    pub stop_at_success_rate: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_timesteps: 20_000_000,
            workers: 28,
            rollout_size: 8192,
            minibatch: 1024,
            epochs: 4,
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
            learning_rate: 3e-4,
            scale_rewards: true,
            max_grad_norm: Some(0.5),
            seed: 0,
            feature_mask: FeatureMask::NONE,
            reward_weights: RewardWeights::default(),
            scene_config: SceneConfig::default(),
            net_shape: NetShape::default(),
            checkpoint_every: 50,
            success_window: 500,
            stop_at_success_rate: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.rollout_size == 0 || self.minibatch == 0 || self.rollout_size % self.minibatch != 0 {
            return bad("rollout_size must be a positive multiple of minibatch");
        }
        if self.workers > self.rollout_size {
            return bad("more workers than rollout transitions");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.net_shape.input != OBS_DIM {
            return bad("network input width must equal the observation width");
        }
        if !(self.learning_rate > 0.0) || !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return bad("learning_rate, gamma or lambda out of range");
        }
        if self.success_window == 0 {
            return bad("success_window must be at least 1");
        }
        self.scene_config.validate()?;
        Ok(())
    }

    pub fn coefs(&self) -> PpoCoefs {
        PpoCoefs { clip: self.clip, value_coef: self.value_coef, entropy_coef: self.entropy_coef }
    }
}

/// Averages over every minibatch step of one update phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrainStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
}

/// One training-log row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterLog {
    pub iter: usize,
    pub timesteps: u64,
    /// Episodes finished so far, all iterations.
    pub episodes: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    pub mean_length: f64,
    pub mean_elbows: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
    pub wall_s: f64,
}

/// Gathers rows `idx` of the buffer into a minibatch.
pub fn gather<T: Scalar>(buffer: &RolloutBuffer, idx: &[usize], advantages: &[f64], returns: &[f64]) -> Minibatch<T> {
    let pick = |v: &[f64]| idx.iter().map(|&i| T::lit(v[i])).collect();
    Minibatch {
        obs: Array2::from_shape_fn((idx.len(), OBS_DIM), |(r, c)| T::lit(buffer.obs_row(idx[r])[c])),
        actions: idx.iter().map(|&i| buffer.actions[i]).collect(),
        masks: idx.iter().map(|&i| buffer.masks[i]).collect(),
        old_log_probs: pick(&buffer.log_probs),
        advantages: pick(advantages),
        returns: pick(returns),
    }
}

/// Runs `epochs` passes of shuffled minibatch Adam steps on the buffer.
/// Advantages are normalised here, once per call.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update<T: Scalar>(
    net: &mut PolicyNet<T>,
    adam: &mut Adam<T>,
    buffer: &RolloutBuffer,
    advantages: &[f64],
    returns: &[f64],
    config: &TrainConfig,
    iter: usize,
) -> Result<TrainStats, TrainError> {
    let mut adv = advantages.to_vec();
    normalize(&mut adv);
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    let mut sums = TrainStats::default();
    let mut count = 0usize;
    for epoch in 0..config.epochs {
        let mut rng = stream(config.seed, tags::SHUFFLE, (iter * config.epochs + epoch) as u64);
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.minibatch) {
            let mb = gather::<T>(buffer, chunk, &adv, returns);
            let (parts, mut grads) = ppo_loss_and_grad(net, &mb, config.coefs())?;
            if !parts.total.is_finite() {
                return Err(TrainError::NonFiniteLoss { iter, epoch, detail: format!("{parts:?}") });
            }
            if let Some(max) = config.max_grad_norm {
                let norm = clip_grad_norm(&mut grads, max);
                if !norm.is_finite() {
                    return Err(TrainError::NonFiniteLoss { iter, epoch, detail: format!("gradient norm {norm}") });
                }
            }
            adam.step(net, &grads);
            sums.policy_loss += parts.policy;
            sums.value_loss += parts.value;
            sums.entropy += parts.entropy;
            sums.approx_kl += parts.approx_kl;
            sums.clip_frac += parts.clip_frac;
            count += 1;
        }
    }
    let n = count as f64;
    Ok(TrainStats {
        policy_loss: sums.policy_loss / n,
        value_loss: sums.value_loss / n,
        entropy: sums.entropy / n,
        approx_kl: sums.approx_kl / n,
        clip_frac: sums.clip_frac / n,
    })
}

/// Where `train` writes its artifacts; `None` skips that output.
#[derive(Clone, Debug, Default)]
pub struct TrainOutputs {
    pub checkpoint: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct TrainSummary<T> {
    pub checkpoint: Checkpoint<T>,
    pub log: Vec<IterLog>,
    pub timesteps: u64,
    /// Success rate over the trailing window at exit.
    pub trailing_success: f64,
    pub episodes: usize,
    pub stopped_early: bool,
}

/// Renders log rows as CSV text (header included).
pub fn log_csv(rows: &[IterLog]) -> Result<Vec<u8>, TrainError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "iter", "timesteps", "episodes", "mean_return", "success_rate", "mean_length", "mean_elbows", "policy_loss",
            "value_loss", "entropy", "approx_kl", "clip_frac", "wall_s",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| TrainError::Io(e.into_error()))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn train<T: Scalar>(config: &TrainConfig, outputs: &TrainOutputs) -> Result<TrainSummary<T>, TrainError> {
    train_with(config, outputs, |_| {})
}

/// Training loop; `on_iter` sees every log row as it is produced.
pub fn train_with<T: Scalar>(
    config: &TrainConfig,
    outputs: &TrainOutputs,
    mut on_iter: impl FnMut(&IterLog),
) -> Result<TrainSummary<T>, TrainError> {
    config.validate()?;
    let started = Instant::now();
    let mut net = PolicyNet::<T>::new(config.net_shape, config.seed);
    let mut adam = Adam::new(&net, config.learning_rate);
    let mut workers = (0..config.workers)
        .map(|w| Worker::new(w, config.seed, &config.scene_config, config.reward_weights, config.feature_mask))
        .collect::<Result<Vec<_>, _>>()?;

    let mut scaler = ReturnScaler::new(config.workers, config.gamma);
    let mut log = Vec::new();
    let mut window: VecDeque<bool> = VecDeque::with_capacity(config.success_window);
    let mut episodes = 0usize;
    let mut timesteps = 0u64;
    let mut stopped_early = false;
    let snapshot = |net: &PolicyNet<T>, timesteps: u64| Checkpoint::new(net.clone(), config.feature_mask, timesteps, config.seed);
    let trailing = |w: &VecDeque<bool>| if w.is_empty() { 0.0 } else { w.iter().filter(|s| **s).count() as f64 / w.len() as f64 };

    let result = (|| -> Result<(), TrainError> {
        let mut iter = 0usize;
        while timesteps < config.total_timesteps {
            let buffer = collect_rollouts(&net, &mut workers, config.rollout_size)?;
            timesteps += buffer.len() as u64;
            let (adv, ret) = if config.scale_rewards {
                scaler.observe(&buffer);
                gae_with_rewards(&buffer, &scaler.scale(&buffer.rewards), config.gamma, config.lambda)
            } else {
                compute_gae(&buffer, config.gamma, config.lambda)
            };
            let stats = ppo_update(&mut net, &mut adam, &buffer, &adv, &ret, config, iter)?;

            for ep in &buffer.episodes {
                if window.len() == config.success_window {
                    window.pop_front();
                }
                window.push_back(ep.success);
            }
            episodes += buffer.episodes.len();
            let row = IterLog {
                iter,
                timesteps,
                episodes,
                mean_return: mean(buffer.episodes.iter().map(|e| e.episode_return)),
                success_rate: trailing(&window),
                mean_length: mean(buffer.episodes.iter().map(|e| f64::from(e.length))),
                mean_elbows: mean(buffer.episodes.iter().map(|e| f64::from(e.elbows))),
                policy_loss: stats.policy_loss,
                value_loss: stats.value_loss,
                entropy: stats.entropy,
                approx_kl: stats.approx_kl,
                clip_frac: stats.clip_frac,
                wall_s: started.elapsed().as_secs_f64(),
            };
            on_iter(&row);
            log.push(row);
            iter += 1;

            if let Some(path) = &outputs.log {
                write_atomic(path, &log_csv(&log)?)?;
            }
            if let Some(path) = &outputs.checkpoint {
                if config.checkpoint_every > 0 && iter % config.checkpoint_every == 0 {
                    save_checkpoint(&snapshot(&net, timesteps), path)?;
                }
            }
            if let Some(target) = config.stop_at_success_rate {
                if window.len() == config.success_window && trailing(&window) >= target {
                    stopped_early = true;
                    break;
                }
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        if let Some(path) = &outputs.log {
            // Best effort: keep the rows gathered so far.
            let _ = log_csv(&log).map(|bytes| write_atomic(path, &bytes));
        }
        return Err(e);
    }

    let checkpoint = snapshot(&net, timesteps);
    if let Some(path) = &outputs.checkpoint {
        save_checkpoint(&checkpoint, path)?;
    }
    Ok(TrainSummary { checkpoint, log, timesteps, trailing_success: trailing(&window), episodes, stopped_early })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig { rollout_size: 1000, ..TrainConfig::default() };
        assert!(matches!(c.validate(), Err(TrainError::Config(_))));
        let c = TrainConfig { workers: 0, ..TrainConfig::default() };
        assert!(matches!(c.validate(), Err(TrainError::Config(_))));
    }

    #[test]
    fn empty_log_has_header() {
        let text = String::from_utf8(log_csv(&[]).unwrap()).unwrap();
        assert_eq!(
            text.trim(),
            "iter,timesteps,episodes,mean_return,success_rate,mean_length,mean_elbows,policy_loss,value_loss,entropy,approx_kl,clip_frac,wall_s"
        );
    }
}
