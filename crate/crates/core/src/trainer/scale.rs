//! Reward scaling by a running estimate of the discounted-return spread.
//!
//! Episode returns here run to several hundred, and the critic shares its
//! trunk with the actor, so an unscaled value regression swamps the policy
//! gradient. Dividing rewards by the running standard deviation of the
//! per-worker discounted return keeps value targets near unit scale. The
//! environment, logged returns and reward weights are untouched.

use super::rollout::{RolloutBuffer, StepEnd};

#[derive(Clone, Debug)]
pub struct ReturnScaler {
    gamma: f64,
    /// Running discounted return per worker, carried across rollouts.
    acc: Vec<f64>,
    count: f64,
    mean: f64,
    m2: f64,
}

impl ReturnScaler {
    pub fn new(workers: usize, gamma: f64) -> Self {
        Self { gamma, acc: vec![0.0; workers], count: 0.0, mean: 0.0, m2: 0.0 }
    }

    /// Folds a rollout into the statistics. Segments are taken to be one per
    /// worker in worker order, as `collect_rollouts` assembles them.
    pub fn observe(&mut self, buffer: &RolloutBuffer) {
        assert_eq!(buffer.segments.len(), self.acc.len(), "one segment per worker");
        for (w, seg) in buffer.segments.iter().enumerate() {
            for t in seg.start..seg.start + seg.len {
                self.acc[w] = self.acc[w] * self.gamma + buffer.rewards[t];
                self.push(self.acc[w]);
                if buffer.ends[t] != StepEnd::Continue {
                    self.acc[w] = 0.0;
                }
            }
        }
    }

    // Welford update.
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    pub fn std(&self) -> f64 {
        if self.count < 2.0 {
            1.0
        } else {
            (self.m2 / self.count + 1e-8).sqrt()
        }
    }

    pub fn scale(&self, rewards: &[f64]) -> Vec<f64> {
        let s = self.std();
        rewards.iter().map(|r| r / s).collect()
    }
}
