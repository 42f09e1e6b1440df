//! Generalised advantage estimation over worker segments.

use super::rollout::{RolloutBuffer, StepEnd};

/// Raw advantages and returns (`advantage + value`) per transition.
///
/// Terminal transitions (success or trapped) carry no bootstrap. A truncated
/// transition bootstraps from its own stored value. The last transition of a
/// segment that is still running bootstraps from the segment's stored
/// next-state value.
pub fn compute_gae(buffer: &RolloutBuffer, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    gae_with_rewards(buffer, &buffer.rewards, gamma, lambda)
}

/// [`compute_gae`] with `rewards` standing in for the stored rewards.
pub fn gae_with_rewards(buffer: &RolloutBuffer, rewards: &[f64], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), buffer.len(), "one reward per transition");
    let n = buffer.len();
    let mut adv = vec![0.0; n];
    for seg in &buffer.segments {
        let mut acc = 0.0;
        for t in (seg.start..seg.start + seg.len).rev() {
            let v = buffer.values[t];
            let (next_v, carry) = match buffer.ends[t] {
                StepEnd::Terminal => (0.0, 0.0),
                StepEnd::Truncated => (v, 0.0),
                StepEnd::Continue if t + 1 == seg.start + seg.len => (seg.bootstrap, 1.0),
                StepEnd::Continue => (buffer.values[t + 1], 1.0),
            };
            let delta = rewards[t] + gamma * next_v - v;
            acc = delta + gamma * lambda * carry * acc;
            adv[t] = acc;
        }
    }
    let returns = adv.iter().zip(&buffer.values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to zero mean and unit variance. A constant input maps
/// to zeros.
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = 1.0 / (var.sqrt() + 1e-8);
    for v in values {
        *v = (*v - mean) * scale;
    }
}
