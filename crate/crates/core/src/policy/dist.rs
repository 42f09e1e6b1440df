//! Masked categorical distribution over the six moves.

use super::{PolicyError, NUM_ACTIONS};
use crate::Scalar;
use rand::Rng;

/// Value substituted for masked logits before normalisation.
pub const MASKED_LOGIT: f64 = -1e9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    Greedy,
}

/// Log-probabilities with masked entries at -inf.
pub fn log_softmax_masked<T: Scalar>(logits: &[T], mask: &[bool; NUM_ACTIONS]) -> Result<[T; NUM_ACTIONS], PolicyError> {
    if !mask.iter().any(|m| *m) {
        return Err(PolicyError::AllMasked);
    }
    let masked = T::lit(MASKED_LOGIT);
    let z: [T; NUM_ACTIONS] = std::array::from_fn(|i| if mask[i] { logits[i] } else { masked });
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = z.iter().map(|&v| (v - max).exp()).sum();
    let lse = max + sum.ln();
    Ok(std::array::from_fn(|i| if mask[i] { z[i] - lse } else { T::neg_infinity() }))
}

/// Softmax over the unmasked logits; masked entries are exactly zero.
pub fn masked_distribution<T: Scalar>(logits: &[T], mask: &[bool; NUM_ACTIONS]) -> Result<[T; NUM_ACTIONS], PolicyError> {
    if !mask.iter().any(|m| *m) {
        return Err(PolicyError::AllMasked);
    }
    let masked = T::lit(MASKED_LOGIT);
    let z: [T; NUM_ACTIONS] = std::array::from_fn(|i| if mask[i] { logits[i] } else { masked });
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e: [T; NUM_ACTIONS] = std::array::from_fn(|i| if mask[i] { (z[i] - max).exp() } else { T::zero() });
    let sum: T = e.iter().copied().sum();
    Ok(e.map(|v| v / sum))
}

/// Picks an action and returns it with its log-probability. Greedy ties go
/// to the lowest index.
pub fn select_action<T: Scalar>(
    logits: &[T],
    mask: &[bool; NUM_ACTIONS],
    mode: ActMode,
    rng: &mut impl Rng,
) -> Result<(usize, T), PolicyError> {
    let logp = log_softmax_masked(logits, mask)?;
    let action = match mode {
        ActMode::Greedy => {
            let mut best = None;
            for i in 0..NUM_ACTIONS {
                if mask[i] && best.is_none_or(|b: usize| logp[i] > logp[b]) {
                    best = Some(i);
                }
            }
            best.expect("at least one unmasked action")
        }
        ActMode::Sample => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = None;
            for i in (0..NUM_ACTIONS).filter(|i| mask[*i]) {
                acc += logp[i].as_f64().exp();
                pick = Some(i);
                if u < acc {
                    break;
                }
            }
            pick.expect("at least one unmasked action")
        }
    };
    Ok((action, logp[action]))
}
