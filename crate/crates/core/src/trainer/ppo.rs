//! Clipped-surrogate loss, its analytic gradient, and the Adam optimiser.
//!
//! The minimised loss over a minibatch of `B` rows is
//!
//! ```text
//! L = -mean(min(rho*A, clip(rho, 1-eps, 1+eps)*A))
//!     + value_coef * mean((R - v)^2)
//!     - entropy_coef * mean(H)
//! ```
//!
//! with `rho = exp(log p(a) - log p_old(a))` under the masked softmax.

use crate::policy::{log_softmax_masked, PolicyError, PolicyNet, NUM_ACTIONS};
use crate::Scalar;
use ndarray::{Array1, Array2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PpoCoefs {
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

#[derive(Clone, Debug)]
pub struct Minibatch<T> {
    pub obs: Array2<T>,
    pub actions: Vec<usize>,
    pub masks: Vec<[bool; NUM_ACTIONS]>,
    pub old_log_probs: Vec<T>,
    pub advantages: Vec<T>,
    pub returns: Vec<T>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
}

fn loss_impl<T: Scalar>(
    net: &PolicyNet<T>,
    mb: &Minibatch<T>,
    coefs: PpoCoefs,
    want_grad: bool,
) -> Result<(LossParts, Option<PolicyNet<T>>), PolicyError> {
    let (out, cache) = net.forward_cached(mb.obs.view())?;
    let b = mb.actions.len();
    let inv_b = T::one() / T::lit(b as f64);
    let eps = T::lit(coefs.clip);
    let (lo, hi) = (T::one() - eps, T::one() + eps);
    let (cv, ce) = (T::lit(coefs.value_coef), T::lit(coefs.entropy_coef));

    let mut dlogits = Array2::<T>::zeros((b, NUM_ACTIONS));
    let mut dvalues = Array1::<T>::zeros(b);
    let (mut surr_sum, mut vloss_sum, mut ent_sum, mut kl_sum) = (T::zero(), T::zero(), T::zero(), T::zero());
    let mut clipped = 0usize;

    for i in 0..b {
        let logits = out.logits.row(i);
        let mask = &mb.masks[i];
        let logp = log_softmax_masked(logits.as_slice().expect("row-major"), mask)?;
        let p: [T; NUM_ACTIONS] = std::array::from_fn(|j| if mask[j] { logp[j].exp() } else { T::zero() });
        let entropy = -(0..NUM_ACTIONS).filter(|&j| mask[j]).map(|j| p[j] * logp[j]).sum::<T>();

        let a = mb.actions[i];
        let adv = mb.advantages[i];
        let log_ratio = logp[a] - mb.old_log_probs[i];
        let rho = log_ratio.exp();
        let unclipped = rho * adv;
        let clipped_term = rho.max(lo).min(hi) * adv;
        let surr = unclipped.min(clipped_term);
        // The clipped branch is constant in the parameters.
        let surr_active = unclipped <= clipped_term;
        if (rho - T::one()).abs() > eps {
            clipped += 1;
        }
        let err = out.values[i] - mb.returns[i];

        surr_sum += surr;
        vloss_sum += err * err;
        ent_sum += entropy;
        kl_sum += (rho - T::one()) - log_ratio;

        if want_grad {
            let g_surr = if surr_active { adv * rho } else { T::zero() };
            for j in 0..NUM_ACTIONS {
                if !mask[j] {
                    continue;
                }
                let dlogp_a = if j == a { T::one() - p[j] } else { -p[j] };
                let dent = -p[j] * (logp[j] + entropy);
                dlogits[[i, j]] = (-g_surr * dlogp_a - ce * dent) * inv_b;
            }
            dvalues[i] = T::lit(2.0) * cv * err * inv_b;
        }
    }

    let policy = -(surr_sum * inv_b);
    let value = vloss_sum * inv_b;
    let entropy = ent_sum * inv_b;
    let total = policy + cv * value - ce * entropy;
    let parts = LossParts {
        total: total.as_f64(),
        policy: policy.as_f64(),
        value: value.as_f64(),
        entropy: entropy.as_f64(),
        approx_kl: (kl_sum * inv_b).as_f64(),
        clip_frac: clipped as f64 / b as f64,
    };
    let grads = want_grad.then(|| net.backward(&cache, dlogits.view(), &dvalues));
    Ok((parts, grads))
}

pub fn ppo_loss<T: Scalar>(net: &PolicyNet<T>, mb: &Minibatch<T>, coefs: PpoCoefs) -> Result<LossParts, PolicyError> {
    loss_impl(net, mb, coefs, false).map(|(l, _)| l)
}

pub fn ppo_loss_and_grad<T: Scalar>(
    net: &PolicyNet<T>,
    mb: &Minibatch<T>,
    coefs: PpoCoefs,
) -> Result<(LossParts, PolicyNet<T>), PolicyError> {
    loss_impl(net, mb, coefs, true).map(|(l, g)| (l, g.expect("gradient requested")))
}

/// Global L2 norm over every gradient tensor.
pub fn grad_norm<T: Scalar>(grads: &PolicyNet<T>) -> f64 {
    grads.tensors().iter().flat_map(|t| t.iter()).map(|g| g.as_f64() * g.as_f64()).sum::<f64>().sqrt()
}

/// Rescales `grads` so its global norm is at most `max_norm`.
pub fn clip_grad_norm<T: Scalar>(grads: &mut PolicyNet<T>, max_norm: f64) -> f64 {
    let norm = grad_norm(grads);
    if norm > max_norm {
        let s = T::lit(max_norm / (norm + 1e-12));
        for t in grads.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= s);
        }
    }
    norm
}

#[derive(Clone, Debug)]
pub struct Adam<T> {
    m: PolicyNet<T>,
    v: PolicyNet<T>,
    steps: i32,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(net: &PolicyNet<T>, learning_rate: f64) -> Self {
        Self { m: net.zeros_like(), v: net.zeros_like(), steps: 0, learning_rate, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// One descent step on `net` along `grads`.
    pub fn step(&mut self, net: &mut PolicyNet<T>, grads: &PolicyNet<T>) {
        self.steps += 1;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let c1 = T::lit(1.0 - self.beta1.powi(self.steps));
        let c2 = T::lit(1.0 - self.beta2.powi(self.steps));
        let lr = T::lit(self.learning_rate);
        let eps = T::lit(self.eps);
        let params = net.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in params.into_iter().zip(grads.tensors()).zip(ms).zip(vs) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
