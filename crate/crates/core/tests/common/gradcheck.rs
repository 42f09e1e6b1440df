//! Central finite differences against the analytic PPO gradient.

use ndarray::Array2;
use pipelayout::policy::{NetShape, PolicyNet, NUM_ACTIONS};
use pipelayout::trainer::{ppo_loss, ppo_loss_and_grad, Minibatch, PpoCoefs};
use rand::Rng;

const H: f64 = 1e-5;

fn minibatch(net: &PolicyNet<f64>, seed: u64, b: usize) -> Minibatch<f64> {
    let mut rng = super::rng(seed);
    let obs = Array2::from_shape_fn((b, 66), |_| rng.random_range(-1.0..1.0));
    let out = net.forward_batch(obs.view()).unwrap();
    let mut masks = Vec::new();
    let mut actions = Vec::new();
    let mut old = Vec::new();
    for i in 0..b {
        let mut m = [false; NUM_ACTIONS];
        while !m.iter().any(|x| *x) {
            m = std::array::from_fn(|_| rng.random_bool(0.7));
        }
        let allowed: Vec<usize> = (0..NUM_ACTIONS).filter(|j| m[*j]).collect();
        let a = allowed[rng.random_range(0..allowed.len())];
        let lp = pipelayout::policy::log_softmax_masked(out.logits.row(i).as_slice().unwrap(), &m).unwrap();
        // Perturb the behaviour log-prob so some rows sit outside the clip band.
        old.push(lp[a] + rng.random_range(-0.4..0.4));
        masks.push(m);
        actions.push(a);
    }
    Minibatch {
        obs,
        actions,
        masks,
        old_log_probs: old,
        advantages: (0..b).map(|_| rng.random_range(-2.0..2.0)).collect(),
        returns: (0..b).map(|_| rng.random_range(-3.0..3.0)).collect(),
    }
}

/// Relative L2 error between the analytic gradient and central finite
/// differences, on a width-16 net with sharpened actor weights.
pub fn relative_error(coefs: PpoCoefs, seed: u64) -> f64 {
    let shape = NetShape { input: 66, hidden: 16, depth: 2 };
    let mut net = PolicyNet::<f64>::new(shape, seed);
    // Larger actor weights than the init gain give non-trivial policies.
    net.actor.weight.mapv_inplace(|w| w * 100.0);
    let mb = minibatch(&net, seed + 1, 12);
    let (_, grads) = ppo_loss_and_grad(&net, &mb, coefs).unwrap();

    let analytic: Vec<f64> = grads.tensors().iter().flat_map(|t| t.iter().copied()).collect();
    let mut numeric = Vec::with_capacity(analytic.len());
    let n_tensors = net.tensors().len();
    for t in 0..n_tensors {
        let len = net.tensors()[t].len();
        for i in 0..len {
            let orig = net.tensors()[t][i];
            net.tensors_mut()[t][i] = orig + H;
            let up = ppo_loss(&net, &mb, coefs).unwrap().total;
            net.tensors_mut()[t][i] = orig - H;
            let down = ppo_loss(&net, &mb, coefs).unwrap().total;
            net.tensors_mut()[t][i] = orig;
            numeric.push((up - down) / (2.0 * H));
        }
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
    diff / scale
}
