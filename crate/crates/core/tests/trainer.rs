mod common;

use common::rng;
use pipelayout::mdp::RewardWeights;
use pipelayout::observe::FeatureMask;
use pipelayout::policy::{log_softmax_masked, write_checkpoint, NetShape, PolicyNet};
use pipelayout::trainer::{
    collect_rollouts, compute_gae, ppo_loss, train, Minibatch, PpoCoefs, ReturnScaler, RolloutBuffer, Segment,
    StepEnd, TrainConfig, TrainOutputs, Worker,
};
use pipelayout::SceneConfig;
use proptest::prelude::*;
use rand::Rng;

fn small_net(seed: u64) -> PolicyNet<f64> {
    PolicyNet::new(NetShape { input: 66, hidden: 16, depth: 2 }, seed)
}

fn small_config(workers: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        total_timesteps: 3 * 256,
        workers,
        rollout_size: 256,
        minibatch: 64,
        epochs: 2,
        seed,
        scene_config: SceneConfig::with_dims([8, 8, 6], [12, 12, 8]),
        net_shape: NetShape { input: 66, hidden: 16, depth: 2 },
        ..TrainConfig::default()
    }
}

fn random_buffer(r: &mut impl Rng) -> RolloutBuffer {
    let mut b = RolloutBuffer::default();
    for _ in 0..r.random_range(1..5) {
        let start = b.rewards.len();
        let len = r.random_range(1..30);
        for _ in 0..len {
            b.actions.push(0);
            b.rewards.push(r.random_range(-10.0..10.0));
            b.values.push(r.random_range(-5.0..5.0));
            b.ends.push(match r.random_range(0..10) {
                0 => StepEnd::Terminal,
                1 => StepEnd::Truncated,
                _ => StepEnd::Continue,
            });
        }
        b.segments.push(Segment { start, len, bootstrap: r.random_range(-5.0..5.0) });
    }
    b
}

/// Advantage as an explicit sum of discounted TD errors, truncated at the
/// first episode end or the segment end.
fn gae_oracle(b: &RolloutBuffer, gamma: f64, lambda: f64) -> Vec<f64> {
    let mut out = vec![0.0; b.rewards.len()];
    for seg in &b.segments {
        let end = seg.start + seg.len;
        let delta = |k: usize| {
            let next = match b.ends[k] {
                StepEnd::Terminal => 0.0,
                StepEnd::Truncated => b.values[k],
                StepEnd::Continue if k + 1 == end => seg.bootstrap,
                StepEnd::Continue => b.values[k + 1],
            };
            b.rewards[k] + gamma * next - b.values[k]
        };
        for t in seg.start..end {
            let mut sum = 0.0;
            for k in t..end {
                sum += (gamma * lambda).powi((k - t) as i32) * delta(k);
                if b.ends[k] != StepEnd::Continue {
                    break;
                }
            }
            out[t] = sum;
        }
    }
    out
}

proptest! {
    #[test]
    fn gae_matches_double_loop(seed in any::<u64>(), gamma in 0.0f64..=1.0, lambda in 0.0f64..=1.0) {
        let b = random_buffer(&mut rng(seed));
        let (adv, ret) = compute_gae(&b, gamma, lambda);
        let want = gae_oracle(&b, gamma, lambda);
        for t in 0..adv.len() {
            prop_assert!((adv[t] - want[t]).abs() < 1e-9);
            prop_assert!((ret[t] - (want[t] + b.values[t])).abs() < 1e-9);
        }
    }

    #[test]
    fn scaler_matches_population_std(seed in any::<u64>(), gamma in 0.5f64..1.0) {
        let b = random_buffer(&mut rng(seed));
        let mut scaler = ReturnScaler::new(b.segments.len(), gamma);
        scaler.observe(&b);
        let mut seen = Vec::new();
        for seg in &b.segments {
            let mut acc = 0.0;
            for t in seg.start..seg.start + seg.len {
                acc = acc * gamma + b.rewards[t];
                seen.push(acc);
                if b.ends[t] != StepEnd::Continue {
                    acc = 0.0;
                }
            }
        }
        let n = seen.len() as f64;
        let want = if seen.len() < 2 {
            1.0
        } else {
            let mean = seen.iter().sum::<f64>() / n;
            (seen.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n + 1e-8).sqrt()
        };
        prop_assert!((scaler.std() - want).abs() < 1e-9 * want.max(1.0));
    }
}

#[test]
fn unbounded_clip_is_plain_importance_weighting() {
    let net = small_net(3);
    let mut r = rng(5);
    let b = 16;
    let obs = ndarray::Array2::from_shape_fn((b, 66), |_| r.random_range(-1.0..1.0));
    let out = net.forward_batch(obs.view()).unwrap();
    let masks: Vec<[bool; 6]> = (0..b).map(|i| std::array::from_fn(|j| j == i % 6 || r.random_bool(0.5))).collect();
    let actions: Vec<usize> = (0..b).map(|i| i % 6).collect();
    let old: Vec<f64> = (0..b).map(|_| r.random_range(-3.0..-0.1)).collect();
    let adv: Vec<f64> = (0..b).map(|_| r.random_range(-2.0..2.0)).collect();
    let mb = Minibatch { obs, actions: actions.clone(), masks: masks.clone(), old_log_probs: old.clone(), advantages: adv.clone(), returns: vec![0.0; b] };
    let loss = ppo_loss(&net, &mb, PpoCoefs { clip: f64::INFINITY, value_coef: 0.0, entropy_coef: 0.0 }).unwrap();
    let want = -(0..b)
        .map(|i| {
            let lp = log_softmax_masked(out.logits.row(i).as_slice().unwrap(), &masks[i]).unwrap();
            (lp[actions[i]] - old[i]).exp() * adv[i]
        })
        .sum::<f64>()
        / b as f64;
    assert!((loss.policy - want).abs() < 1e-12);
    assert!((loss.total - want).abs() < 1e-12);
    assert_eq!(loss.clip_frac, 0.0);
}

#[test]
fn entropy_is_bounded_by_legal_actions() {
    let mut net = small_net(8);
    net.actor.weight.mapv_inplace(|w| w * 50.0);
    let mut r = rng(2);
    for legal in 1..=6 {
        let obs = ndarray::Array2::from_shape_fn((8, 66), |_| r.random_range(-1.0..1.0));
        let mask: [bool; 6] = std::array::from_fn(|j| j < legal);
        let mb = Minibatch { obs, actions: vec![0; 8], masks: vec![mask; 8], old_log_probs: vec![0.0; 8], advantages: vec![0.0; 8], returns: vec![0.0; 8] };
        let loss = ppo_loss(&net, &mb, PpoCoefs { clip: 0.2, value_coef: 0.0, entropy_coef: 1.0 }).unwrap();
        assert!(loss.entropy >= 0.0 && loss.entropy <= (legal as f64).ln() + 1e-12);
    }
}

fn workers(count: usize, seed: u64, config: &SceneConfig) -> Vec<Worker> {
    (0..count).map(|w| Worker::new(w, seed, config, RewardWeights::default(), FeatureMask::NONE).unwrap()).collect()
}

#[test]
fn rollouts_respect_masks_and_policy() {
    let config = SceneConfig::with_dims([8, 8, 6], [12, 12, 8]);
    let net = small_net(1);
    let mut ws = workers(3, 4, &config);
    let b = collect_rollouts(&net, &mut ws, 300).unwrap();
    assert_eq!(b.len(), 300);
    assert_eq!(b.segments.iter().map(|s| s.len).collect::<Vec<_>>(), vec![100, 100, 100]);
    for t in 0..b.len() {
        assert!(b.masks[t][b.actions[t]]);
        let (logits, value) = net.forward(b.obs_row(t)).unwrap();
        let lp = log_softmax_masked(&logits, &b.masks[t]).unwrap();
        assert!((lp[b.actions[t]] - b.log_probs[t]).abs() < 1e-9);
        assert!((value - b.values[t]).abs() < 1e-9);
    }
    let finished: usize = b.ends.iter().filter(|e| **e != StepEnd::Continue).count();
    assert_eq!(finished, b.episodes.len());
}

#[test]
fn worker_streams_are_independent_of_the_pool() {
    let config = SceneConfig::with_dims([8, 8, 6], [12, 12, 8]);
    let net = small_net(1);
    let pooled = collect_rollouts(&net, &mut workers(4, 9, &config), 4 * 40).unwrap();
    for w in 0..4 {
        let mut alone = vec![Worker::new(w, 9, &config, RewardWeights::default(), FeatureMask::NONE).unwrap()];
        let solo = collect_rollouts(&net, &mut alone, 40).unwrap();
        let seg = pooled.segments[w];
        let range = seg.start..seg.start + seg.len;
        assert_eq!(&pooled.actions[range.clone()], &solo.actions[..]);
        assert_eq!(&pooled.rewards[range.clone()], &solo.rewards[..]);
        assert_eq!(&pooled.obs[range.start * 66..range.end * 66], &solo.obs[..]);
        assert!((seg.bootstrap - solo.segments[0].bootstrap).abs() < 1e-12);
    }
}

#[test]
fn single_worker_training_is_byte_identical() {
    let config = small_config(1, 17);
    let a = train::<f64>(&config, &TrainOutputs::default()).unwrap();
    let b = train::<f64>(&config, &TrainOutputs::default()).unwrap();
    assert_eq!(write_checkpoint(&a.checkpoint), write_checkpoint(&b.checkpoint));
    assert_eq!(a.timesteps, 768);
    assert_eq!(a.log.len(), 3);
    assert_eq!(a.log.iter().map(|r| r.timesteps).collect::<Vec<_>>(), vec![256, 512, 768]);
}

#[test]
fn training_writes_checkpoint_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let outputs = TrainOutputs { checkpoint: Some(dir.path().join("m.ckpt")), log: Some(dir.path().join("log.csv")) };
    let s = train::<f32>(&small_config(2, 3), &outputs).unwrap();
    let bytes = std::fs::read(dir.path().join("m.ckpt")).unwrap();
    assert_eq!(bytes, write_checkpoint(&s.checkpoint));
    let log = std::fs::read_to_string(dir.path().join("log.csv")).unwrap();
    assert_eq!(log.lines().count(), 4);
    assert!(log.starts_with("iter,timesteps,"));
}
