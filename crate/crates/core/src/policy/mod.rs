//! Shared-trunk actor-critic.
//!
//! A stack of tanh layers feeds two linear heads: six action logits and a
//! scalar state value. Weights are stored `(in, out)` so a batch `X` of rows
//! maps to `tanh(X W + b)`.

mod checkpoint;
mod dist;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CheckpointError, CheckpointMeta};
pub use dist::{log_softmax_masked, masked_distribution, select_action, ActMode, MASKED_LOGIT};

use crate::observe::OBS_DIM;
use crate::rng::{stream, tags};
use crate::Scalar;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub const NUM_ACTIONS: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("observation has {got} entries, network expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("every action is masked")]
    AllMasked,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity = 0,
    Tanh = 1,
}

impl Activation {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self { weight: Array2::zeros((input, output)), bias: Array1::zeros(output), activation }
    }

    pub fn input(&self) -> usize {
        self.weight.nrows()
    }

    pub fn output(&self) -> usize {
        self.weight.ncols()
    }

    fn apply(&self, x: ArrayView2<T>) -> Array2<T> {
        let mut z = x.dot(&self.weight);
        z += &self.bias;
        if self.activation == Activation::Tanh {
            z.mapv_inplace(T::tanh);
        }
        z
    }
}

/// Layer widths of the trunk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetShape {
    pub input: usize,
    pub hidden: usize,
    pub depth: usize,
}

impl Default for NetShape {
    fn default() -> Self {
        Self { input: OBS_DIM, hidden: 512, depth: 4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNet<T> {
    pub trunk: Vec<Dense<T>>,
    pub actor: Dense<T>,
    pub critic: Dense<T>,
}

/// Output of a batched forward pass.
#[derive(Clone, Debug)]
pub struct BatchOutput<T> {
    pub logits: Array2<T>,
    pub values: Array1<T>,
}

/// Layer activations kept for the backward pass; `acts[0]` is the input and
/// `acts[i + 1]` the output of trunk layer `i`.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    pub acts: Vec<Array2<T>>,
}

impl<T: Scalar> PolicyNet<T> {
    pub fn zeros(shape: NetShape) -> Self {
        let mut trunk = Vec::with_capacity(shape.depth);
        let mut width = shape.input;
        for _ in 0..shape.depth {
            trunk.push(Dense::zeros(width, shape.hidden, Activation::Tanh));
            width = shape.hidden;
        }
        Self {
            trunk,
            actor: Dense::zeros(width, NUM_ACTIONS, Activation::Identity),
            critic: Dense::zeros(width, 1, Activation::Identity),
        }
    }

    /// Orthogonal initialisation: gain sqrt(2) on the trunk, 0.01 on the
    /// actor head, 1 on the critic head; zero biases.
    pub fn new(shape: NetShape, seed: u64) -> Self {
        let mut rng = stream(seed, tags::INIT, 0);
        let mut net = Self::zeros(shape);
        for layer in &mut net.trunk {
            layer.weight = orthogonal(layer.input(), layer.output(), 2f64.sqrt(), &mut rng);
        }
        net.actor.weight = orthogonal(net.actor.input(), NUM_ACTIONS, 0.01, &mut rng);
        net.critic.weight = orthogonal(net.critic.input(), 1, 1.0, &mut rng);
        net
    }

    pub fn zeros_like(&self) -> Self {
        let z = |d: &Dense<T>| Dense::zeros(d.input(), d.output(), d.activation);
        Self { trunk: self.trunk.iter().map(z).collect(), actor: z(&self.actor), critic: z(&self.critic) }
    }

    pub fn shape(&self) -> NetShape {
        NetShape {
            input: self.input_width(),
            hidden: self.trunk.last().map_or(self.input_width(), Dense::output),
            depth: self.trunk.len(),
        }
    }

    pub fn input_width(&self) -> usize {
        self.trunk.first().map_or(self.actor.input(), Dense::input)
    }

    /// All layers in canonical order: trunk, actor, critic.
    pub fn layers(&self) -> impl Iterator<Item = &Dense<T>> {
        self.trunk.iter().chain([&self.actor, &self.critic])
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense<T>> {
        self.trunk.iter_mut().chain([&mut self.actor, &mut self.critic])
    }

    /// Parameter tensors flattened row-major, weight then bias per layer.
    pub fn tensors(&self) -> Vec<&[T]> {
        self.layers()
            .flat_map(|l| {
                [l.weight.as_slice().expect("standard layout"), l.bias.as_slice().expect("standard layout")]
            })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for l in self.layers_mut() {
            out.push(l.weight.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> PolicyNet<U> {
        let c = |d: &Dense<T>| Dense {
            weight: d.weight.mapv(|v| U::lit(v.as_f64())),
            bias: d.bias.mapv(|v| U::lit(v.as_f64())),
            activation: d.activation,
        };
        PolicyNet { trunk: self.trunk.iter().map(c).collect(), actor: c(&self.actor), critic: c(&self.critic) }
    }

    fn check_width(&self, got: usize) -> Result<(), PolicyError> {
        let expected = self.input_width();
        if got == expected {
            Ok(())
        } else {
            Err(PolicyError::ShapeMismatch { expected, got })
        }
    }

    /// Logits and value for one observation.
    pub fn forward(&self, obs: &[T]) -> Result<([T; NUM_ACTIONS], T), PolicyError> {
        self.check_width(obs.len())?;
        let x = ArrayView2::from_shape((1, obs.len()), obs).expect("row vector");
        let out = self.forward_batch(x)?;
        let logits = std::array::from_fn(|i| out.logits[[0, i]]);
        Ok((logits, out.values[0]))
    }

    pub fn forward_batch(&self, x: ArrayView2<T>) -> Result<BatchOutput<T>, PolicyError> {
        self.forward_cached(x).map(|(out, _)| out)
    }

    pub fn forward_cached(&self, x: ArrayView2<T>) -> Result<(BatchOutput<T>, ForwardCache<T>), PolicyError> {
        self.check_width(x.ncols())?;
        let mut acts = Vec::with_capacity(self.trunk.len() + 1);
        acts.push(x.to_owned());
        for layer in &self.trunk {
            let next = layer.apply(acts.last().expect("non-empty").view());
            acts.push(next);
        }
        let h = acts.last().expect("non-empty").view();
        let logits = self.actor.apply(h);
        let values = self.critic.apply(h).index_axis_move(Axis(1), 0);
        Ok((BatchOutput { logits, values }, ForwardCache { acts }))
    }

    /// Parameter gradients given upstream gradients on the logits (B x 6)
    /// and values (B).
    pub fn backward(&self, cache: &ForwardCache<T>, dlogits: ArrayView2<T>, dvalues: &Array1<T>) -> PolicyNet<T> {
        let mut grads = self.zeros_like();
        let h = cache.acts.last().expect("non-empty");
        let dv = dvalues.view().insert_axis(Axis(1));

        grads.actor.weight = h.t().dot(&dlogits);
        grads.actor.bias = dlogits.sum_axis(Axis(0));
        grads.critic.weight = h.t().dot(&dv);
        grads.critic.bias = dv.sum_axis(Axis(0));

        let mut dh = dlogits.dot(&self.actor.weight.t());
        dh += &dv.dot(&self.critic.weight.t());
        for i in (0..self.trunk.len()).rev() {
            let out = &cache.acts[i + 1];
            // d tanh(z) = 1 - tanh(z)^2
            let mut dz = dh;
            ndarray::Zip::from(&mut dz).and(out).for_each(|g, &a| *g *= T::one() - a * a);
            grads.trunk[i].weight = cache.acts[i].t().dot(&dz);
            grads.trunk[i].bias = dz.sum_axis(Axis(0));
            dh = if i > 0 { dz.dot(&self.trunk[i].weight.t()) } else { Array2::zeros((0, 0)) };
        }
        grads
    }
}

/// `(rows, cols)` matrix with orthonormal columns (or rows, if wider than
/// tall) scaled by `gain`, from Gram-Schmidt on a Gaussian draw.
fn orthogonal<T: Scalar>(rows: usize, cols: usize, gain: f64, rng: &mut impl Rng) -> Array2<T> {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let mut q: Vec<Vec<f64>> = (0..short)
        .map(|_| (0..tall).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    for j in 0..short {
        for k in 0..j {
            let (done, rest) = q.split_at_mut(j);
            let proj: f64 = done[k].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
            for (x, y) in rest[0].iter_mut().zip(&done[k]) {
                *x -= proj * y;
            }
        }
        let norm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        for x in &mut q[j] {
            *x /= norm;
        }
    }
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let v = if rows >= cols { q[c][r] } else { q[r][c] };
        T::lit(v * gain)
    })
}
