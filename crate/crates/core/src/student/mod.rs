//! The student policy: a two-layer tanh MLP over the frozen BC policy's
//! features, its hidden state, its action distribution and the goal. It is
//! trained on fused soft targets (or on the demonstrated action alone).

mod train;

pub(crate) use train::check_compatible;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::gridworld::{Action, ActionDistribution, GoalCategory, Observation};
use crate::histpolicy::{encode, goal_onehot, PolicyParams, RecurrentState};
use crate::math;
use crate::rng;
use crate::tensor::{self, ParamFileError, Tensor, TensorSet};

pub use train::{
    grad_check, loss_and_grad, train_student, LossPoint, StudentError, StudentTrainConfig, TargetMode,
    TrainedStudent,
};

pub const DEFAULT_WIDTH: usize = 128;

const FC1_W: usize = 0;
const FC1_B: usize = 1;
const FC2_W: usize = 2;
const FC2_B: usize = 3;
const OUT_W: usize = 4;
const OUT_B: usize = 5;

/// Width of the student input for a given BC policy.
pub fn input_dim(hist: &PolicyParams) -> usize {
    hist.config().feature_dim() + hist.hidden() + 2 * Action::COUNT
}

/// Assembles `encode(obs) ++ h ++ p_sota ++ goal_onehot`, where `h` is the BC
/// policy's state after consuming `obs`.
pub fn student_input(
    hist: &PolicyParams,
    obs: &Observation,
    state: &RecurrentState,
    p_sota: &ActionDistribution,
    goal: GoalCategory,
) -> Vec<f64> {
    let mut x = encode(hist, obs);
    x.reserve(state.h.len() + 12);
    x.extend_from_slice(&state.h);
    x.extend_from_slice(p_sota.probs());
    x.extend_from_slice(&goal_onehot(goal));
    x
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudentParams {
    set: TensorSet,
}

fn shapes(input: usize, width: usize) -> Vec<(String, Vec<usize>)> {
    vec![
        ("fc1.w".into(), vec![width, input]),
        ("fc1.b".into(), vec![width]),
        ("fc2.w".into(), vec![width, width]),
        ("fc2.b".into(), vec![width]),
        ("out.w".into(), vec![Action::COUNT, width]),
        ("out.b".into(), vec![Action::COUNT]),
    ]
}

impl StudentParams {
    /// Hidden layers uniform in `±1/sqrt(fan_in)`; the output layer starts at
    /// zero so the untrained student is uniform.
    pub fn init(input: usize, width: usize, seed: u64) -> Self {
        let mut p = Self::random(input, width, seed, 1.0);
        p.set.data_mut(OUT_W).fill(0.0);
        p.set.data_mut(OUT_B).fill(0.0);
        p
    }

    pub fn random(input: usize, width: usize, seed: u64, scale: f64) -> Self {
        let mut r = rng::seeded(rng::derive(seed, 0x5354_5544));
        let fan_in = [input, input, width, width, width, width];
        let tensors = shapes(input, width)
            .into_iter()
            .zip(fan_in)
            .map(|((name, dims), f)| Tensor::uniform(&name, &dims, scale / math::sqrt(f as f64), &mut r))
            .collect();
        Self {
            set: TensorSet::new(tensors),
        }
    }

    pub fn from_tensors(set: TensorSet) -> Result<Self, ParamFileError> {
        let dims = set
            .get("fc1.w")
            .map(|t| t.dims.clone())
            .ok_or_else(|| ParamFileError::MissingTensor("fc1.w".into()))?;
        if dims.len() != 2 {
            return Err(ParamFileError::ShapeMismatch {
                name: "fc1.w".into(),
                expected: vec![DEFAULT_WIDTH, 0],
                found: dims,
            });
        }
        let set = tensor::conform(set, &shapes(dims[1], dims[0]))?;
        Ok(Self { set })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        tensor::encode(&self.set)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ParamFileError> {
        Self::from_tensors(tensor::decode(bytes)?)
    }

    pub fn input_dim(&self) -> usize {
        self.set.tensors()[FC1_W].dims[1]
    }

    pub fn width(&self) -> usize {
        self.set.tensors()[FC1_W].dims[0]
    }

    pub fn tensors(&self) -> &TensorSet {
        &self.set
    }

    pub fn tensors_mut(&mut self) -> &mut TensorSet {
        &mut self.set
    }
}

pub(crate) struct MlpTrace {
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub logits: [f64; 6],
}

pub(crate) fn mlp_trace(p: &StudentParams, x: &[f64]) -> MlpTrace {
    let w = p.width();
    let s = &p.set;
    let mut y1 = vec![0.0; w];
    math::affine(s.data(FC1_W), s.data(FC1_B), x, &mut y1);
    y1.iter_mut().for_each(|v| *v = math::tanh(*v));
    let mut y2 = vec![0.0; w];
    math::affine(s.data(FC2_W), s.data(FC2_B), &y1, &mut y2);
    y2.iter_mut().for_each(|v| *v = math::tanh(*v));
    let mut logits = [0.0; 6];
    math::affine(s.data(OUT_W), s.data(OUT_B), &y2, &mut logits);
    MlpTrace { y1, y2, logits }
}

/// Distribution for an assembled input vector.
pub fn forward_input(params: &StudentParams, x: &[f64]) -> ActionDistribution {
    ActionDistribution::from_softmax(math::softmax6(&mlp_trace(params, x).logits))
}

pub fn student_forward(
    params: &StudentParams,
    hist: &PolicyParams,
    obs: &Observation,
    state: &RecurrentState,
    p_sota: &ActionDistribution,
    goal: GoalCategory,
) -> ActionDistribution {
    forward_input(params, &student_input(hist, obs, state, p_sota, goal))
}

/// Adds the gradient of the soft cross-entropy `-sum target * ln q` at `x`
/// to `grads` and returns the loss.
pub(crate) fn accumulate_grad(p: &StudentParams, x: &[f64], target: &[f64; 6], grads: &mut TensorSet) -> f64 {
    let tr = mlp_trace(p, x);
    let q = math::softmax6(&tr.logits);
    let loss = soft_cross_entropy(&tr.logits, target);
    let mut dl = [0.0; 6];
    for i in 0..6 {
        dl[i] = q[i] - target[i];
    }
    let w = p.width();
    let s = &p.set;
    math::outer_acc(grads.data_mut(OUT_W), &dl, &tr.y2);
    add(grads.data_mut(OUT_B), &dl);
    let mut d2 = vec![0.0; w];
    math::matvec_t_acc(s.data(OUT_W), &dl, &mut d2);
    for (d, y) in d2.iter_mut().zip(&tr.y2) {
        *d *= 1.0 - y * y;
    }
    math::outer_acc(grads.data_mut(FC2_W), &d2, &tr.y1);
    add(grads.data_mut(FC2_B), &d2);
    let mut d1 = vec![0.0; w];
    math::matvec_t_acc(s.data(FC2_W), &d2, &mut d1);
    for (d, y) in d1.iter_mut().zip(&tr.y1) {
        *d *= 1.0 - y * y;
    }
    math::outer_acc(grads.data_mut(FC1_W), &d1, x);
    add(grads.data_mut(FC1_B), &d1);
    loss
}

pub(crate) fn soft_cross_entropy(logits: &[f64; 6], target: &[f64; 6]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + math::ln(logits.iter().map(|l| math::exp(l - max)).sum::<f64>());
    target
        .iter()
        .zip(logits)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, l)| t * (lse - l))
        .sum()
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}
