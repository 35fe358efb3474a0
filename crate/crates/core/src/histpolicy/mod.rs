//! Recurrent behavior-cloning policy: per-input linear encoders feeding a GRU
//! and a softmax head. Its output distribution is the `p_sota` signal the
//! fused targets are built from.

mod bptt;
mod gradcheck;
mod train;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::gridworld::{Action, ActionDistribution, GoalCategory, Observation, DEPTH_ANGLES_DEG};
use crate::math;
use crate::rng;
use crate::tensor::{self, ParamFileError, Tensor, TensorSet};

pub use bptt::{batch_loss, batch_loss_grad, episode_loss, episode_loss_grad};
pub use gradcheck::{grad_check, GradCheckError, GradCheckReport, MAX_CHECK_EPISODES, MAX_CHECK_STEPS};
pub use train::{train_bc, train_bc_from, TrainConfig, TrainError};

/// Raw input widths: occupancy patch, gps, compass, previous action (slot 6
/// is "none"), goal one-hot and the view channels (goal sighting plus depth).
pub const PATCH_IN: usize = 121;
pub const GPS_IN: usize = 2;
pub const COMPASS_IN: usize = 1;
pub const ACTION_IN: usize = 7;
pub const GOAL_IN: usize = 6;
pub const VIEW_IN: usize = 5 + RANGE_BINS + DEPTH_ANGLES_DEG.len();
/// Thermometer code of the sighting's grid distance: bin `k` is set when the
/// distance is at most `(k + 1) * 0.25` m.
pub const RANGE_BINS: usize = 8;
pub const RAW_DIM: usize = PATCH_IN + GPS_IN + COMPASS_IN + ACTION_IN + GOAL_IN + VIEW_IN;

const RAW_WIDTHS: [usize; 6] = [PATCH_IN, GPS_IN, COMPASS_IN, ACTION_IN, GOAL_IN, VIEW_IN];
const GROUP_NAMES: [&str; 6] = ["patch", "gps", "compass", "prev_action", "goal", "view"];
const GATES: [&str; 3] = ["z", "r", "h"];

/// Tensor positions inside [`PolicyParams`]. Encoder `g` owns `2g` (weight)
/// and `2g + 1` (bias); gate `k` (z, r, h) owns `W`, `U`, `b` at
/// `GRU + 3k ..`.
pub mod idx {
    pub const GRU: usize = 12;
    pub const W_Z: usize = 12;
    pub const U_Z: usize = 13;
    pub const B_Z: usize = 14;
    pub const W_R: usize = 15;
    pub const U_R: usize = 16;
    pub const B_R: usize = 17;
    pub const W_H: usize = 18;
    pub const U_H: usize = 19;
    pub const B_H: usize = 20;
    pub const HEAD_W: usize = 21;
    pub const HEAD_B: usize = 22;
    pub const COUNT: usize = 23;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct HistConfig {
    pub d_patch: usize,
    pub d_gps: usize,
    pub d_compass: usize,
    pub d_action: usize,
    pub d_goal: usize,
    pub d_view: usize,
    pub hidden: usize,
}

impl Default for HistConfig {
    fn default() -> Self {
        Self {
            d_patch: 64,
            d_gps: 8,
            d_compass: 8,
            d_action: 8,
            d_goal: 8,
            d_view: 16,
            hidden: 64,
        }
    }
}

impl HistConfig {
    fn emb_dims(&self) -> [usize; 6] {
        [self.d_patch, self.d_gps, self.d_compass, self.d_action, self.d_goal, self.d_view]
    }

    /// Width of the encoded feature vector (the GRU input).
    pub fn feature_dim(&self) -> usize {
        self.emb_dims().iter().sum()
    }

    /// Names and shapes of every tensor, in storage order.
    pub fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::with_capacity(idx::COUNT);
        for ((name, &d), &n) in GROUP_NAMES.iter().zip(&self.emb_dims()).zip(&RAW_WIDTHS) {
            out.push((format!("{name}.w"), vec![d, n]));
            out.push((format!("{name}.b"), vec![d]));
        }
        let (x, h) = (self.feature_dim(), self.hidden);
        for g in GATES {
            out.push((format!("gru.w_{g}"), vec![h, x]));
            out.push((format!("gru.u_{g}"), vec![h, h]));
            out.push((format!("gru.b_{g}"), vec![h]));
        }
        out.push((String::from("head.w"), vec![Action::COUNT, h]));
        out.push((String::from("head.b"), vec![Action::COUNT]));
        out
    }

    fn validate(&self) -> Result<(), ParamFileError> {
        if self.emb_dims().iter().any(|&d| d == 0) || self.hidden == 0 {
            return Err(ParamFileError::ShapeMismatch {
                name: String::from("config"),
                expected: vec![1],
                found: vec![0],
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    cfg: HistConfig,
    set: TensorSet,
}

impl PolicyParams {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) everywhere except the head,
    /// which starts at zero so the initial policy is uniform.
    pub fn init(cfg: HistConfig, seed: u64) -> Self {
        let mut p = Self::random(cfg, seed, 1.0);
        p.set.data_mut(idx::HEAD_W).fill(0.0);
        p.set.data_mut(idx::HEAD_B).fill(0.0);
        p
    }

    /// Every tensor, head included, uniform in `±scale/sqrt(fan_in)`. Encoder
    /// tensors use their input width as fan-in; GRU and head tensors use the
    /// hidden width.
    pub fn random(cfg: HistConfig, seed: u64, scale: f64) -> Self {
        let mut r = rng::seeded(rng::derive(seed, 0x4849_5354));
        let tensors = cfg
            .shapes()
            .into_iter()
            .enumerate()
            .map(|(i, (name, dims))| {
                let fan_in = if i < idx::GRU { RAW_WIDTHS[i / 2] } else { cfg.hidden };
                let bound = scale / math::sqrt(fan_in as f64);
                Tensor::uniform(&name, &dims, bound, &mut r)
            })
            .collect();
        Self {
            cfg,
            set: TensorSet::new(tensors),
        }
    }

    /// Rebuilds params from named tensors, inferring the configuration from
    /// their shapes.
    pub fn from_tensors(set: TensorSet) -> Result<Self, ParamFileError> {
        let dim0 = |name: &str| -> Result<usize, ParamFileError> {
            set.get(name)
                .and_then(|t| t.dims.first().copied())
                .ok_or_else(|| ParamFileError::MissingTensor(String::from(name)))
        };
        let cfg = HistConfig {
            d_patch: dim0("patch.w")?,
            d_gps: dim0("gps.w")?,
            d_compass: dim0("compass.w")?,
            d_action: dim0("prev_action.w")?,
            d_goal: dim0("goal.w")?,
            d_view: dim0("view.w")?,
            hidden: dim0("gru.u_z")?,
        };
        cfg.validate()?;
        let set = tensor::conform(set, &cfg.shapes())?;
        Ok(Self { cfg, set })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        tensor::encode(&self.set)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ParamFileError> {
        Self::from_tensors(tensor::decode(bytes)?)
    }

    pub fn config(&self) -> &HistConfig {
        &self.cfg
    }

    pub fn tensors(&self) -> &TensorSet {
        &self.set
    }

    pub fn tensors_mut(&mut self) -> &mut TensorSet {
        &mut self.set
    }

    pub fn hidden(&self) -> usize {
        self.cfg.hidden
    }

    #[inline]
    pub(crate) fn t(&self, i: usize) -> &[f64] {
        self.set.data(i)
    }
}

/// GRU hidden state; zero at the start of every episode.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentState {
    pub h: Vec<f64>,
}

impl RecurrentState {
    pub fn zeros(hidden: usize) -> Self {
        Self { h: vec![0.0; hidden] }
    }

    pub fn for_params(params: &PolicyParams) -> Self {
        Self::zeros(params.hidden())
    }
}

/// Flattens an observation into the raw encoder inputs.
pub fn raw_inputs(obs: &Observation) -> [f64; RAW_DIM] {
    let mut raw = [0.0; RAW_DIM];
    let mut o = 0;
    for (r, &c) in raw[..PATCH_IN].iter_mut().zip(&obs.patch) {
        *r = f64::from(c);
    }
    o += PATCH_IN;
    raw[o..o + 2].copy_from_slice(&obs.gps);
    o += GPS_IN;
    raw[o] = obs.compass;
    o += COMPASS_IN;
    raw[o + obs.prev_action.map_or(Action::COUNT, Action::index)] = 1.0;
    o += ACTION_IN;
    raw[o + obs.goal.index()] = 1.0;
    o += GOAL_IN;
    if let Some(s) = obs.sighting {
        raw[o] = 1.0;
        raw[o + 1] = s.distance_m;
        raw[o + 2] = s.grid_distance_m;
        raw[o + 3] = math::cos(s.bearing_rad);
        raw[o + 4] = math::sin(s.bearing_rad);
        for k in 0..RANGE_BINS {
            if s.grid_distance_m <= 0.25 * (k + 1) as f64 + 1e-9 {
                raw[o + 5 + k] = 1.0;
            }
        }
    }
    raw[o + 5 + RANGE_BINS..o + VIEW_IN].copy_from_slice(&obs.depth);
    raw
}

/// Applies the six linear encoders to raw inputs.
pub(crate) fn encode_raw(params: &PolicyParams, raw: &[f64], x: &mut [f64]) {
    let mut ro = 0;
    let mut xo = 0;
    for (g, (&n, &d)) in RAW_WIDTHS.iter().zip(&params.cfg.emb_dims()).enumerate() {
        math::affine(
            params.t(2 * g),
            params.t(2 * g + 1),
            &raw[ro..ro + n],
            &mut x[xo..xo + d],
        );
        ro += n;
        xo += d;
    }
}

/// Concatenated linear embeddings of `obs`.
pub fn encode(params: &PolicyParams, obs: &Observation) -> Vec<f64> {
    let mut x = vec![0.0; params.cfg.feature_dim()];
    encode_raw(params, &raw_inputs(obs), &mut x);
    x
}

/// Intermediate GRU values kept for backpropagation.
#[derive(Clone, Debug)]
pub(crate) struct GruTrace {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub hh: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn gru_trace(params: &PolicyParams, x: &[f64], h: &[f64]) -> GruTrace {
    let n = params.hidden();
    let gate = |w: usize, u: usize, b: usize, hin: &[f64]| {
        let mut a = vec![0.0; n];
        math::affine(params.t(w), params.t(b), x, &mut a);
        math::matvec_acc(params.t(u), hin, &mut a);
        a
    };
    let z: Vec<f64> = gate(idx::W_Z, idx::U_Z, idx::B_Z, h).into_iter().map(math::sigmoid).collect();
    let r: Vec<f64> = gate(idx::W_R, idx::U_R, idx::B_R, h).into_iter().map(math::sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(r, h)| r * h).collect();
    let hh: Vec<f64> = gate(idx::W_H, idx::U_H, idx::B_H, &rh).into_iter().map(math::tanh).collect();
    let h_new = (0..n).map(|i| (1.0 - z[i]) * h[i] + z[i] * hh[i]).collect();
    GruTrace { z, r, hh, h: h_new }
}

pub fn gru_step(params: &PolicyParams, x: &[f64], state: &RecurrentState) -> RecurrentState {
    RecurrentState {
        h: gru_trace(params, x, &state.h).h,
    }
}

pub(crate) fn head_logits(params: &PolicyParams, h: &[f64]) -> [f64; 6] {
    let mut logits = [0.0; 6];
    math::affine(params.t(idx::HEAD_W), params.t(idx::HEAD_B), h, &mut logits);
    logits
}

/// One policy step: encode, advance the GRU, read out the distribution.
pub fn forward_step(
    params: &PolicyParams,
    state: &RecurrentState,
    obs: &Observation,
) -> (ActionDistribution, RecurrentState) {
    let next = gru_step(params, &encode(params, obs), state);
    let p = math::softmax6(&head_logits(params, &next.h));
    (ActionDistribution::from_softmax(p), next)
}

/// Goal one-hot, shared with the student's input layout.
pub fn goal_onehot(goal: GoalCategory) -> [f64; 6] {
    let mut v = [0.0; 6];
    v[goal.index()] = 1.0;
    v
}
