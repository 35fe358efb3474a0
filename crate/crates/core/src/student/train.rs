use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{accumulate_grad, input_dim, soft_cross_entropy, mlp_trace, student_input, StudentParams, DEFAULT_WIDTH};
use crate::fusion::TargetRecord;
use crate::gridworld::ActionDistribution;
use crate::histpolicy::{forward_step, PolicyParams, RecurrentState};
use crate::optim::{clip_global_norm, Adam};
use crate::rng;
use crate::tensor::TensorSet;

/// Which label the student is trained on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TargetMode {
    /// The fused, collision-masked target.
    #[default]
    Fused,
    /// A one-hot of the demonstrated action.
    Direct,
    /// The fused target built without collision masking.
    FusedNomask,
}

impl TargetMode {
    pub const ALL: [TargetMode; 3] = [TargetMode::Fused, TargetMode::Direct, TargetMode::FusedNomask];

    pub fn label(self) -> &'static str {
        match self {
            TargetMode::Fused => "fused",
            TargetMode::Direct => "direct",
            TargetMode::FusedNomask => "fused_nomask",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct StudentTrainConfig {
    pub target_mode: TargetMode,
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub width: usize,
    pub clip_norm: f64,
    /// Iterations averaged into each loss-curve point.
    pub log_every: usize,
    pub seed: u64,
}

impl Default for StudentTrainConfig {
    fn default() -> Self {
        Self {
            target_mode: TargetMode::Fused,
            learning_rate: 1e-3,
            iterations: 20_000,
            batch_size: 6,
            width: DEFAULT_WIDTH,
            clip_norm: 5.0,
            log_every: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StudentError {
    #[error("invalid student config: {0}")]
    Config(&'static str),
    #[error("target dataset is empty")]
    Empty,
    #[error("target dataset is out of order at episode {episode}, step {t}")]
    Order { episode: String, t: usize },
    #[error("fused_nomask training needs targets built without collision masking (episode {episode}, step {t})")]
    MaskMode { episode: String, t: usize },
    #[error("student expects {expected} inputs but the BC policy provides {found}")]
    Incompatible { expected: usize, found: usize },
    #[error("non-finite loss at iteration {iteration}")]
    NonFinite { iteration: usize },
}

/// Mean training loss and mean target entropy over one logging window. The
/// loss can never fall below the entropy.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossPoint {
    pub iteration: usize,
    pub loss: f64,
    pub target_entropy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedStudent {
    pub params: StudentParams,
    pub loss_curve: Vec<LossPoint>,
}

impl StudentTrainConfig {
    pub fn validate(&self) -> Result<(), StudentError> {
        if self.batch_size == 0 {
            return Err(StudentError::Config("batch_size must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(StudentError::Config("learning_rate must be > 0"));
        }
        if self.width == 0 {
            return Err(StudentError::Config("width must be >= 1"));
        }
        if self.log_every == 0 {
            return Err(StudentError::Config("log_every must be >= 1"));
        }
        Ok(())
    }
}

/// Replays the frozen BC policy over each episode in the dataset and returns
/// the flattened student inputs (one row per record) and the labels.
fn prepare(
    records: &[TargetRecord],
    hist: &PolicyParams,
    mode: TargetMode,
) -> Result<(Vec<f64>, Vec<[f64; 6]>), StudentError> {
    let dim = input_dim(hist);
    let mut inputs = Vec::with_capacity(records.len() * dim);
    let mut labels = Vec::with_capacity(records.len());
    let mut state = RecurrentState::for_params(hist);
    let mut prev: Option<&TargetRecord> = None;
    for r in records {
        let continues = prev.is_some_and(|p| p.episode_id == r.episode_id && p.t + 1 == r.t);
        if !continues {
            if r.t != 0 {
                return Err(StudentError::Order {
                    episode: r.episode_id.clone(),
                    t: r.t,
                });
            }
            state = RecurrentState::for_params(hist);
        }
        if mode == TargetMode::FusedNomask && !r.colliding.is_empty() {
            return Err(StudentError::MaskMode {
                episode: r.episode_id.clone(),
                t: r.t,
            });
        }
        let (p_sota, next) = forward_step(hist, &state, &r.obs);
        state = next;
        inputs.extend(student_input(hist, &r.obs, &state, &p_sota, r.obs.goal));
        labels.push(match mode {
            TargetMode::Direct => *ActionDistribution::onehot(r.action).probs(),
            TargetMode::Fused | TargetMode::FusedNomask => *r.target.probs(),
        });
        prev = Some(r);
    }
    Ok((inputs, labels))
}

fn entropy(t: &[f64; 6]) -> f64 {
    t.iter().filter(|&&p| p > 0.0).map(|&p| -p * libm::log(p)).sum()
}

/// Mean soft cross-entropy over `batch` (pairs of input row and label) and
/// its gradient, written to `grads`.
pub fn loss_and_grad(params: &StudentParams, batch: &[(&[f64], &[f64; 6])], grads: &mut TensorSet) -> f64 {
    grads.fill_zero();
    let mut loss = 0.0;
    for (x, t) in batch {
        loss += accumulate_grad(params, x, t, grads);
    }
    let n = batch.len().max(1) as f64;
    grads.scale(1.0 / n);
    loss / n
}

fn mean_loss(params: &StudentParams, batch: &[(&[f64], &[f64; 6])]) -> f64 {
    batch
        .iter()
        .map(|(x, t)| soft_cross_entropy(&mlp_trace(params, x).logits, t))
        .sum::<f64>()
        / batch.len().max(1) as f64
}

/// Central-difference check (step 1e-5) of every gradient entry; returns the
/// largest `|g_a - g_n| / max(|g_a|, |g_n|, 1e-8)`.
pub fn grad_check(params: &StudentParams, batch: &[(&[f64], &[f64; 6])]) -> f64 {
    const H: f64 = 1e-5;
    let mut grads = params.tensors().zeros_like();
    loss_and_grad(params, batch, &mut grads);
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for ti in 0..params.tensors().len() {
        for k in 0..params.tensors().data(ti).len() {
            let orig = params.tensors().data(ti)[k];
            probe.tensors_mut().data_mut(ti)[k] = orig + H;
            let up = mean_loss(&probe, batch);
            probe.tensors_mut().data_mut(ti)[k] = orig - H;
            let down = mean_loss(&probe, batch);
            probe.tensors_mut().data_mut(ti)[k] = orig;
            let gn = (up - down) / (2.0 * H);
            let ga = grads.data(ti)[k];
            worst = worst.max((ga - gn).abs() / ga.abs().max(gn.abs()).max(1e-8));
        }
    }
    worst
}

/// Trains a fresh student on `records`; the BC policy is only read.
pub fn train_student(
    records: &[TargetRecord],
    hist: &PolicyParams,
    cfg: &StudentTrainConfig,
) -> Result<TrainedStudent, StudentError> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(StudentError::Empty);
    }
    let dim = input_dim(hist);
    let (inputs, labels) = prepare(records, hist, cfg.target_mode)?;
    let mut params = StudentParams::init(dim, cfg.width, cfg.seed);
    let mut opt = Adam::new(params.tensors(), cfg.learning_rate);
    let mut grads = params.tensors().zeros_like();
    let mut r = rng::seeded(rng::derive(cfg.seed, 0x4241_5443));
    let mut curve = Vec::new();
    let (mut win_loss, mut win_ent, mut win_n) = (0.0, 0.0, 0usize);
    let mut batch: Vec<(&[f64], &[f64; 6])> = Vec::with_capacity(cfg.batch_size);

    for it in 0..cfg.iterations {
        batch.clear();
        for _ in 0..cfg.batch_size {
            let i = r.gen_range(0..labels.len());
            batch.push((&inputs[i * dim..(i + 1) * dim], &labels[i]));
        }
        let loss = loss_and_grad(&params, &batch, &mut grads);
        if !loss.is_finite() || !grads.all_finite() {
            return Err(StudentError::NonFinite { iteration: it });
        }
        clip_global_norm(&mut grads, cfg.clip_norm);
        opt.step(params.tensors_mut(), &grads);

        win_loss += loss;
        win_ent += batch.iter().map(|(_, t)| entropy(t)).sum::<f64>() / batch.len() as f64;
        win_n += 1;
        if win_n == cfg.log_every || it + 1 == cfg.iterations {
            curve.push(LossPoint {
                iteration: it + 1,
                loss: win_loss / win_n as f64,
                target_entropy: win_ent / win_n as f64,
            });
            (win_loss, win_ent, win_n) = (0.0, 0.0, 0);
        }
    }
    Ok(TrainedStudent {
        params,
        loss_curve: curve,
    })
}

/// Checks that a student was built for this BC policy.
pub(crate) fn check_compatible(student: &StudentParams, hist: &PolicyParams) -> Result<(), StudentError> {
    let found = input_dim(hist);
    if student.input_dim() != found {
        return Err(StudentError::Incompatible {
            expected: student.input_dim(),
            found,
        });
    }
    Ok(())
}
