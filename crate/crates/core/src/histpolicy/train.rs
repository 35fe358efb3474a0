use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{batch_loss_grad, HistConfig, PolicyParams};
use crate::expert::{DemoStep, DemonstrationRecord};
use crate::optim::{clip_global_norm, Adam};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_episodes: usize,
    pub clip_norm: f64,
    pub seed: u64,
    pub model: HistConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 12,
            batch_episodes: 8,
            clip_norm: 5.0,
            seed: 0,
            model: HistConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("training corpus has no steps")]
    EmptyCorpus,
    #[error("invalid training config: {0}")]
    Config(&'static str),
    #[error("non-finite loss at epoch {epoch}, optimizer step {step}")]
    NonFinite { epoch: usize, step: usize },
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning_rate must be > 0"));
        }
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be >= 1"));
        }
        if self.batch_episodes == 0 {
            return Err(TrainError::Config("batch_episodes must be >= 1"));
        }
        if !(self.clip_norm >= 0.0) {
            return Err(TrainError::Config("clip_norm must be >= 0"));
        }
        Ok(())
    }
}

/// Trains from a fresh initialization seeded by `cfg.seed`. Returns the final
/// params and the mean training loss of each epoch.
pub fn train_bc(corpus: &[DemonstrationRecord], cfg: &TrainConfig) -> Result<(PolicyParams, Vec<f64>), TrainError> {
    let init = PolicyParams::init(cfg.model, cfg.seed);
    train_bc_from(init, corpus, cfg, |_, _| {})
}

/// Continues training `params`; `on_epoch(epoch, mean_loss)` fires after each
/// epoch. `cfg.model` is ignored in favour of the shapes of `params`.
pub fn train_bc_from(
    mut params: PolicyParams,
    corpus: &[DemonstrationRecord],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(PolicyParams, Vec<f64>), TrainError> {
    cfg.validate()?;
    let episodes: Vec<&[DemoStep]> = corpus
        .iter()
        .map(|r| r.steps.as_slice())
        .filter(|s| !s.is_empty())
        .collect();
    if episodes.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut order: Vec<usize> = (0..episodes.len()).collect();
    let mut shuffle_rng = rng::seeded(rng::derive(cfg.seed, 0x5348_5546));
    let mut opt = Adam::new(params.tensors(), cfg.learning_rate);
    let mut grads = params.tensors().zeros_like();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut batch: Vec<&[DemoStep]> = Vec::with_capacity(cfg.batch_episodes);
    let mut step = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut steps_sum) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_episodes) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| episodes[i]));
            let (loss, n) = batch_loss_grad(&params, &batch, &mut grads);
            if !loss.is_finite() || !grads.all_finite() {
                return Err(TrainError::NonFinite { epoch, step });
            }
            clip_global_norm(&mut grads, cfg.clip_norm);
            opt.step(params.tensors_mut(), &grads);
            loss_sum += loss * n as f64;
            steps_sum += n;
            step += 1;
        }
        let mean = loss_sum / steps_sum as f64;
        curve.push(mean);
        on_epoch(epoch, mean);
    }
    Ok((params, curve))
}
