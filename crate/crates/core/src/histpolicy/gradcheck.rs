//! Central finite-difference check of the BPTT gradient.

use alloc::string::String;
use alloc::vec::Vec;

use super::{batch_loss, batch_loss_grad, PolicyParams};
use crate::expert::DemoStep;

pub const MAX_CHECK_EPISODES: usize = 3;
pub const MAX_CHECK_STEPS: usize = 10;
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GradCheckError {
    #[error("grad check batch has no steps")]
    Empty,
    #[error("grad check takes at most {MAX_CHECK_EPISODES} episodes, got {0}")]
    TooManyEpisodes(usize),
    #[error("grad check episodes are limited to {MAX_CHECK_STEPS} steps, got {0}")]
    EpisodeTooLong(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Worst relative error per tensor, in storage order.
    pub per_tensor: Vec<(String, f64)>,
    pub tensors_checked: usize,
    pub tensors_total: usize,
    pub elements_checked: usize,
}

pub(crate) fn rel_error(ga: f64, gn: f64) -> f64 {
    (ga - gn).abs() / ga.abs().max(gn.abs()).max(1e-8)
}

/// Compares every analytic gradient entry with a central difference of the
/// mean BC loss.
pub fn grad_check(params: &PolicyParams, episodes: &[&[DemoStep]]) -> Result<GradCheckReport, GradCheckError> {
    if episodes.len() > MAX_CHECK_EPISODES {
        return Err(GradCheckError::TooManyEpisodes(episodes.len()));
    }
    if let Some(e) = episodes.iter().find(|e| e.len() > MAX_CHECK_STEPS) {
        return Err(GradCheckError::EpisodeTooLong(e.len()));
    }
    if episodes.iter().all(|e| e.is_empty()) {
        return Err(GradCheckError::Empty);
    }
    let mut grads = params.tensors().zeros_like();
    batch_loss_grad(params, episodes, &mut grads);

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        per_tensor: Vec::new(),
        tensors_checked: 0,
        tensors_total: params.tensors().len(),
        elements_checked: 0,
    };
    for ti in 0..params.tensors().len() {
        let mut worst: f64 = 0.0;
        for k in 0..params.tensors().data(ti).len() {
            let orig = params.tensors().data(ti)[k];
            probe.tensors_mut().data_mut(ti)[k] = orig + FD_STEP;
            let up = batch_loss(&probe, episodes);
            probe.tensors_mut().data_mut(ti)[k] = orig - FD_STEP;
            let down = batch_loss(&probe, episodes);
            probe.tensors_mut().data_mut(ti)[k] = orig;
            let gn = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_error(grads.data(ti)[k], gn));
            report.elements_checked += 1;
        }
        report.max_rel_error = report.max_rel_error.max(worst);
        report.per_tensor.push((params.tensors().tensors()[ti].name.clone(), worst));
        report.tensors_checked += 1;
    }
    Ok(report)
}
