//! Full-episode backpropagation through time for the BC cross-entropy loss.

use alloc::vec;
use alloc::vec::Vec;

use super::{encode_raw, gru_trace, head_logits, idx, raw_inputs, GruTrace, PolicyParams, RAW_DIM, RAW_WIDTHS};
use crate::expert::DemoStep;
use crate::math;
use crate::tensor::TensorSet;

struct StepCache {
    raw: [f64; RAW_DIM],
    x: Vec<f64>,
    h_prev: Vec<f64>,
    gru: GruTrace,
    logits: [f64; 6],
    target: usize,
}

/// `-ln softmax(logits)[y]` without forming probabilities.
fn cross_entropy(logits: &[f64; 6], y: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = math::ln(logits.iter().map(|l| math::exp(l - max)).sum::<f64>());
    lse - (logits[y] - max)
}

fn forward(params: &PolicyParams, steps: &[DemoStep]) -> Vec<StepCache> {
    let mut h = vec![0.0; params.hidden()];
    let mut out = Vec::with_capacity(steps.len());
    for s in steps {
        let raw = raw_inputs(&s.obs);
        let mut x = vec![0.0; params.cfg.feature_dim()];
        encode_raw(params, &raw, &mut x);
        let gru = gru_trace(params, &x, &h);
        let logits = head_logits(params, &gru.h);
        let h_prev = core::mem::replace(&mut h, gru.h.clone());
        out.push(StepCache {
            raw,
            x,
            h_prev,
            gru,
            logits,
            target: s.action.index(),
        });
    }
    out
}

/// Summed cross-entropy over one episode.
pub fn episode_loss(params: &PolicyParams, steps: &[DemoStep]) -> f64 {
    let mut h = vec![0.0; params.hidden()];
    let mut x = vec![0.0; params.cfg.feature_dim()];
    let mut loss = 0.0;
    for s in steps {
        encode_raw(params, &raw_inputs(&s.obs), &mut x);
        h = gru_trace(params, &x, &h).h;
        loss += cross_entropy(&head_logits(params, &h), s.action.index());
    }
    loss
}

/// Summed cross-entropy over one episode; adds the gradient of that sum to
/// `grads`.
pub fn episode_loss_grad(params: &PolicyParams, steps: &[DemoStep], grads: &mut TensorSet) -> f64 {
    let n = params.hidden();
    let xd = params.cfg.feature_dim();
    let emb = params.cfg.emb_dims();
    let cache = forward(params, steps);
    let mut loss = 0.0;

    let mut dh_next = vec![0.0; n];
    let mut dh = vec![0.0; n];
    let mut dx = vec![0.0; xd];
    let mut da_z = vec![0.0; n];
    let mut da_r = vec![0.0; n];
    let mut da_h = vec![0.0; n];
    let mut drh = vec![0.0; n];
    let mut rh = vec![0.0; n];

    for c in cache.iter().rev() {
        loss += cross_entropy(&c.logits, c.target);
        let mut dlogits = math::softmax6(&c.logits);
        dlogits[c.target] -= 1.0;

        math::outer_acc(grads.data_mut(idx::HEAD_W), &dlogits, &c.gru.h);
        for (g, d) in grads.data_mut(idx::HEAD_B).iter_mut().zip(&dlogits) {
            *g += d;
        }
        dh.copy_from_slice(&dh_next);
        math::matvec_t_acc(params.t(idx::HEAD_W), &dlogits, &mut dh);

        let GruTrace { z, r, hh, .. } = &c.gru;
        let hp = &c.h_prev;
        for i in 0..n {
            da_z[i] = dh[i] * (hh[i] - hp[i]) * z[i] * (1.0 - z[i]);
            da_h[i] = dh[i] * z[i] * (1.0 - hh[i] * hh[i]);
            dh_next[i] = dh[i] * (1.0 - z[i]);
            rh[i] = r[i] * hp[i];
        }

        dx.fill(0.0);
        // candidate gate
        math::outer_acc(grads.data_mut(idx::W_H), &da_h, &c.x);
        math::outer_acc(grads.data_mut(idx::U_H), &da_h, &rh);
        add(grads.data_mut(idx::B_H), &da_h);
        math::matvec_t_acc(params.t(idx::W_H), &da_h, &mut dx);
        drh.fill(0.0);
        math::matvec_t_acc(params.t(idx::U_H), &da_h, &mut drh);
        for i in 0..n {
            dh_next[i] += drh[i] * r[i];
            da_r[i] = drh[i] * hp[i] * r[i] * (1.0 - r[i]);
        }
        // reset and update gates
        for (a, w, u, b) in [
            (&da_r, idx::W_R, idx::U_R, idx::B_R),
            (&da_z, idx::W_Z, idx::U_Z, idx::B_Z),
        ] {
            math::outer_acc(grads.data_mut(w), a, &c.x);
            math::outer_acc(grads.data_mut(u), a, hp);
            add(grads.data_mut(b), a);
            math::matvec_t_acc(params.t(w), a, &mut dx);
            math::matvec_t_acc(params.t(u), a, &mut dh_next);
        }

        // encoders
        let (mut ro, mut xo) = (0, 0);
        for (g, (&rw, &d)) in RAW_WIDTHS.iter().zip(&emb).enumerate() {
            let dxg = &dx[xo..xo + d];
            math::outer_acc(grads.data_mut(2 * g), dxg, &c.raw[ro..ro + rw]);
            add(grads.data_mut(2 * g + 1), dxg);
            ro += rw;
            xo += d;
        }
    }
    loss
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Mean per-step cross-entropy over a batch of episodes.
pub fn batch_loss(params: &PolicyParams, episodes: &[&[DemoStep]]) -> f64 {
    let steps: usize = episodes.iter().map(|e| e.len()).sum();
    if steps == 0 {
        return 0.0;
    }
    episodes.iter().map(|e| episode_loss(params, e)).sum::<f64>() / steps as f64
}

/// Mean per-step cross-entropy and its gradient (written to `grads`).
/// Episodes are accumulated in order, so the result is deterministic.
pub fn batch_loss_grad(params: &PolicyParams, episodes: &[&[DemoStep]], grads: &mut TensorSet) -> (f64, usize) {
    grads.fill_zero();
    let steps: usize = episodes.iter().map(|e| e.len()).sum();
    if steps == 0 {
        return (0.0, 0);
    }
    let total: f64 = episodes.iter().map(|e| episode_loss_grad(params, e, grads)).sum();
    grads.scale(1.0 / steps as f64);
    (total / steps as f64, steps)
}
