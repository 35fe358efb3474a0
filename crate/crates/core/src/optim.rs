use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::tensor::TensorSet;

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    pub fn new(params: &TensorSet, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut TensorSet, grads: &TensorSet) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for i in 0..params.len() {
            let g = grads.data(i);
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for (((p, &g), m), v) in params.data_mut(i).iter_mut().zip(g).zip(m).zip(v) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *p -= self.learning_rate * mh / (math::sqrt(vh) + self.eps);
            }
        }
    }
}

/// Rescales `grads` so its global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut TensorSet, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if max_norm > 0.0 && norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use alloc::vec;

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut p = TensorSet::new(vec![Tensor::zeros("x", &[2])]);
        let mut g = p.zeros_like();
        g.data_mut(0).copy_from_slice(&[3.0, -0.5]);
        let mut opt = Adam::new(&p, 0.1);
        opt.step(&mut p, &g);
        // bias-corrected first step is lr * sign(g)
        assert!((p.data(0)[0] + 0.1).abs() < 1e-7);
        assert!((p.data(0)[1] - 0.1).abs() < 1e-7);
    }

    #[test]
    fn clipping() {
        let mut g = TensorSet::new(vec![Tensor::zeros("x", &[2])]);
        g.data_mut(0).copy_from_slice(&[3.0, 4.0]);
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g.global_norm() - 1.0).abs() < 1e-12);
        assert_eq!(clip_global_norm(&mut g, 10.0), g.global_norm());
    }
}
