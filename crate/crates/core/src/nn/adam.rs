use serde::{Deserialize, Serialize};

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Adam with bias correction. Moment buffers are laid out in the order the
/// parameters were presented at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[&Tensor]) -> Self {
        Self {
            config,
            step: 0,
            first: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Apply one update from the accumulated gradients. Gradients are left in place.
    pub fn step(&mut self, params: &mut [&mut Tensor]) {
        assert_eq!(params.len(), self.first.len(), "parameter list changed shape");
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let (values, grad) = p.values_and_grad_mut();
            assert_eq!(values.len(), m.len(), "moment buffer does not match parameter");
            for i in 0..values.len() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(w: f64) -> Tensor {
        Tensor::from_vec(&[1], vec![w]).unwrap()
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut w = scalar(1.0);
        let mut opt = Adam::new(AdamConfig::with_lr(0.1), &[&w]);
        w.grad_mut()[0] = 1.0;
        opt.step(&mut [&mut w]);
        // m̂ = 1, v̂ = 1 ⇒ Δ = 0.1 / (1 + 1e-8)
        assert!((w.values()[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
        assert_eq!(w.grad()[0], 1.0);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let mut w = scalar(0.37);
        let mut opt = Adam::new(AdamConfig::with_lr(0.1), &[&w]);
        for _ in 0..5 {
            opt.step(&mut [&mut w]);
        }
        assert_eq!(w.values()[0], 0.37);
        assert_eq!(opt.steps(), 5);
    }

    #[test]
    fn minimizes_square() {
        let mut w = scalar(1.0);
        let mut opt = Adam::new(AdamConfig::with_lr(0.05), &[&w]);
        for _ in 0..100 {
            w.grad_mut()[0] = 2.0 * w.values()[0];
            opt.step(&mut [&mut w]);
        }
        assert!(w.values()[0].abs() < 0.1, "w = {}", w.values()[0]);
    }
}
