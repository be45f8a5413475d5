use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter moment estimates for bias-corrected Adam.
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let first: Vec<Vec<f64>> = params.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
        let second = first.clone();
        Self {
            config,
            step: 0,
            first,
            second,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to every parameter and clears the gradients.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(Error::shape(
                "adam_step",
                format!("{} moment slots for {} parameters", self.first.len(), params.len()),
            ));
        }
        // validate before touching anything
        for ((name, t), m) in params.tensors_mut().zip(&self.first) {
            if t.grad().is_none() {
                return Err(Error::MissingGradient(name.to_string()));
            }
            if t.len() != m.len() {
                return Err(Error::shape("adam_step", format!("`{name}` changed size")));
            }
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);

        for (((_, tensor), m), v) in params
            .tensors_mut()
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            let (values, grad) = tensor.values_and_grad_mut();
            let grad = grad.expect("checked above");
            for i in 0..values.len() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                grad[i] = 0.0;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compute::Tensor;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut ps = ParamStore::new();
        ps.add("w", Tensor::vector(vec![1.0, -2.0, 3.5]));
        let before = ps.flatten();
        let mut adam = AdamState::new(AdamConfig::with_lr(0.1), &ps);
        adam.step(&mut ps).unwrap();
        assert_eq!(ps.flatten(), before);
        assert_eq!(adam.steps(), 1);
        adam.step(&mut ps).unwrap();
        assert_eq!(adam.steps(), 2);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g, v_hat = g^2 after bias correction, so the step is lr * g / (|g| + eps).
        let mut ps = ParamStore::new();
        let id = ps.add("w", Tensor::scalar(0.0));
        ps.get_mut(id).grad_mut().unwrap()[0] = 1.0;
        let mut adam = AdamState::new(AdamConfig::with_lr(0.1), &ps);
        adam.step(&mut ps).unwrap();
        let w = ps.get(id).values()[0];
        assert!((w + 0.1).abs() < 1e-8, "w = {w}");
        assert_eq!(ps.get(id).grad().unwrap()[0], 0.0);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut ps = ParamStore::new();
        let id = ps.add("w", Tensor::scalar(0.0));
        let mut adam = AdamState::new(AdamConfig::with_lr(0.1), &ps);
        for _ in 0..200 {
            let w = ps.get(id).values()[0];
            ps.get_mut(id).grad_mut().unwrap()[0] = 2.0 * (w - 3.0);
            adam.step(&mut ps).unwrap();
        }
        let w = ps.get(id).values()[0];
        assert!((w - 3.0).abs() < 0.05, "w = {w}");
    }

    #[test]
    fn missing_gradient_names_parameter() {
        let mut ps = ParamStore::new();
        ps.add("ok", Tensor::scalar(1.0));
        let mut adam = AdamState::new(AdamConfig::default(), &ps);
        // Strip the gradient slot behind the store's back.
        let frozen = Tensor::scalar(2.0);
        *ps.get_mut(crate::compute::ParamId(0)) = frozen;
        let err = adam.step(&mut ps).unwrap_err();
        assert!(err.to_string().contains("`ok`"), "{err}");
        assert_eq!(adam.steps(), 0);
    }
}
