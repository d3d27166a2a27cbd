use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one parameter set, in `Parameters::tensors` order.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &impl Parameters) -> Self {
        let zeros: Vec<Vec<f64>> = params
            .tensors()
            .iter()
            .map(|t| vec![0.0; t.data.len()])
            .collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    /// One bias-corrected Adam update. Fails without touching `params` if any
    /// gradient is non-finite or shapes disagree.
    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grads = grads.tensors();
        if grads.len() != self.first.len()
            || grads
                .iter()
                .zip(&self.first)
                .any(|(g, m)| g.data.len() != m.len())
        {
            return Err(Error::Dimension(
                "gradient shapes differ from Adam state".into(),
            ));
        }
        if let Some(bad) = grads.iter().find(|g| g.data.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite(format!("gradient of {}", bad.name)));
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let correction1 = 1.0 - beta1.powf(self.step as f64);
        let correction2 = 1.0 - beta2.powf(self.step as f64);

        for (((param, grad), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(&grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for (((p, &g), m), v) in param.iter_mut().zip(grad.data).zip(m).zip(v) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut params = vec![1.5, -2.0];
        let mut adam = AdamState::new(AdamConfig::default(), &params);
        for _ in 0..5 {
            adam.step(&mut params, &vec![0.0, 0.0]).unwrap();
        }
        assert_eq!(params, vec![1.5, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let lr = 3e-3;
        let mut params = vec![1.0, 1.0, 1.0];
        let grads = vec![0.5, -2.0, 1e-3];
        let mut adam = AdamState::new(AdamConfig::with_learning_rate(lr), &params);
        adam.step(&mut params, &grads).unwrap();
        // Step 1: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
        for (p, g) in params.iter().zip(&grads) {
            let expected = 1.0 - lr * g / (g.abs() + 1e-8);
            assert!((p - expected).abs() < 1e-15);
            assert!(((1.0 - p).abs() - lr).abs() < lr * 1e-5);
        }
    }

    #[test]
    fn minimizes_a_parabola() {
        let mut w = vec![1.0];
        let mut adam = AdamState::new(AdamConfig::with_learning_rate(0.1), &w);
        for _ in 0..200 {
            let grad = vec![2.0 * w[0]];
            adam.step(&mut w, &grad).unwrap();
        }
        assert!(w[0].abs() < 1e-2, "{}", w[0]);
    }

    #[test]
    fn rejects_non_finite_gradients() {
        let mut params = vec![1.0];
        let mut adam = AdamState::new(AdamConfig::default(), &params);
        assert!(matches!(
            adam.step(&mut params, &vec![f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(params, vec![1.0]);
        assert_eq!(adam.step, 0);
        assert!(adam.step(&mut params, &vec![1.0, 2.0]).is_err());
    }
}
