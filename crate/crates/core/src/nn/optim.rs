use super::{Gradients, MlpNetwork};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }
}

/// Adaptive-moment optimizer state for one set of parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Result<Self> {
        if !(config.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(Self {
            config,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        })
    }

    pub fn for_network(config: AdamConfig, net: &MlpNetwork) -> Result<Self> {
        Self::new(config, &net.param_shapes())
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.second
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        let shape_err = || Error::ShapeMismatch {
            context: "optimizer step",
            expected: self.first.iter().map(Vec::len).collect(),
            actual: grads.iter().map(|g| g.len()).collect(),
        };
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(shape_err());
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(shape_err());
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for (((pi, &gi), mi), vi) in p.iter_mut().zip(g.iter()).zip(m).zip(v) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *pi -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }

    pub fn step_network(&mut self, net: &mut MlpNetwork, grads: &Gradients) -> Result<()> {
        let g = grads.slices();
        let mut p = net.param_slices_mut();
        self.step(&mut p, &g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut adam = Adam::new(AdamConfig::default(), &[2]).unwrap();
        let mut p = vec![1.0, -2.0];
        adam.step(&mut [&mut p], &[&[0.5, 0.5]]).unwrap();
        let before = p.clone();
        let m_before = adam.first_moments()[0].clone();
        adam.step(&mut [&mut p], &[&[0.0, 0.0]]).unwrap();
        assert_eq!(adam.first_moments()[0][0], 0.9 * m_before[0]);
        // momentum still carries the parameters after the first non-zero step
        assert_ne!(p, before);

        let mut fresh = Adam::new(AdamConfig::default(), &[2]).unwrap();
        let mut q = vec![1.0, -2.0];
        fresh.step(&mut [&mut q], &[&[0.0, 0.0]]).unwrap();
        assert_eq!(q, vec![1.0, -2.0]);
        assert_eq!(fresh.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig::default();
        let mut adam = Adam::new(cfg, &[1]).unwrap();
        let mut p = vec![0.0];
        adam.step(&mut [&mut p], &[&[1.0]]).unwrap();
        // m_hat = v_hat = 1 at t = 1
        let expected = -cfg.learning_rate / (1.0 + cfg.epsilon);
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn identical_calls_are_deterministic() {
        let mut a = Adam::new(AdamConfig::default(), &[3]).unwrap();
        let mut b = a.clone();
        let mut pa = vec![0.1, 0.2, 0.3];
        let mut pb = pa.clone();
        let g = [0.3, -1.0, 2.0];
        a.step(&mut [&mut pa], &[&g]).unwrap();
        b.step(&mut [&mut pb], &[&g]).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(a, b);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut adam = Adam::new(AdamConfig::default(), &[2]).unwrap();
        let mut p = vec![0.0; 3];
        assert!(adam.step(&mut [&mut p], &[&[0.0; 3]]).is_err());
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn non_positive_learning_rate_rejected() {
        assert!(Adam::new(AdamConfig::default().with_learning_rate(0.0), &[1]).is_err());
    }
}
