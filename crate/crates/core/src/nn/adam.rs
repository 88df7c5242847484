use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 0.001;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Adam with bias-corrected moments. `m` and `v` mirror the parameter groups
/// of the model they were created for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(group_sizes: &[usize], learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
            t: 0,
            m: group_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: group_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(params: &[&[f64]], learning_rate: f64) -> Self {
        let sizes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        Self::new(&sizes, learning_rate)
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam holds {} groups, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != self.m[i].len() {
                return Err(Error::Shape(format!("adam group {i} size mismatch")));
            }
        }

        self.t += 1;
        let t = self.t as i32;
        let correction1 = 1.0 - self.beta1.powi(t);
        let correction2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params.into_iter().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                p[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_from_zero() {
        let mut theta = vec![0.0];
        let mut adam = AdamState::new(&[1], DEFAULT_LEARNING_RATE);
        adam.step(vec![&mut theta], &[vec![1.0]]).unwrap();
        // m_hat = v_hat = 1, so the step is lr / (1 + eps).
        let oracle = -0.001 / (1.0 + 1e-8);
        assert!((theta[0] - oracle).abs() < 1e-12);
        assert!((theta[0] - -0.000999999990).abs() < 1e-12);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut theta = vec![0.3, -1.2, 4.0];
        let before = theta.clone();
        let mut adam = AdamState::new(&[3], DEFAULT_LEARNING_RATE);
        adam.step(vec![&mut theta], &[vec![0.0; 3]]).unwrap();
        assert_eq!(theta, before);
    }

    #[test]
    fn identical_histories_update_identically() {
        let mut theta = vec![0.5, 0.5];
        let mut adam = AdamState::new(&[2], DEFAULT_LEARNING_RATE);
        for g in [0.3, -0.1, 2.0, 0.0, -5.0] {
            adam.step(vec![&mut theta], &[vec![g, g]]).unwrap();
        }
        assert_eq!(theta[0], theta[1]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut theta = vec![0.0; 2];
        let mut adam = AdamState::new(&[3], DEFAULT_LEARNING_RATE);
        assert!(adam.step(vec![&mut theta], &[vec![0.0; 2]]).is_err());
        assert_eq!(adam.t, 0);
    }
}
