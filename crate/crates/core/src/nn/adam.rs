use crate::error::{Error, Result};
use crate::params::Parameters;

use super::TrainConfig;

/// First/second moment accumulators mirroring a model's tensor layout.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step_count: u64,
}

impl AdamState {
    pub fn new<P: Parameters + ?Sized>(model: &P) -> Self {
        let zeros: Vec<Vec<f64>> = model.tensor_lens().into_iter().map(|n| vec![0.0; n]).collect();
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[Vec<f64>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.second_moment
    }

    /// One bias-corrected Adam update of `model` along `grads`.
    pub fn step<M, G>(&mut self, model: &mut M, grads: &G, cfg: &TrainConfig) -> Result<()>
    where
        M: Parameters + ?Sized,
        G: Parameters + ?Sized,
    {
        let grad_tensors = grads.tensors();
        let mut params = model.tensors_mut();
        if grad_tensors.len() != params.len() || params.len() != self.first_moment.len() {
            return Err(Error::shape(format!(
                "adam: {} parameter tensors, {} gradient tensors, {} moment tensors",
                params.len(),
                grad_tensors.len(),
                self.first_moment.len()
            )));
        }
        for (i, ((p, g), m)) in params.iter().zip(&grad_tensors).zip(&self.first_moment).enumerate() {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(Error::shape(format!("adam: tensor {i} length mismatch")));
            }
        }

        self.step_count += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let t = self.step_count as i32;
        let correction1 = 1.0 - b1.powi(t);
        let correction2 = 1.0 - b2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad_tensors)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
        Ok(())
    }
}
