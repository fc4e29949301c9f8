//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::tensor::{sc, Scalar, Tensor};

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Default::default()
        }
    }
}

/// First/second moment estimates per parameter tensor plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
    cfg: AdamConfig,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Tensor<T>], cfg: AdamConfig) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            t: 0,
            cfg,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One Adam update over every parameter tensor.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::shape(format!(
                "adam_step got {} parameter tensors, {} gradients, state holds {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (p, g) in params.iter().zip(grads.iter()) {
            if p.shape() != g.shape() {
                return Err(Error::shape(format!(
                    "adam_step gradient shape {:?} does not match parameter shape {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite {
                    context: "adam_step gradient".into(),
                });
            }
        }

        self.t += 1;
        let beta1: T = sc(self.cfg.beta1);
        let beta2: T = sc(self.cfg.beta2);
        let one = T::one();
        let lr: T = sc(self.cfg.learning_rate);
        let eps: T = sc(self.cfg.epsilon);
        let bc1: T = sc(1.0 - self.cfg.beta1.powi(self.t as i32));
        let bc2: T = sc(1.0 - self.cfg.beta2.powi(self.t as i32));

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let ps = p.data_mut();
            let gs = g.data();
            let ms = m.data_mut();
            let vs = v.data_mut();
            for i in 0..ps.len() {
                let grad = gs[i];
                ms[i] = beta1 * ms[i] + (one - beta1) * grad;
                vs[i] = beta2 * vs[i] + (one - beta2) * grad * grad;
                let m_hat = ms[i] / bc1;
                let v_hat = vs[i] / bc2;
                ps[i] = ps[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
