use super::{ParameterSet, TensorList};
use crate::error::{Error, Result};

/// Learning rates the training recipe searches over.
pub const LEARNING_RATE_GRID: [f64; 5] = [0.0001, 0.0005, 0.001, 0.005, 0.01];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// First/second moment estimates and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: TensorList,
    v: TensorList,
}

impl AdamState {
    pub fn new(params: &ParameterSet, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: TensorList::zeros_like(params.values()),
            v: TensorList::zeros_like(params.values()),
        }
    }

    pub fn first_moment(&self) -> &TensorList {
        &self.m
    }

    pub fn second_moment(&self) -> &TensorList {
        &self.v
    }
}

/// One bias-corrected Adam update from the accumulated gradients, which are
/// cleared afterwards. Non-finite gradients abort without touching anything.
pub fn adam_step(params: &mut ParameterSet, state: &mut AdamState) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(Error::Shape("optimizer state does not match parameter set".into()));
    }
    if !params.grads().is_finite() {
        return Err(Error::TrainingDiverged("non-finite gradient".into()));
    }
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let correction1 = 1.0 - beta1.powi(t);
    let correction2 = 1.0 - beta2.powi(t);

    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let grad = params.grad(id).data().to_vec();
        let m = state.m[id].data_mut();
        let v = state.v[id].data_mut();
        let theta = params.value_mut(id).data_mut();
        for k in 0..grad.len() {
            let g = grad[k];
            m[k] = beta1 * m[k] + (1.0 - beta1) * g;
            v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
            let m_hat = m[k] / correction1;
            let v_hat = v[k] / correction2;
            theta[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    params.zero_grads();
    Ok(())
}
