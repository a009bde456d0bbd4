//! Named trainable parameters with gradient accumulators and Adam state.

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

#[derive(Debug, Clone)]
struct Param {
    name: String,
    value: Tensor,
    grad: Vec<f32>,
    m: Vec<f32>,
    v: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl AdamConfig {
    pub fn with_lr(lr: f32) -> Self {
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
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update at timestep `t` (1-based).
pub fn adam_update(
    param: &mut [f32],
    grad: &[f32],
    m: &mut [f32],
    v: &mut [f32],
    t: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    let n = param.len();
    if grad.len() != n || m.len() != n || v.len() != n {
        return Err(TensorError::mismatch("adam_step", &[n], &[grad.len(), m.len(), v.len()]));
    }
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for k in 0..n {
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grad[k];
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
        let mh = m[k] / c1;
        let vh = v[k] / c2;
        param[k] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let n = value.len();
        self.params.push(Param {
            name: name.into(),
            value,
            grad: vec![0.0; n],
            m: vec![0.0; n],
            v: vec![0.0; n],
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &[f32] {
        &self.params[id.0].grad
    }

    /// Adam timestep (number of updates applied so far).
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, g: &[f32]) {
        for (d, s) in self.params[id.0].grad.iter_mut().zip(g) {
            *d += s;
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn grad_norm(&self) -> f32 {
        let sq: f64 = self
            .params
            .iter()
            .flat_map(|p| p.grad.iter())
            .map(|&g| f64::from(g) * f64::from(g))
            .sum();
        sq.sqrt() as f32
    }

    /// Rescales all gradients so their global norm is at most `max_norm`;
    /// returns the norm before clipping.
    pub fn clip_grad_norm(&mut self, max_norm: f32) -> f32 {
        let norm = self.grad_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for p in &mut self.params {
                p.grad.iter_mut().for_each(|g| *g *= s);
            }
        }
        norm
    }

    /// Applies Adam with the accumulated gradients, then zeroes them.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        self.step += 1;
        for p in &mut self.params {
            adam_update(p.value.data_mut(), &p.grad, &mut p.m, &mut p.v, self.step, cfg)?;
        }
        self.zero_grad();
        Ok(())
    }

    /// `(name, tensor)` pairs for values and optimizer state, in insertion
    /// order.
    pub fn export(&self, with_optimizer: bool) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for p in &self.params {
            out.push((p.name.clone(), p.value.clone()));
            if with_optimizer {
                let shape = p.value.shape().to_vec();
                out.push((format!("adam.m/{}", p.name), Tensor::new(shape.clone(), p.m.clone()).expect("same size")));
                out.push((format!("adam.v/{}", p.name), Tensor::new(shape, p.v.clone()).expect("same size")));
            }
        }
        out
    }

    /// Overwrites values (and optimizer state when present) from named
    /// tensors. Every parameter must be present with a matching shape.
    pub fn import(&mut self, tensors: &[(String, Tensor)], step: Option<u64>) -> Result<()> {
        let lookup = |name: &str| tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t);
        for p in &mut self.params {
            let t = lookup(&p.name)
                .ok_or_else(|| TensorError::Checkpoint(format!("missing tensor `{}`", p.name)))?;
            if t.shape() != p.value.shape() {
                return Err(TensorError::mismatch("checkpoint", p.value.shape(), t.shape()));
            }
            p.value = t.clone();
            if let (Some(m), Some(v)) = (lookup(&format!("adam.m/{}", p.name)), lookup(&format!("adam.v/{}", p.name))) {
                p.m = m.data().to_vec();
                p.v = v.data().to_vec();
            }
        }
        if let Some(s) = step {
            self.step = s;
        }
        Ok(())
    }
}
