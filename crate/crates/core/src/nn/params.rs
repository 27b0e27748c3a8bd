use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable tensor together with its gradient buffer and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub adam_m: Tensor,
    pub adam_v: Tensor,
    pub step_count: u64,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let shape = value.shape().to_vec();
        Parameter {
            name: name.into(),
            grad: Tensor::zeros(&shape),
            adam_m: Tensor::zeros(&shape),
            adam_v: Tensor::zeros(&shape),
            value,
            step_count: 0,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Owns every parameter of a model, in creation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, param: Parameter) -> ParamId {
        self.params.push(param);
        ParamId(self.params.len() - 1)
    }

    /// Glorot-uniform matrix `rows x cols`.
    pub fn add_glorot(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        let value = Tensor::new(vec![rows, cols], data).expect("glorot shape");
        self.add(Parameter::new(name, value))
    }

    pub fn add_constant(&mut self, name: impl Into<String>, len: usize, v: f64) -> ParamId {
        let mut t = Tensor::zeros(&[len]);
        t.fill(v);
        self.add(Parameter::new(name, t))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Adds a gradient buffer into the parameters' `grad` fields.
    pub fn accumulate(&mut self, grads: &Grads) {
        for (i, g) in grads.per_param.iter().enumerate() {
            if let Some(g) = g {
                for (dst, src) in self.params[i].grad.data_mut().iter_mut().zip(g) {
                    *dst += src;
                }
            }
        }
    }

    pub fn zero_grads(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.grad.squared_norm())
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales all gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm && norm > 0.0 {
            let scale = max_norm / norm;
            for p in &mut self.params {
                p.grad.data_mut().iter_mut().for_each(|g| *g *= scale);
            }
        }
        norm
    }

    pub fn check_finite_grads(&self) -> Result<()> {
        for p in &self.params {
            if !p.grad.is_finite() {
                return Err(Error::Numeric(format!("non-finite gradient in {}", p.name)));
            }
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn set_values(&mut self, values: &[Tensor]) {
        for (p, v) in self.params.iter_mut().zip(values) {
            p.value = v.clone();
        }
    }
}

/// Parameter gradients produced by one backward pass. Entries are `None` for
/// parameters the loss does not depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub(crate) per_param: Vec<Option<Vec<f64>>>,
}

impl Grads {
    pub fn new(n_params: usize) -> Self {
        Grads {
            per_param: vec![None; n_params],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.per_param[id.0].as_deref()
    }

    /// Gradient of `id`, all zeros when it was never touched.
    pub fn dense(&self, id: ParamId, len: usize) -> Vec<f64> {
        self.per_param[id.0]
            .clone()
            .unwrap_or_else(|| vec![0.0; len])
    }

    pub(crate) fn slot(&mut self, id: ParamId, len: usize) -> &mut Vec<f64> {
        self.per_param[id.0].get_or_insert_with(|| vec![0.0; len])
    }

    /// True when every entry for `id` is exactly zero (or absent).
    pub fn is_zero(&self, id: ParamId) -> bool {
        self.per_param[id.0]
            .as_ref()
            .is_none_or(|g| g.iter().all(|&v| v == 0.0))
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.per_param.iter_mut().zip(&other.per_param) {
            if let Some(b) = b {
                let a = a.get_or_insert_with(|| vec![0.0; b.len()]);
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
        }
    }
}
