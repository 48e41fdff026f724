use std::collections::HashMap;
use std::ops::{Index, IndexMut};

use super::Tensor;
use crate::error::{Error, Result};

/// Position of a tensor inside a [`ParameterSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Tensors addressed by [`ParamId`]; used for both values and gradients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorList(Vec<Tensor>);

impl TensorList {
    pub fn zeros_like(other: &TensorList) -> Self {
        Self(other.0.iter().map(Tensor::zeros_like).collect())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Tensor> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn zero(&mut self) {
        self.0.iter_mut().for_each(|t| t.fill(0.0));
    }

    pub fn add_assign(&mut self, other: &TensorList) -> Result<()> {
        if self.0.len() != other.0.len() {
            return Err(Error::Shape("tensor lists differ in length".into()));
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.0 {
            t.data_mut().iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.0.iter().map(Tensor::squared_norm).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Tensor::is_finite)
    }
}

impl Index<ParamId> for TensorList {
    type Output = Tensor;
    fn index(&self, id: ParamId) -> &Tensor {
        &self.0[id.0]
    }
}

impl IndexMut<ParamId> for TensorList {
    fn index_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.0[id.0]
    }
}

/// Named trainable tensors with a gradient accumulator for each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterSet {
    names: Vec<String>,
    index: HashMap<String, ParamId>,
    values: TensorList,
    grads: TensorList,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::invalid(format!("duplicate parameter name {name}")));
        }
        let id = ParamId(self.names.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.grads.0.push(Tensor::zeros_like(&value));
        self.values.0.push(value);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.names.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.grads[id]
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id]
    }

    pub fn values(&self) -> &TensorList {
        &self.values
    }

    pub fn grads(&self) -> &TensorList {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut TensorList {
        &mut self.grads
    }

    /// Values read-only alongside mutable gradients.
    pub fn split_mut(&mut self) -> (&TensorList, &mut TensorList) {
        (&self.values, &mut self.grads)
    }

    /// Replaces a value, keeping its shape.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        if value.shape() != self.values[id].shape() {
            return Err(Error::Shape(format!(
                "parameter {} expects {:?}, got {:?}",
                self.names[id.0],
                self.values[id].shape(),
                value.shape()
            )));
        }
        self.values[id] = value;
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.grads.zero();
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// Rescales gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grads.squared_norm().sqrt();
        if norm > max_norm && norm.is_finite() {
            self.grads.scale(max_norm / norm);
        }
        norm
    }
}
