//! Named learnable parameters with accumulated gradients.

use std::collections::HashMap;

use super::Tensor;
use crate::error::{Error, Result};

/// A learnable tensor plus its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Parameter {
    name: String,
    value: Tensor,
    grad: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape().to_vec());
        Parameter {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn grad(&self) -> &Tensor {
        &self.grad
    }

    pub fn set_value(&mut self, value: Tensor) {
        assert_eq!(value.shape(), self.value.shape());
        self.value = value;
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub(crate) fn accumulate(&mut self, delta: &Tensor) -> Result<()> {
        if delta.shape() != self.grad.shape() {
            return Err(Error::ShapeMismatch {
                op: "gradient accumulate",
                lhs: self.grad.shape().to_vec(),
                rhs: delta.shape().to_vec(),
            });
        }
        for (g, d) in self.grad.data_mut().iter_mut().zip(delta.data()) {
            *g += d;
        }
        Ok(())
    }

    pub(crate) fn apply_update(&mut self, f: impl Fn(usize, f64, f64) -> f64) {
        // Borrow-splitting: update value[i] from (i, value[i], grad[i]).
        let grads = self.grad.data().to_vec();
        for (i, v) in self.value.data_mut().iter_mut().enumerate() {
            *v = f(i, *v, grads[i]);
        }
    }
}

/// An ordered set of parameters addressable by slot index or name.
///
/// Slot order is creation order, which fixes gradient-accumulation and
/// optimizer-update order and keeps training deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
    by_name: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<usize> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::DuplicateParameter(name));
        }
        let slot = self.params.len();
        self.by_name.insert(name.clone(), slot);
        self.params.push(Parameter::new(name, value));
        Ok(slot)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, slot: usize) -> &Parameter {
        &self.params[slot]
    }

    pub fn get_mut(&mut self, slot: usize) -> &mut Parameter {
        &mut self.params[slot]
    }

    pub fn slot(&self, name: &str) -> Result<usize> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Parameter> {
        self.params.iter()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.zero_grad();
        }
    }

    pub(crate) fn accumulate_grad(&mut self, slot: usize, delta: &Tensor) -> Result<()> {
        self.params[slot].accumulate(delta)
    }

    /// Adds `deltas[slot] * scale` into every gradient; used for merging
    /// per-chunk gradients in deterministic slot order.
    pub fn add_scaled_grads(&mut self, deltas: &[Tensor], scale: f64) -> Result<()> {
        assert_eq!(deltas.len(), self.params.len());
        for (p, d) in self.params.iter_mut().zip(deltas) {
            if d.shape() != p.grad.shape() {
                return Err(Error::ShapeMismatch {
                    op: "gradient merge",
                    lhs: p.grad.shape().to_vec(),
                    rhs: d.shape().to_vec(),
                });
            }
            for (g, v) in p.grad.data_mut().iter_mut().zip(d.data()) {
                *g += scale * v;
            }
        }
        Ok(())
    }

    /// Snapshot of all gradients, slot order.
    pub fn grads(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| p.grad.clone()).collect()
    }

    /// Nudges one value coordinate in place; used by finite differences.
    pub fn perturb(&mut self, slot: usize, index: usize, delta: f64) {
        self.params[slot].value.data_mut()[index] += delta;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut ps = ParamSet::new();
        ps.add("w", Tensor::zeros(vec![2])).unwrap();
        assert!(ps.add("w", Tensor::zeros(vec![2])).is_err());
    }

    #[test]
    fn gradients_start_zero_and_reset() {
        let mut ps = ParamSet::new();
        let s = ps.add("w", Tensor::from_vec(vec![1.0, 2.0])).unwrap();
        assert!(ps.get(s).grad().iter().all(|&g| g == 0.0));
        ps.accumulate_grad(s, &Tensor::from_vec(vec![0.5, 0.5])).unwrap();
        assert_eq!(ps.get(s).grad().data(), &[0.5, 0.5]);
        ps.zero_grads();
        assert!(ps.get(s).grad().iter().all(|&g| g == 0.0));
    }
}
