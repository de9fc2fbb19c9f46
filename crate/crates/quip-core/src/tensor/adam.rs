//! ADAM parameter updates with bias correction.

use super::{ParamSet, Parameter, Tensor};
use crate::error::{Error, Result};

/// Per-parameter ADAM moment estimates.
#[derive(Debug, Clone)]
pub struct AdamState {
    first_moment: Tensor,
    second_moment: Tensor,
    step_count: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamState {
    /// Default coefficients: beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
    pub fn new(shape: &[usize]) -> Self {
        AdamState {
            first_moment: Tensor::zeros(shape.to_vec()),
            second_moment: Tensor::zeros(shape.to_vec()),
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One bias-corrected ADAM update. Gradients are read, never reset; the
/// caller decides when to zero them.
pub fn adam_step(param: &mut Parameter, state: &mut AdamState, lr: f64) -> Result<()> {
    assert_eq!(state.first_moment.shape(), param.value().shape());
    if let Some(index) = param.grad().first_non_finite() {
        return Err(Error::NonFiniteGradient {
            name: param.name().to_string(),
            index,
        });
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);

    let grads: Vec<f64> = param.grad().data().to_vec();
    let m = state.first_moment.data_mut();
    let v = state.second_moment.data_mut();
    for (i, &g) in grads.iter().enumerate() {
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
    }
    let m = state.first_moment.data().to_vec();
    let v = state.second_moment.data().to_vec();
    param.apply_update(|i, value, _g| {
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        value - lr * m_hat / (v_hat.sqrt() + eps)
    });
    Ok(())
}

/// ADAM over a whole [`ParamSet`], one state per slot.
#[derive(Debug)]
pub struct Adam {
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(params: &ParamSet) -> Self {
        Adam {
            states: params.iter().map(|p| AdamState::new(p.value().shape())).collect(),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, lr: f64) -> Result<()> {
        assert_eq!(self.states.len(), params.len());
        for (slot, state) in self.states.iter_mut().enumerate() {
            adam_step(params.get_mut(slot), state, lr)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param_with_grad(value: Vec<f64>, grad: Vec<f64>) -> Parameter {
        let mut p = Parameter::new("w", Tensor::from_vec(value));
        p.accumulate(&Tensor::from_vec(grad)).unwrap();
        p
    }

    #[test]
    fn first_step_moves_by_about_lr_against_gradient() {
        // With bias correction the very first step is lr * g / (|g| + eps).
        let mut p = param_with_grad(vec![1.0], vec![0.5]);
        let mut s = AdamState::new(&[1]);
        adam_step(&mut p, &mut s, 1e-3).unwrap();
        let delta = p.value().data()[0] - 1.0;
        assert!((delta + 1e-3).abs() < 1e-9, "delta = {delta}");
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameter_unchanged() {
        let mut p = param_with_grad(vec![2.0, -3.0], vec![0.0, 0.0]);
        let mut s = AdamState::new(&[2]);
        adam_step(&mut p, &mut s, 1e-2).unwrap();
        assert_eq!(p.value().data(), &[2.0, -3.0]);
    }

    #[test]
    fn successive_steps_move_monotonically() {
        let mut p = param_with_grad(vec![1.0], vec![0.5]);
        let mut s = AdamState::new(&[1]);
        adam_step(&mut p, &mut s, 1e-3).unwrap();
        let after_one = p.value().data()[0];
        adam_step(&mut p, &mut s, 1e-3).unwrap();
        let after_two = p.value().data()[0];
        assert!(after_one < 1.0 && after_two < after_one);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = param_with_grad(vec![1.0], vec![f64::NAN]);
        let mut s = AdamState::new(&[1]);
        let err = adam_step(&mut p, &mut s, 1e-3).unwrap_err().to_string();
        assert!(err.contains('w'), "{err}");
    }

    #[test]
    fn gradient_untouched_by_step() {
        let mut p = param_with_grad(vec![1.0], vec![0.5]);
        let mut s = AdamState::new(&[1]);
        adam_step(&mut p, &mut s, 1e-3).unwrap();
        assert_eq!(p.grad().data(), &[0.5]);
    }
}
