//! Central finite-difference verification of analytic gradients.
//!
//! The probe re-evaluates a pure loss closure at nudged parameter values, so
//! it shares nothing with the tape's reverse sweep.

use crate::error::Result;
use crate::tensor::ParamSet;

/// Step used by all finite-difference probes.
pub const FD_STEP: f64 = 1e-5;

/// |a - b| relative to the larger magnitude, floored so that noise around
/// zero-gradient coordinates does not register as disagreement.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs().max(b.abs()) + 1e-4)
}

/// Central difference d(loss)/d(params[slot][index]).
pub fn finite_difference<F>(
    params: &mut ParamSet,
    slot: usize,
    index: usize,
    mut loss_fn: F,
) -> Result<f64>
where
    F: FnMut(&ParamSet) -> Result<f64>,
{
    params.perturb(slot, index, FD_STEP);
    let plus = loss_fn(params)?;
    params.perturb(slot, index, -2.0 * FD_STEP);
    let minus = loss_fn(params)?;
    params.perturb(slot, index, FD_STEP);
    Ok((plus - minus) / (2.0 * FD_STEP))
}

/// Worst observed disagreement for one parameter.
#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares every coordinate of every parameter's accumulated gradient
/// against central finite differences of `loss_fn`.
///
/// The caller must have populated analytic gradients (one forward/backward
/// pass) before calling; `loss_fn` must be the same loss as a pure function
/// of the parameter values.
pub fn check_all<F>(params: &mut ParamSet, mut loss_fn: F) -> Result<Vec<ParamCheck>>
where
    F: FnMut(&ParamSet) -> Result<f64>,
{
    let analytic: Vec<Vec<f64>> = params.iter().map(|p| p.grad().data().to_vec()).collect();
    let mut checks = Vec::with_capacity(params.len());
    for slot in 0..params.len() {
        let name = params.get(slot).name().to_string();
        let mut worst = ParamCheck {
            name: name.clone(),
            max_rel_err: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for index in 0..analytic[slot].len() {
            let numeric = finite_difference(params, slot, index, &mut loss_fn)?;
            let err = relative_error(analytic[slot][index], numeric);
            if err > worst.max_rel_err {
                worst.max_rel_err = err;
                worst.worst_index = index;
                worst.analytic = analytic[slot][index];
                worst.numeric = numeric;
            }
        }
        checks.push(worst);
    }
    Ok(checks)
}
