//! AdamW with decoupled weight decay, a linear-to-zero schedule, and the
//! per-group learning-rate policies used for fine-tuning.
//!
//! Per parameter, with gradient `g` and the group's effective rate `lr`:
//!
//! ```text
//! t  += 1
//! m   = b1 * m + (1 - b1) * g
//! v   = b2 * v + (1 - b2) * g^2
//! m^  = m / (1 - b1^t)
//! v^  = v / (1 - b2^t)
//! w   = w - lr * m^ / (sqrt(v^) + eps) - lr * lambda * w
//! ```
//!
//! The decay term uses the same per-group `lr`, so a group whose rate is 0
//! is left untouched.

mod plan;
mod schedule;

pub use plan::{
    effective_lr, grouped_llrd_rates, llrd_rates, surgical_rates, Policy, Schedule, TuningPlan,
};
pub use schedule::linear_schedule;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWHyper {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Decoupled weight-decay coefficient.
    pub lambda: f64,
    pub epsilon: f64,
}

impl Default for AdamWHyper {
    fn default() -> Self {
        AdamWHyper {
            alpha: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            lambda: 0.01,
            epsilon: 1e-8,
        }
    }
}

impl AdamWHyper {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::Domain("beta1 and beta2 must lie in (0, 1)".into()));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::Domain("lambda must be finite and >= 0".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 || self.alpha.is_nan() || self.alpha < 0.0 {
            return Err(Error::Domain("epsilon must be > 0 and alpha >= 0".into()));
        }
        Ok(())
    }
}

/// First/second moment accumulators, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimState {
    pub fn new(params: &[Tensor]) -> Self {
        OptimState {
            t: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, param: usize) -> &[f64] {
        &self.m[param]
    }

    pub fn second_moment(&self, param: usize) -> &[f64] {
        &self.v[param]
    }
}

/// One AdamW step over every parameter tensor.
///
/// `lrs[i]` is the effective learning rate for `params[i]` (it replaces
/// `hyper.alpha`). Inputs are validated before anything is mutated, so an
/// error leaves parameters and state unchanged. Parameters whose rate is
/// exactly 0 keep their bits; their moments still advance.
pub fn adamw_step(
    params: &mut [Tensor],
    grads: &[Vec<f64>],
    state: &mut OptimState,
    hyper: &AdamWHyper,
    lrs: &[f64],
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || lrs.len() != n || state.m.len() != n {
        return Err(Error::shape(
            "adamw_step",
            format!(
                "{n} params, {} grads, {} rates, {} state slots",
                grads.len(),
                lrs.len(),
                state.m.len()
            ),
        ));
    }
    for (i, ((p, g), lr)) in params.iter().zip(grads).zip(lrs).enumerate() {
        if g.len() != p.len() || state.m[i].len() != p.len() {
            return Err(Error::shape(
                "adamw_step",
                format!("parameter #{i}: {} values, gradient {}", p.len(), g.len()),
            ));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                param: format!("#{i}"),
            });
        }
        if !lr.is_finite() || *lr < 0.0 {
            return Err(Error::Domain(format!(
                "learning rate {lr} for parameter #{i}"
            )));
        }
    }

    state.t += 1;
    let t = state.t as f64;
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let bc1 = 1.0 - b1.powf(t);
    let bc2 = 1.0 - b2.powf(t);
    for (i, p) in params.iter_mut().enumerate() {
        let lr = lrs[i];
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        let w = p.data_mut();
        for (j, &g) in grads[i].iter().enumerate() {
            m[j] = b1 * m[j] + (1.0 - b1) * g;
            v[j] = b2 * v[j] + (1.0 - b2) * g * g;
            if lr == 0.0 {
                continue;
            }
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            let prev = w[j];
            let step = lr * m_hat / (v_hat.sqrt() + hyper.epsilon);
            let decay = lr * hyper.lambda * prev;
            // `-0.0 - 0.0 - (-0.0)` is `+0.0`; a null update must keep the bits
            if step != 0.0 || decay != 0.0 {
                w[j] = prev - step - decay;
            }
        }
    }
    Ok(())
}
