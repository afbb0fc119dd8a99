use serde::{Deserialize, Serialize};

use super::linear_schedule;
use crate::error::{Error, Result};
use crate::model::N_GROUPS;

/// Geometric layer-wise decay: `top_lr * decay^k` for `k = 0` (top group)
/// down to `n_groups - 1` (bottom group).
pub fn llrd_rates(top_lr: f64, decay: f64, n_groups: usize) -> Result<Vec<f64>> {
    if !top_lr.is_finite() || top_lr <= 0.0 {
        return Err(Error::Plan(format!(
            "top_lr must be positive, got {top_lr}"
        )));
    }
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(Error::Plan(format!(
            "decay must lie in (0, 1], got {decay}"
        )));
    }
    if n_groups == 0 {
        return Err(Error::Plan("need at least one group".into()));
    }
    Ok((0..n_groups)
        .map(|k| top_lr * decay.powi(k as i32))
        .collect())
}

/// Validates explicit per-group rates (bottom group first). Zero freezes a
/// group.
pub fn grouped_llrd_rates(group_rates: &[f64], n_groups: usize) -> Result<Vec<f64>> {
    if group_rates.len() != n_groups {
        return Err(Error::Plan(format!(
            "{} group rates for a model with {n_groups} groups",
            group_rates.len()
        )));
    }
    if let Some(r) = group_rates.iter().find(|r| !r.is_finite() || **r < 0.0) {
        return Err(Error::Plan(format!(
            "group rates must be finite and >= 0, got {r}"
        )));
    }
    Ok(group_rates.to_vec())
}

/// Surgical rates: `base_lr * sqrt(data_size) / sqrt(params_i)`, then
/// multiplied by the 0/1 mask. Masked-out groups get exactly 0.
pub fn surgical_rates(
    base_lr: f64,
    data_size: usize,
    params_per_group: &[usize],
    mask: &[u8],
) -> Result<Vec<f64>> {
    if !base_lr.is_finite() || base_lr < 0.0 {
        return Err(Error::Plan(format!(
            "base_lr must be finite and >= 0, got {base_lr}"
        )));
    }
    if data_size == 0 {
        return Err(Error::Plan("data_size must be positive".into()));
    }
    if params_per_group.len() != N_GROUPS || mask.len() != N_GROUPS {
        return Err(Error::Plan(format!(
            "need {N_GROUPS} parameter counts and mask bits, got {} and {}",
            params_per_group.len(),
            mask.len()
        )));
    }
    if mask.iter().any(|&b| b > 1) {
        return Err(Error::Plan(format!(
            "mask entries must be 0 or 1: {mask:?}"
        )));
    }
    if params_per_group.contains(&0) {
        return Err(Error::ZeroParameterCount);
    }
    let data = (data_size as f64).sqrt();
    Ok(params_per_group
        .iter()
        .zip(mask)
        .map(|(&p, &bit)| {
            if bit == 0 {
                0.0
            } else {
                base_lr * data / (p as f64).sqrt()
            }
        })
        .collect())
}

/// How a base rate is distributed over the five layer groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// Same rate for every group.
    Full { lr: f64 },
    /// `top_lr` on the head group, multiplied by `decay` per group downward.
    Llrd { top_lr: f64, decay: f64 },
    /// Explicit rate per group, embeddings first.
    GroupedLlrd { rates: Vec<f64> },
    /// Data/size-scaled rates gated by a 0/1 mask. `data_size` and
    /// `params_per_group` may be left out of a config and are filled in from
    /// the training split and the model.
    Surgical {
        base_lr: f64,
        #[serde(default)]
        data_size: Option<usize>,
        #[serde(default)]
        params_per_group: Option<Vec<usize>>,
        mask: Vec<u8>,
    },
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Full { .. } => "full",
            Policy::Llrd { .. } => "llrd",
            Policy::GroupedLlrd { .. } => "grouped_llrd",
            Policy::Surgical { .. } => "surgical",
        }
    }

    /// Per-group rates before scheduling, embeddings (G0) first.
    pub fn group_rates(&self) -> Result<Vec<f64>> {
        match self {
            Policy::Full { lr } => grouped_llrd_rates(&[*lr; N_GROUPS], N_GROUPS),
            Policy::Llrd { top_lr, decay } => {
                let mut top_down = llrd_rates(*top_lr, *decay, N_GROUPS)?;
                top_down.reverse();
                Ok(top_down)
            }
            Policy::GroupedLlrd { rates } => grouped_llrd_rates(rates, N_GROUPS),
            Policy::Surgical {
                base_lr,
                data_size,
                params_per_group,
                mask,
            } => {
                let (Some(data), Some(params)) = (data_size, params_per_group) else {
                    return Err(Error::Plan(
                        "surgical policy needs data_size and params_per_group".into(),
                    ));
                };
                surgical_rates(*base_lr, *data, params, mask)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// Linear decay to zero. `total_steps` defaults to the number of
    /// optimizer steps in the run.
    Linear {
        #[serde(default)]
        total_steps: Option<u64>,
    },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Linear { total_steps: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningPlan {
    pub policy: Policy,
    #[serde(default)]
    pub schedule: Schedule,
}

impl TuningPlan {
    pub fn new(policy: Policy) -> Self {
        TuningPlan {
            policy,
            schedule: Schedule::default(),
        }
    }

    /// Fills in whatever the config left for the run to decide: surgical
    /// data size and group sizes, and the schedule length.
    pub fn resolve(
        &self,
        data_size: usize,
        params_per_group: &[usize],
        run_steps: u64,
    ) -> Result<TuningPlan> {
        let mut plan = self.clone();
        if let Policy::Surgical {
            data_size: d,
            params_per_group: p,
            ..
        } = &mut plan.policy
        {
            d.get_or_insert(data_size);
            p.get_or_insert_with(|| params_per_group.to_vec());
        }
        let Schedule::Linear { total_steps } = &mut plan.schedule;
        let total = *total_steps.get_or_insert(run_steps.max(1));
        if total < run_steps {
            return Err(Error::Plan(format!(
                "schedule total_steps {total} is shorter than the run's {run_steps} steps"
            )));
        }
        plan.policy.group_rates()?;
        Ok(plan)
    }

    pub fn total_steps(&self) -> Option<u64> {
        let Schedule::Linear { total_steps } = self.schedule;
        total_steps
    }
}

/// Policy rate of `group` times the linear schedule at `step`.
pub fn effective_lr(plan: &TuningPlan, group: usize, step: u64, total_steps: u64) -> Result<f64> {
    let rates = plan.policy.group_rates()?;
    let Some(rate) = rates.get(group) else {
        return Err(Error::IndexOutOfRange {
            index: group,
            size: rates.len(),
        });
    };
    Ok(rate * linear_schedule(step, total_steps)?)
}
