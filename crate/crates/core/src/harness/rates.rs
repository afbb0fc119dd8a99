use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{GROUP_NAMES, N_GROUPS};
use crate::optim::{effective_lr, TuningPlan};

/// Effective rate of each group at the first, middle and final schedule
/// step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatesPreview {
    pub steps: [u64; 3],
    /// `rates[i][g]`: group `g` at `steps[i]`.
    pub rates: [[f64; N_GROUPS]; 3],
}

pub fn rates_preview(
    plan: &TuningPlan,
    data_size: usize,
    group_param_counts: &[usize],
    total_steps: u64,
) -> Result<RatesPreview> {
    let plan = plan.resolve(data_size, group_param_counts, total_steps)?;
    let total = plan.total_steps().unwrap_or(total_steps);
    let steps = [0, total / 2, total];
    let mut rates = [[0.0; N_GROUPS]; 3];
    for (row, &step) in rates.iter_mut().zip(&steps) {
        for (g, r) in row.iter_mut().enumerate() {
            *r = effective_lr(&plan, g, step, total)?;
        }
    }
    Ok(RatesPreview { steps, rates })
}

impl RatesPreview {
    /// Markdown table, one row per group, seven decimals.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let [a, b, c] = self.steps;
        let _ = writeln!(s, "| Group | step {a} | step {b} | step {c} |");
        s.push_str("|---|---:|---:|---:|\n");
        for (g, name) in GROUP_NAMES.iter().enumerate() {
            let _ = writeln!(
                s,
                "| G{g} {name} | {:.7} | {:.7} | {:.7} |",
                self.rates[0][g], self.rates[1][g], self.rates[2][g]
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::Policy;

    #[test]
    fn surgical_preview() {
        let plan = TuningPlan::new(Policy::Surgical {
            base_lr: 0.001,
            data_size: None,
            params_per_group: None,
            mask: vec![0, 1, 1, 0, 0],
        });
        let p = rates_preview(&plan, 1000, &[100, 50, 75, 100, 125], 100).unwrap();
        assert_eq!(p.steps, [0, 50, 100]);
        let expected = [0.0, 0.0044721, 0.0036515, 0.0, 0.0];
        for (a, b) in p.rates[0].iter().zip(expected) {
            assert!((a - b).abs() < 5e-8);
        }
        assert_eq!(p.rates[2], [0.0; 5]);
        let md = p.to_markdown();
        assert!(
            md.contains("| G1 lower | 0.0044721 | 0.0022361 | 0.0000000 |"),
            "{md}"
        );
    }

    #[test]
    fn full_plan_starts_at_alpha() {
        let p = rates_preview(&TuningPlan::new(Policy::Full { lr: 2e-5 }), 10, &[1; 5], 7).unwrap();
        assert_eq!(p.rates[0], [2e-5; 5]);
        assert_eq!(p.rates[2], [0.0; 5]);
    }
}
