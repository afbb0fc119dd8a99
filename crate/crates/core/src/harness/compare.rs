use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RunReport;
use crate::data::Kind;
use crate::error::{Error, Result};
use crate::stats::{mean_std, welch_t, SampleSummary, TestResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    F1Specific,
    F1General,
    MaeSpecific,
    MaeGeneral,
    EntropySpecific,
    EntropyGeneral,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::F1Specific,
        Metric::F1General,
        Metric::MaeSpecific,
        Metric::MaeGeneral,
        Metric::EntropySpecific,
        Metric::EntropyGeneral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::F1Specific => "f1_specific",
            Metric::F1General => "f1_general",
            Metric::MaeSpecific => "mae_specific",
            Metric::MaeGeneral => "mae_general",
            Metric::EntropySpecific => "entropy_specific",
            Metric::EntropyGeneral => "entropy_general",
        }
    }

    fn kind(self) -> Kind {
        match self {
            Metric::F1Specific | Metric::MaeSpecific | Metric::EntropySpecific => {
                Kind::HyperSpecific
            }
            _ => Kind::General,
        }
    }

    /// The metric's value in `report`, if that split was evaluated.
    pub fn value(self, report: &RunReport) -> Option<f64> {
        let m = report.eval.get(self.kind())?;
        Some(match self {
            Metric::F1Specific | Metric::F1General => m.f1,
            Metric::MaeSpecific | Metric::MaeGeneral => m.mae,
            Metric::EntropySpecific | Metric::EntropyGeneral => m.attention_entropy,
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMetric {
                name: s.to_string(),
                valid: Metric::ALL.map(Metric::name).join(", "),
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub values: Vec<f64>,
    pub summary: SampleSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub a: GroupSummary,
    pub b: GroupSummary,
    pub test: TestResult,
}

impl Comparison {
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| Group | n | Mean {0} | SD {0} |", self.metric);
        s.push_str("|---|---:|---:|---:|\n");
        for g in [&self.a, &self.b] {
            let _ = writeln!(
                s,
                "| {} | {} | {:.4} | {:.4} |",
                g.label, g.summary.n, g.summary.mean, g.summary.sd
            );
        }
        let t = &self.test;
        let _ = writeln!(
            s,
            "\nWelch t = {:.4}, df = {:.4}, p = {:.4}, significant at 0.05: {}",
            t.t_statistic,
            t.degrees_of_freedom,
            t.p_value,
            if t.significant_at_05 { "yes" } else { "no" }
        );
        s
    }
}

/// Welch comparison of two labelled groups of per-run values.
pub fn compare_values(metric: &str, a: (&str, &[f64]), b: (&str, &[f64])) -> Result<Comparison> {
    for (label, values) in [a, b] {
        if values.len() < 2 {
            return Err(Error::Usage(format!(
                "group {label} has {} run(s); need at least 2",
                values.len()
            )));
        }
    }
    let group = |(label, values): (&str, &[f64])| -> Result<GroupSummary> {
        Ok(GroupSummary {
            label: label.to_string(),
            values: values.to_vec(),
            summary: mean_std(values)?,
        })
    };
    Ok(Comparison {
        metric: metric.to_string(),
        test: welch_t(a.1, b.1)?,
        a: group(a)?,
        b: group(b)?,
    })
}

pub fn compare_runs(
    metric: Metric,
    group_a: (&str, &[RunReport]),
    group_b: (&str, &[RunReport]),
) -> Result<Comparison> {
    let values = |(label, runs): (&str, &[RunReport])| -> Result<Vec<f64>> {
        runs.iter()
            .map(|r| {
                metric.value(r).ok_or_else(|| {
                    Error::Usage(format!(
                        "run {:?} in group {label} has no {} value",
                        r.config.name,
                        metric.name()
                    ))
                })
            })
            .collect()
    };
    let (va, vb) = (values(group_a)?, values(group_b)?);
    compare_values(metric.name(), (group_a.0, &va), (group_b.0, &vb))
}
