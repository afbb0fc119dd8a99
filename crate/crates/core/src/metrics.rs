//! Precision/recall/F1, MAE, the two retrieval scores (MAP, NDCG) and
//! attention entropy.
//!
//! MAP and NDCG default to a nonstandard form (`NdcgVariant::Paper`):
//!
//! ```text
//! MAP  = sum_k (rel_k / k) * [rel_k > 0] / n_rel
//! NDCG = sum_k 2^(rel_k - 1) / (log2(k) + 1) / n_rel
//! ```
//!
//! `NdcgVariant::Standard` is the textbook ideal-normalised DCG and is only
//! used when asked for by name.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ranked relevance grades (rank 1 first) and the number of relevant
/// documents in the whole collection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceList {
    grades: Vec<u32>,
    n_rel: usize,
}

impl RelevanceList {
    pub fn new(grades: Vec<u32>, n_rel: usize) -> Result<Self> {
        let retrieved = grades.iter().filter(|&&g| g > 0).count();
        if retrieved > n_rel {
            return Err(Error::Domain(format!(
                "{retrieved} relevant documents retrieved but n_rel is {n_rel}"
            )));
        }
        Ok(RelevanceList { grades, n_rel })
    }

    pub fn grades(&self) -> &[u32] {
        &self.grades
    }

    pub fn n_rel(&self) -> usize {
        self.n_rel
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, fn_ }
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

/// Scores for one evaluation split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub mae: f64,
    pub map: f64,
    pub ndcg: f64,
    pub ndcg_standard: f64,
    pub attention_entropy: f64,
    pub counts: ConfusionCounts,
    pub n_examples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NdcgVariant {
    Paper,
    Standard,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `(tp / (tp + fp), tp / (tp + fn))`, with 0 for an empty denominator.
pub fn precision_recall(c: ConfusionCounts) -> (f64, f64) {
    (ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn_))
}

pub fn f1(precision: f64, recall: f64) -> Result<f64> {
    for (name, v) in [("precision", precision), ("recall", recall)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("{name} {v} outside [0, 1]")));
        }
    }
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

pub fn mae(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyVector);
    }
    let total: f64 = predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(total / predictions.len() as f64)
}

pub fn map_paper(r: &RelevanceList) -> Result<f64> {
    if r.n_rel == 0 {
        return Err(Error::NoRelevantDocuments);
    }
    let mut sum = 0.0;
    for (i, &rel) in r.grades.iter().enumerate() {
        if rel > 0 {
            sum += rel as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / r.n_rel as f64)
}

fn dcg_standard(grades: &[u32]) -> f64 {
    grades
        .iter()
        .enumerate()
        .map(|(i, &rel)| (2f64.powi(rel as i32) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

pub fn ndcg_paper(r: &RelevanceList, variant: NdcgVariant) -> Result<f64> {
    match variant {
        NdcgVariant::Paper => {
            if r.n_rel == 0 {
                return Err(Error::NoRelevantDocuments);
            }
            let sum: f64 = r
                .grades
                .iter()
                .enumerate()
                .map(|(i, &rel)| 2f64.powf(rel as f64 - 1.0) / (((i + 1) as f64).log2() + 1.0))
                .sum();
            Ok(sum / r.n_rel as f64)
        }
        NdcgVariant::Standard => {
            let mut ideal = r.grades.clone();
            ideal.sort_unstable_by(|a, b| b.cmp(a));
            let idcg = dcg_standard(&ideal);
            if idcg == 0.0 {
                return Ok(0.0);
            }
            Ok(dcg_standard(&r.grades) / idcg)
        }
    }
}

/// Shannon entropy in nats, `0 ln 0 = 0`.
pub fn attention_entropy(profile: &[f64]) -> Result<f64> {
    if profile.is_empty() {
        return Err(Error::EmptyVector);
    }
    if profile.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Domain(
            "attention profile has a negative or non-finite entry".into(),
        ));
    }
    let total: f64 = profile.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "attention profile sums to {total}, not 1"
        )));
    }
    let h: f64 = profile
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    // a one-hot gives -1 * ln 1 = -0.0
    Ok(h.max(0.0))
}

/// Multiset token overlap between a generated answer and the reference.
pub fn overlap_counts<T: Ord + Clone>(generated: &[T], reference: &[T]) -> ConfusionCounts {
    let mut gen = generated.to_vec();
    let mut reference = reference.to_vec();
    gen.sort();
    reference.sort();
    let (mut i, mut j, mut tp) = (0, 0, 0u64);
    while i < gen.len() && j < reference.len() {
        match gen[i].cmp(&reference[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                tp += 1;
                i += 1;
                j += 1;
            }
        }
    }
    ConfusionCounts::new(tp, gen.len() as u64 - tp, reference.len() as u64 - tp)
}
