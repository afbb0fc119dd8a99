//! Evaluation of a trained model on one split.
//!
//! * F1/precision/recall: micro-averaged multiset token overlap between the
//!   greedy answer and the reference answer.
//! * MAE: mean over teacher-forced answer targets (answer tokens and EOS) of
//!   `|1 - p(reference token)|`.
//! * MAP/NDCG: each question ranks ten candidate answers (its own and the
//!   next nine in the split, cyclically) by mean target log-probability;
//!   candidates whose normalized text equals the reference are relevant.
//! * Entropy: attention profile of the answer rows (SEP through the last
//!   generated token) over the question tokens, averaged over the split.

use super::train::answer_targets;
use crate::data::{self, QAPair, Vocabulary, EOS};
use crate::error::{Error, Result};
use crate::metrics::{
    self, attention_entropy, map_paper, ndcg_paper, ConfusionCounts, MetricsReport, NdcgVariant,
    RelevanceList,
};
use crate::model::{attention_profile, Model};
use crate::tensor::log_softmax;

const CANDIDATES: usize = 10;

/// Greedy continuation of `BOS question SEP` until EOS or the length limit.
/// Returns the full sequence (without EOS) and the SEP position.
pub fn greedy_answer(
    model: &Model,
    vocab: &Vocabulary,
    question: &str,
) -> Result<(Vec<usize>, usize)> {
    let max_len = model.config().max_seq_len;
    let mut ids = data::encode_prompt(question, vocab, max_len)?;
    let sep = ids.len() - 1;
    while ids.len() < max_len {
        let (logits, _) = model.infer(&ids, false)?;
        let v = model.config().vocab_size;
        let last = &logits.data()[(ids.len() - 1) * v..ids.len() * v];
        let mut best = 0;
        for (t, &x) in last.iter().enumerate() {
            if x > last[best] {
                best = t;
            }
        }
        if best == EOS {
            break;
        }
        ids.push(best);
    }
    Ok((ids, sep))
}

/// Per-target log-probabilities of a teacher-forced pair.
fn target_log_probs(
    model: &Model,
    vocab: &Vocabulary,
    question: &str,
    answer: &str,
) -> Result<Vec<f64>> {
    let e = data::encode(question, answer, vocab, model.config().max_seq_len)?;
    let (logits, _) = model.infer(e.tokens(), false)?;
    let v = model.config().vocab_size;
    let mut out = Vec::new();
    for (p, t) in answer_targets(&e).into_iter().enumerate() {
        if let Some(t) = t {
            out.push(log_softmax(&logits.data()[p * v..(p + 1) * v])?[t]);
        }
    }
    Ok(out)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn evaluate(model: &Model, vocab: &Vocabulary, pairs: &[QAPair]) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::Data("empty evaluation split".into()));
    }
    let max_len = model.config().max_seq_len;
    let n = pairs.len();
    let normalized: Vec<String> = pairs.iter().map(|p| data::normalize(&p.answer)).collect();

    let mut counts = ConfusionCounts::default();
    let mut target_probs = Vec::new();
    let (mut maps, mut ndcgs, mut ndcgs_std, mut entropies) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, pair) in pairs.iter().enumerate() {
        let (seq, sep) = greedy_answer(model, vocab, &pair.question)?;
        let reference = data::encode(&pair.question, &pair.answer, vocab, max_len)?;
        let gold = &reference.ids[reference.answer.clone()];
        counts += metrics::overlap_counts(&seq[sep + 1..], gold);

        let (_, capture) = model.infer(&seq, true)?;
        let capture = capture.expect("capture requested");
        let profile = attention_profile(&capture, 1..sep, sep..seq.len())?;
        entropies.push(attention_entropy(&profile)?);

        let mut scored = Vec::with_capacity(CANDIDATES);
        for j in 0..CANDIDATES.min(n) {
            let c = (i + j) % n;
            let lp = target_log_probs(model, vocab, &pair.question, &pairs[c].answer)?;
            if j == 0 {
                target_probs.extend(lp.iter().map(|l| l.exp()));
            }
            scored.push((mean(&lp), normalized[c] == normalized[i]));
        }
        // stable sort keeps candidate order on ties
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let grades: Vec<u32> = scored.iter().map(|&(_, rel)| u32::from(rel)).collect();
        let n_rel = grades.iter().filter(|&&g| g > 0).count();
        let list = RelevanceList::new(grades, n_rel)?;
        maps.push(map_paper(&list)?);
        ndcgs.push(ndcg_paper(&list, NdcgVariant::Paper)?);
        ndcgs_std.push(ndcg_paper(&list, NdcgVariant::Standard)?);
    }
    let (precision, recall) = metrics::precision_recall(counts);
    let ones = vec![1.0; target_probs.len()];
    Ok(MetricsReport {
        f1: metrics::f1(precision, recall)?,
        precision,
        recall,
        mae: metrics::mae(&target_probs, &ones)?,
        map: mean(&maps),
        ndcg: mean(&ndcgs),
        ndcg_standard: mean(&ndcgs_std),
        attention_entropy: mean(&entropies),
        counts,
        n_examples: n,
    })
}
