use std::ops::Range;

use crate::error::{Error, Result};

/// Attention probabilities recorded during one forward pass.
///
/// `layers()[l][h]` is a `seq_len x seq_len` row-major matrix whose row `i` is
/// the distribution of query position `i` over key positions.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionCapture {
    seq_len: usize,
    layers: Vec<Vec<Vec<f64>>>,
}

impl AttentionCapture {
    /// Validating constructor: every matrix must be `seq_len^2` and every row
    /// non-negative and summing to 1 within 1e-9.
    pub fn new(seq_len: usize, layers: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if seq_len == 0 || layers.is_empty() || layers.iter().any(Vec::is_empty) {
            return Err(Error::shape("attention_capture", "empty capture"));
        }
        for head in layers.iter().flatten() {
            if head.len() != seq_len * seq_len {
                return Err(Error::shape(
                    "attention_capture",
                    format!("matrix of {} entries for seq_len {seq_len}", head.len()),
                ));
            }
            for row in head.chunks(seq_len) {
                if row.iter().any(|&p| p.is_nan() || p < 0.0)
                    || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    return Err(Error::Domain("attention row is not a distribution".into()));
                }
            }
        }
        Ok(AttentionCapture { seq_len, layers })
    }

    pub(crate) fn from_raw(seq_len: usize, layers: Vec<Vec<Vec<f64>>>) -> Self {
        AttentionCapture { seq_len, layers }
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn layers(&self) -> &[Vec<Vec<f64>>] {
        &self.layers
    }

    fn weight(&self, layer: usize, head: usize, query: usize, key: usize) -> f64 {
        self.layers[layer][head][query * self.seq_len + key]
    }
}

/// Distribution of answer-to-question attention over question positions.
///
/// For each question position `j`, averages `attn[i -> j]` over layers, then
/// heads, then answer positions `i`, and renormalizes the result to sum to 1.
pub fn attention_profile(
    capture: &AttentionCapture,
    question_span: Range<usize>,
    answer_span: Range<usize>,
) -> Result<Vec<f64>> {
    if question_span.is_empty() {
        return Err(Error::EmptyQuestionSpan);
    }
    if answer_span.is_empty() {
        return Err(Error::Span("empty answer span".into()));
    }
    let n = capture.seq_len;
    if question_span.end > n || answer_span.end > n {
        return Err(Error::Span(format!(
            "spans {question_span:?} / {answer_span:?} exceed sequence length {n}"
        )));
    }
    if question_span.start < answer_span.end && answer_span.start < question_span.end {
        return Err(Error::Span("question and answer spans overlap".into()));
    }

    let n_layers = capture.layers.len() as f64;
    let n_heads = capture.layers[0].len();
    let n_answer = answer_span.len() as f64;
    let mut profile = Vec::with_capacity(question_span.len());
    for j in question_span {
        let mut over_answer = 0.0;
        for i in answer_span.clone() {
            let mut over_heads = 0.0;
            for h in 0..n_heads {
                let over_layers: f64 = (0..capture.layers.len())
                    .map(|l| capture.weight(l, h, i, j))
                    .sum();
                over_heads += over_layers / n_layers;
            }
            over_answer += over_heads / n_heads as f64;
        }
        profile.push(over_answer / n_answer);
    }
    let total: f64 = profile.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateAttention);
    }
    profile.iter_mut().for_each(|p| *p /= total);
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform_causal(n: usize) -> Vec<f64> {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                m[i * n + j] = 1.0 / (i + 1) as f64;
            }
        }
        m
    }

    #[test]
    fn single_question_token() {
        let cap = AttentionCapture::new(3, vec![vec![uniform_causal(3)]]).unwrap();
        assert_eq!(attention_profile(&cap, 0..1, 1..3).unwrap(), vec![1.0]);
    }

    #[test]
    fn uniform_attention_gives_uniform_profile() {
        let n = 4;
        let full = vec![1.0 / n as f64; n * n];
        let cap = AttentionCapture::new(
            n,
            vec![vec![full.clone(), full.clone()], vec![full.clone(), full]],
        )
        .unwrap();
        let p = attention_profile(&cap, 0..3, 3..4).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_set_masses() {
        // answer position 2 sends 0.3 and 0.1 to the two question tokens
        let row2 = [0.3, 0.1, 0.6];
        let mut m = vec![1.0, 0.0, 0.0, 0.5, 0.5, 0.0];
        m.extend_from_slice(&row2);
        let cap = AttentionCapture::new(3, vec![vec![m]]).unwrap();
        let p = attention_profile(&cap, 0..2, 2..3).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-15);
        assert!((p[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let cap = AttentionCapture::new(3, vec![vec![uniform_causal(3)]]).unwrap();
        assert!(matches!(
            attention_profile(&cap, 0..0, 1..3),
            Err(Error::EmptyQuestionSpan)
        ));
        assert!(attention_profile(&cap, 0..2, 1..3).is_err());
        assert!(attention_profile(&cap, 0..1, 1..4).is_err());
        // answer attends only to itself: zero mass on the question
        let m = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let cap = AttentionCapture::new(3, vec![vec![m]]).unwrap();
        assert!(matches!(
            attention_profile(&cap, 0..1, 2..3),
            Err(Error::DegenerateAttention)
        ));
        assert!(AttentionCapture::new(2, vec![vec![vec![0.5, 0.4, 0.5, 0.5]]]).is_err());
    }

    fn random_capture(n: usize, weights: &[f64]) -> Vec<Vec<Vec<f64>>> {
        // two layers, two heads, dense rows from positive weights
        let mut layers = Vec::new();
        let mut it = weights.iter().cycle();
        for _ in 0..2 {
            let mut heads = Vec::new();
            for _ in 0..2 {
                let mut m = Vec::with_capacity(n * n);
                for _ in 0..n {
                    let row: Vec<f64> = (0..n).map(|_| *it.next().unwrap()).collect();
                    let s: f64 = row.iter().sum();
                    m.extend(row.iter().map(|v| v / s));
                }
                heads.push(m);
            }
            layers.push(heads);
        }
        layers
    }

    proptest! {
        #[test]
        fn profile_sums_to_one_and_is_permutation_equivariant(
            weights in prop::collection::vec(0.01f64..1.0, 64),
            q in 2usize..5,
        ) {
            let n = q + 2;
            let layers = random_capture(n, &weights);
            let cap = AttentionCapture::new(n, layers.clone()).unwrap();
            let p = attention_profile(&cap, 0..q, q..n).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);

            // swap key columns 0 and 1 in every matrix: the profile swaps too
            let swapped: Vec<Vec<Vec<f64>>> = layers
                .iter()
                .map(|heads| heads.iter().map(|m| {
                    let mut m = m.clone();
                    for i in 0..n {
                        m.swap(i * n, i * n + 1);
                    }
                    m
                }).collect())
                .collect();
            let cap = AttentionCapture::new(n, swapped).unwrap();
            let ps = attention_profile(&cap, 0..q, q..n).unwrap();
            prop_assert!((ps[0] - p[1]).abs() <= 1e-12);
            prop_assert!((ps[1] - p[0]).abs() <= 1e-12);
            for j in 2..q {
                prop_assert!((ps[j] - p[j]).abs() <= 1e-12);
            }
        }
    }
}
