//! Slice-level kernels shared by the graph and by callers that only need
//! values.

use crate::error::{Error, Result};

fn check(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptyVector);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(())
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(x: &[f64]) -> Result<Vec<f64>> {
    check(x)?;
    let mut out = x.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// `x - logsumexp(x)`.
pub fn log_softmax(x: &[f64]) -> Result<Vec<f64>> {
    check(x)?;
    let lse = logsumexp(x);
    Ok(x.iter().map(|v| v - lse).collect())
}

/// `-ln softmax(logits)[target]`, computed through log-sum-exp.
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<f64> {
    check(logits)?;
    if target >= logits.len() {
        return Err(Error::IndexOutOfRange {
            index: target,
            size: logits.len(),
        });
    }
    // Clamp guards the sign of a round-off-sized negative result.
    Ok((logsumexp(logits) - logits[target]).max(0.0))
}

pub(crate) fn logsumexp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = x.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

pub(crate) fn softmax_in_place(x: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}
