use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::rng::{self, mix_seed, LabRng};
use crate::tensor::Tensor;

/// Shape parameter of the symmetric Beta used to draw mixup weights.
pub const MIXUP_ALPHA: f64 = 0.2;

/// Index batches for one epoch: a shuffle of `0..n` keyed by `(seed, epoch)`
/// cut into runs of `batch_size` (the last may be short).
pub fn batches(n: usize, batch_size: usize, epoch: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::Data("cannot batch an empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(Error::Data("batch_size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut rng::rng(mix_seed(seed, epoch as u64)), &mut order);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// `lambda * a + (1 - lambda) * b` for both inputs and label distributions.
pub fn mixup(
    inputs_a: &Tensor,
    inputs_b: &Tensor,
    labels_a: &Tensor,
    labels_b: &Tensor,
    lambda: f64,
) -> Result<(Tensor, Tensor)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "mixup lambda {lambda} outside [0, 1]"
        )));
    }
    let mix = |a: &Tensor, b: &Tensor, what: &str| -> Result<Tensor> {
        if a.shape() != b.shape() {
            return Err(Error::shape(
                "mixup",
                format!("{what} shapes {:?} and {:?}", a.shape(), b.shape()),
            ));
        }
        let data = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
            .collect();
        Tensor::new(a.shape().to_vec(), data)
    };
    Ok((
        mix(inputs_a, inputs_b, "input")?,
        mix(labels_a, labels_b, "label")?,
    ))
}

/// Draws a mixup weight from `Beta(alpha, alpha)`.
pub fn sample_mixup_lambda(rng: &mut LabRng, alpha: f64) -> Result<f64> {
    let beta =
        Beta::new(alpha, alpha).map_err(|e| Error::Domain(format!("mixup alpha {alpha}: {e}")))?;
    Ok(beta.sample(rng))
}
