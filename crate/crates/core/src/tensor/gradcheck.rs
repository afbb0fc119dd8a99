//! Central-difference gradient checking.

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::{self, LabRng};

/// Seeds used by the built-in check suites.
pub const SUITE_SEEDS: [u64; 5] = [11, 23, 37, 41, 59];

/// Step used by the built-in check suites.
pub const SUITE_EPSILON: f64 = 1e-5;

/// Largest relative error a suite entry may report.
pub const SUITE_TOLERANCE: f64 = 1e-4;

/// Result of checking one function at one point.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: String,
    pub seed: u64,
    pub max_rel_error: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_rel_error < SUITE_TOLERANCE
    }
}

/// Compares the tape gradient of `f` at `point` with central differences
/// `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)` for every coordinate.
///
/// Returns the largest `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn grad_check<F>(f: F, point: &Tensor, epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::NonPositiveEpsilon);
    }
    let leaf = point.clone().with_grad();
    let mut g = Graph::new();
    let x = g.leaf(&leaf);
    let y = f(&mut g, x)?;
    if !g.value(y)[0].is_finite() {
        return Err(Error::NonFiniteFunction { coordinate: 0 });
    }
    g.backward(y)?;
    let analytic = g
        .grad(x)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; point.len()]);

    let eval = |data: Vec<f64>, coordinate: usize| -> Result<f64> {
        let t = Tensor::new(point.shape().to_vec(), data)
            .map_err(|_| Error::NonFiniteFunction { coordinate })?;
        let mut g = Graph::new();
        let x = g.constant(&t);
        let y = f(&mut g, x).map_err(|e| match e {
            Error::NonFiniteOutput { .. } => Error::NonFiniteFunction { coordinate },
            other => other,
        })?;
        let v = g.value(y)[0];
        if !v.is_finite() {
            return Err(Error::NonFiniteFunction { coordinate });
        }
        Ok(v)
    };

    let mut worst = 0.0f64;
    for i in 0..point.len() {
        let mut plus = point.data().to_vec();
        let mut minus = plus.clone();
        plus[i] += epsilon;
        minus[i] -= epsilon;
        let numeric = (eval(plus, i)? - eval(minus, i)?) / (2.0 * epsilon);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// `sum(out * w)` with fixed, non-degenerate weights, turning any output into
/// a scalar whose gradient exercises every entry.
pub fn readout(g: &mut Graph, out: Var) -> Result<Var> {
    let shape = g.shape(out).to_vec();
    let n: usize = shape.iter().product();
    let w: Vec<f64> = (0..n).map(|i| 0.5 + (1.7 * i as f64 + 0.3).sin()).collect();
    let wv = g.constant(&Tensor::new(shape, w)?);
    let prod = g.mul(out, wv)?;
    g.sum(prod)
}

fn random_tensor(rng: &mut LabRng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng::uniform(rng, -1.0, 1.0)).collect();
    Tensor::new(shape, data).expect("finite random data")
}

/// Values bounded away from zero so ReLU kinks stay out of reach of `eps`.
fn kink_free_tensor(rng: &mut LabRng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng::uniform(rng, 0.05, 1.0);
            if rng::unit(rng) < 0.5 {
                -m
            } else {
                m
            }
        })
        .collect();
    Tensor::new(shape, data).expect("finite random data")
}

fn dim(rng: &mut LabRng, lo: usize) -> usize {
    lo + rng::below(rng, 9 - lo)
}

/// Checks every tape primitive at random shapes up to 8x8 for one seed.
pub fn primitive_suite(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = rng::rng(rng::mix_seed(seed, 0xC4EC));
    let eps = SUITE_EPSILON;
    let mut out = Vec::new();
    let mut record = |name: &str, err: Result<f64>| -> Result<()> {
        out.push(CheckOutcome {
            name: name.to_string(),
            seed,
            max_rel_error: err?,
        });
        Ok(())
    };

    let (m, k, n) = (dim(&mut rng, 1), dim(&mut rng, 1), dim(&mut rng, 1));
    let a = random_tensor(&mut rng, vec![m, k]);
    let b = random_tensor(&mut rng, vec![k, n]);
    record(
        "matmul/lhs",
        grad_check(
            |g, x| {
                let bv = g.constant(&b);
                let y = g.matmul(x, bv)?;
                readout(g, y)
            },
            &a,
            eps,
        ),
    )?;
    record(
        "matmul/rhs",
        grad_check(
            |g, x| {
                let av = g.constant(&a);
                let y = g.matmul(av, x)?;
                readout(g, y)
            },
            &b,
            eps,
        ),
    )?;
    record(
        "transpose",
        grad_check(
            |g, x| {
                let y = g.transpose(x)?;
                readout(g, y)
            },
            &a,
            eps,
        ),
    )?;

    let (r, c) = (dim(&mut rng, 1), dim(&mut rng, 2));
    let x0 = random_tensor(&mut rng, vec![r, c]);
    let other = random_tensor(&mut rng, vec![r, c]);
    let row = random_tensor(&mut rng, vec![c]);
    record(
        "add",
        grad_check(
            |g, x| {
                let o = g.constant(&other);
                let y = g.add(x, o)?;
                let y = g.add(y, x)?;
                readout(g, y)
            },
            &x0,
            eps,
        ),
    )?;
    record(
        "add_row/matrix",
        grad_check(
            |g, x| {
                let bv = g.constant(&row);
                let y = g.add_row(x, bv)?;
                readout(g, y)
            },
            &x0,
            eps,
        ),
    )?;
    record(
        "add_row/bias",
        grad_check(
            |g, bias| {
                let xv = g.constant(&x0);
                let y = g.add_row(xv, bias)?;
                readout(g, y)
            },
            &row,
            eps,
        ),
    )?;
    record(
        "mul",
        grad_check(
            |g, x| {
                let o = g.constant(&other);
                let y = g.mul(x, o)?;
                let y = g.mul(y, x)?;
                readout(g, y)
            },
            &x0,
            eps,
        ),
    )?;
    record(
        "scale",
        grad_check(
            |g, x| {
                let y = g.scale(x, -1.75)?;
                readout(g, y)
            },
            &x0,
            eps,
        ),
    )?;
    let kinked = kink_free_tensor(&mut rng, vec![r, c]);
    record(
        "relu",
        grad_check(
            |g, x| {
                let y = g.relu(x)?;
                readout(g, y)
            },
            &kinked,
            eps,
        ),
    )?;
    let logits = random_tensor(&mut rng, vec![r, c])
        .data()
        .iter()
        .map(|v| 3.0 * v)
        .collect();
    let logits = Tensor::matrix(r, c, logits)?;
    record(
        "softmax",
        grad_check(
            |g, x| {
                let y = g.softmax_rows(x, false)?;
                readout(g, y)
            },
            &logits,
            eps,
        ),
    )?;
    let t = dim(&mut rng, 2);
    let square = random_tensor(&mut rng, vec![t, t]);
    record(
        "softmax/causal",
        grad_check(
            |g, x| {
                let y = g.softmax_rows(x, true)?;
                readout(g, y)
            },
            &square,
            eps,
        ),
    )?;

    let gamma = Tensor::vector((0..c).map(|_| rng::uniform(&mut rng, 0.5, 1.5)).collect())?;
    let beta = random_tensor(&mut rng, vec![c]);
    let ln_in = Tensor::matrix(r, c, x0.data().iter().map(|v| 2.0 * v + 0.3).collect())?;
    record(
        "layer_norm/input",
        grad_check(
            |g, x| {
                let (gv, bv) = (g.constant(&gamma), g.constant(&beta));
                let y = g.layer_norm(x, gv, bv)?;
                readout(g, y)
            },
            &ln_in,
            eps,
        ),
    )?;
    record(
        "layer_norm/gamma",
        grad_check(
            |g, gv| {
                let (xv, bv) = (g.constant(&ln_in), g.constant(&beta));
                let y = g.layer_norm(xv, gv, bv)?;
                readout(g, y)
            },
            &gamma,
            eps,
        ),
    )?;
    record(
        "layer_norm/beta",
        grad_check(
            |g, bv| {
                let (xv, gv) = (g.constant(&ln_in), g.constant(&gamma));
                let y = g.layer_norm(xv, gv, bv)?;
                readout(g, y)
            },
            &beta,
            eps,
        ),
    )?;

    let vocab = dim(&mut rng, 2);
    let table = random_tensor(&mut rng, vec![vocab, c]);
    let ids: Vec<usize> = (0..dim(&mut rng, 1))
        .map(|_| rng::below(&mut rng, vocab))
        .collect();
    record(
        "embedding",
        grad_check(
            |g, x| {
                let y = g.embedding(x, &ids)?;
                readout(g, y)
            },
            &table,
            eps,
        ),
    )?;
    let start = rng::below(&mut rng, c - 1);
    let width = 1 + rng::below(&mut rng, c - start);
    record(
        "slice_cols",
        grad_check(
            |g, x| {
                let y = g.slice_cols(x, start, width)?;
                readout(g, y)
            },
            &x0,
            eps,
        ),
    )?;
    record(
        "concat_cols",
        grad_check(
            |g, x| {
                let o = g.constant(&other);
                let y = g.concat_cols(&[o, x, x])?;
                readout(g, y)
            },
            &x0,
            eps,
        ),
    )?;
    record("sum", grad_check(|g, x| g.sum(x), &x0, eps))?;

    let targets: Vec<Option<usize>> = (0..r)
        .map(|i| (i % 3 != 2).then(|| rng::below(&mut rng, c)))
        .collect();
    let targets = if targets.iter().all(Option::is_none) {
        vec![Some(0); r]
    } else {
        targets
    };
    record(
        "cross_entropy",
        grad_check(|g, x| g.cross_entropy(x, &targets), &logits, eps),
    )?;
    let soft: Vec<f64> = (0..r * c).map(|_| rng::unit(&mut rng)).collect();
    record(
        "soft_cross_entropy",
        grad_check(|g, x| g.soft_cross_entropy(x, &soft), &logits, eps),
    )?;
    Ok(out)
}
