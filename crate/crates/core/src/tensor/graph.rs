use std::sync::atomic::{AtomicU64, Ordering};

use super::ops::{logsumexp, softmax_in_place};
use super::{rows_cols, Tensor};
use crate::error::{Error, Result};

const LAYER_NORM_EPS: f64 = 1e-5;

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node of a [`Graph`]. Only valid for the graph that made it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    graph: u64,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Transpose(usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    Softmax(usize),
    LayerNorm {
        input: usize,
        gamma: usize,
        beta: usize,
        normalized: Vec<f64>,
        rstd: Vec<f64>,
    },
    Embedding {
        table: usize,
        ids: Vec<usize>,
    },
    SliceCols {
        input: usize,
        start: usize,
    },
    ConcatCols(Vec<usize>),
    Sum(usize),
    CrossEntropy {
        logits: usize,
        targets: Vec<Option<usize>>,
        probs: Vec<f64>,
        count: usize,
    },
    SoftCrossEntropy {
        logits: usize,
        targets: Vec<f64>,
        probs: Vec<f64>,
        count: usize,
    },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

impl Node {
    fn rc(&self) -> (usize, usize) {
        rows_cols(&self.shape)
    }
}

/// A tape of primitive applications in evaluation order.
///
/// Nodes can only reference nodes created before them, so the tape is a
/// topological order by construction and can never contain a cycle. Handles
/// from a different graph are rejected when an operation is recorded.
#[derive(Debug)]
pub struct Graph {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf holding a copy of `tensor`. It receives a gradient on
    /// [`Graph::backward`] iff `tensor.requires_grad()`.
    pub fn leaf(&mut self, tensor: &Tensor) -> Var {
        self.push_unchecked(
            Op::Leaf,
            tensor.shape().to_vec(),
            tensor.data().to_vec(),
            tensor.requires_grad(),
        )
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, tensor: &Tensor) -> Var {
        self.push_unchecked(
            Op::Leaf,
            tensor.shape().to_vec(),
            tensor.data().to_vec(),
            false,
        )
    }

    /// # Panics
    /// If `v` belongs to another graph.
    pub fn value(&self, v: Var) -> &[f64] {
        &self.expect_node(v).value
    }

    /// # Panics
    /// If `v` belongs to another graph.
    pub fn shape(&self, v: Var) -> &[usize] {
        &self.expect_node(v).shape
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let node = self.expect_node(v);
        Tensor::new(node.shape.clone(), node.value.clone()).expect("graph values are finite")
    }

    /// Accumulated gradient of a leaf, if backward has reached it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.expect_node(v).grad.as_deref()
    }

    /// Clears every accumulated leaf gradient.
    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    fn expect_node(&self, v: Var) -> &Node {
        self.node(v)
            .expect("variable does not belong to this graph")
    }

    fn node(&self, v: Var) -> Result<&Node> {
        if v.graph != self.id {
            return Err(Error::InvalidGraph(
                "variable belongs to another graph".into(),
            ));
        }
        self.nodes
            .get(v.index)
            .ok_or_else(|| Error::InvalidGraph(format!("unknown node {}", v.index)))
    }

    fn push_unchecked(&mut self, op: Op, shape: Vec<usize>, value: Vec<f64>, rg: bool) -> Var {
        let index = self.nodes.len();
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad: rg,
            grad: None,
        });
        Var {
            graph: self.id,
            index,
        }
    }

    fn push(
        &mut self,
        name: &'static str,
        op: Op,
        shape: Vec<usize>,
        value: Vec<f64>,
        rg: bool,
    ) -> Result<Var> {
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOutput { op: name });
        }
        Ok(self.push_unchecked(op, shape, value, rg))
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, nb) = (self.node(a)?, self.node(b)?);
        if na.shape.len() != 2 || nb.shape.len() != 2 || na.shape[1] != nb.shape[0] {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}", na.shape, nb.shape),
            ));
        }
        let (m, k, n) = (na.shape[0], na.shape[1], nb.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let av = na.value[i * k + p];
                if av == 0.0 {
                    continue;
                }
                let brow = &nb.value[p * n..(p + 1) * n];
                for (o, bv) in row.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        let rg = na.requires_grad || nb.requires_grad;
        self.push("matmul", Op::MatMul(a.index, b.index), vec![m, n], out, rg)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let na = self.node(a)?;
        if na.shape.len() != 2 {
            return Err(Error::shape("transpose", format!("{:?}", na.shape)));
        }
        let (r, c) = (na.shape[0], na.shape[1]);
        let out = transposed(&na.value, r, c);
        let rg = na.requires_grad;
        self.push("transpose", Op::Transpose(a.index), vec![c, r], out, rg)
    }

    /// Elementwise sum of equal shapes.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, nb) = (self.node(a)?, self.node(b)?);
        if na.shape != nb.shape {
            return Err(Error::shape(
                "add",
                format!("{:?} + {:?}", na.shape, nb.shape),
            ));
        }
        let out = na.value.iter().zip(&nb.value).map(|(x, y)| x + y).collect();
        let (shape, rg) = (na.shape.clone(), na.requires_grad || nb.requires_grad);
        self.push("add", Op::Add(a.index, b.index), shape, out, rg)
    }

    /// Adds a length-`cols` vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (na, nb) = (self.node(a)?, self.node(bias)?);
        let (r, c) = na.rc();
        if nb.value.len() != c {
            return Err(Error::shape(
                "add_row",
                format!("{:?} + row {:?}", na.shape, nb.shape),
            ));
        }
        let mut out = na.value.clone();
        for i in 0..r {
            for (o, b) in out[i * c..(i + 1) * c].iter_mut().zip(&nb.value) {
                *o += b;
            }
        }
        let (shape, rg) = (na.shape.clone(), na.requires_grad || nb.requires_grad);
        self.push("add_row", Op::AddRow(a.index, bias.index), shape, out, rg)
    }

    /// Elementwise product of equal shapes.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, nb) = (self.node(a)?, self.node(b)?);
        if na.shape != nb.shape {
            return Err(Error::shape(
                "mul",
                format!("{:?} * {:?}", na.shape, nb.shape),
            ));
        }
        let out = na.value.iter().zip(&nb.value).map(|(x, y)| x * y).collect();
        let (shape, rg) = (na.shape.clone(), na.requires_grad || nb.requires_grad);
        self.push("mul", Op::Mul(a.index, b.index), shape, out, rg)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        if !factor.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        let na = self.node(a)?;
        let out = na.value.iter().map(|x| x * factor).collect();
        let (shape, rg) = (na.shape.clone(), na.requires_grad);
        self.push("scale", Op::Scale(a.index, factor), shape, out, rg)
    }

    /// `max(x, 0)`; the subgradient at exactly 0 is taken as 0.
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let na = self.node(a)?;
        let out = na
            .value
            .iter()
            .map(|&x| if x > 0.0 { x } else { 0.0 })
            .collect();
        let (shape, rg) = (na.shape.clone(), na.requires_grad);
        self.push("relu", Op::Relu(a.index), shape, out, rg)
    }

    /// Row-wise softmax. With `causal`, entry `(i, j)` for `j > i` gets
    /// probability exactly 0.
    pub fn softmax_rows(&mut self, a: Var, causal: bool) -> Result<Var> {
        let na = self.node(a)?;
        let (r, c) = na.rc();
        let mut out = na.value.clone();
        for i in 0..r {
            let row = &mut out[i * c..(i + 1) * c];
            let visible = if causal { (i + 1).min(c) } else { c };
            softmax_in_place(&mut row[..visible]);
            row[visible..].iter_mut().for_each(|v| *v = 0.0);
        }
        let (shape, rg) = (na.shape.clone(), na.requires_grad);
        self.push("softmax", Op::Softmax(a.index), shape, out, rg)
    }

    /// Row-wise layer normalization with learned gain and bias.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (nx, ng, nb) = (self.node(x)?, self.node(gamma)?, self.node(beta)?);
        let (r, c) = nx.rc();
        if ng.value.len() != c || nb.value.len() != c {
            return Err(Error::shape(
                "layer_norm",
                format!(
                    "input {:?}, gamma {:?}, beta {:?}",
                    nx.shape, ng.shape, nb.shape
                ),
            ));
        }
        let mut normalized = vec![0.0; r * c];
        let mut rstd = vec![0.0; r];
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &nx.value[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            rstd[i] = s;
            for j in 0..c {
                let xh = (row[j] - mean) * s;
                normalized[i * c + j] = xh;
                out[i * c + j] = ng.value[j] * xh + nb.value[j];
            }
        }
        let shape = nx.shape.clone();
        let rg = nx.requires_grad || ng.requires_grad || nb.requires_grad;
        let op = Op::LayerNorm {
            input: x.index,
            gamma: gamma.index,
            beta: beta.index,
            normalized,
            rstd,
        };
        self.push("layer_norm", op, shape, out, rg)
    }

    /// Gathers rows of a `[vocab, dim]` table.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let nt = self.node(table)?;
        if nt.shape.len() != 2 || ids.is_empty() {
            return Err(Error::shape(
                "embedding",
                format!("table {:?} with {} ids", nt.shape, ids.len()),
            ));
        }
        let (v, d) = (nt.shape[0], nt.shape[1]);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(Error::IndexOutOfRange { index: id, size: v });
            }
            out.extend_from_slice(&nt.value[id * d..(id + 1) * d]);
        }
        let rg = nt.requires_grad;
        let op = Op::Embedding {
            table: table.index,
            ids: ids.to_vec(),
        };
        self.push("embedding", op, vec![ids.len(), d], out, rg)
    }

    /// Columns `start..start + width` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Result<Var> {
        let na = self.node(a)?;
        let (r, c) = na.rc();
        if na.shape.len() != 2 || width == 0 || start + width > c {
            return Err(Error::shape(
                "slice_cols",
                format!("{:?}[.., {start}..{}]", na.shape, start + width),
            ));
        }
        let mut out = Vec::with_capacity(r * width);
        for i in 0..r {
            out.extend_from_slice(&na.value[i * c + start..i * c + start + width]);
        }
        let rg = na.requires_grad;
        let op = Op::SliceCols {
            input: a.index,
            start,
        };
        self.push("slice_cols", op, vec![r, width], out, rg)
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::shape("concat_cols", "no inputs"));
        }
        let mut nodes = Vec::with_capacity(parts.len());
        for &p in parts {
            nodes.push(self.node(p)?);
        }
        let rows = nodes[0].rc().0;
        if nodes
            .iter()
            .any(|n| n.shape.len() != 2 || n.shape[0] != rows)
        {
            return Err(Error::shape("concat_cols", "row counts differ"));
        }
        let total: usize = nodes.iter().map(|n| n.shape[1]).sum();
        let mut out = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for n in &nodes {
                let c = n.shape[1];
                out.extend_from_slice(&n.value[i * c..(i + 1) * c]);
            }
        }
        let rg = nodes.iter().any(|n| n.requires_grad);
        let op = Op::ConcatCols(parts.iter().map(|p| p.index).collect());
        self.push("concat_cols", op, vec![rows, total], out, rg)
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let na = self.node(a)?;
        let s = na.value.iter().sum();
        let rg = na.requires_grad;
        self.push("sum", Op::Sum(a.index), vec![1], vec![s], rg)
    }

    /// Mean of `-ln softmax(row)[target]` over the rows whose target is set.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[Option<usize>]) -> Result<Var> {
        let nl = self.node(logits)?;
        let (r, c) = nl.rc();
        if targets.len() != r {
            return Err(Error::shape(
                "cross_entropy",
                format!("{} targets for {r} rows", targets.len()),
            ));
        }
        let mut probs = nl.value.clone();
        let mut total = 0.0;
        let mut count = 0;
        for (i, t) in targets.iter().enumerate() {
            let row = &nl.value[i * c..(i + 1) * c];
            if let Some(t) = *t {
                if t >= c {
                    return Err(Error::IndexOutOfRange { index: t, size: c });
                }
                total += logsumexp(row) - row[t];
                count += 1;
            }
            softmax_in_place(&mut probs[i * c..(i + 1) * c]);
        }
        if count == 0 {
            return Err(Error::shape("cross_entropy", "no target positions"));
        }
        let loss = total / count as f64;
        let rg = nl.requires_grad;
        let op = Op::CrossEntropy {
            logits: logits.index,
            targets: targets.to_vec(),
            probs,
            count,
        };
        self.push("cross_entropy", op, vec![1], vec![loss], rg)
    }

    /// Cross-entropy against soft targets `q` (same shape as `logits`):
    /// mean over rows with positive mass of `-sum_c q_c ln p_c`.
    pub fn soft_cross_entropy(&mut self, logits: Var, targets: &[f64]) -> Result<Var> {
        let nl = self.node(logits)?;
        let (r, c) = nl.rc();
        if targets.len() != r * c {
            return Err(Error::shape(
                "soft_cross_entropy",
                format!("{} target values for {:?}", targets.len(), nl.shape),
            ));
        }
        if targets.iter().any(|q| !q.is_finite() || *q < 0.0) {
            return Err(Error::Domain(
                "soft targets must be finite and non-negative".into(),
            ));
        }
        let mut probs = nl.value.clone();
        let mut total = 0.0;
        let mut count = 0;
        for i in 0..r {
            let row = &nl.value[i * c..(i + 1) * c];
            let q = &targets[i * c..(i + 1) * c];
            if q.iter().sum::<f64>() > 0.0 {
                let lse = logsumexp(row);
                total += q.iter().zip(row).map(|(q, z)| q * (lse - z)).sum::<f64>();
                count += 1;
            }
            softmax_in_place(&mut probs[i * c..(i + 1) * c]);
        }
        if count == 0 {
            return Err(Error::shape("soft_cross_entropy", "no target mass"));
        }
        let loss = total / count as f64;
        let rg = nl.requires_grad;
        let op = Op::SoftCrossEntropy {
            logits: logits.index,
            targets: targets.to_vec(),
            probs,
            count,
        };
        self.push("soft_cross_entropy", op, vec![1], vec![loss], rg)
    }

    /// Reverse pass from a scalar `loss`.
    ///
    /// Gradients are summed over fan-out and added into each trainable
    /// leaf's buffer; a second call without [`Graph::zero_grad`] accumulates.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let root = self.node(loss)?;
        if root.value.len() != 1 {
            return Err(Error::NonScalarLoss(root.shape.clone()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.index + 1];
        grads[loss.index] = Some(vec![1.0]);

        for i in (0..=loss.index).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                grads[i] = Some(g);
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }

        for (node, g) in self.nodes.iter_mut().zip(grads) {
            if let (Op::Leaf, true, Some(g)) = (&node.op, node.requires_grad, g) {
                match &mut node.grad {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, d)| *a += d),
                    None => node.grad = Some(g),
                }
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let nodes = &self.nodes;
        let wants = |j: usize| nodes[j].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (na, nb) = (&nodes[*a], &nodes[*b]);
                let (m, k, n) = (na.shape[0], na.shape[1], nb.shape[1]);
                if wants(*a) {
                    let da = slot(grads, *a, m * k);
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let brow = &nb.value[p * n..(p + 1) * n];
                            da[r * k + p] += dot(grow, brow);
                        }
                    }
                }
                if wants(*b) {
                    let db = slot(grads, *b, k * n);
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let av = na.value[r * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            for (d, gv) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *d += av * gv;
                            }
                        }
                    }
                }
            }
            Op::Transpose(a) => {
                let (r, c) = (node.shape[0], node.shape[1]);
                let t = transposed(g, r, c);
                add_into(slot(grads, *a, t.len()), &t);
            }
            Op::Add(a, b) => {
                for j in [*a, *b] {
                    if wants(j) {
                        add_into(slot(grads, j, g.len()), g);
                    }
                }
            }
            Op::AddRow(a, b) => {
                if wants(*a) {
                    add_into(slot(grads, *a, g.len()), g);
                }
                if wants(*b) {
                    let (_, c) = node.rc();
                    let db = slot(grads, *b, c);
                    for row in g.chunks(c) {
                        add_into(db, row);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                if wants(*a) {
                    let da = slot(grads, *a, g.len());
                    for ((d, gv), y) in da.iter_mut().zip(g).zip(vb) {
                        *d += gv * y;
                    }
                }
                if wants(*b) {
                    let db = slot(grads, *b, g.len());
                    for ((d, gv), x) in db.iter_mut().zip(g).zip(va) {
                        *d += gv * x;
                    }
                }
            }
            Op::Scale(a, s) => {
                let da = slot(grads, *a, g.len());
                for (d, gv) in da.iter_mut().zip(g) {
                    *d += s * gv;
                }
            }
            Op::Relu(a) => {
                let x = &nodes[*a].value;
                let da = slot(grads, *a, g.len());
                for ((d, gv), xv) in da.iter_mut().zip(g).zip(x) {
                    if *xv > 0.0 {
                        *d += gv;
                    }
                }
            }
            Op::Softmax(a) => {
                let (_, c) = node.rc();
                let da = slot(grads, *a, g.len());
                for ((drow, grow), yrow) in
                    da.chunks_mut(c).zip(g.chunks(c)).zip(node.value.chunks(c))
                {
                    let inner = dot(grow, yrow);
                    for ((d, gv), y) in drow.iter_mut().zip(grow).zip(yrow) {
                        *d += y * (gv - inner);
                    }
                }
            }
            Op::LayerNorm {
                input,
                gamma,
                beta,
                normalized,
                rstd,
            } => {
                let (_, c) = node.rc();
                let gam = &nodes[*gamma].value;
                if wants(*gamma) {
                    let dg = slot(grads, *gamma, c);
                    for (grow, xrow) in g.chunks(c).zip(normalized.chunks(c)) {
                        for ((d, gv), xh) in dg.iter_mut().zip(grow).zip(xrow) {
                            *d += gv * xh;
                        }
                    }
                }
                if wants(*beta) {
                    let db = slot(grads, *beta, c);
                    for grow in g.chunks(c) {
                        add_into(db, grow);
                    }
                }
                if wants(*input) {
                    let dx = slot(grads, *input, g.len());
                    let n = c as f64;
                    let mut scaled = vec![0.0; c];
                    for (row, ((dxrow, grow), xrow)) in dx
                        .chunks_mut(c)
                        .zip(g.chunks(c))
                        .zip(normalized.chunks(c))
                        .enumerate()
                    {
                        for ((s, gv), w) in scaled.iter_mut().zip(grow).zip(gam) {
                            *s = gv * w;
                        }
                        let sum_s: f64 = scaled.iter().sum();
                        let sum_sx = dot(&scaled, xrow);
                        let k = rstd[row] / n;
                        for ((d, s), xh) in dxrow.iter_mut().zip(&scaled).zip(xrow) {
                            *d += k * (n * s - sum_s - xh * sum_sx);
                        }
                    }
                }
            }
            Op::Embedding { table, ids } => {
                let nt = &nodes[*table];
                let d = nt.shape[1];
                let dt = slot(grads, *table, nt.value.len());
                for (row, &id) in ids.iter().enumerate() {
                    add_into(&mut dt[id * d..(id + 1) * d], &g[row * d..(row + 1) * d]);
                }
            }
            Op::SliceCols { input, start } => {
                let (_, c) = nodes[*input].rc();
                let w = node.shape[1];
                let da = slot(grads, *input, nodes[*input].value.len());
                for (r, grow) in g.chunks(w).enumerate() {
                    add_into(&mut da[r * c + start..r * c + start + w], grow);
                }
            }
            Op::ConcatCols(parts) => {
                let total = node.shape[1];
                let mut offset = 0;
                for &p in parts {
                    let w = nodes[p].shape[1];
                    if wants(p) {
                        let dp = slot(grads, p, nodes[p].value.len());
                        for (r, drow) in dp.chunks_mut(w).enumerate() {
                            add_into(drow, &g[r * total + offset..r * total + offset + w]);
                        }
                    }
                    offset += w;
                }
            }
            Op::Sum(a) => {
                let da = slot(grads, *a, nodes[*a].value.len());
                da.iter_mut().for_each(|d| *d += g[0]);
            }
            Op::CrossEntropy {
                logits,
                targets,
                probs,
                count,
            } => {
                let (_, c) = nodes[*logits].rc();
                let scale = g[0] / *count as f64;
                let dl = slot(grads, *logits, probs.len());
                for (i, t) in targets.iter().enumerate() {
                    if let Some(t) = *t {
                        let row = &mut dl[i * c..(i + 1) * c];
                        for (d, p) in row.iter_mut().zip(&probs[i * c..(i + 1) * c]) {
                            *d += scale * p;
                        }
                        row[t] -= scale;
                    }
                }
            }
            Op::SoftCrossEntropy {
                logits,
                targets,
                probs,
                count,
            } => {
                let (_, c) = nodes[*logits].rc();
                let scale = g[0] / *count as f64;
                let dl = slot(grads, *logits, probs.len());
                for ((drow, q), p) in dl.chunks_mut(c).zip(targets.chunks(c)).zip(probs.chunks(c)) {
                    let mass: f64 = q.iter().sum();
                    if mass > 0.0 {
                        for ((d, qv), pv) in drow.iter_mut().zip(q).zip(p) {
                            *d += scale * (mass * pv - qv);
                        }
                    }
                }
            }
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], index: usize, len: usize) -> &mut Vec<f64> {
    grads[index].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(acc: &mut [f64], delta: &[f64]) {
    for (a, d) in acc.iter_mut().zip(delta) {
        *a += d;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn transposed(data: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = data[i * c + j];
        }
    }
    out
}
