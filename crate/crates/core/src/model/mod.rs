//! A tiny pre-norm decoder-only transformer.
//!
//! Parameters are partitioned into five layer groups, bottom to top:
//!
//! | group | contents                                   |
//! |-------|--------------------------------------------|
//! | G0    | token and position embeddings              |
//! | G1    | blocks `0 .. n/3`                          |
//! | G2    | blocks `n/3 .. 2n/3`                       |
//! | G3    | blocks `2n/3 .. n`                         |
//! | G4    | final layer norm and output projection     |
//!
//! (block boundaries use floor division, so every group is non-empty when
//! `n_blocks >= 3`). Parameters are stored in group order, which is also the
//! checkpoint order.

mod attention;
pub mod checkpoint;

pub use attention::{attention_profile, AttentionCapture};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::gradcheck::{self, CheckOutcome};
use crate::tensor::{Graph, Tensor, Var};

/// Number of layer groups a model is split into.
pub const N_GROUPS: usize = 5;

pub const GROUP_NAMES: [&str; N_GROUPS] = ["embeddings", "lower", "middle", "upper", "head"];

const PARAMS_PER_BLOCK: usize = 15;

/// Spread of the random offset added to every parameter before the
/// full-model gradient check. Near-uniform attention at initialization leaves
/// some query/key gradients below the central-difference round-off floor.
const GRADCHECK_OFFSET: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// 0 means "take the size of the corpus vocabulary" when used in a run
    /// config; a model can only be built once it is positive.
    #[serde(default)]
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_blocks: usize,
    pub ffn_multiplier: usize,
    pub max_seq_len: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 0,
            d_model: 16,
            n_heads: 2,
            n_blocks: 3,
            ffn_multiplier: 2,
            max_seq_len: 40,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_blocks", self.n_blocks),
            ("ffn_multiplier", self.ffn_multiplier),
            ("max_seq_len", self.max_seq_len),
        ];
        for (field, value) in positive {
            if value == 0 {
                return Err(Error::ModelConfig {
                    field,
                    reason: "must be positive".into(),
                });
            }
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::ModelConfig {
                field: "n_heads",
                reason: format!(
                    "d_model mod n_heads must be 0 (d_model {}, n_heads {})",
                    self.d_model, self.n_heads
                ),
            });
        }
        if self.n_blocks < 3 {
            return Err(Error::ModelConfig {
                field: "n_blocks",
                reason: "need at least 3 blocks for lower/middle/upper groups".into(),
            });
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn ffn_dim(&self) -> usize {
        self.d_model * self.ffn_multiplier
    }

    /// Group (1, 2 or 3) of transformer block `block`.
    pub fn block_group(&self, block: usize) -> usize {
        let n = self.n_blocks;
        if block < n / 3 {
            1
        } else if block < 2 * n / 3 {
            2
        } else {
            3
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub group: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum InitKind {
    Uniform { fan_in: usize },
    Zeros,
    Ones,
}

/// Parameter layout for a config, in storage (= group) order.
fn layout(config: &ModelConfig) -> Vec<(ParamSpec, InitKind)> {
    let (v, d, t, f) = (
        config.vocab_size,
        config.d_model,
        config.max_seq_len,
        config.ffn_dim(),
    );
    let spec = |name: String, shape: Vec<usize>, group| ParamSpec { name, shape, group };
    let mut out = vec![
        (
            spec("tok_emb".into(), vec![v, d], 0),
            InitKind::Uniform { fan_in: d },
        ),
        (
            spec("pos_emb".into(), vec![t, d], 0),
            InitKind::Uniform { fan_in: d },
        ),
    ];
    for b in 0..config.n_blocks {
        let g = config.block_group(b);
        let p = |suffix: &str| format!("block{b}.{suffix}");
        out.extend([
            (spec(p("ln1.gamma"), vec![d], g), InitKind::Ones),
            (spec(p("ln1.beta"), vec![d], g), InitKind::Zeros),
            (
                spec(p("attn.wq"), vec![d, d], g),
                InitKind::Uniform { fan_in: d },
            ),
            (spec(p("attn.bq"), vec![d], g), InitKind::Zeros),
            (
                spec(p("attn.wk"), vec![d, d], g),
                InitKind::Uniform { fan_in: d },
            ),
            (
                spec(p("attn.wv"), vec![d, d], g),
                InitKind::Uniform { fan_in: d },
            ),
            (spec(p("attn.bv"), vec![d], g), InitKind::Zeros),
            (
                spec(p("attn.wo"), vec![d, d], g),
                InitKind::Uniform { fan_in: d },
            ),
            (spec(p("attn.bo"), vec![d], g), InitKind::Zeros),
            (spec(p("ln2.gamma"), vec![d], g), InitKind::Ones),
            (spec(p("ln2.beta"), vec![d], g), InitKind::Zeros),
            (
                spec(p("ffn.w1"), vec![d, f], g),
                InitKind::Uniform { fan_in: d },
            ),
            (spec(p("ffn.b1"), vec![f], g), InitKind::Zeros),
            (
                spec(p("ffn.w2"), vec![f, d], g),
                InitKind::Uniform { fan_in: f },
            ),
            (spec(p("ffn.b2"), vec![d], g), InitKind::Zeros),
        ]);
    }
    out.extend([
        (spec("ln_f.gamma".into(), vec![d], 4), InitKind::Ones),
        (spec("ln_f.beta".into(), vec![d], 4), InitKind::Zeros),
        (
            spec("head.w".into(), vec![d, v], 4),
            InitKind::Uniform { fan_in: d },
        ),
        (spec("head.b".into(), vec![v], 4), InitKind::Zeros),
    ]);
    out
}

/// One layer group: which parameters it owns and how many scalars they hold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerGroup {
    pub name: String,
    pub params: Vec<usize>,
    pub param_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    specs: Vec<ParamSpec>,
    params: Vec<Tensor>,
}

/// Output of [`forward`].
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// `[batch, seq, vocab]`.
    pub logits: Tensor,
    pub attention: Option<Vec<AttentionCapture>>,
}

impl Model {
    /// Builds a model with parameters drawn deterministically from
    /// `config.seed`: weights `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases
    /// and norm offsets 0, norm gains 1.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut specs = Vec::new();
        let mut params = Vec::new();
        for (index, (spec, kind)) in layout(config).into_iter().enumerate() {
            let n: usize = spec.shape.iter().product();
            let data = match kind {
                InitKind::Zeros => vec![0.0; n],
                InitKind::Ones => vec![1.0; n],
                InitKind::Uniform { fan_in } => {
                    let scale = 1.0 / (fan_in as f64).sqrt();
                    let mut r = rng::rng(rng::mix_seed(config.seed, index as u64));
                    (0..n)
                        .map(|_| rng::uniform(&mut r, -scale, scale))
                        .collect()
                }
            };
            params.push(Tensor::new(spec.shape.clone(), data)?.with_grad());
            specs.push(spec);
        }
        Ok(Model {
            config: config.clone(),
            specs,
            params,
        })
    }

    /// Rebuilds a model from stored parameter values (checkpoint loading).
    pub fn from_parts(config: &ModelConfig, values: Vec<Vec<f64>>) -> Result<Self> {
        let mut model = Model::init(config)?;
        if values.len() != model.params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                model.params.len(),
                values.len()
            )));
        }
        for ((p, spec), data) in model.params.iter_mut().zip(&model.specs).zip(values) {
            *p = Tensor::new(spec.shape.clone(), data)
                .map_err(|e| Error::Checkpoint(format!("{}: {e}", spec.name)))?
                .with_grad();
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Group index of every parameter tensor.
    pub fn param_groups(&self) -> Vec<usize> {
        self.specs.iter().map(|s| s.group).collect()
    }

    pub fn groups(&self) -> [LayerGroup; N_GROUPS] {
        std::array::from_fn(|g| {
            let params: Vec<usize> = (0..self.specs.len())
                .filter(|&i| self.specs[i].group == g)
                .collect();
            let param_count = params.iter().map(|&i| self.params[i].len()).sum();
            LayerGroup {
                name: GROUP_NAMES[g].to_string(),
                params,
                param_count,
            }
        })
    }

    pub fn group_param_counts(&self) -> [usize; N_GROUPS] {
        let groups = self.groups();
        std::array::from_fn(|g| groups[g].param_count)
    }

    /// Little-endian bytes of every parameter in group `group`, in storage
    /// order. These are exactly the group's bytes in a checkpoint.
    pub fn group_bytes(&self, group: usize) -> Vec<u8> {
        self.params
            .iter()
            .zip(&self.specs)
            .filter(|(_, s)| s.group == group)
            .flat_map(|(p, _)| p.data().iter().flat_map(|v| v.to_le_bytes()))
            .collect()
    }

    /// Records every parameter as a leaf of `g`.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| if trainable { g.leaf(p) } else { g.constant(p) })
            .collect()
    }

    pub fn check_tokens(&self, ids: &[usize]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::shape("forward", "empty sequence"));
        }
        if ids.len() > self.config.max_seq_len {
            return Err(Error::SequenceTooLong {
                len: ids.len(),
                max: self.config.max_seq_len,
            });
        }
        if let Some((position, &token)) = ids
            .iter()
            .enumerate()
            .find(|(_, &t)| t >= self.config.vocab_size)
        {
            return Err(Error::TokenOutOfRange {
                token,
                position,
                vocab: self.config.vocab_size,
            });
        }
        Ok(())
    }

    /// Token plus position embeddings, `[seq, d_model]`.
    pub fn embed(&self, g: &mut Graph, vars: &[Var], ids: &[usize]) -> Result<Var> {
        self.check_tokens(ids)?;
        let positions: Vec<usize> = (0..ids.len()).collect();
        let tok = g.embedding(vars[0], ids)?;
        let pos = g.embedding(vars[1], &positions)?;
        g.add(tok, pos)
    }

    /// Runs the blocks and the head on embedded input `x` (`[seq, d_model]`).
    ///
    /// Returns logits `[seq, vocab]` and, per block, the per-head attention
    /// probability nodes.
    pub fn decode(&self, g: &mut Graph, vars: &[Var], x: Var) -> Result<(Var, Vec<Vec<Var>>)> {
        let dh = self.config.head_dim();
        let inv_sqrt = 1.0 / (dh as f64).sqrt();
        let mut x = x;
        let mut attention = Vec::with_capacity(self.config.n_blocks);
        for b in 0..self.config.n_blocks {
            let p = &vars[2 + PARAMS_PER_BLOCK * b..2 + PARAMS_PER_BLOCK * (b + 1)];
            let h = g.layer_norm(x, p[0], p[1])?;
            let q = linear(g, h, p[2], p[3])?;
            // no key bias: it would shift every score in a row equally
            let k = g.matmul(h, p[4])?;
            let v = linear(g, h, p[5], p[6])?;
            let mut heads = Vec::with_capacity(self.config.n_heads);
            let mut probs = Vec::with_capacity(self.config.n_heads);
            for head in 0..self.config.n_heads {
                let qh = g.slice_cols(q, head * dh, dh)?;
                let kh = g.slice_cols(k, head * dh, dh)?;
                let vh = g.slice_cols(v, head * dh, dh)?;
                let kt = g.transpose(kh)?;
                let scores = g.matmul(qh, kt)?;
                let scores = g.scale(scores, inv_sqrt)?;
                let a = g.softmax_rows(scores, true)?;
                heads.push(g.matmul(a, vh)?);
                probs.push(a);
            }
            let cat = if heads.len() == 1 {
                heads[0]
            } else {
                g.concat_cols(&heads)?
            };
            let proj = linear(g, cat, p[7], p[8])?;
            x = g.add(x, proj)?;
            let h = g.layer_norm(x, p[9], p[10])?;
            let hidden = linear(g, h, p[11], p[12])?;
            let hidden = g.relu(hidden)?;
            let out = linear(g, hidden, p[13], p[14])?;
            x = g.add(x, out)?;
            attention.push(probs);
        }
        let base = 2 + PARAMS_PER_BLOCK * self.config.n_blocks;
        let h = g.layer_norm(x, vars[base], vars[base + 1])?;
        let logits = linear(g, h, vars[base + 2], vars[base + 3])?;
        Ok((logits, attention))
    }

    /// Embeds and decodes one sequence.
    pub fn sequence_logits(
        &self,
        g: &mut Graph,
        vars: &[Var],
        ids: &[usize],
    ) -> Result<(Var, Vec<Vec<Var>>)> {
        let x = self.embed(g, vars, ids)?;
        self.decode(g, vars, x)
    }

    /// Logits (and optionally attention) for one sequence without recording
    /// gradients.
    pub fn infer(
        &self,
        ids: &[usize],
        capture: bool,
    ) -> Result<(Tensor, Option<AttentionCapture>)> {
        let mut g = Graph::new();
        let vars = self.bind(&mut g, false);
        let (logits, attn) = self.sequence_logits(&mut g, &vars, ids)?;
        let capture = capture.then(|| {
            let layers = attn
                .iter()
                .map(|heads| heads.iter().map(|&a| g.value(a).to_vec()).collect())
                .collect();
            AttentionCapture::from_raw(ids.len(), layers)
        });
        Ok((g.tensor(logits), capture))
    }
}

fn linear(g: &mut Graph, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = g.matmul(x, w)?;
    g.add_row(y, b)
}

/// Batched forward pass over equal-length sequences.
pub fn forward(model: &Model, batch: &[Vec<usize>], capture: bool) -> Result<ForwardOutput> {
    let Some(first) = batch.first() else {
        return Err(Error::shape("forward", "empty batch"));
    };
    let seq = first.len();
    if batch.iter().any(|s| s.len() != seq) {
        return Err(Error::shape(
            "forward",
            "sequences in a batch must share a length",
        ));
    }
    let vocab = model.config.vocab_size;
    let mut data = Vec::with_capacity(batch.len() * seq * vocab);
    let mut captures = Vec::new();
    for ids in batch {
        let (logits, attn) = model.infer(ids, capture)?;
        data.extend_from_slice(logits.data());
        captures.extend(attn);
    }
    Ok(ForwardOutput {
        logits: Tensor::new(vec![batch.len(), seq, vocab], data)?,
        attention: capture.then_some(captures),
    })
}

/// Gradient check of the full next-token loss with respect to every
/// parameter tensor of a tiny model.
pub fn model_loss_gradcheck(seed: u64) -> Result<Vec<CheckOutcome>> {
    let config = ModelConfig {
        vocab_size: 7,
        d_model: 8,
        n_heads: 2,
        n_blocks: 3,
        ffn_multiplier: 1,
        max_seq_len: 8,
        seed,
    };
    let mut model = Model::init(&config)?;
    let mut r = rng::rng(rng::mix_seed(seed, 0x6C05));
    for p in model.params_mut() {
        for v in p.data_mut() {
            *v += rng::uniform(&mut r, -GRADCHECK_OFFSET, GRADCHECK_OFFSET);
        }
    }
    let len = 2 + rng::below(&mut r, config.max_seq_len - 1);
    let ids: Vec<usize> = (0..len)
        .map(|_| rng::below(&mut r, config.vocab_size))
        .collect();
    let targets: Vec<Option<usize>> = (0..len).map(|i| ids.get(i + 1).copied()).collect();

    let mut out = Vec::with_capacity(model.params().len());
    for (index, spec) in model.specs().iter().enumerate() {
        let err = gradcheck::grad_check(
            |g, x| {
                let mut vars = model.bind(g, false);
                vars[index] = x;
                let (logits, _) = model.sequence_logits(g, &vars, &ids)?;
                g.cross_entropy(logits, &targets)
            },
            &model.params()[index],
            gradcheck::SUITE_EPSILON,
        )?;
        out.push(CheckOutcome {
            name: format!("model/{}", spec.name),
            seed,
            max_rel_error: err,
        });
    }
    Ok(out)
}
