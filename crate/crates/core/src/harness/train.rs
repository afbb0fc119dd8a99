use std::fs;

use super::{eval, sha256_hex, EvalResults, Provenance, RunConfig, RunReport};
use crate::data::{self, Encoded, Kind, QAPair, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{Model, N_GROUPS};
use crate::optim::{adamw_step, linear_schedule, OptimState};
use crate::rng::{self, mix_seed, PRNG_NAME};
use crate::tensor::{Graph, Var};

/// Stream id for the per-step mixup generator.
const MIXUP_STREAM: u64 = 0x006d_6978_7570;

pub struct TrainedRun {
    pub report: RunReport,
    pub model: Model,
    pub vocab: Vocabulary,
}

struct Corpus {
    pairs: Vec<QAPair>,
    sha256: String,
    train: Vec<usize>,
    eval: Vec<usize>,
}

fn load_corpus(config: &RunConfig, r: &super::CorpusRef) -> Result<Corpus> {
    let path = config.resolve(&r.path);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let pairs = data::read_jsonl(&path)?;
    if let Some(p) = pairs.iter().find(|p| p.kind != r.kind) {
        return Err(Error::Data(format!(
            "{} is declared {} but holds a {} pair",
            path.display(),
            r.kind,
            p.kind
        )));
    }
    let (train, eval) = data::split_indices(pairs.len(), config.split_seed)?;
    Ok(Corpus {
        pairs,
        sha256: sha256_hex(&bytes),
        train,
        eval,
    })
}

fn pick(pairs: &[QAPair], idx: &[usize]) -> Vec<QAPair> {
    idx.iter().map(|&i| pairs[i].clone()).collect()
}

/// Next-token targets on the answer: positions `SEP..EOS` predict the
/// following token, everything else is unsupervised.
pub(crate) fn answer_targets(e: &Encoded) -> Vec<Option<usize>> {
    (0..e.len)
        .map(|p| (p >= e.sep() && p < e.answer.end).then(|| e.ids[p + 1]))
        .collect()
}

fn bind_trainable(
    model: &Model,
    g: &mut Graph,
    groups: &[usize],
    live: &[bool; N_GROUPS],
) -> Vec<Var> {
    model
        .params()
        .iter()
        .zip(groups)
        .map(|(p, &grp)| if live[grp] { g.leaf(p) } else { g.constant(p) })
        .collect()
}

fn is_divergence(e: &Error) -> bool {
    matches!(
        e,
        Error::NonFiniteOutput { .. } | Error::NonFiniteGradient { .. } | Error::NonFiniteInput
    )
}

struct Step<'a> {
    model: &'a Model,
    groups: &'a [usize],
    live: &'a [bool; N_GROUPS],
}

impl Step<'_> {
    /// Loss of one example and its gradient added into `grads`, scaled.
    fn plain(&self, e: &Encoded, grads: &mut [Vec<f64>], scale: f64) -> Result<f64> {
        let mut g = Graph::new();
        let vars = bind_trainable(self.model, &mut g, self.groups, self.live);
        let (logits, _) = self.model.sequence_logits(&mut g, &vars, e.tokens())?;
        let loss = g.cross_entropy(logits, &answer_targets(e))?;
        self.finish(g, &vars, loss, grads, scale)
    }

    /// Mixup of two examples: embeddings interpolated position by position
    /// (the shorter one padded with PAD), next-token targets mixed with the
    /// same weight.
    fn mixed(
        &self,
        a: &Encoded,
        b: &Encoded,
        lambda: f64,
        grads: &mut [Vec<f64>],
        scale: f64,
    ) -> Result<f64> {
        let len = a.len.max(b.len);
        let vocab = self.model.config().vocab_size;
        let mut g = Graph::new();
        let vars = bind_trainable(self.model, &mut g, self.groups, self.live);
        let mut soft = vec![0.0; len * vocab];
        let mut embedded = Vec::with_capacity(2);
        for (e, w) in [(a, lambda), (b, 1.0 - lambda)] {
            let mut ids = e.tokens().to_vec();
            ids.resize(len, data::PAD);
            let x = self.model.embed(&mut g, &vars, &ids)?;
            embedded.push(g.scale(x, w)?);
            for (p, t) in answer_targets(e).into_iter().enumerate() {
                if let Some(t) = t {
                    soft[p * vocab + t] += w;
                }
            }
        }
        let x = g.add(embedded[0], embedded[1])?;
        let (logits, _) = self.model.decode(&mut g, &vars, x)?;
        let loss = g.soft_cross_entropy(logits, &soft)?;
        self.finish(g, &vars, loss, grads, scale)
    }

    fn finish(
        &self,
        mut g: Graph,
        vars: &[Var],
        loss: Var,
        grads: &mut [Vec<f64>],
        scale: f64,
    ) -> Result<f64> {
        let value = g.value(loss)[0];
        g.backward(loss)?;
        for (acc, &v) in grads.iter_mut().zip(vars) {
            if let Some(grad) = g.grad(v) {
                for (a, d) in acc.iter_mut().zip(grad) {
                    *a += scale * d;
                }
            }
        }
        Ok(value)
    }
}

/// Runs training and evaluation without touching the output directory.
pub fn train(config: &RunConfig) -> Result<TrainedRun> {
    config.validate()?;
    let main = load_corpus(config, &config.corpus)?;
    let other = match &config.eval_corpus {
        Some(r) => Some(load_corpus(config, r)?),
        None => None,
    };

    let texts = main
        .pairs
        .iter()
        .chain(other.iter().flat_map(|c| &c.pairs))
        .flat_map(|p| [p.question.as_str(), p.answer.as_str()]);
    let vocab = Vocabulary::build(texts);
    let mut model_config = config.model.clone();
    if model_config.vocab_size == 0 {
        model_config.vocab_size = vocab.len();
    } else if model_config.vocab_size < vocab.len() {
        return Err(Error::ModelConfig {
            field: "vocab_size",
            reason: format!(
                "{} is smaller than the corpus vocabulary ({})",
                model_config.vocab_size,
                vocab.len()
            ),
        });
    }
    let mut model = Model::init(&model_config)?;
    let max_len = model_config.max_seq_len;

    let train_set: Vec<Encoded> = main
        .train
        .iter()
        .map(|&i| {
            data::encode(
                &main.pairs[i].question,
                &main.pairs[i].answer,
                &vocab,
                max_len,
            )
        })
        .collect::<Result<_>>()?;

    let group_counts = model.group_param_counts();
    let steps_per_epoch = train_set.len().div_ceil(config.batch_size) as u64;
    let run_steps = config.epochs as u64 * steps_per_epoch;
    let plan = config
        .plan
        .resolve(train_set.len(), &group_counts, run_steps)?;
    let total_steps = plan
        .total_steps()
        .expect("resolved plans carry a schedule length");
    let rates = plan.policy.group_rates()?;
    let live: [bool; N_GROUPS] = std::array::from_fn(|g| rates[g] > 0.0);
    let groups = model.param_groups();

    let mut state = OptimState::new(model.params());
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut step: u64 = 0;
    let mixup_seed = mix_seed(config.train_seed, MIXUP_STREAM);
    for epoch in 0..config.epochs {
        let mut epoch_total = 0.0;
        let mut epoch_steps = 0u64;
        for batch in data::batches(train_set.len(), config.batch_size, epoch, config.train_seed)? {
            let mult = linear_schedule(step, total_steps)?;
            let lrs: Vec<f64> = groups.iter().map(|&g| rates[g] * mult).collect();
            let mut grads: Vec<Vec<f64>> =
                model.params().iter().map(|p| vec![0.0; p.len()]).collect();
            let scale = 1.0 / batch.len() as f64;
            let worker = Step {
                model: &model,
                groups: &groups,
                live: &live,
            };
            let diverged = |e: Error| {
                if is_divergence(&e) {
                    Error::Diverged { epoch, step }
                } else {
                    e
                }
            };
            let mut batch_loss = 0.0;
            match config.mixup_alpha {
                None => {
                    for &i in &batch {
                        batch_loss += scale
                            * worker
                                .plain(&train_set[i], &mut grads, scale)
                                .map_err(diverged)?;
                    }
                }
                Some(alpha) => {
                    let mut r = rng::rng(mix_seed(mixup_seed, step));
                    let mut partners = batch.clone();
                    rng::shuffle(&mut r, &mut partners);
                    for (&i, &j) in batch.iter().zip(&partners) {
                        let lambda = data::sample_mixup_lambda(&mut r, alpha)?;
                        batch_loss += scale
                            * worker
                                .mixed(&train_set[i], &train_set[j], lambda, &mut grads, scale)
                                .map_err(diverged)?;
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { epoch, step });
            }
            adamw_step(
                model.params_mut(),
                &grads,
                &mut state,
                &config.optimizer,
                &lrs,
            )
            .map_err(diverged)?;
            if model
                .params()
                .iter()
                .any(|p| p.data().iter().any(|v| !v.is_finite()))
            {
                return Err(Error::Diverged { epoch, step });
            }
            epoch_total += batch_loss;
            epoch_steps += 1;
            step += 1;
        }
        epoch_losses.push(epoch_total / epoch_steps as f64);
    }

    let main_eval = pick(&main.pairs, &main.eval);
    let mut results = EvalResults {
        hyper_specific: None,
        general: None,
    };
    let main_metrics = eval::evaluate(&model, &vocab, &main_eval)?;
    let other_metrics = match (&other, &config.eval_corpus) {
        (Some(c), Some(r)) => Some((
            r.kind,
            eval::evaluate(&model, &vocab, &pick(&c.pairs, &c.eval))?,
        )),
        _ => None,
    };
    for (kind, m) in std::iter::once((config.corpus.kind, main_metrics)).chain(other_metrics) {
        match kind {
            Kind::HyperSpecific => results.hyper_specific = Some(m),
            Kind::General => results.general = Some(m),
        }
    }

    let report = RunReport {
        config: config.clone(),
        vocab_size: vocab.len(),
        param_count: model.param_count(),
        group_param_counts: group_counts,
        group_rates: rates,
        plan,
        steps: step,
        epoch_losses,
        eval: results,
        provenance: Provenance {
            prng: PRNG_NAME.to_string(),
            model_seed: model_config.seed,
            split_seed: config.split_seed,
            train_seed: config.train_seed,
            corpus_sha256: main.sha256,
            eval_corpus_sha256: other.as_ref().map(|c| c.sha256.clone()),
            n_train: main.train.len(),
            n_eval: main.eval.len(),
            n_eval_other: other.as_ref().map(|c| c.eval.len()),
        },
        wall_clock_secs: 0.0,
    };
    Ok(TrainedRun {
        report,
        model,
        vocab,
    })
}
