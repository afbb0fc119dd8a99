//! Experiment driver: fine-tune under a [`TuningPlan`], evaluate both corpus
//! kinds, compare groups of runs, render tables.
//!
//! A run directory holds `report.json`, `checkpoint.ptck`, `vocab.json` and
//! `timing.json`. Wall-clock time only goes to `timing.json` so that the
//! other files are a pure function of the config and the corpus bytes.

mod compare;
mod eval;
mod rates;
mod tables;
mod train;

pub use compare::{compare_runs, compare_values, Comparison, GroupSummary, Metric};
pub use eval::{evaluate, greedy_answer};
pub use rates::{rates_preview, RatesPreview};
pub use tables::{emit_tables, TableFormat, TABLE_COLUMNS};
pub use train::{train, TrainedRun};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Kind;
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::model::{checkpoint, ModelConfig, N_GROUPS};
use crate::optim::{AdamWHyper, Policy, TuningPlan};
use crate::tensor::gradcheck::{self, CheckOutcome};

pub const REPORT_FILE: &str = "report.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.ptck";
pub const VOCAB_FILE: &str = "vocab.json";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRef {
    pub path: PathBuf,
    pub kind: Kind,
}

fn default_name() -> String {
    "run".into()
}

fn default_epochs() -> usize {
    10
}

fn default_batch_size() -> usize {
    32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub model: ModelConfig,
    pub plan: TuningPlan,
    #[serde(default)]
    pub optimizer: AdamWHyper,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Training corpus; its 90/10 split also gives one evaluation set.
    pub corpus: CorpusRef,
    /// Corpus of the other kind, whose eval split fills the other half of
    /// the table row.
    #[serde(default)]
    pub eval_corpus: Option<CorpusRef>,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default)]
    pub train_seed: u64,
    /// Beta(alpha, alpha) mixup on embeddings; off when absent.
    #[serde(default)]
    pub mixup_alpha: Option<f64>,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    /// Directory relative corpus paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl RunConfig {
    /// A config with every default and a full-rate plan.
    pub fn new(corpus: CorpusRef, lr: f64) -> Self {
        RunConfig {
            name: default_name(),
            model: ModelConfig::default(),
            plan: TuningPlan::new(Policy::Full { lr }),
            optimizer: AdamWHyper::default(),
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            corpus,
            eval_corpus: None,
            split_seed: 0,
            train_seed: 0,
            mixup_alpha: None,
            output_dir: None,
            base_dir: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig = serde_json::from_str(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf);
        Ok(config)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Usage("batch_size must be at least 1".into()));
        }
        self.optimizer.validate()?;
        if let Some(other) = &self.eval_corpus {
            if other.kind == self.corpus.kind {
                return Err(Error::Usage(format!(
                    "eval_corpus must be the other kind than corpus ({})",
                    self.corpus.kind
                )));
            }
        }
        if let Some(a) = self.mixup_alpha {
            if !a.is_finite() || a <= 0.0 {
                return Err(Error::Usage(format!("mixup_alpha must be > 0, got {a}")));
            }
        }
        Ok(())
    }
}

/// Metrics per evaluation split. A split is absent when its corpus was not
/// part of the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResults {
    pub hyper_specific: Option<MetricsReport>,
    pub general: Option<MetricsReport>,
}

impl EvalResults {
    pub fn get(&self, kind: Kind) -> Option<&MetricsReport> {
        match kind {
            Kind::HyperSpecific => self.hyper_specific.as_ref(),
            Kind::General => self.general.as_ref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub prng: String,
    pub model_seed: u64,
    pub split_seed: u64,
    pub train_seed: u64,
    pub corpus_sha256: String,
    pub eval_corpus_sha256: Option<String>,
    pub n_train: usize,
    pub n_eval: usize,
    pub n_eval_other: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub vocab_size: usize,
    pub param_count: usize,
    pub group_param_counts: [usize; N_GROUPS],
    /// The plan with data size, group sizes and schedule length filled in.
    pub plan: TuningPlan,
    pub group_rates: Vec<f64>,
    pub steps: u64,
    /// Mean training loss over each epoch's optimizer steps.
    pub epoch_losses: Vec<f64>,
    pub eval: EvalResults,
    pub provenance: Provenance,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(REPORT_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// `name / policy` label used as the first table column.
    pub fn label(&self) -> String {
        format!("{} / {}", self.config.name, self.plan.policy.name())
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Trains and, when the config names an output directory, writes the run
/// files there.
pub fn run_finetune(config: &RunConfig) -> Result<RunReport> {
    let started = std::time::Instant::now();
    let run = train(config)?;
    let mut report = run.report;
    report.wall_clock_secs = started.elapsed().as_secs_f64();
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, bytes: &[u8]| {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
        };
        write(REPORT_FILE, report.to_json()?.as_bytes())?;
        write(CHECKPOINT_FILE, &checkpoint::encode(&run.model)?)?;
        write(VOCAB_FILE, serde_json::to_string(&run.vocab)?.as_bytes())?;
        let timing = serde_json::json!({ "wall_clock_secs": report.wall_clock_secs });
        write(TIMING_FILE, format!("{timing}\n").as_bytes())?;
    }
    Ok(report)
}

/// Every primitive check plus the full-model loss check, for each suite
/// seed.
pub fn gradcheck_suite() -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for seed in gradcheck::SUITE_SEEDS {
        out.extend(gradcheck::primitive_suite(seed)?);
        out.extend(crate::model::model_loss_gradcheck(seed)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_from_json() {
        let json = r#"{"plan":{"policy":{"kind":"full","lr":0.001}},
                       "corpus":{"path":"c.jsonl","kind":"hyper_specific"}}"#;
        let c: RunConfig = serde_json::from_str(json).unwrap();
        assert_eq!((c.epochs, c.batch_size), (10, 32));
        assert_eq!(c.model, ModelConfig::default());
        assert_eq!(c.optimizer, AdamWHyper::default());
        assert!(c.mixup_alpha.is_none() && c.eval_corpus.is_none());
        assert!(c.validate().is_ok());
    }

    #[test]
    fn same_kind_eval_corpus_rejected() {
        let corpus = CorpusRef {
            path: "a".into(),
            kind: Kind::General,
        };
        let mut c = RunConfig::new(corpus.clone(), 1e-3);
        c.eval_corpus = Some(corpus);
        assert!(c.validate().is_err());
    }

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
