//! Oracles and fixtures shared by the integration tests. Nothing here calls
//! the code it is used to check.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use ptune_core::data::{generate_corpus, write_jsonl, Kind};
use ptune_core::harness::{CorpusRef, EvalResults, Provenance, RunConfig, RunReport};
use ptune_core::metrics::{ConfusionCounts, MetricsReport};
use ptune_core::model::ModelConfig;
use ptune_core::optim::{Policy, TuningPlan};

// ---------------------------------------------------------------- Student t

/// Adaptive Simpson with Richardson correction.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(
        f: &dyn Fn(f64) -> f64,
        (a, b): (f64, f64),
        (fa, fm, fb): (f64, f64, f64),
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, (a, m), (fa, flm, fm), left, tol / 2.0, depth - 1)
            + step(f, (m, b), (fm, frm, fb), right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, (a, b), (fa, fm, fb), whole, tol, 50)
}

/// Unnormalised t density `(1 + u^2/df)^(-(df+1)/2)`.
fn t_kernel(u: f64, df: f64) -> f64 {
    (-(df + 1.0) / 2.0 * (u * u / df).ln_1p()).exp()
}

/// CDF of Student's t by quadrature of the density, normalised by its own
/// integral over the half line (mapped to `[0, 1)` with `u = s / (1 - s)`),
/// so no gamma function is involved.
pub fn t_cdf_oracle(t: f64, df: f64) -> f64 {
    let mapped = |s: f64| {
        if s >= 1.0 {
            return if df == 1.0 { 1.0 } else { 0.0 };
        }
        let u = s / (1.0 - s);
        t_kernel(u, df) / ((1.0 - s) * (1.0 - s))
    };
    let half = simpson(&mapped, 0.0, 0.5, 1e-16) + simpson(&mapped, 0.5, 1.0, 1e-16);
    let a = t.abs();
    let mut body = 0.0;
    // piecewise so the adaptive rule sees the peak
    let mut lo = 0.0;
    while lo < a {
        let hi = (lo + 0.5).min(a);
        body += simpson(&|u| t_kernel(u, df), lo, hi, 1e-17);
        lo = hi;
    }
    let tail = (half - body) / (2.0 * half);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

// ----------------------------------------------------------------- metrics

/// MAP by term enumeration: each rank contributes `rel/k` if relevant.
pub fn map_oracle(grades: &[u32], n_rel: usize) -> f64 {
    let mut terms = Vec::new();
    for (idx, g) in grades.iter().enumerate() {
        let k = (idx + 1) as f64;
        let indicator = if *g > 0 { 1.0 } else { 0.0 };
        terms.push(*g as f64 / k * indicator);
    }
    terms.iter().sum::<f64>() / n_rel as f64
}

/// `NdcgVariant::Paper` NDCG by term enumeration: `2^(rel-1) / (log2 k + 1)`.
pub fn ndcg_paper_oracle(grades: &[u32], n_rel: usize) -> f64 {
    let mut total = 0.0;
    for (idx, g) in grades.iter().enumerate() {
        let k = (idx + 1) as f64;
        total += 0.5 * 2f64.powi(*g as i32) / (k.ln() / std::f64::consts::LN_2 + 1.0);
    }
    total / n_rel as f64
}

fn dcg(order: &[u32]) -> f64 {
    order
        .iter()
        .enumerate()
        .map(|(i, &g)| ((1u64 << g) - 1) as f64 * std::f64::consts::LN_2 / ((i + 2) as f64).ln())
        .sum()
}

/// Every distinct ordering of a grade multiset.
fn orderings(
    counts: &mut [usize; 8],
    prefix: &mut Vec<u32>,
    len: usize,
    out: &mut dyn FnMut(&[u32]),
) {
    if prefix.len() == len {
        out(prefix);
        return;
    }
    for g in 0..counts.len() {
        if counts[g] > 0 {
            counts[g] -= 1;
            prefix.push(g as u32);
            orderings(counts, prefix, len, out);
            prefix.pop();
            counts[g] += 1;
        }
    }
}

/// Standard NDCG with the ideal DCG found by exhausting all orderings.
pub fn ndcg_standard_oracle(grades: &[u32]) -> f64 {
    let mut counts = [0usize; 8];
    for &g in grades {
        counts[g as usize] += 1;
    }
    let mut ideal = 0.0f64;
    orderings(&mut counts, &mut Vec::new(), grades.len(), &mut |o| {
        ideal = ideal.max(dcg(o))
    });
    if ideal == 0.0 {
        0.0
    } else {
        dcg(grades) / ideal
    }
}

// ---------------------------------------------------------------- fixtures

pub fn write_corpora(dir: &Path, size: usize, seed: u64) -> (PathBuf, PathBuf) {
    let s = dir.join(format!("specific-{seed}.jsonl"));
    let g = dir.join(format!("general-{seed}.jsonl"));
    write_jsonl(
        &s,
        &generate_corpus(Kind::HyperSpecific, size, seed).unwrap(),
    )
    .unwrap();
    write_jsonl(&g, &generate_corpus(Kind::General, size, seed).unwrap()).unwrap();
    (s, g)
}

/// Toy run trained on `train` and evaluated on both kinds.
pub fn toy_config(
    train: (&Path, Kind),
    other: (&Path, Kind),
    policy: Policy,
    seed: u64,
) -> RunConfig {
    let mut c = RunConfig::new(
        CorpusRef {
            path: train.0.to_path_buf(),
            kind: train.1,
        },
        1e-3,
    );
    c.plan = TuningPlan::new(policy);
    c.eval_corpus = Some(CorpusRef {
        path: other.0.to_path_buf(),
        kind: other.1,
    });
    c.model.seed = seed;
    c.split_seed = seed;
    c.train_seed = seed;
    c
}

fn metrics(f1: f64, mae: f64, entropy: f64) -> MetricsReport {
    MetricsReport {
        f1,
        precision: 0.0,
        recall: 0.0,
        mae,
        map: 0.0,
        ndcg: 0.0,
        ndcg_standard: 0.0,
        attention_entropy: entropy,
        counts: ConfusionCounts::default(),
        n_examples: 0,
    }
}

/// A report with made-up numbers; `(f1, mae, entropy)` per split.
pub fn fabricate(
    name: &str,
    policy: Policy,
    specific: Option<(f64, f64, f64)>,
    general: Option<(f64, f64, f64)>,
) -> RunReport {
    let mut config = RunConfig::new(
        CorpusRef {
            path: "specific.jsonl".into(),
            kind: Kind::HyperSpecific,
        },
        1e-3,
    );
    config.name = name.to_string();
    config.plan = TuningPlan::new(policy.clone());
    RunReport {
        config,
        vocab_size: 0,
        param_count: 0,
        group_param_counts: [0; 5],
        plan: TuningPlan::new(policy),
        group_rates: vec![],
        steps: 0,
        epoch_losses: vec![],
        eval: EvalResults {
            hyper_specific: specific.map(|(f, m, e)| metrics(f, m, e)),
            general: general.map(|(f, m, e)| metrics(f, m, e)),
        },
        provenance: Provenance {
            prng: String::new(),
            model_seed: 0,
            split_seed: 0,
            train_seed: 0,
            corpus_sha256: String::new(),
            eval_corpus_sha256: None,
            n_train: 0,
            n_eval: 0,
            n_eval_other: None,
        },
        wall_clock_secs: 0.0,
    }
}

/// The three fabricated rows behind the golden tables.
pub fn golden_reports() -> Vec<RunReport> {
    vec![
        fabricate(
            "toy-d16",
            Policy::Full { lr: 1e-3 },
            Some((0.87, 0.03125, 0.8123)),
            Some((0.09375, 0.5, 0.98)),
        ),
        fabricate(
            "toy, llrd",
            Policy::Llrd {
                top_lr: 1e-3,
                decay: 0.9,
            },
            Some((0.123456, 0.0, 2.302635)),
            Some((1.0, 0.15625, 0.40625)),
        ),
        fabricate(
            "toy|surgical",
            Policy::Surgical {
                base_lr: 1e-3,
                data_size: None,
                params_per_group: None,
                mask: vec![0, 1, 1, 0, 0],
            },
            Some((0.65625, 0.21875, 1.5)),
            None,
        ),
    ]
}

pub fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

pub fn tiny_model() -> ModelConfig {
    ModelConfig {
        d_model: 8,
        n_heads: 2,
        n_blocks: 3,
        ffn_multiplier: 2,
        max_seq_len: 32,
        ..ModelConfig::default()
    }
}
