//! Tensors with reverse-mode autodiff, a toy decoder-only transformer,
//! AdamW with per-group learning-rate policies, retrieval and generation
//! metrics, Welch t-tests, synthetic QA corpora and the experiment harness.

pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod rng;
pub mod stats;
pub mod tensor;

pub use data::{Kind, QAPair};
pub use error::{Error, Result};
pub use harness::{RunConfig, RunReport};
pub use metrics::{MetricsReport, RelevanceList};
pub use model::{Model, ModelConfig};
pub use optim::{AdamWHyper, Policy, TuningPlan};
pub use stats::TestResult;
pub use tensor::{Graph, Tensor, Var};
