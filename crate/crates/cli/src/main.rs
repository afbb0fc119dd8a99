//! `ptune`: generate corpora, train, evaluate, preview rates, compare runs
//! and gradient-check the autodiff engine.
//!
//! Exit status: 0 on success, 1 for usage errors (bad flags or invalid
//! settings), 2 for runtime failures (missing files, divergence, failed
//! gradient check).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ptune_core::data::{self, Kind};
use ptune_core::harness::{
    self, compare_runs, emit_tables, rates_preview, Metric, RunConfig, RunReport, TableFormat,
};
use ptune_core::optim::{Policy, TuningPlan};
use ptune_core::tensor::gradcheck::SUITE_TOLERANCE;
use ptune_core::Error;

#[derive(Parser, Debug)]
#[command(name = "ptune", version, about = "Precision fine-tuning lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic QA corpus as JSON lines.
    GenData {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fine-tune from a JSON run config and write the run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the results table of a run directory.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum, default_value = "markdown")]
        format: FormatArg,
    },
    /// Show surgical per-group learning rates at the first, middle and last
    /// schedule step.
    Rates {
        #[arg(long)]
        base_lr: f64,
        #[arg(long)]
        data_size: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        params: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        mask: Vec<u8>,
        #[arg(long, default_value_t = 100)]
        total_steps: u64,
    },
    /// Welch t-test of one metric between two groups of run directories.
    Compare {
        #[arg(long, value_delimiter = ',', required = true)]
        group_a: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        group_b: Vec<PathBuf>,
        #[arg(long, value_enum)]
        metric: MetricArg,
    },
    /// Run the gradient-check suite over every primitive and the full model.
    Gradcheck,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    General,
    Specific,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricArg {
    #[value(name = "f1_specific")]
    F1Specific,
    #[value(name = "f1_general")]
    F1General,
    #[value(name = "mae_specific")]
    MaeSpecific,
    #[value(name = "mae_general")]
    MaeGeneral,
    #[value(name = "entropy_specific")]
    EntropySpecific,
    #[value(name = "entropy_general")]
    EntropyGeneral,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::F1Specific => Metric::F1Specific,
            MetricArg::F1General => Metric::F1General,
            MetricArg::MaeSpecific => Metric::MaeSpecific,
            MetricArg::MaeGeneral => Metric::MaeGeneral,
            MetricArg::EntropySpecific => Metric::EntropySpecific,
            MetricArg::EntropyGeneral => Metric::EntropyGeneral,
        }
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        // errors caused by what was asked for, not by what happened doing it
        let usage = matches!(
            e,
            Error::Usage(_)
                | Error::UnknownMetric { .. }
                | Error::Plan(_)
                | Error::ZeroParameterCount
                | Error::ModelConfig { .. }
                | Error::Domain(_)
                | Error::StepOutOfRange { .. }
        );
        if usage {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::GenData {
            kind,
            size,
            seed,
            out,
        } => {
            let kind = match kind {
                KindArg::General => Kind::General,
                KindArg::Specific => Kind::HyperSpecific,
            };
            if size == 0 {
                return Err(Failure::Usage("--size must be at least 1".into()));
            }
            let pairs = data::generate_corpus(kind, size, seed)?;
            data::write_jsonl(&out, &pairs)?;
            eprintln!("wrote {} {kind} pairs to {}", pairs.len(), out.display());
        }
        Command::Train { config, out } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.output_dir = Some(out.clone());
            let report = harness::run_finetune(&cfg)?;
            print!(
                "{}",
                emit_tables(std::slice::from_ref(&report), TableFormat::Markdown)?
            );
            eprintln!(
                "{} steps, final epoch loss {}, run written to {}",
                report.steps,
                report
                    .epoch_losses
                    .last()
                    .map_or_else(|| "n/a".to_string(), |l| format!("{l:.4}")),
                out.display()
            );
        }
        Command::Eval { run, format } => {
            let report = RunReport::load(&run)?;
            let format = match format {
                FormatArg::Markdown => TableFormat::Markdown,
                FormatArg::Csv => TableFormat::Csv,
            };
            print!("{}", emit_tables(&[report], format)?);
        }
        Command::Rates {
            base_lr,
            data_size,
            params,
            mask,
            total_steps,
        } => {
            if params.len() != 5 || mask.len() != 5 {
                return Err(Failure::Usage(format!(
                    "--params and --mask take 5 comma-separated values, got {} and {}",
                    params.len(),
                    mask.len()
                )));
            }
            let plan = TuningPlan::new(Policy::Surgical {
                base_lr,
                data_size: Some(data_size),
                params_per_group: Some(params.clone()),
                mask,
            });
            print!(
                "{}",
                rates_preview(&plan, data_size, &params, total_steps)?.to_markdown()
            );
        }
        Command::Compare {
            group_a,
            group_b,
            metric,
        } => {
            let load = |dirs: &[PathBuf]| {
                dirs.iter()
                    .map(|d| RunReport::load(d))
                    .collect::<Result<Vec<_>, _>>()
            };
            let (a, b) = (load(&group_a)?, load(&group_b)?);
            let cmp = compare_runs(metric.into(), ("group-a", &a), ("group-b", &b))?;
            print!("{}", cmp.to_markdown());
        }
        Command::Gradcheck => {
            let outcomes = harness::gradcheck_suite()?;
            let mut worst: Vec<(String, f64)> = Vec::new();
            for o in &outcomes {
                match worst.iter_mut().find(|(n, _)| *n == o.name) {
                    Some(entry) => entry.1 = entry.1.max(o.max_rel_error),
                    None => worst.push((o.name.clone(), o.max_rel_error)),
                }
            }
            for (name, err) in &worst {
                let mark = if *err < SUITE_TOLERANCE { "ok" } else { "FAIL" };
                println!("{name:<32} {err:.3e} {mark}");
            }
            let failed = outcomes.iter().filter(|o| !o.passed()).count();
            let max = outcomes.iter().map(|o| o.max_rel_error).fold(0.0, f64::max);
            println!(
                "{} checks over 5 seeds, max relative error {max:.3e}, {failed} failed",
                outcomes.len()
            );
            if failed > 0 {
                return Err(Failure::Runtime(format!(
                    "gradient check failed for {failed} checks"
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
