mod common;

use std::fs;

use ptune_core::harness::{run_finetune, train, CHECKPOINT_FILE};
use ptune_core::model::{checkpoint, Model};
use ptune_core::{Error, Kind, Policy};

use common::*;

#[test]
fn zero_epochs_keep_initial_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let (spec, gen) = write_corpora(dir.path(), 60, 1);
    let mut c = toy_config(
        (&spec, Kind::HyperSpecific),
        (&gen, Kind::General),
        Policy::Full { lr: 1e-2 },
        1,
    );
    c.model = tiny_model();
    c.epochs = 0;
    c.output_dir = Some(dir.path().join("run"));
    let report = run_finetune(&c).unwrap();
    assert!(report.epoch_losses.is_empty());
    assert_eq!(report.steps, 0);
    let bytes = fs::read(dir.path().join("run").join(CHECKPOINT_FILE)).unwrap();
    let model = checkpoint::decode(&bytes).unwrap();
    let init = Model::init(model.config()).unwrap();
    assert_eq!(bytes, checkpoint::encode(&init).unwrap());
    assert!(report.eval.hyper_specific.is_some() && report.eval.general.is_some());
}

#[test]
fn grouped_llrd_with_equal_rates_matches_full() {
    let dir = tempfile::tempdir().unwrap();
    let (spec, gen) = write_corpora(dir.path(), 80, 2);
    let run = |policy| {
        let mut c = toy_config(
            (&spec, Kind::HyperSpecific),
            (&gen, Kind::General),
            policy,
            2,
        );
        c.model = tiny_model();
        c.epochs = 3;
        c.batch_size = 8;
        train(&c).unwrap()
    };
    let full = run(Policy::Full { lr: 3e-3 });
    let grouped = run(Policy::GroupedLlrd {
        rates: vec![3e-3; 5],
    });
    assert_eq!(full.report.epoch_losses, grouped.report.epoch_losses);
    assert_eq!(full.report.eval, grouped.report.eval);
    assert_eq!(
        checkpoint::encode(&full.model).unwrap(),
        checkpoint::encode(&grouped.model).unwrap()
    );
}

#[test]
fn loss_falls_over_ten_epochs() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 1..=5 {
        let (spec, gen) = write_corpora(dir.path(), 200, seed);
        let c = toy_config(
            (&spec, Kind::HyperSpecific),
            (&gen, Kind::General),
            Policy::Full { lr: 1e-2 },
            seed,
        );
        let report = run_finetune(&c).unwrap();
        let l = &report.epoch_losses;
        assert_eq!(l.len(), 10);
        assert!(l[9] < l[0], "seed {seed}: {l:?}");
    }
}

#[test]
fn absurd_rate_reports_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let (spec, gen) = write_corpora(dir.path(), 40, 3);
    let mut c = toy_config(
        (&spec, Kind::HyperSpecific),
        (&gen, Kind::General),
        Policy::Full { lr: 1e300 },
        3,
    );
    c.model = tiny_model();
    c.epochs = 3;
    let err = run_finetune(&c).unwrap_err();
    assert!(matches!(err, Error::Diverged { .. }), "{err}");
    assert!(err.to_string().contains("diverged"));
}

#[test]
fn missing_corpus_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    let (spec, _) = write_corpora(dir.path(), 10, 4);
    let c = toy_config(
        (&missing, Kind::HyperSpecific),
        (&spec, Kind::General),
        Policy::Full { lr: 1e-3 },
        4,
    );
    let err = run_finetune(&c).unwrap_err();
    assert!(err.to_string().contains("nope.jsonl"), "{err}");
}

#[test]
fn eval_corpus_must_be_the_other_kind() {
    let dir = tempfile::tempdir().unwrap();
    let (spec, _) = write_corpora(dir.path(), 10, 5);
    let c = toy_config(
        (&spec, Kind::HyperSpecific),
        (&spec, Kind::HyperSpecific),
        Policy::Full { lr: 1e-3 },
        5,
    );
    assert!(c.validate().is_err());
    assert!(run_finetune(&c).is_err());
}

#[test]
fn mislabelled_corpus_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (spec, gen) = write_corpora(dir.path(), 10, 6);
    let c = toy_config(
        (&gen, Kind::HyperSpecific),
        (&spec, Kind::General),
        Policy::Full { lr: 1e-3 },
        6,
    );
    assert!(run_finetune(&c)
        .unwrap_err()
        .to_string()
        .contains("declared"));
}

#[test]
fn mixup_changes_training_but_not_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let (spec, gen) = write_corpora(dir.path(), 60, 7);
    let run = |alpha| {
        let mut c = toy_config(
            (&spec, Kind::HyperSpecific),
            (&gen, Kind::General),
            Policy::Full { lr: 1e-2 },
            7,
        );
        c.model = tiny_model();
        c.epochs = 2;
        c.mixup_alpha = alpha;
        train(&c).unwrap().report.epoch_losses
    };
    let plain = run(None);
    let mixed = run(Some(0.4));
    assert_ne!(plain, mixed);
    assert_eq!(mixed, run(Some(0.4)));
}
