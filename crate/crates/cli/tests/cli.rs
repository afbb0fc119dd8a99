use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ptune(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptune"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn ptune")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn corpora(dir: &Path, size: &str) {
    for (kind, file) in [("specific", "s.jsonl"), ("general", "g.jsonl")] {
        let o = ptune(
            &[
                "gen-data", "--kind", kind, "--size", size, "--seed", "3", "--out", file,
            ],
            dir,
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
}

const CONFIG: &str = r#"{
  "name": "cli",
  "model": {"d_model": 8, "n_heads": 2, "n_blocks": 3, "ffn_multiplier": 2, "max_seq_len": 32, "seed": 4},
  "plan": {"policy": {"kind": "surgical", "base_lr": 0.01, "mask": [0, 1, 1, 0, 0]}},
  "optimizer": {"lambda": 0.01},
  "epochs": 2,
  "batch_size": 16,
  "corpus": {"path": "s.jsonl", "kind": "hyper_specific"},
  "eval_corpus": {"path": "g.jsonl", "kind": "general"},
  "split_seed": 5,
  "train_seed": 6
}"#;

#[test]
fn gen_data_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    corpora(dir.path(), "40");
    let first = fs::read(dir.path().join("s.jsonl")).unwrap();
    let o = ptune(
        &[
            "gen-data",
            "--kind",
            "specific",
            "--size",
            "40",
            "--seed",
            "3",
            "--out",
            "again.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(dir.path().join("again.jsonl")).unwrap(), first);
    assert_eq!(first.iter().filter(|&&b| b == b'\n').count(), 40);
}

#[test]
fn train_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    corpora(dir.path(), "80");
    fs::write(dir.path().join("run.json"), CONFIG).unwrap();
    for out in ["a", "b"] {
        let o = ptune(&["train", "--config", "run.json", "--out", out], dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).starts_with("| Model/Plan |"));
    }
    for file in ["report.json", "checkpoint.ptck", "vocab.json"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("a/report.json")).unwrap()).unwrap();
    assert_eq!(report["epoch_losses"].as_array().unwrap().len(), 2);
    assert!(report.get("wall_clock_secs").is_none());
    let timing: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("a/timing.json")).unwrap()).unwrap();
    assert!(timing["wall_clock_secs"].as_f64().unwrap() >= 0.0);

    let md = ptune(&["eval", "--run", "a", "--format", "markdown"], dir.path());
    assert_eq!(code(&md), 0);
    assert_eq!(stdout(&md).lines().count(), 3);
    let csv = ptune(&["eval", "--run", "a", "--format", "csv"], dir.path());
    assert_eq!(code(&csv), 0);
    assert!(stdout(&csv).contains("\r\ncli / surgical,"));

    let cmp = ptune(
        &[
            "compare",
            "--group-a",
            "a,b",
            "--group-b",
            "b,a",
            "--metric",
            "mae_general",
        ],
        dir.path(),
    );
    assert_eq!(code(&cmp), 0);
    assert!(
        stdout(&cmp).contains("Welch t = 0.0000"),
        "{}",
        stdout(&cmp)
    );
    let short = ptune(
        &[
            "compare",
            "--group-a",
            "a",
            "--group-b",
            "b,a",
            "--metric",
            "f1_specific",
        ],
        dir.path(),
    );
    assert_eq!(code(&short), 1);
}

#[test]
fn rates_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = ptune(
        &[
            "rates",
            "--base-lr",
            "0.001",
            "--data-size",
            "1000",
            "--params",
            "100,50,75,100,125",
            "--mask",
            "0,1,1,0,0",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("| G1 lower | 0.0044721 |"), "{out}");
    assert!(out.contains("| G2 middle | 0.0036515 |"), "{out}");
    assert!(out.contains("| G0 embeddings | 0.0000000 | 0.0000000 | 0.0000000 |"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&ptune(&[], d)), 1);
    assert_eq!(code(&ptune(&["frobnicate"], d)), 1);
    assert_eq!(code(&ptune(&["--help"], d)), 0);
    assert_eq!(
        code(&ptune(
            &["gen-data", "--kind", "odd", "--size", "3", "--seed", "1", "--out", "x"],
            d
        )),
        1
    );
    assert_eq!(
        code(&ptune(
            &["gen-data", "--kind", "general", "--size", "0", "--seed", "1", "--out", "x"],
            d
        )),
        1
    );
    assert_eq!(
        code(&ptune(
            &[
                "rates",
                "--base-lr",
                "0.1",
                "--data-size",
                "9",
                "--params",
                "1,2,3",
                "--mask",
                "1,1,1,1,1"
            ],
            d
        )),
        1
    );
    assert_eq!(
        code(&ptune(
            &[
                "rates",
                "--base-lr",
                "0.1",
                "--data-size",
                "9",
                "--params",
                "1,0,3,4,5",
                "--mask",
                "1,1,1,1,1"
            ],
            d
        )),
        1
    );
    assert_eq!(
        code(&ptune(
            &[
                "compare",
                "--group-a",
                "a,b",
                "--group-b",
                "c,d",
                "--metric",
                "f1"
            ],
            d
        )),
        1
    );
    assert_eq!(
        code(&ptune(
            &["train", "--config", "missing.json", "--out", "r"],
            d
        )),
        2
    );
    assert_eq!(
        code(&ptune(&["eval", "--run", "nowhere", "--format", "csv"], d)),
        2
    );
    assert_eq!(
        code(&ptune(
            &[
                "compare",
                "--group-a",
                "a,b",
                "--group-b",
                "c,d",
                "--metric",
                "f1_general"
            ],
            d
        )),
        2
    );
}

#[test]
fn missing_corpus_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), CONFIG).unwrap();
    let o = ptune(&["train", "--config", "run.json", "--out", "r"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("s.jsonl"));
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = ptune(&["gradcheck"], dir.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains(", 0 failed"));
}
