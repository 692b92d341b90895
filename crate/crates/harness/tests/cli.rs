use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use liftrnn::datasets::deserialize;
use liftrnn::lifted::LiftedRnnModel;
use liftrnn_harness::{ExperimentConfig, Method, ModelFile};

const HEADER_FIXTURE: &str = include_str!("fixtures/results_header.csv");

fn liftrnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liftrnn"))
        .args(args)
        .env("LIFTED_SEQ_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn parse_accuracy(out: &Output) -> f64 {
    let text = stdout(out);
    text.trim()
        .strip_prefix("accuracy ")
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("unexpected eval output {text:?}"))
}

fn generate(dir: &Path, name: &str, spec: &str, m: usize, seed: u64) -> PathBuf {
    let out = dir.join(name);
    let run = liftrnn(&[
        "generate",
        "--spec",
        spec,
        "--m",
        &m.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    out
}

fn workspace_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// The Table-1 config shrunk to one cheap cell per method.
fn small_table1() -> ExperimentConfig {
    let text = std::fs::read_to_string(workspace_config("table1_sum_threshold.json")).unwrap();
    let mut cfg = ExperimentConfig::from_json(&text).unwrap();
    cfg.values = vec![10, 20];
    cfg.repeats = 2;
    cfg.train_size = 40;
    cfg.test_size = 60;
    cfg.lifted.sweeps = 3;
    cfg.sgd.steps = 50;
    cfg.sgd.batch_size = 20;
    cfg.timing = false;
    cfg
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let path = dir.join("experiment.json");
    std::fs::write(&path, serde_json::to_string(cfg).unwrap()).unwrap();
    path
}

#[test]
fn zero_model_scores_the_majority_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "rs.json", r#"{"kind":"sum_threshold","length":20}"#, 300, 7);
    let model = dir.path().join("zero.json");
    let file = ModelFile {
        method: Method::Lifted,
        model: LiftedRnnModel::zeros(1, 10, 2),
    };
    std::fs::write(&model, file.to_json()).unwrap();

    let run = liftrnn(&["eval", "--model", path_str(&model), "--data", path_str(&data)]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    let acc = parse_accuracy(&run);
    let ds = deserialize(&std::fs::read(&data).unwrap()).unwrap();
    // uniform outputs break the tie towards class 0
    assert!((acc - ds.class0_fraction()).abs() <= 1e-6);
    assert!((0.4..=0.6).contains(&acc), "accuracy {acc}");
}

#[test]
fn train_then_eval_for_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"kind":"ar2","length":15}"#;
    let train = generate(dir.path(), "train.json", spec, 60, 1);
    let test = generate(dir.path(), "test.json", spec, 80, 2);
    for (method, config) in [("lifted", r#"{"sweeps":4}"#), ("sgd", r#"{"steps":200,"batch_size":20,"lr0":0.1}"#)] {
        let model = dir.path().join(format!("{method}.json"));
        let run = liftrnn(&[
            "train",
            "--method",
            method,
            "--data",
            path_str(&train),
            "--config",
            config,
            "--out-model",
            path_str(&model),
        ]);
        assert_eq!(run.status.code(), Some(0), "{method}: {}", stderr(&run));
        let text = std::fs::read_to_string(&model).unwrap();
        assert_eq!(ModelFile::from_json(&text).unwrap().method.as_str(), method);

        let run = liftrnn(&["eval", "--model", path_str(&model), "--data", path_str(&test)]);
        assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
        let acc = parse_accuracy(&run);
        assert!(acc > 0.7, "{method} accuracy {acc}");
    }
}

#[test]
fn config_file_and_inline_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    let spec = r#"{"kind":"timer","length":12,"max_timer":4,"on_fraction":0.3}"#;
    std::fs::write(&spec_path, spec).unwrap();
    let a = generate(dir.path(), "a.json", spec, 5, 3);
    let b = generate(dir.path(), "b.json", path_str(&spec_path), 5, 3);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn usage_errors_exit_one() {
    let unknown = liftrnn(&["generate", "--bogus"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(!stderr(&unknown).is_empty());
    assert_eq!(liftrnn(&[]).status.code(), Some(1));
    assert_eq!(liftrnn(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(liftrnn(&["train", "--method", "adam", "--data", "x", "--out-model", "y"]).status.code(), Some(1));
    assert_eq!(liftrnn(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let run = liftrnn(&["eval", "--model", path_str(&missing), "--data", path_str(&missing)]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).contains("missing.json"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"meta": {}, "x": [[[0.5"#).unwrap();
    let out = dir.path().join("m.json");
    let run = liftrnn(&["train", "--method", "sgd", "--data", path_str(&bad), "--out-model", path_str(&out)]);
    assert_eq!(run.status.code(), Some(2));

    let run = liftrnn(&[
        "generate",
        "--spec",
        r#"{"kind":"lag_echo","length":3,"num_classes":4,"lag":3}"#,
        "--m",
        "2",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn experiment_csv_header_matches_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_table1());
    let csv = dir.path().join("out.csv");
    let run = liftrnn(&["experiment", "--config", path_str(&cfg), "--out", path_str(&csv)]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), HEADER_FIXTURE.lines().next());
    // two values, two methods
    assert_eq!(text.lines().count(), 5);
    let methods: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(methods, ["lifted", "sgd", "lifted", "sgd"]);
}

#[test]
fn experiment_csv_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_table1());
    let mut outputs = Vec::new();
    for threads in ["1", "1", "2"] {
        let csv = dir.path().join(format!("out{}.csv", outputs.len()));
        let run = Command::new(env!("CARGO_BIN_EXE_liftrnn"))
            .args(["experiment", "--config", path_str(&cfg), "--out", path_str(&csv)])
            .env("LIFTED_SEQ_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
        outputs.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn bad_thread_count_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_table1());
    let run = Command::new(env!("CARGO_BIN_EXE_liftrnn"))
        .args(["experiment", "--config", path_str(&cfg), "--out", path_str(&dir.path().join("o.csv"))])
        .env("LIFTED_SEQ_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).contains("LIFTED_SEQ_THREADS"));
}

#[test]
fn selftest_passes() {
    let run = liftrnn(&["selftest"]);
    assert_eq!(run.status.code(), Some(0), "{}", stdout(&run));
    let text = stdout(&run);
    assert!(text.lines().count() >= 5);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}
