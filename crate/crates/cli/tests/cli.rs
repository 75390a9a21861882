//! End-to-end runs of the `rlmeta` binary on small configurations.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
name = "small"
seed = 3
action = "de_uniform"
episodes = 20
retries = 1
functions = ["Sphere:10"]

[ppo]
horizon = 200
minibatch = 50
sgd_epochs = 2

[test]
runs = 5
seed = 100
"#;

fn rlmeta(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rlmeta"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> TempDir {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("cfg.toml"), config).unwrap();
    tmp
}

fn ok(out: &Output) {
    assert!(out.status.success(), "exit {:?}\n{}", out.status.code(), String::from_utf8_lossy(&out.stderr));
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn list_functions_prints_registry() {
    let tmp = TempDir::new().unwrap();
    let out = rlmeta(tmp.path(), &["list-functions"]);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 46);
    assert!(lines.contains(&"Sphere,10"));
    assert!(lines.contains(&"GG21hi,20"));
}

#[test]
fn train_writes_log_and_checkpoint() {
    let tmp = setup(SMALL);
    ok(&rlmeta(tmp.path(), &["--config", "cfg.toml", "train"]));
    let dir = tmp.path().join("results/small");
    // 20 episodes of 49 steps with a horizon of 200 gives 4 iterations.
    let log = rows(&dir.join("training_log.csv"));
    assert_eq!(log.len(), 20 * 49 / 200);
    assert!(dir.join("checkpoint.json").exists());
    assert_eq!(rows(&dir.join("attempts.csv")), vec![vec!["1", "3", "ok", "4"]]);
    let eps = rows(&dir.join("episodes.csv"));
    assert!(eps.iter().all(|r| r[1] == "Sphere:10"));
}

#[test]
fn multi_function_training_labels_episodes() {
    let cfg = SMALL.replace(r#"functions = ["Sphere:10"]"#, r#"functions = ["Sphere:10", "Rastrigin:10", "LinearSlope:5"]"#)
        .replace("episodes = 20", "episodes = 40");
    let tmp = setup(&cfg);
    ok(&rlmeta(tmp.path(), &["--config", "cfg.toml", "train"]));
    let eps = rows(&tmp.path().join("results/small/episodes.csv"));
    let mut seen: Vec<&str> = eps.iter().map(|r| r[1].as_str()).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen, vec!["LinearSlope:5", "Rastrigin:10", "Sphere:10"]);
}

#[test]
fn unstable_attempt_is_retried_with_next_seed() {
    let tmp = setup(SMALL);
    ok(&rlmeta(tmp.path(), &["--config", "cfg.toml", "train", "--inject-nan-attempts", "1"]));
    let dir = tmp.path().join("results/small");
    let attempts = rows(&dir.join("attempts.csv"));
    assert_eq!(attempts.len(), 2);
    assert_eq!(attempts[0][2], "unstable");
    assert_eq!(attempts[1][..3], ["2", "4", "ok"]);
    assert!(dir.join("training_log.attempt1.csv").exists());
    assert!(dir.join("checkpoint.json").exists());
}

#[test]
fn all_attempts_unstable_exits_4() {
    let tmp = setup(SMALL);
    let out = rlmeta(tmp.path(), &["--config", "cfg.toml", "train", "--inject-nan-attempts", "9"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!tmp.path().join("results/small/checkpoint.json").exists());
}

#[test]
fn evaluate_policy_and_baseline_share_layout() {
    let tmp = setup(SMALL);
    ok(&rlmeta(tmp.path(), &["--config", "cfg.toml", "train"]));
    let ck = "results/small/checkpoint.json";
    ok(&rlmeta(tmp.path(), &["--config", "cfg.toml", "evaluate", "--checkpoint", ck, "--runs", "50"]));
    ok(&rlmeta(tmp.path(), &["--config", "cfg.toml", "evaluate", "--adaptation", "jde", "--runs", "50"]));
    let root = tmp.path().join("results/small");
    for variant in ["checkpoint", "jde"] {
        let m = rows(&root.join(variant).join("Sphere_10/metrics.csv"));
        assert_eq!(m.len(), 50, "{variant}");
        assert_eq!(m[0][1], "100");
        assert_eq!(m[49][1], "149");
        assert!(root.join(variant).join("Sphere_10/run_100.csv").exists());
    }
}

#[test]
fn corrupted_checkpoint_exits_3_without_metrics() {
    let tmp = setup(SMALL);
    fs::write(tmp.path().join("bad.json"), "{\"format\": \"rlmeta-policy-v1\", \"architecture\": 7}").unwrap();
    let out = rlmeta(tmp.path(), &["--config", "cfg.toml", "evaluate", "--checkpoint", "bad.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!tmp.path().join("results/small/bad").exists());
}

#[test]
fn config_errors_exit_3() {
    let tmp = setup("episodes = 0\n");
    assert_eq!(rlmeta(tmp.path(), &["--config", "cfg.toml", "train"]).status.code(), Some(3));
    let tmp = setup(SMALL);
    let out = rlmeta(tmp.path(), &["--config", "cfg.toml", "evaluate", "--adaptation", "ide", "--function", "Sphere:7"]);
    assert_eq!(out.status.code(), Some(3));
    let out = rlmeta(tmp.path(), &["--config", "missing.toml", "list-functions"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn compare_matrix_shapes() {
    let tmp = setup(SMALL);
    let base = ["--config", "cfg.toml", "compare", "--runs", "5"];

    let mut args = base.to_vec();
    args.extend(["--variant", "ide", "--function", "Sphere:10", "--function", "Rastrigin:10", "--function", "BentCigar:10"]);
    ok(&rlmeta(tmp.path(), &args));
    let m = rows(&tmp.path().join("results/small/comparison_auc_vs_jde.csv"));
    assert_eq!(m.len(), 1);
    assert_eq!(m[0].len(), 2 + 3);

    let mut args = base.to_vec();
    args.extend(["--variant", "ide", "--variant", "f=fixed", "--function", "Sphere:10", "--function", "Ellipsoid:10"]);
    args.extend(["--metric", "best"]);
    ok(&rlmeta(tmp.path(), &args));
    let m = rows(&tmp.path().join("results/small/comparison_best_vs_jde.csv"));
    assert_eq!(m.len(), 2);
    assert!(m.iter().all(|r| r.len() == 4));
    assert_eq!(m[1][0], "f");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("results/small/comparison_best_vs_jde.json")).unwrap())
            .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn self_comparison_loses_on_ties() {
    let tmp = setup(SMALL);
    ok(&rlmeta(
        tmp.path(),
        &["--config", "cfg.toml", "compare", "--runs", "5", "--variant", "jde", "--function", "Sphere:10", "--function", "Discus:10"],
    ));
    let m = rows(&tmp.path().join("results/small/comparison_auc_vs_jde.csv"));
    // Identical seeds give identical runs. Over all pairs of 5 distinct
    // values p(A < A) = 10/25; the 5 diagonal ties count as losses.
    assert_eq!(m[0][1..], ["0.000000", "0.400000", "0.400000"]);
}

#[test]
fn compare_from_metrics_marks_missing_cells() {
    let tmp = setup(SMALL);
    ok(&rlmeta(tmp.path(), &["--config", "cfg.toml", "evaluate", "--adaptation", "jde", "--function", "Sphere:10"]));
    ok(&rlmeta(tmp.path(), &["--config", "cfg.toml", "evaluate", "--adaptation", "ide", "--function", "Sphere:10"]));
    ok(&rlmeta(
        tmp.path(),
        &[
            "--config", "cfg.toml", "compare", "--metrics-dir", "results/small", "--variant", "ide",
            "--function", "Sphere:10", "--function", "Discus:10",
        ],
    ));
    let m = rows(&tmp.path().join("results/small/comparison_auc_vs_jde.csv"));
    assert_eq!(m[0][3], "n/a");
    assert_ne!(m[0][2], "n/a");
}
