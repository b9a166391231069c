use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ctql::formats::{read_metrics, read_summary, read_tables, read_trajectory, TRAJECTORY_HEADER};

const SMALL: &str = "n_trials = 2\neval_trials = 2\nsteps_per_trial = 120\n";

fn ctql(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctql"))
        .args(args)
        .output()
        .expect("spawn ctql")
}

fn config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn train_eval_export_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let train = dir.path().join("train");
    let out = ctql(&["train", "--config", &cfg, "--out", &s(&train), "--seed", "4", "--record-every", "10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let metrics = read_metrics(&train.join("train_metrics.csv")).unwrap();
    assert_eq!(metrics.len(), 2);
    assert_eq!(metrics[1].seed, 5);
    let rows = read_trajectory(&train.join("train_trajectory.csv")).unwrap();
    assert_eq!(rows.len(), 2 * 12 * 2);

    let eval = dir.path().join("eval");
    let out = ctql(&[
        "eval", "--config", &cfg, "--tables", &s(&train), "--out", &s(&eval), "--trials", "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(eval.join("trajectory.csv")).unwrap();
    assert_eq!(text.lines().next(), Some(TRAJECTORY_HEADER));
    assert_eq!(text.lines().count(), 1 + 3 * 120 * 2);
    let summary = read_summary(&eval.join("eval_summary.csv")).unwrap();
    assert_eq!(summary.len(), 1);
    assert_eq!(summary[0].episodes, 3);
    assert_eq!(read_metrics(&eval.join("eval_metrics.csv")).unwrap().len(), 3);

    let export = dir.path().join("export");
    let out = ctql(&["export", "--config", &cfg, "--tables", &s(&train), "--out", &s(&export)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(export.join("qtable_h0.txt")).unwrap(),
        fs::read(train.join("qtable_h0.txt")).unwrap()
    );
    let long = fs::read_to_string(export.join("qtable_h0.csv")).unwrap();
    assert_eq!(long.lines().count(), 1 + 5 * 8 * 3 * 2 * 17);
}

#[test]
fn training_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert!(ctql(&["train", "--config", &cfg, "--out", &s(d)]).status.success());
    }
    for name in ["qtable_h0.txt", "train_metrics.csv", "run_config.toml"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    // The resolved configuration reproduces the run on its own.
    let c = dir.path().join("c");
    let resolved = s(&a.join("run_config.toml"));
    assert!(ctql(&["train", "--config", &resolved, "--out", &s(&c)]).status.success());
    assert_eq!(fs::read(a.join("qtable_h0.txt")).unwrap(), fs::read(c.join("qtable_h0.txt")).unwrap());
}

#[test]
fn missing_tables_fail_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = ctql(&[
        "eval", "--config", &cfg, "--tables", &s(&dir.path().join("nope")), "--out", &s(&out_dir),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("qtable_h0.txt"));
    assert!(!out_dir.exists() || fs::read_dir(&out_dir).unwrap().next().is_none());
}

#[test]
fn mismatched_tables_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let train = dir.path().join("train");
    assert!(ctql(&["train", "--config", &cfg, "--out", &s(&train)]).status.success());
    let other = config(dir.path(), &format!("{SMALL}[grid]\nangle_bins = 4\n"));
    let out = ctql(&["eval", "--config", &other, "--tables", &s(&train), "--out", &s(&dir.path().join("e"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("angle bins"));
}

#[test]
fn invalid_configs_explain_themselves() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[tutor]\nk = 0.5\n", "k > 1"),
        ("[env]\nrho_t = 2.0\n[tutor]\nrho_t_hat = 3.0\n", "rho_t_hat < rho_t"),
        ("steps_per_trial = 0\n", "steps_per_trial"),
        ("[learn]\nepsilon = 1.5\n", "learn.epsilon"),
    ];
    for (text, needle) in cases {
        let cfg = config(dir.path(), text);
        let out = ctql(&["train", "--config", &cfg, "--out", &s(&dir.path().join("x"))]);
        assert!(!out.status.success(), "{text}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{text}: {err}");
    }
    assert!(!dir.path().join("x").exists());
    let out = ctql(&["train", "--config", &s(&dir.path().join("absent.toml"))]);
    assert!(!out.status.success());
}

#[test]
fn pure_tutor_cannot_be_trained_but_can_be_evaluated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = ctql(&["train", "--config", &cfg, "--mode", "puretutor", "--out", &s(&dir.path().join("t"))]);
    assert!(!out.status.success());
    let e = dir.path().join("e");
    let out = ctql(&["eval", "--config", &cfg, "--mode", "puretutor", "--out", &s(&e)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_trajectory(&e.join("trajectory.csv")).unwrap();
    assert!(rows.iter().all(|r| r.action_source.as_str() != "QGreedy"));
}

#[test]
fn compare_reports_three_modes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = ctql(&["compare", "--config", &cfg, "--out", &s(dir.path()), "--pureq-trials", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_summary(&dir.path().join("compare.csv")).unwrap();
    let modes: Vec<&str> = report.iter().map(|r| r.mode.as_str()).collect();
    assert_eq!(modes, ["ctql", "pureq", "puretutor"]);
    assert_eq!(report[1].trained_trials, 3);
    assert_eq!(report[2].trained_trials, 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("puretutor"));
}

#[test]
fn multi_herder_tables_are_one_file_each() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &format!("{SMALL}[env]\nn_herders = 2\nn_targets = 3\n"));
    let train = dir.path().join("t");
    assert!(ctql(&["train", "--config", &cfg, "--out", &s(&train)]).status.success());
    assert_eq!(read_tables(&train, 2).unwrap().len(), 2);
    let e = dir.path().join("e");
    assert!(ctql(&["eval", "--config", &cfg, "--tables", &s(&train), "--out", &s(&e), "--record-every", "40"])
        .status
        .success());
    let rows = read_trajectory(&e.join("trajectory.csv")).unwrap();
    assert_eq!(rows.len(), 2 * 3 * 5);
}

#[test]
fn shipped_default_config_matches_the_builtin_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    assert_eq!(ctql::parse_config(&path).unwrap(), ctql::ctql_core::RunConfig::default());
    let two = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/two-herders.toml");
    assert_eq!(ctql::parse_config(&two).unwrap().env.n_herders, 2);
}
