use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_rlbench");
const MOCK: &str = env!("CARGO_BIN_EXE_mock-sidecar");

fn rlbench(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("RLBENCH_SEED").output().unwrap()
}

fn saved_seed(dir: &Path) -> u64 {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("config.json")).unwrap()).unwrap();
    v["seed"].as_u64().unwrap()
}

#[test]
fn train_succeeds_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = rlbench(&["train", "--algo", "sarsa", "--env", "chain", "--episodes", "20", "--seed", "4", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("20 episodes"));
    assert_eq!(saved_seed(dir.path()), 4);
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();
    for args in [
        vec!["train", "--algo", "qlearning", "--alpha", "1.5", "--out", out],
        vec!["train", "--algo", "nope", "--out", out],
        vec!["train", "--env", "pong", "--out", out],
        vec!["train", "--arch", "32,,16", "--algo", "ddpg", "--out", out],
        vec!["train", "--bogus-flag"],
        vec!["sweep", "--alphas", "0.1,zz", "--out", out],
        vec!["plotdata", out],
    ] {
        let o = rlbench(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn runtime_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = rlbench(&["train", "--env", "bridge:/nonexistent/sidecar", "--episodes", "2", "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    let o = rlbench(&["sweep", "--env", "bridge:/nonexistent/sidecar", "--alphas", "0.5", "--seeds", "0,1", "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(dir.path().join("summary.csv").is_file());
}

#[test]
fn seed_resolution_order() {
    let dir = tempfile::tempdir().unwrap();
    let toml_path = dir.path().join("run.toml");
    fs::write(&toml_path, "algo = \"qlearning\"\nepisodes = 3\nseed = 11\n\n[tabular]\nalpha = 0.3\n").unwrap();
    let cfg = toml_path.to_str().unwrap();
    let run = |env_seed: Option<&str>, flag: Option<&str>, name: &str| {
        let out = dir.path().join(name);
        let mut c = Command::new(BIN);
        c.env_remove("RLBENCH_SEED").args(["train", "--config", cfg, "--out", out.to_str().unwrap()]);
        if let Some(s) = env_seed {
            c.env("RLBENCH_SEED", s);
        }
        if let Some(s) = flag {
            c.args(["--seed", s]);
        }
        assert!(c.status().unwrap().success());
        saved_seed(&out)
    };
    assert_eq!(run(None, None, "a"), 11);
    assert_eq!(run(Some("22"), None, "b"), 22);
    assert_eq!(run(Some("22"), Some("33"), "c"), 33);
    let bad = Command::new(BIN)
        .env("RLBENCH_SEED", "not-a-number")
        .args(["train", "--config", cfg, "--out", dir.path().join("d").to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(bad.code(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "episodes = 3\nlearning_rate = 0.1\n").unwrap();
    let o = rlbench(&["train", "--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_and_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = rlbench(&["sweep", "--env", "toy", "--episodes", "5", "--alphas", "0.2,0.4", "--seeds", "0,1,2", "--jobs", "2", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 7);
    let run_dir = dir.path().join("alpha_0.2_seed_1");
    let o = rlbench(&["plotdata", run_dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(run_dir.join("plot.dat").is_file());
}

#[test]
fn bridged_training_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let env = format!("bridge:{MOCK} --obs-dim 2 --act-dim 1 --max-steps 20");
    let o = rlbench(&["train", "--algo", "qlearning", "--env", &env, "--bridge-env", "Mock-v0", "--episodes", "3", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = fs::read_to_string(dir.path().join("episodes.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5);
}

#[test]
fn help_exits_zero() {
    assert_eq!(rlbench(&["--help"]).status.code(), Some(0));
    assert_eq!(rlbench(&["train", "--help"]).status.code(), Some(0));
}
