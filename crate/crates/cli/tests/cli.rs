//! End-to-end checks of the `dem-sim` binary: each subcommand runs on a
//! small config and leaves the documented report files behind.

use std::path::Path;
use std::process::Command;

fn dem_sim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dem-sim"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(
        &path,
        r#"
households = 2
slots = 4
episodes = 3
federation_period = 2
seed = 7

[dataset]
kind = "synth"
days = 1

[sac]
hidden = [8]
lr = 0.0003
gamma = 0.99
tau = 0.005
batch_size = 8
replay_capacity = 1000
target_entropy = 1.0
warmup = 8
"#,
    )
    .unwrap();
    path
}

#[test]
fn e2e_subcommand_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("run");
    let status = dem_sim()
        .args(["e2e", "--config"])
        .arg(&config)
        .args(["--users", "3"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for file in ["gas_usage.csv", "settlements.csv", "pool.csv", "events.jsonl"] {
        assert!(out.join(file).exists(), "missing {file}");
    }
    let gas = std::fs::read_to_string(out.join("gas_usage.csv")).unwrap();
    assert!(gas.starts_with("op,users,mean_gas,max_gas\n"));
    assert!(gas.contains(",3,"), "users override not applied:\n{gas}");
}

#[test]
fn train_subcommand_writes_reward_curves() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("train");
    let status = dem_sim()
        .args(["train", "--mode", "federated", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let rewards = std::fs::read_to_string(out.join("rewards.csv")).unwrap();
    assert!(rewards.starts_with("episode,household,reward,mode,seed\n"));
    // 3 episodes x 2 households plus the header.
    assert_eq!(rewards.lines().count(), 7);
    assert!(rewards.contains(",federated,7"));
    assert!(out.join("federation.csv").exists());
    assert!(out.join("metrics.csv").exists());
}

#[test]
fn identical_seeds_give_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        assert!(dem_sim()
            .args(["e2e", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap()
            .success());
        outputs.push(std::fs::read(out.join("settlements.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn bad_config_fails_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "households = 0\n").unwrap();
    let output = dem_sim()
        .args(["e2e", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("households"), "stderr: {stderr}");
}
