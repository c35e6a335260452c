use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn binary() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_slowfast-vr"));
    cmd.env_remove("SLOWFAST_VR_JOBS").env("RUST_LOG", "error");
    cmd
}

fn linear_trajectory(master_seed: u64) -> Value {
    json!({
        "schema_version": 1,
        "name": "small",
        "experiment": "trajectory",
        "model": {"kind": "linear", "lambda": -10.0, "p": 4.0, "q": 0.5, "a": 1.2},
        "epsilon": 0.001,
        "micro": {"delta_t": "nobias", "samples": 20},
        "macro": {"delta_t": 0.02, "t_end": 0.2, "x0": 1.0, "y0": 1.0},
        "estimator": "vr",
        "init": {"kind": "estimated", "samples": 100, "use_mh": false},
        "realizations": 16,
        "master_seed": master_seed,
        "output": "small.csv"
    })
}

fn write_config(dir: &Path, name: &str, config: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn run(args: &[&str], jobs: Option<&str>) -> Output {
    let mut cmd = binary();
    cmd.args(args);
    if let Some(j) = jobs {
        cmd.env("SLOWFAST_VR_JOBS", j);
    }
    cmd.output().unwrap()
}

#[test]
fn output_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", &linear_trajectory(11));
    let one = dir.path().join("one.csv");
    let many = dir.path().join("many.csv");
    let a = run(&["run", "--config", &config, "--out", one.to_str().unwrap(), "--jobs", "1"], None);
    let b = run(&["run", "--config", &config, "--out", many.to_str().unwrap()], Some("4"));
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(b.status.success(), "{}", String::from_utf8_lossy(&b.stderr));
    assert_eq!(fs::read(&one).unwrap(), fs::read(&many).unwrap());
    assert!(dir.path().join("one.meta.json").is_file());
}

#[test]
fn seed_override_changes_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", &linear_trajectory(11));
    let base = dir.path().join("base.csv");
    let other = dir.path().join("other.csv");
    assert!(run(&["run", "--config", &config, "--out", base.to_str().unwrap()], None).status.success());
    assert!(run(&["run", "--config", &config, "--out", other.to_str().unwrap(), "--seed", "12"], None).status.success());
    assert_ne!(fs::read(&base).unwrap(), fs::read(&other).unwrap());
}

#[test]
fn invalid_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = linear_trajectory(1);
    config["realizations"] = json!(1);
    let path = write_config(dir.path(), "bad.json", &config);
    let out = run(&["run", "--config", &path, "--out", dir.path().join("x.csv").to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    let path = write_config(dir.path(), "typo.json", &json!({"schema_version": 1, "nmae": "x"}));
    assert_eq!(run(&["run", "--config", &path], None).status.code(), Some(1));
}

#[test]
fn missing_config_exits_with_three() {
    let out = run(&["run", "--config", "/nonexistent/config.json"], None);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unwritable_output_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", &linear_trajectory(1));
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let target = blocker.join("out.csv");
    let out = run(&["run", "--config", &config, "--out", target.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn numerical_blowup_exits_with_two() {
    // forward Euler with Δt = 1 amplifies the linear macro state by about 7 per step
    let dir = tempfile::tempdir().unwrap();
    let mut config = linear_trajectory(3);
    config["estimator"] = json!("hmm");
    config.as_object_mut().unwrap().remove("init");
    config["micro"] = json!({"delta_t": 0.001, "samples": 5});
    config["macro"] = json!({"delta_t": 1.0, "t_end": 2000.0, "x0": 1.0, "y0": 0.0});
    config["realizations"] = json!(2);
    let path = write_config(dir.path(), "blowup.json", &config);
    let out = run(&["run", "--config", &path, "--out", dir.path().join("b.csv").to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn zero_jobs_is_rejected() {
    let out = run(&["run", "--config", "fig5", "--jobs", "0"], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn lists_every_bundled_experiment() {
    let out = run(&["list-experiments"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for fig in 2..=8 {
        assert!(text.lines().any(|l| l.starts_with(&format!("fig{fig}"))), "fig{fig} missing from\n{text}");
    }
}

#[test]
fn suite_writes_every_run_into_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let mut second = linear_trajectory(2);
    second["name"] = json!("second");
    second["output"] = json!("nested/second.csv");
    let suite = json!({
        "schema_version": 1,
        "name": "pair",
        "runs": [linear_trajectory(1), second]
    });
    let path = write_config(dir.path(), "suite.json", &suite);
    let out_dir = dir.path().join("results");
    let out = run(&["run", "--config", &path, "--out", out_dir.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["small.csv", "small.meta.json", "nested/second.csv", "nested/second.meta.json"] {
        assert!(out_dir.join(file).is_file(), "{file}");
    }
    let printed = String::from_utf8(out.stdout).unwrap();
    assert_eq!(printed.lines().count(), 4);
}
