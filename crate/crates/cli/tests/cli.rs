use std::path::Path;
use std::process::{Command, Output};

fn harl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harl")).args(args).env_remove("RUST_BACKTRACE").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small networks and short episodes so learned controllers train in seconds.
const TINY: &str = r#"
duration = 30.0
flow = 300.0
hv_fraction = 0.0

[harl]
reward_window = 40
update_every = 5

[harl.sac]
hidden = [8]
batch_size = 8
replay_capacity = 500
warmup_decisions = 16

[training]
epochs = 4
episode_duration = 12.0
checkpoint_every = 1
"#;

fn write_tiny(dir: &Path) -> String {
    let p = dir.join("tiny.toml");
    std::fs::write(&p, TINY).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn negative_flow_is_rejected_by_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "flow = -1.0\n").unwrap();
    let o = harl(&["validate-config", "--config", p.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("`flow`"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "[harl]\nspeed = 3\n").unwrap();
    let o = harl(&["validate-config", "--config", p.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("speed"), "{}", stderr(&o));
}

#[test]
fn canonical_config_is_a_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = write_tiny(dir.path());
    let first = harl(&["validate-config", "--config", &tiny]);
    assert!(first.status.success(), "{}", stderr(&first));
    let canon = dir.path().join("canon.toml");
    std::fs::write(&canon, &first.stdout).unwrap();
    let second = harl(&["validate-config", "--config", canon.to_str().unwrap()]);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn missing_checkpoint_is_explicit() {
    let o = harl(&["eval", "--controller", "harl", "--checkpoint", "/nonexistent/harl.ckpt", "--duration", "10"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing checkpoint"), "{}", stderr(&o));
    let o = harl(&["eval", "--controller", "flat_sac", "--duration", "10"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing checkpoint"), "{}", stderr(&o));
}

#[test]
fn fixed_time_desk_eval_has_no_collisions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eval");
    let o =
        harl(&["eval", "--desk-scale", "--controller", "fixed_time", "--flow", "450", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = harl_core::metrics::read_rows(std::fs::File::open(out.join("metrics.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].controller, "fixed_time");
    assert_eq!(rows[0].n_col, 0.0);
    assert!(out.join("events.jsonl").metadata().unwrap().len() > 0);
}

#[test]
fn eval_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o =
            harl(&["eval", "--controller", "lqf", "--seed", "5", "--duration", "300", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        csvs.push((std::fs::read(out.join("metrics.csv")).unwrap(), std::fs::read(out.join("events.jsonl")).unwrap()));
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = write_tiny(dir.path());
    let out = dir.path().join("sweep");
    let o = Command::new(env!("CARGO_BIN_EXE_harl"))
        .args(["sweep", "--config", &tiny, "--flows", "450,900,1200", "--out", out.to_str().unwrap()])
        .env("AIM_HARL_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = harl_core::metrics::read_rows(std::fs::File::open(out.join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 18);
    let names: Vec<&str> = harl_core::ControllerKind::ALL.iter().map(|k| k.as_str()).collect();
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.controller, names[i / 3]);
        assert_eq!(r.flow, [450.0, 900.0, 1200.0][i % 3]);
    }
    assert!(out.join("train/harl/final.ckpt").exists());
    assert!(out.join("train/flat_sac/final.ckpt").exists());
}

#[test]
fn interrupted_training_resumes_to_the_same_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = write_tiny(dir.path());
    let whole = dir.path().join("whole");
    let split = dir.path().join("split");
    let o =
        harl(&["train", "--config", &tiny, "--controller", "harl", "--seed", "3", "--out", whole.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let base = ["train", "--config", &tiny, "--controller", "harl", "--seed", "3", "--out", split.to_str().unwrap()];
    let o = harl(&[&base[..], &["--stop-after", "2"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!split.join("final.ckpt").exists());
    let o = harl(&base);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("resumed after epoch 2"));
    for name in [
        "epoch_001.ckpt",
        "epoch_002.ckpt",
        "epoch_003.ckpt",
        "epoch_004.ckpt",
        "final.ckpt",
        "progress.csv",
        "epochs.csv",
    ] {
        assert_eq!(std::fs::read(whole.join(name)).unwrap(), std::fs::read(split.join(name)).unwrap(), "{name}");
    }

    let o = harl(&["inspect-checkpoint", "--checkpoint", whole.join("final.ckpt").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let info: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(info["controller"], "harl");
    assert_eq!(info["agents"].as_array().unwrap().len(), 4);
}

#[test]
fn resume_with_a_different_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = write_tiny(dir.path());
    let out = dir.path().join("run");
    let o = harl(&[
        "train",
        "--config",
        &tiny,
        "--controller",
        "flat_sac",
        "--out",
        out.to_str().unwrap(),
        "--stop-after",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o =
        harl(&["train", "--config", &tiny, "--controller", "flat_sac", "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("different configuration"), "{}", stderr(&o));
}
