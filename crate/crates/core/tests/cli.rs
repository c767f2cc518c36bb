//! Command-line behavior and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use softcbf::filter::FilterMode;
use softcbf::perception::Obstacle;
use softcbf::sim::{preset, Scenario, PRESET_NAMES};

fn softcbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softcbf"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_scenario(dir: &Path, s: &Scenario) -> String {
    let path = dir.join(format!("{}.json", s.name));
    std::fs::write(&path, s.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

/// At rest, facing across a lone circle whose margin already contains the
/// vehicle: the constraint normal vanishes while the offset is negative.
fn stuck_inside_margin() -> Scenario {
    let mut s = preset("ground-360-a").unwrap();
    s.name = "stuck".into();
    s.world.obstacles = vec![Obstacle::Circle {
        center: [5.5, 2.0],
        radius: 0.3,
    }];
    s.initial_state = vec![5.0, 2.0, 0.0, std::f64::consts::FRAC_PI_2];
    s.run.duration = 0.5;
    s
}

#[test]
fn presets_list_names_every_preset() {
    let out = softcbf(&["presets", "list"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in PRESET_NAMES {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn presets_show_prints_loadable_json() {
    let out = softcbf(&["presets", "show", "quadrotor-b"]);
    assert_eq!(code(&out), 0);
    let s = Scenario::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(s, preset("quadrotor-b").unwrap());
    assert_eq!(code(&softcbf(&["presets", "show", "nope"])), 1);
}

#[test]
fn validate_accepts_presets_and_rejects_unsafe_starts() {
    let out = softcbf(&["validate", "--preset", "ground-fov-b"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "ground-fov-b: ok");

    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), &stuck_inside_margin());
    let out = softcbf(&["validate", "--scenario", &path]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8(out.stdout).unwrap().contains("initial state unsafe"));
}

#[test]
fn safe_run_exits_zero_and_writes_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let mut s = preset("ground-360-b").unwrap();
    s.run.duration = 1.0;
    let path = write_scenario(dir.path(), &s);
    let out = softcbf(&["run", "--scenario", &path, "--out", out_dir.to_str().unwrap(), "--epochs"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["trajectory.csv", "constraints.csv", "summary.json", "epochs.jsonl"] {
        assert!(out_dir.join(file).is_file(), "{file}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["outcome"], "completed");
    assert_eq!(summary["safe"], true);
    assert_eq!(summary["epochs"], 6);
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = preset("ground-360-b").unwrap();
    s.run.duration = 0.05;
    let path = write_scenario(dir.path(), &s);
    let out_dir = dir.path().join("run");
    let out = softcbf(&["run", "--scenario", &path, "--out", out_dir.to_str().unwrap(), "--seed", "17"]);
    assert_eq!(code(&out), 0);
    let summary = std::fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 17"));
}

#[test]
fn infeasible_filter_exits_three_in_strict_mode() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), &stuck_inside_margin());
    let out_dir = dir.path().join("run");
    let out = softcbf(&["run", "--scenario", &path, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let summary = std::fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("infeasible_abort"));
}

#[test]
fn lenient_run_through_a_violation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), &stuck_inside_margin());
    let out_dir = dir.path().join("run");
    let out = softcbf(&["run", "--scenario", &path, "--out", out_dir.to_str().unwrap(), "--lenient"]);
    assert_eq!(code(&out), 2);

    // The same flag set in the file behaves identically; --strict overrides it.
    let mut s = stuck_inside_margin();
    s.filter_mode = FilterMode::Lenient;
    let path = write_scenario(dir.path(), &s);
    let out = softcbf(&["run", "--scenario", &path, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let out = softcbf(&["run", "--scenario", &path, "--out", out_dir.to_str().unwrap(), "--strict"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn bad_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out_dir = out_dir.to_str().unwrap();
    assert_eq!(code(&softcbf(&["run", "--preset", "nope", "--out", out_dir])), 1);

    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"name\": \"x\", \"surprise\": 1}").unwrap();
    assert_eq!(code(&softcbf(&["run", "--scenario", path.to_str().unwrap(), "--out", out_dir])), 1);
    assert_eq!(code(&softcbf(&["validate", "--scenario", path.to_str().unwrap()])), 1);

    let mut s = preset("ground-360-a").unwrap();
    s.cbf.alpha1 = -1.0;
    let path = write_scenario(dir.path(), &s);
    assert_eq!(code(&softcbf(&["run", "--scenario", &path, "--out", out_dir])), 1);
}

#[test]
fn conflicting_flags_are_usage_errors() {
    let out = softcbf(&["run", "--preset", "ground-360-a", "--out", "/tmp/x", "--strict", "--lenient"]);
    assert_ne!(code(&out), 0);
    let out = softcbf(&["run", "--preset", "ground-360-a", "--scenario", "a.json", "--out", "/tmp/x"]);
    assert_ne!(code(&out), 0);
}
