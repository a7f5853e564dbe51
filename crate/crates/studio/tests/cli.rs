/*
Copyright 2026 The softhand Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

//! Drives the `softhand-studio` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn studio(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softhand-studio"))
        .args(args)
        .current_dir(cwd)
        .env_remove("STUDIO_SEED")
        .env_remove("STUDIO_DATA")
        .output()
        .expect("binary runs")
}

fn corpus(file: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/corpus").join(file).display().to_string()
}

fn diagnostic(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no diagnostic in {text}"));
    serde_json::from_str(line).unwrap()
}

fn example() -> TempDir {
    let dir = TempDir::new().unwrap();
    let out = studio(&["generate-example", "--out", "."], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

#[test]
fn validate_reports_summary_and_errors() {
    let tmp = TempDir::new().unwrap();
    let ok = studio(&["validate", &corpus("tree_hand.urdf")], tmp.path());
    assert_eq!(ok.status.code(), Some(0));
    let summary: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!(summary.is_object());

    let cycle = studio(&["validate", &corpus("cycle.urdf")], tmp.path());
    assert_eq!(cycle.status.code(), Some(2));
    assert_eq!(diagnostic(&cycle)["kind"], "KinematicCycle");

    let missing = studio(&["validate", &corpus("missing_mesh.urdf")], tmp.path());
    assert_eq!(missing.status.code(), Some(3));
    let d = diagnostic(&missing);
    let paths = d["paths"].as_array().expect("paths listed");
    assert!(!paths.is_empty());

    let absent = studio(&["validate", "no/such/file.urdf"], tmp.path());
    assert_eq!(absent.status.code(), Some(1));
}

#[test]
fn fit_coupling_recovers_exact_slopes() {
    let tmp = TempDir::new().unwrap();
    let mut csv = String::from("motion_id,finger,theta1_rad,theta2_rad,theta3_rad\n");
    for k in 0..21 {
        let t = 1.4 * k as f64 / 20.0;
        csv.push_str(&format!("m0,index,{t},{},{}\n", 0.8 * t, 0.6 * t));
    }
    std::fs::write(tmp.path().join("traj.csv"), csv).unwrap();
    let out = studio(&["fit-coupling", "--input", "traj.csv", "--output", "fit/coupling.json"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let model: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("fit/coupling.json")).unwrap()).unwrap();
    let text = model.to_string();
    let triplets: Vec<f64> = find_numbers(&model);
    assert!(triplets.iter().any(|v| (v - 0.8).abs() <= 1e-12), "{text}");
    assert!(triplets.iter().any(|v| (v - 0.6).abs() <= 1e-12), "{text}");

    std::fs::write(tmp.path().join("empty.csv"), "motion_id,finger,theta1_rad,theta2_rad,theta3_rad\n").unwrap();
    let empty = studio(&["fit-coupling", "--input", "empty.csv", "--output", "e.json"], tmp.path());
    assert_eq!(empty.status.code(), Some(2));
    assert_eq!(diagnostic(&empty)["kind"], "InsufficientData");
}

fn find_numbers(v: &Value) -> Vec<f64> {
    match v {
        Value::Number(n) => vec![n.as_f64().unwrap()],
        Value::Array(a) => a.iter().flat_map(find_numbers).collect(),
        Value::Object(o) => o.values().flat_map(find_numbers).collect(),
        _ => Vec::new(),
    }
}

fn solve_args<'a>(task: &'a str, out: &'a str) -> Vec<&'a str> {
    vec!["solve", "--urdf", "hand.urdf", "--coupling", "coupling.json", "--task", task, "--out", out]
}

#[test]
fn solve_reach_converges_and_is_repeatable() {
    let dir = example();
    let first = studio(&solve_args("tasks/reach.json", "a"), dir.path());
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let status: Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(status["status"], "Converged");
    assert!(status["energy"].as_f64().unwrap() <= 1e-6);

    let second = studio(&solve_args("tasks/reach.json", "b"), dir.path());
    assert_eq!(second.status.code(), Some(0));
    for file in ["solution.json", "scene.json"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(a == b, "{file} differs between identical runs");
    }
}

#[test]
fn unreachable_task_reports_without_crashing() {
    let dir = example();
    let mut task: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("tasks/reach.json")).unwrap()).unwrap();
    task["object_pose"]["translation"] = serde_json::json!([2.0, 2.0, 2.0]);
    task["freeze_wrist"] = Value::Bool(true);
    std::fs::write(dir.path().join("far.json"), task.to_string()).unwrap();

    let strict = studio(&solve_args("far.json", "far"), dir.path());
    let code = strict.status.code().expect("exited normally");
    assert!(code == 0 || code == 4, "exit {code}: {}", String::from_utf8_lossy(&strict.stderr));
    let solution: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("far/solution.json")).unwrap()).unwrap();
    assert!(solution["energy"].as_f64().unwrap() > 1.0);

    let mut args = solve_args("far.json", "far2");
    args.extend(["--max-iterations", "1", "--allow-partial"]);
    let partial = studio(&args, dir.path());
    assert_eq!(partial.status.code(), Some(0), "{}", String::from_utf8_lossy(&partial.stderr));
}

#[test]
fn solve_rejects_unknown_joint_in_initial_guess() {
    let dir = example();
    let mut task: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("tasks/reach.json")).unwrap()).unwrap();
    task["initial"]["theta_i"]["no_such_joint"] = serde_json::json!(0.1);
    std::fs::write(dir.path().join("bad.json"), task.to_string()).unwrap();
    let out = studio(&solve_args("bad.json", "bad"), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(diagnostic(&out)["message"].as_str().unwrap().contains("no_such_joint"));
}

#[test]
fn small_study_is_deterministic() {
    let dir = example();
    let config = "base_urdf: hand.urdf\ncoupling: coupling.json\nvariants:\n- name: identity\n  edits:\n  - joint: thumb_mount\n    delta:\n      translation: [0.0, 0.0, 0.0]\n      rotation: [1.0, 0.0, 0.0, 0.0]\ntasks:\n- tasks/reach.json\nseed: 3\n";
    std::fs::write(dir.path().join("small.yaml"), config).unwrap();
    let run = |out: &str| {
        let o = studio(&["study", "--config", "small.yaml", "--out", out], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(dir.path().join(out).join("report.json")).unwrap()
    };
    let a = run("r1");
    let b = run("r2");
    assert!(a == b, "reports differ between runs");
    let report: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["seed"], 3);
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    let base = &report["baseline"].as_array().unwrap()[0];
    assert_eq!(rows[0]["energy"], base["energy"]);
    assert!(dir.path().join("r1/report.txt").is_file());
}

#[test]
fn study_seed_flag_overrides_config() {
    let dir = example();
    let config = "base_urdf: hand.urdf\ncoupling: coupling.json\nvariants: []\ntasks:\n- tasks/reach.json\nseed: 3\n";
    std::fs::write(dir.path().join("s.yaml"), config).unwrap();
    let o = studio(&["study", "--config", "s.yaml", "--out", "r", "--seed", "11"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r/report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 11);
}
