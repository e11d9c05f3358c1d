use std::fs;
use std::path::Path;
use std::process::Command;

use sardlab::experiment::{run, Experiment, ExperimentConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sardlab"))
}

fn bodies(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn replay_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for exp in [Experiment::KupkaVerify, Experiment::CritScan, Experiment::Variations] {
        let mut cfg = ExperimentConfig { seed: Some(7), budget: Some(4096), samples: Some(4000), ..Default::default() };
        cfg.out = Some(tmp.path().join(format!("{}-a", exp.name())));
        let a = run(exp, &cfg).unwrap();
        cfg.out = Some(tmp.path().join(format!("{}-b", exp.name())));
        let b = run(exp, &cfg).unwrap();
        assert!(!a.files.is_empty());
        assert_eq!(bodies(&a.out_dir), bodies(&b.out_dir), "{}", exp.name());
    }
}

#[test]
fn seed_changes_sampled_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig { samples: Some(2000), ..Default::default() };
    let mut outs = Vec::new();
    for seed in [1, 2] {
        cfg.seed = Some(seed);
        cfg.out = Some(tmp.path().join(seed.to_string()));
        outs.push(run(Experiment::Variations, &cfg).unwrap());
    }
    assert_ne!(bodies(&outs[0].out_dir), bodies(&outs[1].out_dir));
}

#[test]
fn manifest_records_seed_and_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { seed: Some(11), out: Some(tmp.path().to_path_buf()), ..Default::default() };
    let outcome = run(Experiment::EndpointPoly, &cfg).unwrap();
    assert!(outcome.passed());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["experiment"], "endpoint-poly");
    assert_eq!(manifest["versions"]["artifact_format"], 1);
    for f in manifest["files"].as_array().unwrap() {
        assert!(tmp.path().join(f.as_str().unwrap()).exists());
    }
}

#[test]
fn malformed_group_file_exits_one_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let group = tmp.path().join("group.json");
    fs::write(&group, "{\n  \"name\": \"broken\",\n  \"rank\": 2,\n  \"strata_dims\": [2, 1\n}\n").unwrap();
    let out = bin().args(["endpoint-poly", "--group"]).arg(&group).arg("--out").arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5"), "{err}");
}

#[test]
fn inconsistent_group_file_points_at_brackets() {
    let tmp = tempfile::tempdir().unwrap();
    let group = tmp.path().join("group.json");
    // [v1, v2] must land in stratum 2, not on v2
    fs::write(
        &group,
        "{\n  \"name\": \"bad\",\n  \"rank\": 2,\n  \"step\": 2,\n  \"strata_dims\": [2, 1],\n  \"brackets\": [[1, 2, 2, \"1\"]]\n}\n",
    )
    .unwrap();
    let out = bin().args(["endpoint-poly", "--group"]).arg(&group).arg("--out").arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 6") && err.contains("grading"), "{err}");
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"experiment": "width", "q": 3, "ns": [0, 1, 2]}"#).unwrap();
    let out_dir = tmp.path().join("o");
    let out = bin().arg("run").arg("--config").arg(&cfg).args(["--q", "2", "--out"]).arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("width.csv")).unwrap();
    let second: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(second[0], "1");
    assert!((second[1].parse::<f64>().unwrap() - 0.5).abs() < 1e-12, "{csv}");
}

#[test]
fn unknown_config_field_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, "{\n  \"experiment\": \"width\",\n  \"radious\": 2\n}\n").unwrap();
    let out = bin().arg("run").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("radious"));
}

#[test]
fn invalid_ranges_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["width", "--eps", "0.1,0.2,0.25"][..], &["crit-scan", "--radius", "-1"], &["kupka-verify", "--q", "0"]] {
        let out = bin().args(args).arg("--out").arg(tmp.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
}

#[test]
fn failed_property_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    // a vanishing threshold flags nothing, so no critical point can be matched to the grid
    let out = bin()
        .args(["crit-scan", "--family", "kupka", "--nu", "0", "--lambda", "1e-12", "--budget", "64", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn kupka_verify_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin().args(["kupka-verify", "--d", "3", "--q", "1.1", "--N", "6", "--out"]).arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let crit = fs::read_to_string(tmp.path().join("crit_values.csv")).unwrap();
    // 2^6 digit strings
    assert_eq!(crit.lines().count(), 1 + 64);
    assert!(crit.lines().skip(1).all(|l| l.ends_with(",true")));
    for f in ["width.csv", "entropy.csv", "manifest.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
}

#[test]
fn every_experiment_runs_with_small_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    for exp in Experiment::ALL {
        let cfg = ExperimentConfig {
            out: Some(tmp.path().join(exp.name())),
            budget: Some(2048),
            samples: Some(2000),
            controls: Some(5),
            targets: Some(5),
            ..Default::default()
        };
        let outcome = run(exp, &cfg).unwrap_or_else(|e| panic!("{}: {e}", exp.name()));
        assert!(outcome.out_dir.join("manifest.json").exists());
    }
}
