use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forest-transfer"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = run(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn missing_plots_file_exits_1_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["fit", "--plots", "nowhere/plots.csv", "--out", "models"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
    assert!(stderr.contains("nowhere/plots.csv"), "{stderr}");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["fit", "--plots", "a.csv"], dir.path()).status.code(), Some(2));
    let map = ["map", "--stack", "s", "--model", "m", "--envelope", "e", "--out", "o", "--window", "1,2,3"];
    assert_eq!(run(&map, dir.path()).status.code(), Some(2));
}

#[test]
fn small_pipeline_through_every_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let printed = ok(&["synth", "--out", "data", "--cellsize", "480"], dir);
    assert!(printed.lines().any(|l| l.ends_with("regional.csv")));
    assert!(dir.join("data/stack").is_dir());

    let sel = ok(&["select", "--plots", "data/forest1.csv", "--ntrees", "50"], dir);
    let sel: serde_json::Value = serde_json::from_str(&sel).unwrap();
    assert!(!sel["retained"].as_array().unwrap().is_empty());

    for name in ["forest1", "forest2"] {
        let plots = format!("data/{name}.csv");
        ok(&["fit", "--plots", &plots, "--out", "models", "--ntrees", "60"], dir);
    }
    let metrics = ok(
        &["eval", "--model", "models/forest1_model.json", "--plots", "models/forest1_test.csv"],
        dir,
    );
    let metrics: serde_json::Value = serde_json::from_str(&metrics).unwrap();
    assert!(metrics["rmse"].as_f64().unwrap() > 0.0);

    let csv = ok(&["transfer", "--dir", "models"], dir);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("mean_unweighted,"));

    let classes = ok(
        &["hull", "classify", "--envelope", "models/forest1_envelope.json", "--plots", "models/forest1_calib.csv"],
        dir,
    );
    let rows: Vec<&str> = classes.lines().skip(1).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.contains(",inside,0,")), "calibration plots lie in their own hull");

    let summary = ok(
        &["hull", "classify", "--envelope", "models/forest1_envelope.json", "--stack", "data/stack"],
        dir,
    );
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    let total: f64 = ["prop_inside", "prop_near", "prop_far"]
        .iter()
        .map(|k| summary[k].as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);

    let preds: String = fs::read_to_string(dir.join("models/forest1_selection.json")).unwrap();
    let preds: serde_json::Value = serde_json::from_str(&preds).unwrap();
    let continuous: Vec<&str> = preds["selection"]["continuous"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    ok(
        &["hull", "build", "--plots", "models/forest1_calib.csv", "--predictors", &continuous.join(","), "--out", "env.json"],
        dir,
    );
    assert_eq!(
        fs::read_to_string(dir.join("env.json")).unwrap(),
        fs::read_to_string(dir.join("models/forest1_envelope.json")).unwrap()
    );

    ok(
        &[
            "thin",
            "--plots",
            "models/forest1_train.csv",
            "--test",
            "models/forest1_test.csv",
            "--model",
            "models/forest1_model.json",
            "--envelope",
            "models/forest1_envelope.json",
            "--stack",
            "data/stack",
            "--out",
            "effort.csv",
            "--resolutions",
            "2,4",
            "--iterations",
            "2,2",
            "--queries",
            "300",
            "--ntrees",
            "40",
        ],
        dir,
    );
    let effort = fs::read_to_string(dir.join("effort.csv")).unwrap();
    assert_eq!(effort.lines().count(), 5);

    let printed = ok(
        &[
            "map",
            "--stack",
            "data/stack",
            "--model",
            "models/forest1_model.json",
            "--envelope",
            "models/forest1_envelope.json",
            "--out",
            "maps",
            "--window",
            "0,0,40,50",
            "--preview",
        ],
        dir,
    );
    assert_eq!(printed.lines().count(), 5);
    let ba = fs::read_to_string(dir.join("maps/map_ba.asc")).unwrap();
    assert!(ba.starts_with("ncols 50\nnrows 40\n"));
}

#[test]
fn demo_is_deterministic_and_transfer_reproduces_its_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let args = |out: &'static str| {
        vec!["demo", "--out", out, "--ntrees", "100", "--iterations", "2,2,2,2,2", "--queries", "500"]
    };
    let printed = ok(&args("a"), dir);
    ok(&args("b"), dir);
    let listed: Vec<&str> = printed.lines().collect();
    assert!(listed.iter().all(|p| Path::new(p).is_absolute() || dir.join(p).exists()));

    for file in ["transfer.csv", "extrapolation.csv", "effort.csv", "demo_manifest.json"] {
        let a = fs::read(dir.join("a").join(file)).unwrap();
        let b = fs::read(dir.join("b").join(file)).unwrap();
        assert!(a == b, "{file} differs between runs");
    }
    for name in ["forest1_local_ba.asc", "forest1_regional_risk.asc"] {
        let a = fs::read(dir.join("a/maps").join(name)).unwrap();
        let b = fs::read(dir.join("b/maps").join(name)).unwrap();
        assert!(a == b, "{name} differs between runs");
    }

    let csv = ok(&["transfer", "--dir", "a/models"], dir);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 6 + 1);
    let header: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(header.len(), 1 + 6 * 3);
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 1 + 6 * 3, "{line}");
    }
    assert!(lines[7].starts_with("mean_unweighted,"));
    assert_eq!(csv, fs::read_to_string(dir.join("a/transfer.csv")).unwrap());
}
