use std::path::Path;
use std::process::{Command, Output};

fn objreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_objreg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const SCENARIO: &str = r#"
n_ref_objects = 120
area = 300.0
n_classes = 3
trajectory = [[20.0, 20.0], [280.0, 20.0], [280.0, 280.0], [20.0, 280.0]]
rng_seed = 4
"#;

fn synth(dir: &Path, extra: &str) {
    let cfg = dir.join("scenario.toml");
    write(&cfg, &format!("{SCENARIO}{extra}"));
    let out = objreg(&["synth", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn identical_maps_register_to_identity() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("map.txt");
    let mut text = String::new();
    for i in 0..25 {
        let (x, y) = ((i * 37 % 101) as f64, (i * 53 % 89) as f64);
        text.push_str(&format!("{i} {} {x} {y} {}\n", i % 2, (i % 5) as f64));
    }
    write(&map, &text);
    let m = map.to_str().unwrap();
    let out = objreg(&["register", m, m]);
    assert!(out.status.success(), "{}", stderr(&out));
    let s = stdout(&out);
    assert!(s.contains("inliers: 25"), "{s}");
    let translation = s.lines().find(|l| l.starts_with("translation:")).unwrap();
    for v in translation.split_whitespace().skip(1) {
        assert!(v.parse::<f64>().unwrap().abs() < 1e-9);
    }
}

#[test]
fn disjoint_maps_do_not_register() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    write(&a, "1 0 0 0 0\n2 0 10 0 0\n3 0 0 10 0\n4 0 10 10 0\n");
    write(&b, "1 1 0 0 0\n2 1 10 0 0\n3 1 0 10 0\n4 1 10 10 0\n");
    let out = objreg(&["register", a.to_str().unwrap(), b.to_str().unwrap(), "--min-inliers", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("no registration"));
}

#[test]
fn synthetic_pair_registers_to_generator_alignment() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("scenario.json")).unwrap()).unwrap();
    let out = objreg(&[
        "register",
        dir.path().join("reference.txt").to_str().unwrap(),
        dir.path().join("perceived.txt").to_str().unwrap(),
        "--min-inliers",
        "10",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let s = stdout(&out);
    let translation: Vec<f64> = s
        .lines()
        .find(|l| l.starts_with("translation:"))
        .unwrap()
        .split_whitespace()
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    let expected = summary["gt_alignment_translation"].as_array().unwrap();
    for (got, want) in translation.iter().zip(expected) {
        assert!((got - want.as_f64().unwrap()).abs() < 1e-6);
    }
}

#[test]
fn localize_without_ground_truth_omits_errors() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "");
    let out_dir = dir.path().join("run");
    let out = objreg(&[
        "localize",
        "--frames",
        dir.path().join("frames.txt").to_str().unwrap(),
        "--reference",
        dir.path().join("reference.txt").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--min-inliers",
        "8",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert!(report.get("time_to_localize_s").is_some());
    assert!(report.get("avg_position_error_m").is_none());
    assert!(report.get("outlier_percent").is_none());
    assert_eq!(report["config"]["min_inliers"], 8);
    assert!(!out_dir.join("errors.csv").exists());
    let trajectory = std::fs::read_to_string(out_dir.join("trajectory.txt")).unwrap();
    assert!(trajectory.lines().count() > 10);
}

#[test]
fn localize_with_ground_truth_reports_errors() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "");
    let out_dir = dir.path().join("run");
    let config = dir.path().join("run.toml");
    write(&config, "min_inliers = 8\nepsilon = 4.0\n");
    let out = objreg(&[
        "localize",
        "--frames",
        dir.path().join("frames.txt").to_str().unwrap(),
        "--reference",
        dir.path().join("reference.txt").to_str().unwrap(),
        "--ground-truth",
        dir.path().join("ground_truth.txt").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--epsilon",
        "5",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert!(report["avg_position_error_m"].as_f64().unwrap() < 1e-6);
    assert_eq!(report["outlier_percent"].as_f64(), Some(0.0));
    assert_eq!(report["config"]["epsilon"].as_f64(), Some(5.0));
    assert_eq!(report["config"]["min_inliers"], 8);
    let csv = std::fs::read_to_string(out_dir.join("errors.csv")).unwrap();
    assert!(csv.starts_with("t,e_p,e_o\n"));
}

#[test]
fn malformed_frames_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames.txt");
    let reference = dir.path().join("ref.txt");
    write(&frames, "CAM 500 500 320 240\nPOSE 0 0 0 0 1 0 0 0\nDET 0 1 2 oops 4 0\n");
    write(&reference, "1 0 0 0 0\n");
    let out = objreg(&[
        "localize",
        "--frames",
        frames.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn partition_and_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "");
    let parts = dir.path().join("parts");
    let out = objreg(&[
        "partition",
        dir.path().join("reference.txt").to_str().unwrap(),
        "--out",
        parts.to_str().unwrap(),
        "--submaps",
        "4",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 4);
    assert!(parts.join("submap_3.txt").exists());

    let gt = dir.path().join("ground_truth.txt");
    let out = objreg(&["eval", "--estimate", gt.to_str().unwrap(), "--ground-truth", gt.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["avg_position_error_m"].as_f64(), Some(0.0));
    assert_eq!(report["time_to_localize_s"].as_f64(), Some(0.0));
}

#[test]
fn bad_thread_setting_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_objreg"))
        .args(["partition", "nope.txt", "--out", "x"])
        .env("OBJREG_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("OBJREG_THREADS"));
}
