use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scalar-attitude"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["simulate", "--out", s(dir)];
    args.extend_from_slice(extra);
    ok(&args);
    dir.join("imu.csv")
}

#[test]
fn simulate_writes_one_column_per_channel() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("sim");
    simulate(
        &dir,
        &[
            "--preset",
            "pe_tumble",
            "--config",
            "two",
            "--duration",
            "2",
        ],
    );
    let text = fs::read_to_string(dir.join("scalars.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "t,omega_x,omega_y,omega_z,y_1,y_2");
    assert_eq!(text.lines().count(), 1 + 2 * 286 + 1);
    let manifest = json(&dir.join("manifest.json"));
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_with_fixed_seed_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let flags = [
        "--duration",
        "3",
        "--gyro-sigma",
        "0.01",
        "--meas-sigma",
        "0.02",
        "--seed",
        "7",
    ];
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    simulate(&a, &flags);
    simulate(&b, &flags);
    for name in ["imu.csv", "scalars.csv", "trajectory.json", "manifest.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    assert_eq!(json(&a.join("manifest.json"))["seeds"]["noise"], 7);
    let c = tmp.path().join("c");
    simulate(
        &c,
        &[
            "--duration",
            "3",
            "--gyro-sigma",
            "0.01",
            "--meas-sigma",
            "0.02",
            "--seed",
            "8",
        ],
    );
    assert_ne!(
        fs::read(a.join("imu.csv")).unwrap(),
        fs::read(c.join("imu.csv")).unwrap()
    );
}

#[test]
fn zero_duration_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = cli(&["simulate", "--duration", "0", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let imu = simulate(&tmp.path().join("sim"), &["--duration", "1"]);
    let out = cli(&[
        "estimate",
        "--input",
        s(&imu),
        "--config",
        "seven",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seven"));
}

#[test]
fn missing_input_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.csv");
    let out = cli(&["estimate", "--input", s(&missing), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_row_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let imu = simulate(&tmp.path().join("sim"), &["--duration", "1"]);
    let mut text = fs::read_to_string(&imu).unwrap();
    text.push_str("9,1,2\n");
    fs::write(&imu, text).unwrap();
    let out = cli(&[
        "estimate",
        "--input",
        s(&imu),
        "--out",
        s(&tmp.path().join("e")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

fn analyze(dir: &Path, preset: &str) -> Value {
    ok(&[
        "analyze",
        "--preset",
        preset,
        "--config",
        "two",
        "--out",
        s(dir),
    ]);
    json(&dir.join("analysis.json"))
}

fn verdict(report: &Value, condition: &str) -> String {
    report["summary"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["condition"] == condition)
        .unwrap_or_else(|| panic!("{condition} missing"))["verdict"]
        .as_str()
        .unwrap()
        .to_string()
}

#[test]
fn static_two_channel_windows_are_all_unobservable() {
    let tmp = TempDir::new().unwrap();
    let report = analyze(tmp.path(), "static");
    let windows = report["windows"].as_array().unwrap();
    assert!(!windows.is_empty());
    for w in windows {
        let att = w["conditions"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["condition"] == "attitude_gramian")
            .unwrap();
        assert_eq!(att["verdict"], "not_observable");
        assert!(att["lambda_min"].is_number());
    }
    assert_eq!(verdict(&report, "attitude_gramian"), "not_observable");
}

#[test]
fn tumbling_two_channel_run_passes_the_gramian_conditions() {
    let tmp = TempDir::new().unwrap();
    let report = analyze(tmp.path(), "pe_tumble");
    for c in ["attitude_gramian", "omega_excitation", "bias_gramian"] {
        assert_eq!(verdict(&report, c), "observable", "{c}");
    }
    for w in report["windows"].as_array().unwrap() {
        for c in w["conditions"].as_array().unwrap() {
            assert!(c.get("lambda_min").is_some());
        }
    }
}

#[test]
fn estimate_records_resolved_defaults() {
    let tmp = TempDir::new().unwrap();
    let imu = simulate(&tmp.path().join("sim"), &["--duration", "2"]);
    let out = tmp.path().join("cf");
    ok(&[
        "estimate",
        "--input",
        s(&imu),
        "--observer",
        "complementary",
        "--init-rot",
        "45,45,45",
        "--init-bias",
        "0.5,0.5,0.5",
        "--out",
        s(&out),
    ]);
    let params = &json(&out.join("manifest.json"))["params"];
    assert_eq!(params["k_acc"], 2.0);
    assert_eq!(params["k_mag"], 2.0);
    assert_eq!(params["k_bias"], 0.5);
    assert_eq!(params["q"], 0.05);
    assert_eq!(params["init_rot"], serde_json::json!([45.0, 45.0, 45.0]));
    assert!(out.join("history.csv").exists());
    assert!(out.join("errors.csv").exists());

    let rejected = cli(&[
        "estimate",
        "--input",
        s(&imu),
        "--observer",
        "complementary",
        "--config",
        "two",
        "--out",
        s(&out),
    ]);
    assert_eq!(rejected.status.code(), Some(2));
}

#[test]
fn started_at_truth_history_matches_truth() {
    let tmp = TempDir::new().unwrap();
    let imu = simulate(
        &tmp.path().join("sim"),
        &["--duration", "5", "--bias", "0,0,0"],
    );
    let out = tmp.path().join("est");
    ok(&[
        "estimate",
        "--input",
        s(&imu),
        "--config",
        "two",
        "--out",
        s(&out),
    ]);
    let rmse = &json(&out.join("summary.json"))["rmse"];
    assert!(rmse["theta"].as_f64().unwrap() < 1e-5, "{rmse}");
}

fn rows(report: &Value) -> Vec<(String, [f64; 4])> {
    report
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            let f = |k: &str| r[k].as_f64().unwrap();
            (
                r["label"].as_str().unwrap().to_string(),
                [f("theta"), f("roll"), f("pitch"), f("yaw")],
            )
        })
        .collect()
}

#[test]
fn self_comparison_gives_zero_row() {
    let tmp = TempDir::new().unwrap();
    let imu = simulate(&tmp.path().join("sim"), &["--duration", "2"]);
    let out = tmp.path().join("ev");
    let truth = format!("truth={}", s(&imu));
    ok(&[
        "evaluate",
        "--estimates",
        &truth,
        "--truth",
        s(&imu),
        "--out",
        s(&out),
    ]);
    let r = rows(&json(&out.join("rmse.json")));
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].1, [0.0; 4]);
}

#[test]
fn four_runs_give_four_rows_matching_the_text_table() {
    let tmp = TempDir::new().unwrap();
    let imu = simulate(&tmp.path().join("sim"), &["--duration", "4"]);
    let mut specs = Vec::new();
    for (name, observer, config) in [
        ("six", "riccati", "six"),
        ("two", "riccati", "two"),
        ("unbiased", "riccati-unbiased", "three"),
        ("cf", "complementary", "six"),
    ] {
        let dir = tmp.path().join(name);
        ok(&[
            "estimate",
            "--input",
            s(&imu),
            "--observer",
            observer,
            "--config",
            config,
            "--init-rot",
            "10,-5,20",
            "--out",
            s(&dir),
        ]);
        specs.push(format!("{name}={}", s(&dir.join("history.csv"))));
    }
    let out = tmp.path().join("ev");
    let mut args = vec!["evaluate", "--truth", s(&imu), "--out", s(&out)];
    for sp in &specs {
        args.extend(["--estimates", sp]);
    }
    let stdout = String::from_utf8(ok(&args).stdout).unwrap();
    let r = rows(&json(&out.join("rmse.json")));
    assert_eq!(r.len(), 4);
    let text_rows: Vec<&str> = stdout.lines().skip(1).collect();
    assert_eq!(text_rows.len(), 4);
    for ((label, values), line) in r.iter().zip(text_rows) {
        let cells: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cells[0], label);
        for (v, c) in values.iter().zip(&cells[1..]) {
            assert!(
                (v - c.parse::<f64>().unwrap()).abs() <= 5e-7,
                "{label}: {v} vs {c}"
            );
        }
    }
    assert_eq!(fs::read_to_string(out.join("rmse.txt")).unwrap(), stdout);
}

#[test]
fn replay_reproduces_every_command() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    let imu = simulate(
        &sim,
        &["--duration", "3", "--meas-sigma", "0.01", "--seed", "3"],
    );
    let est = tmp.path().join("est");
    ok(&[
        "estimate",
        "--input",
        s(&imu),
        "--config",
        "four",
        "--out",
        s(&est),
    ]);
    let an = tmp.path().join("an");
    ok(&[
        "analyze",
        "--input",
        s(&imu),
        "--config",
        "four",
        "--stride",
        "0.5",
        "--out",
        s(&an),
    ]);
    let ev = tmp.path().join("ev");
    let hist = est.join("history.csv");
    ok(&[
        "evaluate",
        "--estimates",
        s(&hist),
        "--truth",
        s(&imu),
        "--out",
        s(&ev),
    ]);
    for dir in [&sim, &est, &an, &ev] {
        let again = tmp.path().join("replayed").join(dir.file_name().unwrap());
        ok(&[
            "replay",
            "--manifest",
            s(&dir.join("manifest.json")),
            "--out",
            s(&again),
        ]);
        assert_eq!(
            fs::read(dir.join("manifest.json")).unwrap(),
            fs::read(again.join("manifest.json")).unwrap()
        );
    }
}

#[test]
fn replay_rejects_a_changed_input() {
    let tmp = TempDir::new().unwrap();
    let imu = simulate(&tmp.path().join("sim"), &["--duration", "1"]);
    let est = tmp.path().join("est");
    ok(&["estimate", "--input", s(&imu), "--out", s(&est)]);
    let mut text = fs::read_to_string(&imu).unwrap();
    text = text.replacen("0,", "0.0,", 1);
    fs::write(&imu, text).unwrap();
    let out = cli(&[
        "replay",
        "--manifest",
        s(&est.join("manifest.json")),
        "--out",
        s(&tmp.path().join("r")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}
