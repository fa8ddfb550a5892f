//! End-to-end checks of the command line surface: exit codes, byte-identical
//! reruns, the CSV contract, config echo fidelity, and error reporting
//! through the real binary.

use std::fs;
use std::path::Path;
use std::process::Command;

use pretangent::cli;
use serde_json::Value;

fn write_cfg(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

struct TangencyScene {
    space: String,
    circle: String,
    tangent_line: String,
    axis: String,
    diagonal: String,
    at_contact: String,
    at_origin: String,
}

fn tangency_scene(dir: &Path) -> TangencyScene {
    let s = 1.0 / std::f64::consts::SQRT_2;
    TangencyScene {
        space: write_cfg(dir, "space.json", r#"{"kind": "euclidean", "dim": 2}"#),
        circle: write_cfg(
            dir,
            "circle.json",
            r#"{"kind": "circle", "center": [0.0, 0.0], "radius": 1.0}"#,
        ),
        tangent_line: write_cfg(
            dir,
            "tangent_line.json",
            r#"{"kind": "line", "point": [1.0, 0.0], "dir": [0.0, 1.0], "span": 2.0}"#,
        ),
        axis: write_cfg(
            dir,
            "axis.json",
            r#"{"kind": "line", "point": [0.0, 0.0], "dir": [1.0, 0.0], "span": 2.0}"#,
        ),
        diagonal: write_cfg(
            dir,
            "diagonal.json",
            &format!(r#"{{"kind": "line", "point": [0.0, 0.0], "dir": [{s}, {s}], "span": 2.0}}"#),
        ),
        at_contact: write_cfg(dir, "at_contact.json", "[1.0, 0.0]"),
        at_origin: write_cfg(dir, "at_origin.json", "[0.0, 0.0]"),
    }
}

fn tangency_argv(scene: &TangencyScene, out: &str, csv: &str) -> Vec<String> {
    [
        "pretangent",
        "tangency",
        "--space",
        &scene.space,
        "--sub-y",
        &scene.circle,
        "--sub-z",
        &scene.tangent_line,
        "--point",
        &scene.at_contact,
        "--t0",
        "0.1",
        "--grid-len",
        "8",
        "--n-sphere",
        "48",
        "--n-target",
        "256",
        "--seed",
        "3",
        "--csv",
        csv,
        "--out",
        out,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[test]
fn tangency_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tangency_scene(dir.path());
    let out = dir.path().join("report.json");
    let csv = dir.path().join("profile.csv");
    let argv = tangency_argv(&scene, out.to_str().unwrap(), csv.to_str().unwrap());

    assert_eq!(cli::run(argv.clone()), 0);
    let report1 = fs::read(&out).unwrap();
    let csv1 = fs::read(&csv).unwrap();

    assert_eq!(cli::run(argv), 0);
    assert_eq!(
        report1,
        fs::read(&out).unwrap(),
        "report changed across reruns"
    );
    assert_eq!(csv1, fs::read(&csv).unwrap(), "CSV changed across reruns");

    let report: Value = serde_json::from_slice(&report1).unwrap();
    assert_eq!(
        report["payload"]["verdict"]["kind"],
        "StronglyTangentEquivalent"
    );
    assert_eq!(report["status"], "decided");
    assert_eq!(report["tool"], "pretangent");
}

/// The config echo carries every argv-derived value, so a report alone is
/// enough to reproduce itself bit for bit.
#[test]
fn config_echo_is_sufficient_to_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tangency_scene(dir.path());
    let out = dir.path().join("report.json");
    let csv = dir.path().join("profile.csv");
    let argv = tangency_argv(&scene, out.to_str().unwrap(), csv.to_str().unwrap());
    assert_eq!(cli::run(argv), 0);
    let original = fs::read(&out).unwrap();
    let report: Value = serde_json::from_slice(&original).unwrap();

    let args = &report["config"]["args"];
    let s = |v: &Value| v.as_str().unwrap().to_string();
    let n = |v: &Value| v.to_string();
    let mut rebuilt = vec!["pretangent".to_string(), "tangency".to_string()];
    let mut push = |flag: &str, val: String| {
        rebuilt.push(flag.to_string());
        rebuilt.push(val);
    };
    push("--space", s(&args["space"]));
    push("--sub-y", s(&args["sub_y"]));
    push("--sub-z", s(&args["sub_z"]));
    push("--point", s(&args["point"]));
    if !args["t0"].is_null() {
        push("--t0", n(&args["t0"]));
    }
    push("--grid-len", n(&args["grid_len"]));
    push("--shell-width", n(&args["shell_width"]));
    push("--n-sphere", n(&args["n_sphere"]));
    push("--n-target", n(&args["n_target"]));
    push("--slope-margin", n(&args["slope_margin"]));
    push("--ratio-floor", n(&args["ratio_floor"]));
    if !args["csv"].is_null() {
        push("--csv", s(&args["csv"]));
    }
    let output = &args["output"];
    push("--out", s(&output["out"]));
    push("--format", s(&output["format"]));
    push("--seed", n(&output["seed"]));
    if !output["jobs"].is_null() {
        push("--jobs", n(&output["jobs"]));
    }

    assert_eq!(cli::run(rebuilt), 0);
    assert_eq!(
        original,
        fs::read(&out).unwrap(),
        "reconstructed argv produced a different report"
    );
}

#[test]
fn confident_refutation_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tangency_scene(dir.path());
    let out = dir.path().join("report.json");
    let argv = [
        "pretangent",
        "tangency",
        "--space",
        &scene.space,
        "--sub-y",
        &scene.axis,
        "--sub-z",
        &scene.diagonal,
        "--point",
        &scene.at_origin,
        "--t0",
        "0.1",
        "--grid-len",
        "10",
        "--n-sphere",
        "48",
        "--n-target",
        "256",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(cli::run(argv), 0, "a decided negative is still a decision");
    let report: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["payload"]["verdict"]["kind"], "NotTangentEquivalent");
    assert_eq!(report["status"], "decided");
}

/// A near-degenerate profile (cone angle shrinking the deviation toward the
/// decision boundary) must surface as exit 2, not as a confident verdict.
#[test]
fn inconclusive_run_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let argv = [
        "pretangent",
        "gallery",
        "run",
        "rotation",
        "--alpha",
        "0.05",
        "--n-sphere",
        "64",
        "--grid-len",
        "10",
        "--n-target",
        "512",
        "--seed",
        "11",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(cli::run(argv), 2);
    let report: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["status"], "inconclusive");
    assert!(!report["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn profile_csv_keeps_its_contract() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tangency_scene(dir.path());
    let out = dir.path().join("report.json");
    let csv_path = dir.path().join("profile.csv");
    let argv = [
        "pretangent",
        "tangency",
        "--space",
        &scene.space,
        "--sub-y",
        &scene.circle,
        "--sub-z",
        &scene.tangent_line,
        "--point",
        &scene.at_contact,
        "--t0",
        "0.2",
        "--grid-len",
        "20",
        "--n-sphere",
        "48",
        "--n-target",
        "256",
        "--seed",
        "5",
        "--csv",
        csv_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(cli::run(argv), 0);

    let body = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines.len(), 21, "header plus one row per grid radius");
    assert_eq!(lines[0], "t,eps_zy,eps_yz,eps_min,ratio,empty_flag");

    let mut prev_t = f64::INFINITY;
    for row in &lines[1..] {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 6, "row {row}");
        let t: f64 = cells[0].parse().unwrap();
        let zy: f64 = cells[1].parse().unwrap();
        let yz: f64 = cells[2].parse().unwrap();
        let m: f64 = cells[3].parse().unwrap();
        let r: f64 = cells[4].parse().unwrap();
        assert!(t < prev_t, "radii must decrease: {row}");
        prev_t = t;
        assert_eq!(m.to_bits(), zy.min(yz).to_bits(), "row {row}");
        assert_eq!(
            r.to_bits(),
            (m / t).to_bits(),
            "ratio must be eps_min/t: {row}"
        );
        assert!(cells[5] == "0" || cells[5] == "1", "row {row}");
    }
}

#[test]
fn binary_reports_usage_and_config_errors() {
    let bin = env!("CARGO_BIN_EXE_pretangent");
    let dir = tempfile::tempdir().unwrap();

    let version = Command::new(bin).arg("--version").output().unwrap();
    assert_eq!(version.status.code(), Some(0));
    let stdout = String::from_utf8(version.stdout).unwrap();
    assert!(stdout.starts_with("pretangent "), "{stdout}");

    let missing = Command::new(bin)
        .args(["validate", "--space", "no-such-file.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(3));
    let stderr = String::from_utf8(missing.stderr).unwrap();
    assert!(
        stderr.contains("config error in no-such-file.json"),
        "{stderr}"
    );

    let bad = write_cfg(
        dir.path(),
        "bad.json",
        r#"{"kind": "euclidean", "dims": 2}"#,
    );
    let unknown = Command::new(bin)
        .args(["validate", "--space", &bad])
        .output()
        .unwrap();
    assert_eq!(unknown.status.code(), Some(3));
    let stderr = String::from_utf8(unknown.stderr).unwrap();
    assert!(stderr.contains("unknown field `dims`"), "{stderr}");

    let no_sub = Command::new(bin).output().unwrap();
    assert_eq!(no_sub.status.code(), Some(3));

    let bad_sub = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(bad_sub.status.code(), Some(3));
}

#[test]
fn validate_accepts_a_finite_metric() {
    let dir = tempfile::tempdir().unwrap();
    let space = write_cfg(
        dir.path(),
        "finite.json",
        r#"{"kind": "finite", "matrix": [[0.0, 1.0, 2.0], [1.0, 0.0, 1.5], [2.0, 1.5, 0.0]]}"#,
    );
    let out = dir.path().join("report.json");
    let argv = [
        "pretangent",
        "validate",
        "--space",
        &space,
        "--samples",
        "100",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(cli::run(argv), 0);
    let report: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["payload"]["validation"]["pass"], true);
    assert_eq!(report["command"], "validate");
}
