use std::path::{Path, PathBuf};

use quasilin_cli::run_with;
use serde_json::Value;

fn sys(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../systems").join(format!("{name}.sys")).display().to_string()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("quasilin").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_and_version_succeed() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("verdict"));
    assert_eq!(run(&["--version"]).0, 0);
}

#[test]
fn usage_and_input_errors_exit_with_two() {
    let (code, _, err) = run(&["frobnicate"]);
    assert_eq!(code, 2);
    assert!(!err.is_empty());
    let (code, _, err) = run(&["verdict", "/nonexistent/file.sys"]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error (IoError)"), "{err}");
    let (code, _, err) = run(&["indices", "--A", "1,2;3", "--B", "1;1"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn numerical_failures_exit_with_three() {
    let (code, _, err) = run(&["simulate", &sys("pm1"), "--T", "50"]);
    assert_eq!(code, 3);
    assert!(err.starts_with("error (BoxExit)"), "{err}");
    let (code, _, err) = run(&["brunovsky", "--A", "0,0;0,0", "--B", "1;0"]);
    assert_eq!(code, 3);
    assert!(err.starts_with("error (NotControllable)"), "{err}");
}

#[test]
fn json_report_has_the_documented_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let p = path.display().to_string();
    let (code, text, _) = run(&["verdict", &sys("cubic"), "--json", &p]);
    assert_eq!(code, 0);
    assert!(text.contains("verdict: QuasiSmoothCandidate"));
    let v = json(&path);
    let echo: Vec<&str> = v["command"].as_array().unwrap().iter().map(|s| s.as_str().unwrap()).collect();
    assert_eq!(echo[0], "verdict");
    assert!(!echo.contains(&"--json"));
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    let digest = v["input_digest"].as_str().unwrap();
    assert!(digest.len() == 64 && digest.chars().all(|c| c.is_ascii_hexdigit()));
    assert!(v["wall_time_ms"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["result"]["tag"], "QuasiSmoothCandidate");
    for key in ["tol", "inv_tol", "angle_tol"] {
        assert!(v["tolerances"].get(key).is_some(), "missing tolerance {key}: {}", v["tolerances"]);
    }
}

#[test]
fn input_digest_tracks_file_contents() {
    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("cubic.sys");
    let text = std::fs::read_to_string(sys("cubic")).unwrap();
    std::fs::write(&copy, &text).unwrap();
    let digest = |file: &Path| {
        let out = dir.path().join("d.json");
        let (code, _, err) = run(&["classify", &file.display().to_string(), "--json", &out.display().to_string()]);
        assert_eq!(code, 0, "{err}");
        json(&out)["input_digest"].as_str().unwrap().to_string()
    };
    let before = digest(&copy);
    assert_eq!(before, digest(&copy));
    std::fs::write(&copy, text + "\n# edited\n").unwrap();
    assert_ne!(before, digest(&copy));
}

#[test]
fn repeated_runs_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let once = |name: &str| {
        let out = dir.path().join(name);
        let (code, _, err) = run(&["orbit-dim", &sys("pendulum"), "--json", &out.display().to_string()]);
        assert_eq!(code, 0, "{err}");
        let mut v = json(&out);
        v.as_object_mut().unwrap().remove("wall_time_ms");
        v
    };
    assert_eq!(once("a.json"), once("b.json"));
}

#[test]
fn simulate_writes_csv_and_gnuplot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let gp = dir.path().join("traj.gp");
    let (code, _, err) = run(&[
        "simulate",
        &sys("pendulum"),
        "--T",
        "0.5",
        "--csv",
        &csv.display().to_string(),
        "--plot",
        &gp.display().to_string(),
    ]);
    assert_eq!(code, 0, "{err}");
    let data = std::fs::read_to_string(&csv).unwrap();
    let mut lines = data.lines();
    assert_eq!(lines.next(), Some("t,th,w,u"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 501);
    assert!(rows.iter().all(|r| r.split(',').count() == 4 && r.split(',').all(|c| c.parse::<f64>().is_ok())));
    let script = std::fs::read_to_string(&gp).unwrap();
    assert!(script.contains(&csv.display().to_string()));
    assert!(script.contains("using 1:4"));
}

#[test]
fn chatter_reports_the_sawtooth_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ch.csv");
    let (code, text, err) = run(&["chatter", &sys("pm1"), "--l", "10", "--csv", &csv.display().to_string()]);
    assert_eq!(code, 0, "{err}");
    assert!(text.contains("sup error: 5.000000e-2"), "{text}");
    let header = std::fs::read_to_string(&csv).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "t,x_switched,x_averaged");
}

#[test]
fn linear_commands_accept_inline_pairs() {
    let (code, text, _) = run(&["indices", "--A", "0,1,0;0,0,0;0,0,0", "--B", "0,0;1,0;0,1"]);
    assert_eq!(code, 0);
    assert!(text.contains("kappa: [2, 1]"), "{text}");
    let (code, text, _) = run(&["conjugate-linear", "--A", "0,1;0,0", "--B", "0;1", "--A2", "1,2;0,3", "--B2", "0;1"]);
    assert_eq!(code, 0);
    assert!(text.contains("true"), "{text}");
}
