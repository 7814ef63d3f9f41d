use std::path::Path;
use std::process::{Command, Output};

fn bubbles(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bubbles")).args(args).output().expect("spawn bubbles")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON on stderr: {text}"));
    serde_json::from_str(line).unwrap()
}

#[test]
fn recurrence_table_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "t.csv");
    let o = bubbles(&["recurrence", "--q", "1.5", "--k", "10", "--out", &out]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,a_k,delta_k,eta_k,eta_tilde_k"));
    let row2: Vec<f64> = lines.nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(row2[0], 2.0);
    assert!((row2[1] - (2.0 * 3f64.sqrt() - 2.0)).abs() < 1e-14);
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn malformed_model_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bubbles(&["solve", "--model", "power-exp:p=two", "--mu", "6", "--out", &path(dir.path(), "s.csv")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p=two"));
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = bubbles(&["recurrence", "--q", "1.5", "--k", "3", "--out", "x.csv", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--frobnicate"));
}

#[test]
fn mu_over_budget_is_precision_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bubbles(&["solve", "--model", "power-exp:p=3", "--mu", "9.5", "--out", &path(dir.path(), "s.csv")]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "precision");
}

#[test]
fn compensated_mode_admits_larger_mu() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "s.csv");
    let o = bubbles(&["solve", "--model", "power-exp:p=3", "--mu", "9.5", "--scalar-mode", "compensated", "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(side["scalar_mode"], "compensated");
}

#[test]
fn detect_gelfand_single_event() {
    let dir = tempfile::tempdir().unwrap();
    let sol = path(dir.path(), "g.csv");
    let rep = path(dir.path(), "r.json");
    let o = bubbles(&["solve", "--model", "pure-exp", "--mu", "3", "--out", &sol]);
    assert!(o.status.success(), "{o:?}");
    let o = bubbles(&["detect", "--solution", &sol, "--model", "pure-exp", "--q", "3", "--report", &rep]);
    assert!(o.status.success(), "{o:?}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    let events = v["events"].as_array().unwrap();
    assert_eq!(events.len(), 1);
    // 8 alpha r^2/(1 + alpha r^2)^2 peaks at 2 where alpha r^2 = 1
    let alpha = 1.5f64.exp() - 1.0;
    let r = events[0]["r_center"].as_f64().unwrap();
    assert!((r - alpha.powf(-0.5)).abs() < 1e-6, "{r}");
    assert!((events[0]["phi_peak"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert_eq!(v["config"]["window_rule"], "hybrid");
}

#[test]
fn detect_needs_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("lonely.csv");
    std::fs::write(&sol, "t,r,u,m,log_rhs,phi,psi\n").unwrap();
    let o = bubbles(&[
        "detect",
        "--solution",
        sol.to_str().unwrap(),
        "--model",
        "pure-exp",
        "--q",
        "3",
        "--report",
        &path(dir.path(), "r.json"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "io");
}

#[test]
fn verify_recurrence_passes() {
    let o = bubbles(&["verify", "--suite", "recurrence"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().count() >= 10 && text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn sweep_finds_gelfand_fold() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "b.csv");
    let o = bubbles(&["sweep", "--model", "pure-exp", "--mu-min", "0.2", "--mu-max", "4", "--points", "20", "--out", &out]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert_eq!(text.lines().filter(|l| l.ends_with(",1")).count(), 1);
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
    let tp = &side["turning_points"][0];
    assert!((tp["mu"].as_f64().unwrap() - 2f64.ln() * 2.0).abs() < 1e-4);
    assert!((tp["lambda"].as_f64().unwrap() - 2.0).abs() < 1e-6);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        let sol = path(dir.path(), "s.csv");
        let o = bubbles(&["solve", "--model", "power-exp:p=3", "--mu", "4.5", "--out", &sol]);
        assert!(o.status.success(), "{o:?}");
        let rep = path(dir.path(), "r.json");
        let o = bubbles(&["detect", "--solution", &sol, "--model", "power-exp:p=3", "--q", "1.5", "--report", &rep]);
        assert!(o.status.success(), "{o:?}");
        let prof = path(dir.path(), "p.csv");
        let o = bubbles(&["profile", "--a", "1.4641", "--grid", "geom:1e-3,1e3,50", "--out", &prof]);
        assert!(o.status.success(), "{o:?}");
        ["s.csv", "s.json", "r.json", "p.csv"].map(|f| std::fs::read(dir.path().join(f)).unwrap())
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
}

#[test]
fn thread_variable_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_bubbles"))
        .args(["verify", "--suite", "recurrence"])
        .env("BUBBLES_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_bubbles"))
        .args(["verify", "--suite", "recurrence"])
        .env("BUBBLES_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}
