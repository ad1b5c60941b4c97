use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scene(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spencerctl")).args(args).output().expect("spawn spencerctl")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("{e}: stdout {:?} stderr {:?}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
    })
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(name: &str) -> String {
    scene(name).to_string_lossy().into_owned()
}

#[test]
fn acs_check_standard() {
    let o = run(&["acs", "check", &s("standard2d.json")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(&o);
    assert_eq!(r["report"]["acs_residual"], 0.0);
    assert_eq!(r["passes"], true);
    assert!(r["meta"].is_object());
}

#[test]
fn elliptic_solve_reproduces_the_cubic() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("u.csv");
    let o = run(&[
        "elliptic", "solve", &s("standard2d.json"), "--bc", "x1^3-3*x1*x2^2", "--grid", "65", "--oracle",
        "cubic", "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(&o);
    assert!(r["report"]["max_error"].as_f64().unwrap() <= 1e-10);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1@65,x2@65,u,oracle,error"));
    assert_eq!(lines.count(), 65 * 65);

    // without --csv the grid goes to stdout and the report to stderr
    let o = run(&["elliptic", "solve", &s("standard2d.json"), "--bc", "cubic", "--no-meta"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("x1@17,x2@17,u"));
    let rep: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(rep["report"]["max_error"].is_null());
}

#[test]
fn from_pq_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let o = run(&["acs", "from-pq", &s("pq_n1.json"), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(report(&o)["report"]["validation"]["valid"], true);
    let converted: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(converted["structure"]["kind"], "matrix");
    let o = run(&["acs", "check", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(report(&o)["report"]["acs_residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn reports_are_deterministic_without_meta() {
    let args = ["acs", "check", &s("type1.json"), "--nijenhuis", "--seed", "11", "--no-meta"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(report(&a).get("meta").is_none());
    let c = run(&["acs", "check", &s("type1.json"), "--nijenhuis", "--seed", "12", "--no-meta"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn scene_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    };
    let base = r#""patch": {"bounds": [[-1, 1], [-1, 1]], "resolution": 9}, "structure": {"kind": "standard"}"#;
    let unknown = write("unknown.json", &format!(r#"{{"schema": 1, {base}, "colour": "red"}}"#));
    let o = run(&["acs", "check", &unknown]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown field `colour`") && stderr(&o).contains("line 1"), "{}", stderr(&o));

    let bad_expr = write("bad.json", &format!(r#"{{"schema": 1, {base}, "fields": {{"u": "x1 +* 2"}}}}"#));
    let o = run(&["acs", "check", &bad_expr]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("fields.u"), "{}", stderr(&o));

    let schema = write("schema.json", &format!(r#"{{"schema": 2, {base}}}"#));
    assert_eq!(code(&run(&["acs", "check", &schema])), 2);

    let nested = write("nested.json", r#"{"schema": 1, "patch": {"bounds": [[-1, 1], [-1, 1]], "resolution": 9}, "structure": {"kind": "standard", "extra": 1}}"#);
    assert_eq!(code(&run(&["acs", "check", &nested])), 2);

    let var = write("var.json", &format!(r#"{{"schema": 1, {base}, "complex_fields": {{"w": ["x3", "x4"]}}}}"#));
    let o = run(&["acs", "check", &var]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("complex_fields.w[0]"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(&["holo", "residual", &s("standard2d.json"), "--field", "missing"])), 2);
    assert_eq!(code(&run(&["holo", "residual", &s("standard2d.json")])), 2);
    assert_eq!(code(&run(&["acs", "check", &s("standard2d.json"), "--mode", "symbolic"])), 2);
    assert_eq!(code(&run(&["acs", "from-pq", &s("standard2d.json")])), 2);
    assert_eq!(code(&run(&["hyper", "check", &s("flat_hyper.json")])), 2);
}

#[test]
fn tolerance_failures_exit_1() {
    let o = run(&["holo", "residual", &s("standard2d.json"), "--field", "zbar"]);
    assert_eq!(code(&o), 1);
    assert!((report(&o)["report"]["sup_norm"].as_f64().unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    let o = run(&["holo", "residual", &s("standard2d.json"), "--field", "zbar", "--anti"]);
    assert_eq!(code(&o), 0);
    // a looser tolerance turns the same residual into a pass
    assert_eq!(code(&run(&["holo", "residual", &s("standard2d.json"), "--field", "zbar", "--tol", "3"])), 0);
}

#[test]
fn nijenhuis_through_the_cli() {
    let o = run(&["acs", "check", &s("twisted4d.json"), "--nijenhuis"]);
    assert_eq!(code(&o), 1);
    assert!(report(&o)["report"]["structures"][0]["nijenhuis"].as_f64().unwrap() > 0.5);
    assert_eq!(code(&run(&["acs", "check", &s("type1.json"), "--nijenhuis"])), 0);
}

#[test]
fn extract_and_reduced() {
    let o = run(&["acs", "extract-pq", &s("n1.json")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(report(&o)["report"]["round_trip"].as_f64().unwrap() <= 1e-10);
    let o = run(&["holo", "reduced", &s("n1.json"), "--field", "x1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(report(&o)["report"]["equivalence"]["identity_holds"], true);
}

#[test]
fn pluriharmonic_check() {
    let o = run(&["pluri", "check", &s("standard2d.json"), "--field", "u"]);
    assert_eq!(code(&o), 0);
    let o = run(&["pluri", "check", &s("standard2d.json"), "--field", "r2"]);
    assert_eq!(code(&o), 1);
    // d(J* d(x1² + x2²)) = -4 dx1∧dx2
    assert_eq!(report(&o)["report"]["closedness"]["sup_norm"], 4.0);
}

#[test]
fn chart_patterns() {
    let o = run(&["spencer", "verify", &s("type1.json"), "--chart", "z_w"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(report(&o)["report"]["pattern"]["m"], 1);
    assert_eq!(code(&run(&["spencer", "verify", &s("type1.json"), "--chart", "both"])), 1);
    assert_eq!(code(&run(&["spencer", "verify", &s("pullback4d.json"), "--chart", "phi"])), 0);
    assert_eq!(code(&run(&["holo", "residual", &s("type1.json"), "--field", "w_twisted"])), 0);
}

#[test]
fn hyper_checks() {
    let o = run(&["hyper", "check", &s("flat_hyper.json"), "--function", "identity", "--potential", "u", "zeta"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&run(&["hyper", "check", &s("flat_hyper.json"), "--function", "square"])), 1);
    assert_eq!(code(&run(&["hyper", "check", &s("flat_hyper.json"), "--function", "conjugate"])), 1);
    assert_eq!(code(&run(&["acs", "check", &s("flat_hyper.json")])), 0);
}

#[test]
fn bracket_laws() {
    let o = run(&["bracket", "check", &s("standard2d.json"), "--x", "x_10", "--y", "y_01", "--u", "zbar", "--case", "mixed"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(&o);
    assert_eq!(r["report"]["derived_law"], "-i{X,Y}");
    assert_eq!(r["report"]["display_agrees"], false);
    assert!(r["report"]["lhs_sup"].as_f64().unwrap() > 1.0);
    // fields outside the declared eigenspaces cannot be checked
    let o = run(&["bracket", "check", &s("standard2d.json"), "--x", "x_10", "--y", "y_10", "--u", "z", "--case", "mixed"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("eigenspaces"));
}

#[test]
fn convergence_orders() {
    let o = run(&["convergence", &s("standard2d.json"), "--check", "elliptic", "--bc", "exp(x1)*cos(x2)", "--grid", "9"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for order in report(&o)["report"]["orders"].as_array().unwrap() {
        let p = order.as_f64().unwrap();
        assert!((1.8..2.2).contains(&p), "{p}");
    }
    let o = run(&["convergence", &s("twisted4d.json"), "--check", "nijenhuis", "--grid", "5"]);
    assert_eq!(code(&o), 1);
    let o = run(&["convergence", &s("n1.json"), "--check", "holo"]);
    assert_eq!(code(&o), 2);
}
