use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use varexp::transform::reduce_problem;
use varexp_cli::commands::spec_difference;
use varexp_cli::{Overrides, Problem};

fn problems_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

fn varexp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varexp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn run_file(cmd: &str, file: &str, extra: &[&str], out: &Path) -> Output {
    let path = problems_dir().join(file);
    let mut args = vec![cmd, "--problem", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    varexp(&args, out)
}

fn run_text(cmd: &str, text: &str, extra: &[&str]) -> (Output, TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("problem.toml");
    fs::write(&path, text).unwrap();
    let mut args = vec![cmd, "--problem", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = varexp(&args, &dir.path().join("out"));
    (out, dir)
}

fn report(out: &Path) -> Value {
    serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
kind = "reduced"

[grid]
x = [0.0, 1.0]
nodes = 17

[exponents]
p0 = 3.0
alpha = 1.5

[source]
h = 1.0
"#;

#[test]
fn empty_problem_file_is_a_config_error() {
    let (o, _d) = run_text("check", "", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty"));
}

#[test]
fn malformed_toml_reports_the_line() {
    let (o, _d) = run_text("check", "kind = \"reduced\"\n[grid]\nx = [0.0, \n", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn unknown_key_names_the_field() {
    let text = SMALL.replace("alpha = 1.5", "alpha = 1.5\nalfa = 2.0");
    let (o, _d) = run_text("check", &text, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alfa"), "{}", stderr(&o));
}

#[test]
fn missing_kind_and_foreign_keys_are_rejected() {
    let (o, _d) = run_text("check", &SMALL.replace("kind = \"reduced\"", ""), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kind"));
    let (o, _d) = run_text("check", &SMALL.replace("p0 = 3.0", "p0 = 3.0\nxi = 2.0"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("exponents.xi"), "{}", stderr(&o));
}

#[test]
fn bad_expression_names_the_field() {
    let (o, _d) = run_text("check", &SMALL.replace("h = 1.0", "h = \"sin(x\""), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("source.h"), "{}", stderr(&o));
}

#[test]
fn reserved_gamma_field_is_rejected_for_main_problems() {
    let text = r#"
kind = "main"
[grid]
x = [0.0, 1.0]
nodes = 17
[exponents]
p = "2 + x"
xi = 2.0
[fields]
gamma = 1.0
"#;
    let (o, _d) = run_text("check", text, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fields.gamma"), "{}", stderr(&o));
}

#[test]
fn check_exit_codes_follow_the_verdict() {
    let d = tempfile::tempdir().unwrap();
    let o = run_file("check", "omega12.toml", &[], &d.path().join("a"));
    assert_eq!(o.status.code(), Some(0));
    let r = report(&d.path().join("a"));
    assert_eq!(r["hypotheses"]["pass"], Value::Bool(true));
    let skipped: Vec<&str> = r["hypotheses"]["skipped"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(skipped.contains(&"sign_omega3"));

    let o = run_file("check", "misdeclared.toml", &[], &d.path().join("b"));
    assert_eq!(o.status.code(), Some(1));
    let r = report(&d.path().join("b"));
    let growth = r["hypotheses"]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["condition_id"] == "growth")
        .unwrap();
    assert_eq!(growth["status"], "fail");
    assert!(growth["witness"]["tau"].as_f64().unwrap().abs() > 1.0);
}

#[test]
fn solve_reports_second_order_refinement() {
    let d = tempfile::tempdir().unwrap();
    let o = run_file("solve", "degenerate_sin.toml", &[], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(d.path());
    assert_eq!(r["status"], "converged");
    let q = r["study"]["final_order_w"].as_f64().unwrap();
    assert!((q - 2.0).abs() <= 0.3);
    assert_eq!(r["study"]["rows"].as_array().unwrap().len(), 4);
    for name in ["solution.csv", "history.csv", "study.csv", "manifest.json"] {
        assert!(d.path().join(name).exists(), "{name}");
    }
    let csv = fs::read_to_string(d.path().join("solution.csv")).unwrap();
    assert!(csv.starts_with("x,u,w\n"));
    assert_eq!(csv.lines().count(), 66);
    assert!(r["memberships"]["pn_seminorm"].as_f64().unwrap() > 0.0);
}

#[test]
fn solve_refuses_failed_hypotheses_unless_forced() {
    let d = tempfile::tempdir().unwrap();
    let o = run_file("solve", "variable_exponent.toml", &["--grid", "33"], &d.path().join("a"));
    assert_eq!(o.status.code(), Some(1));
    let r = report(&d.path().join("a"));
    assert_eq!(r["status"], "hypotheses_failed");

    let o = run_file("solve", "variable_exponent.toml", &["--grid", "33", "--force"], &d.path().join("b"));
    assert_eq!(o.status.code(), Some(0));
    let r = report(&d.path().join("b"));
    assert_eq!(r["status"], "converged");
    assert_eq!(r["grid"]["axes"][0]["nodes"], 33);
    let csv = fs::read_to_string(d.path().join("b/solution.csv")).unwrap();
    assert!(csv.starts_with("x,u,w,v\n"));
    assert!(r["memberships"]["log_bound"]["holds"].as_bool().unwrap());
}

#[test]
fn solver_failure_exits_with_one() {
    let text = SMALL
        .replace("p0 = 3.0", "p0 = 4.0")
        .replace("h = 1.0", "h = \"10*sin(pi*x)\"\n[solver]\nmax_steps = 1")
        .replace("[source]", "[nonlinearity]\nexpr = \"c0*abs(tau)^(alpha-2)*tau\"\nc0 = 1.0\n\n[source]");
    let (o, d) = run_text("solve", &text, &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let r = report(&d.path().join("out"));
    assert_eq!(r["status"], "max_iterations");
}

#[test]
fn invalid_solver_settings_are_config_errors() {
    let (o, _d) = run_text("solve", &format!("{SMALL}\n[solver]\ntol = -1.0\n"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unit_function_has_unit_norm() {
    let d = tempfile::tempdir().unwrap();
    let o = run_file("norms", "unit_norm.toml", &[], d.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(d.path());
    assert!((r["luxemburg"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((r["modular"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn transform_of_constant_exponent_is_the_identity_up_to_bookkeeping() {
    let d = tempfile::tempdir().unwrap();
    let o = run_file("transform", "constant_exponent_main.toml", &[], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let main = Problem::load(&problems_dir().join("constant_exponent_main.toml"), Overrides::default())
        .unwrap()
        .spec()
        .unwrap();
    let reduced = Problem::load(&d.path().join("reduced.toml"), Overrides::default())
        .unwrap()
        .spec()
        .unwrap();
    assert_eq!(reduced.p0().unwrap(), 3.0);
    assert_eq!(reduced.leading_factor, 2.0);
    assert_eq!(reduced.alpha, main.alpha);
    assert_eq!(reduced.alpha1, main.alpha1);
    assert_eq!(reduced.coefficients, main.coefficients);
    assert_eq!(reduced.source.values(), main.source.values());
    assert_eq!(reduced.floor, main.floor);
    assert_eq!(reduced.eta, main.eta);
    assert!(reduced.nonlinearity.field("gamma").unwrap().iter().all(|&g| g == 0.0));
    for k in 0..main.grid.len() {
        for tau in [-3.0, -0.5, 0.0, 0.25, 2.0] {
            let (a, b) = (main.nonlinearity.eval(k, tau), reduced.nonlinearity.eval(k, tau));
            assert!((a - b).abs() <= 1e-15 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn transform_output_round_trips() {
    let d = tempfile::tempdir().unwrap();
    let o = run_file("transform", "variable_exponent.toml", &[], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(d.path())["reduction"]["round_trip"], Value::Bool(true));
    let main = Problem::load(&problems_dir().join("variable_exponent.toml"), Overrides::default())
        .unwrap()
        .spec()
        .unwrap();
    let expected = reduce_problem(&main).unwrap().spec;
    let reloaded = Problem::load(&d.path().join("reduced.toml"), Overrides::default())
        .unwrap()
        .spec()
        .unwrap();
    assert_eq!(spec_difference(&expected, &reloaded), None);
}

#[test]
fn transform_needs_a_main_problem() {
    let (o, _d) = run_text("transform", SMALL, &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn manifest_hashes_inputs_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv: String = std::iter::once("x,value".to_string())
        .chain((0..17).map(|k| format!("{},{}", k as f64 / 16.0, 1.5 + k as f64 / 64.0)))
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(dir.path().join("alpha.csv"), &csv).unwrap();
    let text = SMALL.replace("alpha = 1.5", "alpha = { csv = \"alpha.csv\" }");
    let path = dir.path().join("problem.toml");
    fs::write(&path, &text).unwrap();
    let out = dir.path().join("out");
    let o = varexp(&["check", "--problem", path.to_str().unwrap(), "--seed", "7"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m: Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 7);
    let inputs = m["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 2);
    let digest = varexp_cli::output::sha256_hex(csv.as_bytes());
    assert!(inputs.iter().any(|i| i["sha256"] == digest.as_str()));
    let report_hash = varexp_cli::output::sha256_hex(&fs::read(out.join("report.json")).unwrap());
    assert_eq!(m["outputs"][0]["sha256"], report_hash.as_str());
}

#[test]
fn same_seed_gives_identical_bytes_and_different_seed_differs() {
    let d = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        let out = d.path().join(sub);
        let o = run_file("check", "omega12.toml", &["--seed", seed], &out);
        assert_eq!(o.status.code(), Some(0));
        fs::read(out.join("report.json")).unwrap()
    };
    let (a, b, c) = (run("3", "a"), run("3", "b"), run("4", "c"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn overrides_reach_the_spec() {
    let d = tempfile::tempdir().unwrap();
    let o = run_file(
        "check",
        "omega12.toml",
        &["--eta", "0.2", "--analysis-dim", "4", "--grid", "21"],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(d.path());
    assert_eq!(r["grid"]["analysis_dim"], 4);
    assert_eq!(r["grid"]["axes"][0]["nodes"], 21);
    let o = run_file("check", "omega12.toml", &["--p1", "2.0"], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn study_command_writes_a_convergence_table() {
    let d = tempfile::tempdir().unwrap();
    let o = run_file("study", "degenerate_sin.toml", &[], d.path());
    assert_eq!(o.status.code(), Some(0));
    let table = fs::read_to_string(d.path().join("study.csv")).unwrap();
    assert!(table.starts_with("nodes,h,error_u,error_w,order_u,order_w,iterations,status\n"));
    assert_eq!(table.lines().count(), 5);
    let (o, _t) = run_text("study", SMALL, &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn two_dimensional_problem_solves() {
    let text = r#"
kind = "reduced"
[grid]
x = [0.0, 1.0]
y = [0.0, 1.0]
nodes = [17, 13]
[exponents]
p0 = 2.5
alpha = 1.5
[nonlinearity]
expr = "c0*abs(tau)^(alpha-2)*tau"
c0 = 1.0
[source]
h = "1 + x*y"
"#;
    let (o, d) = run_text("solve", text, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(d.path().join("out/solution.csv")).unwrap();
    assert!(csv.starts_with("x,y,u,w\n"));
    assert_eq!(csv.lines().count(), 17 * 13 + 1);
}
