//! The five subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use varexp::estimates::HypothesisReport;
use varexp::modular::{luxemburg_norm_with, modular_with, sobolev_norm_with, QuadratureRule};
use varexp::solver::{refinement_study, ConvergenceTable};
use varexp::transform::{reduce_problem, Reduction};
use varexp::{check_hypotheses, Grid, GridFunction, ProblemKind, ProblemSpec, SolveReport};

use crate::config::{Problem, ProblemFile};
use crate::error::{CliError, Result};
use crate::output::{csv_table, num, nums, opt, sci, Artifacts};

/// Exit code and a human-readable summary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: u8,
    pub summary: String,
}

fn coords_json(grid: &Grid<f64>, node: usize) -> Value {
    let c = grid.coords(node);
    nums(&c[..grid.dim()])
}

pub fn hypotheses_json(report: &HypothesisReport<f64>, grid: &Grid<f64>) -> Value {
    let entries: Vec<Value> = report
        .entries
        .iter()
        .map(|e| {
            json!({
                "condition_id": e.condition_id,
                "inequality": e.paper_eq,
                "status": e.status.label(),
                "margin": opt(e.margin),
                "value": opt(e.value),
                "witness": e.witness.map(|w| json!({
                    "node": w.node,
                    "coords": coords_json(grid, w.node),
                    "tau": opt(w.tau),
                })),
                "note": e.note,
            })
        })
        .collect();
    json!({
        "kind": report.kind.label(),
        "pass": report.pass(),
        "failed": report.failed(),
        "skipped": report.skipped(),
        "entries": entries,
        "warnings": report.warnings,
    })
}

fn hypotheses_summary(report: &HypothesisReport<f64>) -> String {
    let mut s = String::new();
    for e in &report.entries {
        let margin = e.margin.map(sci).unwrap_or_else(|| "-".into());
        let _ = writeln!(s, "{:<8} {:<28} margin {}", e.status.label(), e.condition_id, margin);
    }
    for w in &report.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    let _ = writeln!(s, "overall: {}", if report.pass() { "pass" } else { "fail" });
    s
}

fn grid_json(grid: &Grid<f64>) -> Value {
    let axes: Vec<Value> = grid
        .axes()
        .iter()
        .map(|a| json!({ "lo": num(a.lo), "hi": num(a.hi), "nodes": a.nodes }))
        .collect();
    json!({ "axes": axes, "analysis_dim": grid.analysis_dim() })
}

fn header(problem: &Problem, command: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("problem".into(), json!(problem.path.display().to_string()));
    m.insert("seed".into(), json!(problem.check_config().seed));
    m
}

pub fn cmd_check(problem: &Problem, out: &Path) -> Result<Outcome> {
    let spec = problem.spec()?;
    let report = check_hypotheses(&spec, &problem.check_config())?;
    let mut m = header(problem, "check");
    m.insert("grid".into(), grid_json(&spec.grid));
    m.insert("hypotheses".into(), hypotheses_json(&report, &spec.grid));
    let mut art = Artifacts::new(out);
    art.add_json("report.json", &Value::Object(m))?;
    art.write("check", &problem.inputs, problem.check_config().seed)?;
    Ok(Outcome {
        code: if report.pass() { 0 } else { 1 },
        summary: hypotheses_summary(&report),
    })
}

fn solution_csv(r: &SolveReport<f64>) -> String {
    let grid = r.u.grid();
    let mut cols: Vec<&str> = if grid.dim() == 1 { vec!["x"] } else { vec!["x", "y"] };
    cols.extend(["u", "w"]);
    if r.v.is_some() {
        cols.push("v");
    }
    let rows = (0..grid.len()).map(|k| {
        let c = grid.coords(k);
        let mut row: Vec<String> = c[..grid.dim()].iter().map(|&t| sci(t)).collect();
        row.push(sci(r.u[k]));
        row.push(sci(r.w[k]));
        if let Some(v) = &r.v {
            row.push(sci(v[k]));
        }
        row
    });
    csv_table(&cols, rows)
}

fn history_csv(r: &SolveReport<f64>) -> String {
    let rows = r.history.iter().map(|h| {
        vec![
            h.iteration.to_string(),
            h.method.label().to_string(),
            sci(h.residual),
            sci(h.residual_l2),
            sci(h.step),
        ]
    });
    csv_table(&["iteration", "method", "residual", "residual_l2", "step"], rows)
}

fn solve_json(r: &SolveReport<f64>) -> Value {
    let mut memberships = Map::new();
    for d in &r.membership.diagnostics {
        memberships.insert(d.name.clone(), num(d.value));
    }
    if let Some(lb) = &r.membership.log_bound {
        memberships.insert(
            "log_bound".into(),
            json!({ "lhs": num(lb.lhs), "rhs": num(lb.rhs), "epsilon": num(lb.epsilon), "holds": lb.holds }),
        );
    }
    json!({
        "status": r.status.label(),
        "method": r.method.label(),
        "iterations": r.iterations,
        "final_residual": num(r.final_residual),
        "weak_residual_max": num(r.weak_residual_max),
        "reduced_residual_max": opt(r.reduced_residual_max),
        "data_scale": num(r.data_scale),
        "memberships": memberships,
    })
}

fn study_json(t: &ConvergenceTable<f64>) -> Value {
    let rows: Vec<Value> = t
        .rows
        .iter()
        .map(|r| {
            json!({
                "nodes": r.nodes,
                "h": num(r.h),
                "error_u": num(r.error_u),
                "error_w": num(r.error_w),
                "iterations": r.iterations,
                "status": r.status.label(),
            })
        })
        .collect();
    let orders = |v: &[Option<f64>]| Value::Array(v.iter().map(|&o| opt(o)).collect());
    json!({
        "rows": rows,
        "order_u": orders(&t.order_u),
        "order_w": orders(&t.order_w),
        "final_order_w": opt(t.final_order_w()),
        "monotone": t.monotone,
        "all_converged": t.all_converged(),
    })
}

fn study_csv(t: &ConvergenceTable<f64>) -> String {
    let rows = t.rows.iter().enumerate().map(|(i, r)| {
        let order = |v: &[Option<f64>]| {
            i.checked_sub(1)
                .and_then(|j| v[j])
                .map(sci)
                .unwrap_or_default()
        };
        vec![
            r.nodes.to_string(),
            sci(r.h),
            sci(r.error_u),
            sci(r.error_w),
            order(&t.order_u),
            order(&t.order_w),
            r.iterations.to_string(),
            r.status.label().to_string(),
        ]
    });
    csv_table(
        &["nodes", "h", "error_u", "error_w", "order_u", "order_w", "iterations", "status"],
        rows,
    )
}

fn run_study(problem: &Problem) -> Result<ConvergenceTable<f64>> {
    let nodes = problem
        .study_nodes()
        .ok_or_else(|| CliError::Config("study: missing [study] section".into()))?;
    let exact = problem
        .exact()?
        .ok_or_else(|| CliError::Config("study.exact: missing, and no manufactured source to fall back on".into()))?;
    let base = problem.grid()?;
    let cfg = problem.solver_config()?;
    let build = |g: &Grid<f64>| {
        problem.spec_on(g).map_err(|e| match e {
            CliError::Core(inner) => inner,
            other => varexp::Error::Config(other.to_string()),
        })
    };
    Ok(refinement_study(&base, nodes, build, exact, &cfg)?)
}

fn study_summary(t: &ConvergenceTable<f64>) -> String {
    let mut s = format!("{:>7} {:>24} {:>24} {:>10}\n", "nodes", "error_u", "error_w", "order_w");
    for (i, r) in t.rows.iter().enumerate() {
        let order = i
            .checked_sub(1)
            .and_then(|j| t.order_w[j])
            .map(|q| format!("{q:.4}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(s, "{:>7} {:>24} {:>24} {:>10}", r.nodes, sci(r.error_u), sci(r.error_w), order);
    }
    s
}

pub fn cmd_solve(problem: &Problem, out: &Path) -> Result<Outcome> {
    let spec = problem.spec()?;
    let cfg = problem.solver_config()?;
    let seed = cfg.check.seed;
    let mut m = header(problem, "solve");
    m.insert("grid".into(), grid_json(&spec.grid));
    let mut art = Artifacts::new(out);
    let report = match varexp::solve(&spec, &cfg) {
        Ok(r) => r,
        Err(varexp::Error::Hypotheses(_)) => {
            let h = check_hypotheses(&spec, &cfg.check)?;
            m.insert("status".into(), json!("hypotheses_failed"));
            m.insert("hypotheses".into(), hypotheses_json(&h, &spec.grid));
            art.add_json("report.json", &Value::Object(m))?;
            art.write("solve", &problem.inputs, seed)?;
            let mut summary = hypotheses_summary(&h);
            summary.push_str("refusing to solve; pass --force to override\n");
            return Ok(Outcome { code: 1, summary });
        }
        Err(e) => return Err(e.into()),
    };
    if let Value::Object(s) = solve_json(&report) {
        m.extend(s);
    }
    m.insert("hypotheses".into(), hypotheses_json(&report.hypotheses, &spec.grid));
    let mut summary = format!(
        "status {} after {} iterations ({}), residual {}, weak residual {}\n",
        report.status.label(),
        report.iterations,
        report.method.label(),
        sci(report.final_residual),
        sci(report.weak_residual_max),
    );
    let mut ok = report.converged();
    if problem.study_nodes().is_some() {
        let table = run_study(problem)?;
        ok &= table.all_converged();
        m.insert("study".into(), study_json(&table));
        art.add("study.csv", study_csv(&table));
        summary.push_str(&study_summary(&table));
    }
    art.add_json("report.json", &Value::Object(m))?;
    art.add("solution.csv", solution_csv(&report));
    art.add("history.csv", history_csv(&report));
    art.write("solve", &problem.inputs, seed)?;
    Ok(Outcome {
        code: if ok { 0 } else { 1 },
        summary,
    })
}

pub fn cmd_study(problem: &Problem, out: &Path) -> Result<Outcome> {
    let table = run_study(problem)?;
    let mut m = header(problem, "study");
    m.insert("study".into(), study_json(&table));
    let mut art = Artifacts::new(out);
    art.add_json("report.json", &Value::Object(m))?;
    art.add("study.csv", study_csv(&table));
    art.write("study", &problem.inputs, problem.check_config().seed)?;
    Ok(Outcome {
        code: if table.all_converged() { 0 } else { 1 },
        summary: study_summary(&table),
    })
}

/// Modular, Luxemburg and Sobolev norms of one nodal function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormTable {
    pub modular: f64,
    pub luxemburg: f64,
    pub sobolev: f64,
}

pub fn norm_table(problem: &Problem) -> Result<NormTable> {
    let sec = problem
        .file
        .norms
        .as_ref()
        .ok_or_else(|| CliError::Config("norms: missing [norms] section".into()))?;
    let grid = problem.grid()?;
    let u = GridFunction::new(grid.clone(), problem.field(&grid, &sec.u, "norms.u")?)?;
    let p = match &sec.p {
        Some(v) => varexp::ExponentField::from_values(grid.clone(), problem.field(&grid, v, "norms.p")?)?,
        None => problem.spec()?.p,
    };
    let rule = QuadratureRule::new(&grid, sec.quadrature.kind());
    Ok(NormTable {
        modular: modular_with(&rule, &u, &p)?,
        luxemburg: luxemburg_norm_with(&rule, &u, &p)?,
        sobolev: sobolev_norm_with(&rule, &u, &p)?,
    })
}

pub fn cmd_norms(problem: &Problem, out: &Path) -> Result<Outcome> {
    let t = norm_table(problem)?;
    let quadrature = problem.file.norms.as_ref().map(|n| n.quadrature.label());
    let mut m = header(problem, "norms");
    m.insert("quadrature".into(), json!(quadrature));
    m.insert("modular".into(), num(t.modular));
    m.insert("luxemburg".into(), num(t.luxemburg));
    m.insert("sobolev".into(), num(t.sobolev));
    let mut art = Artifacts::new(out);
    art.add_json("report.json", &Value::Object(m))?;
    art.add(
        "norms.csv",
        csv_table(
            &["quantity", "value"],
            [("modular", t.modular), ("luxemburg", t.luxemburg), ("sobolev", t.sobolev)]
                .into_iter()
                .map(|(k, v)| vec![k.to_string(), sci(v)]),
        ),
    );
    art.write("norms", &problem.inputs, problem.check_config().seed)?;
    Ok(Outcome {
        code: 0,
        summary: format!(
            "modular   {}\nluxemburg {}\nsobolev   {}\n",
            sci(t.modular),
            sci(t.luxemburg),
            sci(t.sobolev)
        ),
    })
}

fn toml_str(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn toml_field(values: &[f64]) -> String {
    if values.iter().all(|&v| v.to_bits() == values[0].to_bits()) {
        sci(values[0])
    } else {
        let items: Vec<String> = values.iter().map(|&v| sci(v)).collect();
        format!("{{ values = [{}] }}", items.join(", "))
    }
}

const REDUCED_BUILTINS: [&str; 9] = ["p0", "alpha", "alpha1", "c0", "c1", "c2", "c3", "c4", "c5"];

/// Problem-file text describing a reduced spec exactly.
pub fn reduced_problem_toml(spec: &ProblemSpec<f64>, origin: &str) -> Result<String> {
    let g = &spec.grid;
    let mut s = format!("# Reduced form of {origin}.\nkind = \"reduced\"\n\n[grid]\n");
    let ax = g.axes();
    let _ = writeln!(s, "x = [{}, {}]", sci(ax[0].lo), sci(ax[0].hi));
    if g.dim() == 2 {
        let _ = writeln!(s, "y = [{}, {}]", sci(ax[1].lo), sci(ax[1].hi));
    }
    let nodes: Vec<String> = ax.iter().map(|a| a.nodes.to_string()).collect();
    let _ = writeln!(s, "nodes = [{}]", nodes.join(", "));
    let _ = writeln!(s, "analysis_dim = {}\n", g.analysis_dim());

    s.push_str("[exponents]\n");
    let _ = writeln!(s, "p0 = {}", sci(spec.p0()?));
    let _ = writeln!(s, "alpha = {}", toml_field(&spec.alpha.finite_values()?));
    let _ = writeln!(s, "alpha1 = {}", toml_field(&spec.alpha1.finite_values()?));
    let _ = writeln!(s, "leading_factor = {}", sci(spec.leading_factor));
    let _ = writeln!(s, "eta = {}\n", sci(spec.eta));

    s.push_str("[nonlinearity]\n");
    let _ = writeln!(s, "expr = {}", toml_str(&spec.nonlinearity.expr().to_string()));
    let _ = writeln!(s, "floor = {}", sci(spec.floor));
    for (i, c) in spec.coefficients.all().iter().enumerate() {
        let _ = writeln!(s, "c{i} = {}", toml_field(c));
    }
    let extra: Vec<&(String, Vec<f64>)> = spec
        .nonlinearity
        .fields()
        .iter()
        .filter(|(n, _)| !REDUCED_BUILTINS.contains(&n.as_str()))
        .collect();
    if !extra.is_empty() {
        s.push_str("\n[fields]\n");
        for (name, values) in extra {
            let _ = writeln!(s, "{name} = {}", toml_field(values));
        }
    }
    s.push_str("\n[source]\n");
    let _ = writeln!(s, "h = {}", toml_field(spec.source.values()));
    Ok(s)
}

/// Describes the first difference between two specs, or `None` when they agree.
pub fn spec_difference(a: &ProblemSpec<f64>, b: &ProblemSpec<f64>) -> Option<String> {
    if a.kind != b.kind {
        return Some("kind".into());
    }
    if a.grid != b.grid {
        return Some("grid".into());
    }
    let same = |x: &[f64], y: &[f64]| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits());
    let exps = [("p", &a.p, &b.p), ("alpha", &a.alpha, &b.alpha), ("alpha1", &a.alpha1, &b.alpha1)];
    for (name, x, y) in exps {
        if x.values() != y.values() {
            return Some(name.into());
        }
    }
    for i in 0..6 {
        if !same(a.coefficients.get(i), b.coefficients.get(i)) {
            return Some(format!("coefficient {i}"));
        }
    }
    if !same(a.source.values(), b.source.values()) {
        return Some("source".into());
    }
    let scalars = [
        ("floor", a.floor, b.floor),
        ("eta", a.eta, b.eta),
        ("leading_factor", a.leading_factor, b.leading_factor),
    ];
    for (name, x, y) in scalars {
        if x.to_bits() != y.to_bits() {
            return Some(name.into());
        }
    }
    if a.p1 != b.p1 {
        return Some("p1".into());
    }
    if a.nonlinearity.expr() != b.nonlinearity.expr() {
        return Some("nonlinearity expression".into());
    }
    for name in a.nonlinearity.expr().variables() {
        if matches!(name.as_str(), "x" | "y" | "tau") {
            continue;
        }
        match (a.nonlinearity.field(&name), b.nonlinearity.field(&name)) {
            (Some(x), Some(y)) if same(x, y) => {}
            _ => return Some(format!("nonlinearity field `{name}`")),
        }
    }
    None
}

fn transform_json(red: &Reduction<f64>, round_trip: bool) -> Value {
    json!({
        "eta_tilde": num(red.eta_tilde),
        "feasible": [num(red.feasible.0), num(red.feasible.1)],
        "partition_preserved": red.partition_preserved,
        "epsilon": num(red.epsilon),
        "p1": num(red.spec.p0().unwrap_or(f64::NAN)),
        "gamma_max": opt(red.derived.gamma.supremum()),
        "round_trip": round_trip,
    })
}

pub fn cmd_transform(problem: &Problem, out: &Path) -> Result<Outcome> {
    let spec = problem.spec()?;
    if spec.kind != ProblemKind::Main {
        return Err(CliError::Config("kind: transform needs a main problem".into()));
    }
    let red = reduce_problem(&spec)?;
    let origin = problem
        .path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let text = reduced_problem_toml(&red.spec, &origin)?;
    let reparsed = reload(&text, &out.join("reduced.toml"))?;
    let diff = spec_difference(&red.spec, &reparsed);
    if let Some(d) = &diff {
        return Err(CliError::Config(format!("emitted reduced problem does not round-trip: {d}")));
    }
    let mut m = header(problem, "transform");
    m.insert("reduction".into(), transform_json(&red, diff.is_none()));
    let mut art = Artifacts::new(out);
    art.add("reduced.toml", text);
    art.add_json("report.json", &Value::Object(m))?;
    art.write("transform", &problem.inputs, problem.check_config().seed)?;
    Ok(Outcome {
        code: 0,
        summary: format!(
            "reduced problem written to {}\neta_tilde {} (partition preserved: {})\n",
            out.join("reduced.toml").display(),
            sci(red.eta_tilde),
            red.partition_preserved
        ),
    })
}

/// Builds the spec described by problem-file text located at `path`.
pub fn reload(text: &str, path: &Path) -> Result<ProblemSpec<f64>> {
    let file: ProblemFile = crate::config::parse_problem(text)?;
    let p = Problem {
        file,
        path: PathBuf::from(path),
        overrides: Default::default(),
        inputs: Vec::new(),
    };
    p.spec()
}
