//! Problem-file schema and conversion to a [`ProblemSpec`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use varexp::discrete::manufacture_source;
use varexp::modular::QuadratureKind;
use varexp::problem::DEFAULT_ETA;
use varexp::{
    CheckConfig, Coefficients, Expr, ExponentField, Grid, GridFunction, Nonlinearity, ProblemKind,
    ProblemSpec, SolverConfig,
};

use crate::error::{CliError, Result};

/// A nodal field: a constant, an expression in `x` and `y`, a CSV table or explicit values.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum FieldValue {
    Number(f64),
    Expr(String),
    Csv {
        csv: String,
    },
    Values {
        values: Vec<f64>,
    },
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum NodeCounts {
    One(usize),
    Many(Vec<usize>),
}

impl NodeCounts {
    fn to_vec(&self) -> Vec<usize> {
        match self {
            NodeCounts::One(n) => vec![*n],
            NodeCounts::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x: [f64; 2],
    pub y: Option<[f64; 2]>,
    pub nodes: NodeCounts,
    #[serde(default = "default_analysis_dim")]
    pub analysis_dim: usize,
}

fn default_analysis_dim() -> usize {
    3
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentSection {
    pub p0: Option<f64>,
    pub alpha: Option<FieldValue>,
    pub alpha1: Option<FieldValue>,
    pub leading_factor: Option<f64>,
    pub p: Option<FieldValue>,
    pub xi: Option<FieldValue>,
    pub xi1: Option<FieldValue>,
    pub p1: Option<f64>,
    pub eta: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySection {
    pub expr: Option<String>,
    pub floor: Option<f64>,
    pub c0: Option<FieldValue>,
    pub c1: Option<FieldValue>,
    pub c2: Option<FieldValue>,
    pub c3: Option<FieldValue>,
    pub c4: Option<FieldValue>,
    pub c5: Option<FieldValue>,
    pub a0: Option<FieldValue>,
    pub a1: Option<FieldValue>,
    pub a2: Option<FieldValue>,
    pub a3: Option<FieldValue>,
    pub a4: Option<FieldValue>,
    pub a5: Option<FieldValue>,
}

impl NonlinearitySection {
    fn coefficient(&self, kind: ProblemKind, i: usize) -> (&'static str, Option<&FieldValue>) {
        const C: [&str; 6] = ["c0", "c1", "c2", "c3", "c4", "c5"];
        const A: [&str; 6] = ["a0", "a1", "a2", "a3", "a4", "a5"];
        let c = [&self.c0, &self.c1, &self.c2, &self.c3, &self.c4, &self.c5];
        let a = [&self.a0, &self.a1, &self.a2, &self.a3, &self.a4, &self.a5];
        match kind {
            ProblemKind::Reduced => (C[i], c[i].as_ref()),
            ProblemKind::Main => (A[i], a[i].as_ref()),
        }
    }

    fn foreign(&self, kind: ProblemKind) -> Option<&'static str> {
        let (names, set) = match kind {
            ProblemKind::Reduced => (
                ["a0", "a1", "a2", "a3", "a4", "a5"],
                [&self.a0, &self.a1, &self.a2, &self.a3, &self.a4, &self.a5],
            ),
            ProblemKind::Main => (
                ["c0", "c1", "c2", "c3", "c4", "c5"],
                [&self.c0, &self.c1, &self.c2, &self.c3, &self.c4, &self.c5],
            ),
        };
        names.into_iter().zip(set).find(|(_, v)| v.is_some()).map(|(n, _)| n)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub h: Option<FieldValue>,
    /// Exact solution whose discrete image becomes the source.
    pub manufactured: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub max_steps: Option<usize>,
    pub min_step: Option<f64>,
    pub delta_reg: Option<f64>,
    pub fixed_point: Option<bool>,
    pub max_fixed_point: Option<usize>,
    pub force: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub nodes: Vec<usize>,
    pub exact: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsSection {
    pub u: FieldValue,
    pub p: Option<FieldValue>,
    #[serde(default)]
    pub quadrature: Quadrature,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    #[default]
    Trapezoid,
    Midpoint,
}

impl Quadrature {
    pub fn kind(self) -> QuadratureKind {
        match self {
            Quadrature::Trapezoid => QuadratureKind::Trapezoid,
            Quadrature::Midpoint => QuadratureKind::Midpoint,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Quadrature::Trapezoid => "trapezoid",
            Quadrature::Midpoint => "midpoint",
        }
    }
}

/// Parsed contents of a problem file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub kind: Option<String>,
    pub grid: GridSection,
    #[serde(default)]
    pub exponents: ExponentSection,
    #[serde(default)]
    pub nonlinearity: NonlinearitySection,
    #[serde(default)]
    pub fields: BTreeMap<String, FieldValue>,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub check: CheckSection,
    pub study: Option<StudySection>,
    pub norms: Option<NormsSection>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub eta: Option<f64>,
    pub p1: Option<f64>,
    pub analysis_dim: Option<usize>,
    pub grid: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub force: bool,
}

/// Node counts per axis, written `129` or `65x33`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeList(pub Vec<usize>);

impl std::str::FromStr for NodeList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(['x', 'X'])
            .map(|t| t.trim().parse::<usize>().map_err(|e| format!("bad node count `{t}`: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(NodeList)
    }
}

/// A problem file bound to its location, with overrides applied.
#[derive(Clone, Debug)]
pub struct Problem {
    pub file: ProblemFile,
    pub path: PathBuf,
    pub overrides: Overrides,
    /// Raw bytes of every file read, keyed by path, for the manifest.
    pub inputs: Vec<(PathBuf, Vec<u8>)>,
}

impl Problem {
    pub fn load(path: &Path, overrides: Overrides) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| CliError::Config(format!("{}: not valid UTF-8", path.display())))?;
        let file = parse_problem(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let mut problem = Self {
            file,
            path: path.to_path_buf(),
            overrides,
            inputs: vec![(path.to_path_buf(), bytes)],
        };
        problem.collect_csv_inputs()?;
        Ok(problem)
    }

    fn base_dir(&self) -> PathBuf {
        self.path.parent().map(Path::to_path_buf).unwrap_or_default()
    }

    fn collect_csv_inputs(&mut self) -> Result<()> {
        let f = &self.file;
        let mut values: Vec<&FieldValue> = Vec::new();
        let e = &f.exponents;
        values.extend([&e.alpha, &e.alpha1, &e.p, &e.xi, &e.xi1].into_iter().flatten());
        for i in 0..6 {
            for kind in [ProblemKind::Main, ProblemKind::Reduced] {
                values.extend(f.nonlinearity.coefficient(kind, i).1);
            }
        }
        values.extend(f.fields.values());
        values.extend(f.source.h.iter());
        if let Some(n) = &f.norms {
            values.push(&n.u);
            values.extend(n.p.iter());
        }
        let mut paths: Vec<PathBuf> = values
            .into_iter()
            .filter_map(|v| match v {
                FieldValue::Csv { csv } => Some(self.base_dir().join(csv)),
                _ => None,
            })
            .collect();
        paths.sort();
        paths.dedup();
        for p in paths {
            let bytes = fs::read(&p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            self.inputs.push((p, bytes));
        }
        Ok(())
    }

    pub fn kind(&self) -> Result<ProblemKind> {
        match self.file.kind.as_deref() {
            Some("reduced") => Ok(ProblemKind::Reduced),
            Some("main") => Ok(ProblemKind::Main),
            Some(other) => Err(CliError::Config(format!(
                "kind: expected `main` or `reduced`, got `{other}`"
            ))),
            None => Err(CliError::Config("kind: missing (expected `main` or `reduced`)".into())),
        }
    }

    /// The grid with node-count and dimension overrides applied.
    pub fn grid(&self) -> Result<Grid<f64>> {
        let g = &self.file.grid;
        let nodes = self.overrides.grid.clone().unwrap_or_else(|| g.nodes.to_vec());
        let n = self.overrides.analysis_dim.unwrap_or(g.analysis_dim);
        self.grid_with(&nodes, n)
    }

    fn grid_with(&self, nodes: &[usize], n: usize) -> Result<Grid<f64>> {
        let g = &self.file.grid;
        let wrap = |e: varexp::Error| CliError::Config(format!("grid: {e}"));
        match (g.y, nodes) {
            (None, [nx]) => Grid::interval(g.x[0], g.x[1], *nx, n).map_err(wrap),
            (Some(y), [nx, ny]) => Grid::rectangle((g.x[0], g.x[1]), (y[0], y[1]), (*nx, *ny), n).map_err(wrap),
            (Some(y), [nx]) => Grid::rectangle((g.x[0], g.x[1]), (y[0], y[1]), (*nx, *nx), n).map_err(wrap),
            (None, _) => Err(CliError::Config(format!(
                "grid.nodes: a 1-D grid takes one node count, got {}",
                nodes.len()
            ))),
            (Some(_), _) => Err(CliError::Config(format!(
                "grid.nodes: a 2-D grid takes one or two node counts, got {}",
                nodes.len()
            ))),
        }
    }

    /// Evaluates a field value at the nodes of `grid`.
    pub fn field(&self, grid: &Grid<f64>, value: &FieldValue, what: &str) -> Result<Vec<f64>> {
        let bad = |m: String| CliError::Config(format!("{what}: {m}"));
        match value {
            FieldValue::Number(c) => Ok(vec![*c; grid.len()]),
            FieldValue::Expr(src) => {
                let compiled = Expr::parse(src)
                    .and_then(|e| e.bind(&["x", "y"]))
                    .map_err(|e| bad(e.to_string()))?;
                Ok((0..grid.len())
                    .map(|k| {
                        let [x, y] = grid.coords(k);
                        compiled.eval(&|s| if s == 0 { x } else { y })
                    })
                    .collect())
            }
            FieldValue::Csv { csv } => {
                let path = self.base_dir().join(csv);
                let bytes = self
                    .inputs
                    .iter()
                    .find(|(p, _)| *p == path)
                    .map(|(_, b)| b.clone())
                    .ok_or_else(|| bad(format!("{} was not loaded", path.display())))?;
                GridFunction::read_csv(grid, bytes.as_slice())
                    .map(GridFunction::into_values)
                    .map_err(|e| bad(format!("{}: {e}", path.display())))
            }
            FieldValue::Values { values } => {
                if values.len() != grid.len() {
                    return Err(bad(format!(
                        "{} values for a grid of {} nodes",
                        values.len(),
                        grid.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }

    fn exponent(&self, grid: &Grid<f64>, value: &FieldValue, what: &str) -> Result<ExponentField<f64>> {
        let v = self.field(grid, value, what)?;
        ExponentField::from_values(grid.clone(), v).map_err(|e| CliError::Config(format!("{what}: {e}")))
    }

    fn expr_fn(&self, src: &str, what: &str) -> Result<impl Fn(f64, f64) -> f64> {
        let compiled = Expr::parse(src)
            .and_then(|e| e.bind(&["x", "y"]))
            .map_err(|e| CliError::Config(format!("{what}: {e}")))?;
        Ok(move |x: f64, y: f64| compiled.eval(&|s| if s == 0 { x } else { y }))
    }

    /// The exact solution of a refinement study or manufactured source.
    pub fn exact(&self) -> Result<Option<impl Fn(f64, f64) -> f64>> {
        let src = self
            .file
            .study
            .as_ref()
            .and_then(|s| s.exact.clone())
            .or_else(|| self.file.source.manufactured.clone());
        src.map(|s| self.expr_fn(&s, "study.exact")).transpose()
    }

    pub fn spec(&self) -> Result<ProblemSpec<f64>> {
        self.spec_on(&self.grid()?)
    }

    /// Builds the problem on `grid`.
    pub fn spec_on(&self, grid: &Grid<f64>) -> Result<ProblemSpec<f64>> {
        let kind = self.kind()?;
        let f = &self.file;
        let e = &f.exponents;
        let nl = &f.nonlinearity;
        let missing = |name: &str| CliError::Config(format!("exponents.{name}: missing for a {} problem", kind));
        let foreign = |name: &str| CliError::Config(format!("exponents.{name}: not used by a {} problem", kind));
        let len = grid.len();

        let (p, alpha, alpha1) = match kind {
            ProblemKind::Reduced => {
                for (name, set) in [("p", e.p.is_some()), ("xi", e.xi.is_some()), ("xi1", e.xi1.is_some()), ("p1", e.p1.is_some())] {
                    if set {
                        return Err(foreign(name));
                    }
                }
                let p0 = e.p0.ok_or_else(|| missing("p0"))?;
                let alpha = self.exponent(grid, e.alpha.as_ref().ok_or_else(|| missing("alpha"))?, "exponents.alpha")?;
                let alpha1 = match &e.alpha1 {
                    Some(v) => self.exponent(grid, v, "exponents.alpha1")?,
                    None => alpha.clone(),
                };
                (ExponentField::constant(grid, p0), alpha, alpha1)
            }
            ProblemKind::Main => {
                for (name, set) in [
                    ("p0", e.p0.is_some()),
                    ("alpha", e.alpha.is_some()),
                    ("alpha1", e.alpha1.is_some()),
                    ("leading_factor", e.leading_factor.is_some()),
                ] {
                    if set {
                        return Err(foreign(name));
                    }
                }
                let p = self.exponent(grid, e.p.as_ref().ok_or_else(|| missing("p"))?, "exponents.p")?;
                let xi = self.exponent(grid, e.xi.as_ref().ok_or_else(|| missing("xi"))?, "exponents.xi")?;
                let xi1 = match &e.xi1 {
                    Some(v) => self.exponent(grid, v, "exponents.xi1")?,
                    None => xi.clone(),
                };
                (p, xi, xi1)
            }
        };
        if let Some(name) = nl.foreign(kind) {
            return Err(CliError::Config(format!("nonlinearity.{name}: not used by a {kind} problem")));
        }

        let mut coeffs: [Vec<f64>; 6] = Default::default();
        let mut fields: Vec<(String, Vec<f64>)> = Vec::new();
        let (exp_names, reserved): ([&str; 3], &[&str]) = match kind {
            ProblemKind::Reduced => (["p0", "alpha", "alpha1"], &[]),
            ProblemKind::Main => (["p", "xi", "xi1"], &["gamma"]),
        };
        let finite = |f: &ExponentField<f64>, what: &str| {
            f.finite_values().map_err(|e| CliError::Config(format!("exponents.{what}: {e}")))
        };
        fields.push((exp_names[0].into(), finite(&p, exp_names[0])?));
        fields.push((exp_names[1].into(), finite(&alpha, exp_names[1])?));
        fields.push((exp_names[2].into(), finite(&alpha1, exp_names[2])?));
        for (i, slot) in coeffs.iter_mut().enumerate() {
            let (name, value) = nl.coefficient(kind, i);
            *slot = match value {
                Some(v) => self.field(grid, v, &format!("nonlinearity.{name}"))?,
                None => vec![0.0; len],
            };
            fields.push((name.into(), slot.clone()));
        }
        for (name, value) in &f.fields {
            if fields.iter().any(|(n, _)| n == name) || reserved.contains(&name.as_str()) {
                return Err(CliError::Config(format!("fields.{name}: name is reserved for a {kind} problem")));
            }
            fields.push((name.clone(), self.field(grid, value, &format!("fields.{name}"))?));
        }
        let src = nl.expr.as_deref().unwrap_or("0");
        let c = Nonlinearity::parse(grid, src, fields)
            .map_err(|e| CliError::Config(format!("nonlinearity.expr: {e}")))?;
        let coefficients = Coefficients::new(coeffs).map_err(|e| CliError::Config(format!("nonlinearity: {e}")))?;

        let zero_source = GridFunction::zeros(grid);
        let mut spec = match kind {
            ProblemKind::Reduced => ProblemSpec {
                alpha1,
                leading_factor: e.leading_factor.unwrap_or(1.0),
                ..ProblemSpec::reduced(grid, p.finite_at(0).map_err(|e| CliError::Config(e.to_string()))?, alpha, zero_source)
            },
            ProblemKind::Main => ProblemSpec {
                alpha1,
                p1: self.overrides.p1.or(e.p1),
                ..ProblemSpec::main(grid, p, alpha, zero_source)
            },
        }
        .with_nonlinearity(c, coefficients);
        if kind == ProblemKind::Reduced && self.overrides.p1.is_some() {
            return Err(CliError::Config("--p1 applies to main problems only".into()));
        }
        spec.eta = self.overrides.eta.or(e.eta).unwrap_or(DEFAULT_ETA);
        if let Some(floor) = nl.floor {
            spec.floor = floor;
        }
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;

        spec.source = match (&f.source.h, &f.source.manufactured) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("source: give either `h` or `manufactured`, not both".into()))
            }
            (Some(h), None) => GridFunction::new(grid.clone(), self.field(grid, h, "source.h")?)
                .map_err(|e| CliError::Config(format!("source.h: {e}")))?,
            (None, Some(u)) => {
                let u_star = GridFunction::from_fn(grid, self.expr_fn(u, "source.manufactured")?);
                manufacture_source(&spec, &u_star).map_err(|e| CliError::Config(format!("source.manufactured: {e}")))?
            }
            (None, None) => GridFunction::zeros(grid),
        };
        Ok(spec)
    }

    pub fn solver_config(&self) -> Result<SolverConfig<f64>> {
        let s = &self.file.solver;
        let d = SolverConfig::<f64>::default();
        let cfg = SolverConfig {
            tol: self.overrides.tol.or(s.tol).unwrap_or(d.tol),
            max_steps: s.max_steps.unwrap_or(d.max_steps),
            min_step: s.min_step.unwrap_or(d.min_step),
            delta_reg: s.delta_reg.unwrap_or(d.delta_reg),
            fixed_point: s.fixed_point.unwrap_or(d.fixed_point),
            max_fixed_point: s.max_fixed_point.unwrap_or(d.max_fixed_point),
            force: self.overrides.force || s.force.unwrap_or(false),
            check: self.check_config(),
        };
        cfg.validate().map_err(|e| CliError::Config(format!("solver: {e}")))?;
        Ok(cfg)
    }

    pub fn check_config(&self) -> CheckConfig {
        let c = &self.file.check;
        let d = CheckConfig::default();
        CheckConfig {
            samples: c.samples.unwrap_or(d.samples),
            seed: self.overrides.seed.or(c.seed).unwrap_or(d.seed),
        }
    }

    /// Node counts of the refinement study.
    pub fn study_nodes(&self) -> Option<&[usize]> {
        self.file.study.as_ref().map(|s| s.nodes.as_slice())
    }
}

/// Parses problem-file text, reporting TOML errors with their location.
pub fn parse_problem(text: &str) -> Result<ProblemFile> {
    if text.trim().is_empty() {
        return Err(CliError::Config("problem file is empty".into()));
    }
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_lists_parse() {
        assert_eq!("129".parse::<NodeList>().unwrap(), NodeList(vec![129]));
        assert_eq!("65x33".parse::<NodeList>().unwrap(), NodeList(vec![65, 33]));
        assert!("65x".parse::<NodeList>().is_err());
    }

    #[test]
    fn field_values_accept_every_form() {
        let f: ProblemFile = toml::from_str(
            r#"
kind = "reduced"
[grid]
x = [0, 1]
nodes = 5
[fields]
a = 2
b = "x^2"
c = { csv = "c.csv" }
d = { values = [1, 2, 3, 4, 5] }
"#,
        )
        .unwrap();
        assert_eq!(f.fields["a"], FieldValue::Number(2.0));
        assert_eq!(f.fields["b"], FieldValue::Expr("x^2".into()));
        assert_eq!(f.fields["c"], FieldValue::Csv { csv: "c.csv".into() });
        assert_eq!(f.fields["d"], FieldValue::Values { values: vec![1.0, 2.0, 3.0, 4.0, 5.0] });
        assert_eq!(f.grid.nodes, NodeCounts::One(5));
        assert_eq!(f.grid.analysis_dim, 3);
    }

    #[test]
    fn empty_text_is_rejected() {
        assert!(matches!(parse_problem("  \n"), Err(CliError::Config(_))));
    }
}
