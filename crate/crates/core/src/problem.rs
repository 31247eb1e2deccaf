//! Problem descriptions: the exponent data, nonlinearity, coefficients and
//! source of a degenerate Dirichlet problem.

use std::fmt;

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::expr::{Compiled, Expr};
use crate::grid::{Grid, GridFunction};
use crate::scalar::Scalar;

/// Slot names available to every nonlinearity before its own fields.
pub const BASE_VARIABLES: [&str; 3] = ["x", "y", "tau"];

/// Default partition threshold.
pub const DEFAULT_ETA: f64 = 0.05;

/// Which of the two problem forms a spec describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    /// `-Δ(|u|^{p(x)-2} u) + a(x, u) = h` with a variable exponent.
    Main,
    /// `-k Σ D_i(|u|^{p0-2} D_i u) + c(x, u) = h` with a constant exponent.
    Reduced,
}

impl ProblemKind {
    pub fn label(self) -> &'static str {
        match self {
            ProblemKind::Main => "main",
            ProblemKind::Reduced => "reduced",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Pointwise nonlinearity `c(x, τ)` given as an expression in `x`, `y`, `tau`
/// and named nodal fields.
#[derive(Clone, Debug)]
pub struct Nonlinearity<T> {
    grid: Grid<T>,
    expr: Expr,
    fields: Vec<(String, Vec<T>)>,
    compiled: Compiled,
}

impl<T: Scalar> Nonlinearity<T> {
    pub fn new(grid: &Grid<T>, expr: Expr, fields: Vec<(String, Vec<T>)>) -> Result<Self> {
        for (name, values) in &fields {
            if BASE_VARIABLES.contains(&name.as_str()) || name == "pi" {
                return Err(Error::Config(format!("field name `{name}` is reserved")));
            }
            if values.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "field `{name}` has {} values for {} nodes",
                    values.len(),
                    grid.len()
                )));
            }
        }
        let mut names: Vec<&str> = BASE_VARIABLES.to_vec();
        names.extend(fields.iter().map(|(n, _)| n.as_str()));
        let compiled = expr.bind(&names)?;
        Ok(Self {
            grid: grid.clone(),
            expr,
            fields,
            compiled,
        })
    }

    pub fn parse(grid: &Grid<T>, src: &str, fields: Vec<(String, Vec<T>)>) -> Result<Self> {
        Self::new(grid, Expr::parse(src)?, fields)
    }

    pub fn zero(grid: &Grid<T>) -> Self {
        Self::new(grid, Expr::num(0.0), Vec::new()).expect("constant expression binds")
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn fields(&self) -> &[(String, Vec<T>)] {
        &self.fields
    }

    pub fn field(&self, name: &str) -> Option<&[T]> {
        self.fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    fn raw(&self, node: usize, tau: T) -> T {
        let [x, y] = self.grid.coords(node);
        self.compiled.eval(&|k| match k {
            0 => x,
            1 => y,
            2 => tau,
            k => self.fields[k - 3].1[node],
        })
    }

    fn raw_dual(&self, node: usize, tau: T) -> (T, T) {
        let [x, y] = self.grid.coords(node);
        self.compiled.eval_dual(
            &|k| match k {
                0 => x,
                1 => y,
                2 => tau,
                k => self.fields[k - 3].1[node],
            },
            2,
        )
    }

    /// `c(x_node, τ)`.
    ///
    /// Forms such as `|τ|^{α-2}τ` with `α < 2` are `0·∞` at `τ = 0`; there the
    /// continuous extension from `±min_positive` is returned.
    pub fn eval(&self, node: usize, tau: T) -> T {
        let v = self.raw(node, tau);
        if v.is_finite() || tau != T::zero() {
            return v;
        }
        let t = T::min_positive_value();
        let ext = (self.raw(node, t) + self.raw(node, -t)) * T::lit(0.5);
        if ext.is_finite() {
            ext
        } else {
            v
        }
    }

    /// `(c(x_node, τ), ∂c/∂τ(x_node, τ))`.
    ///
    /// At `τ = 0` a non-finite derivative is taken one machine epsilon away.
    pub fn eval_with_derivative(&self, node: usize, tau: T) -> (T, T) {
        let (v, d) = self.raw_dual(node, tau);
        if (v.is_finite() && d.is_finite()) || tau != T::zero() {
            return (v, d);
        }
        let e = T::epsilon();
        let (_, da) = self.raw_dual(node, e);
        let (_, db) = self.raw_dual(node, -e);
        (self.eval(node, tau), (da + db) * T::lit(0.5))
    }

    /// Substitutes `tau := with` and appends extra fields.
    pub fn compose(&self, with: &Expr, extra: Vec<(String, Vec<T>)>) -> Result<Self> {
        let mut fields = self.fields.clone();
        for (name, values) in extra {
            if let Some(slot) = fields.iter_mut().find(|(n, _)| *n == name) {
                slot.1 = values;
            } else {
                fields.push((name, values));
            }
        }
        Self::new(&self.grid, self.expr.substitute("tau", with), fields)
    }
}

/// Nodal coefficient fields `c0 … c5` of the growth and sign conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients<T> {
    values: [Vec<T>; 6],
}

impl<T: Scalar> Coefficients<T> {
    pub fn new(values: [Vec<T>; 6]) -> Result<Self> {
        let len = values[0].len();
        for (i, v) in values.iter().enumerate() {
            if v.len() != len {
                return Err(Error::GridMismatch(format!(
                    "coefficient {i} has {} values, expected {len}",
                    v.len()
                )));
            }
            if let Some(node) = v.iter().position(|c| !(*c >= T::zero()) || !c.is_finite()) {
                return Err(Error::domain(
                    node,
                    format!("coefficient {i} must be finite and nonnegative"),
                ));
            }
        }
        Ok(Self { values })
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self {
            values: std::array::from_fn(|_| vec![T::zero(); grid.len()]),
        }
    }

    pub fn get(&self, i: usize) -> &[T] {
        &self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.values[0].is_empty()
    }

    pub fn all(&self) -> &[Vec<T>; 6] {
        &self.values
    }
}

/// Full description of one problem instance.
///
/// For [`ProblemKind::Main`], `p` is the variable exponent, `alpha`/`alpha1`
/// hold `ξ`/`ξ1`, and `coefficients` hold `a0 … a5`. For
/// [`ProblemKind::Reduced`], `p` is the constant `p0`.
#[derive(Clone, Debug)]
pub struct ProblemSpec<T> {
    pub kind: ProblemKind,
    pub grid: Grid<T>,
    pub p: ExponentField<T>,
    pub alpha: ExponentField<T>,
    pub alpha1: ExponentField<T>,
    pub nonlinearity: Nonlinearity<T>,
    pub coefficients: Coefficients<T>,
    /// Positive lower bound required of `c4` on Ω₃.
    pub floor: T,
    pub source: GridFunction<T>,
    pub eta: T,
    /// Constant exponent of the reduction (main form); defaults to `p⁻`.
    pub p1: Option<T>,
    /// Multiplier `k` of the leading operator (reduced form).
    pub leading_factor: T,
}

impl<T: Scalar> ProblemSpec<T> {
    /// A reduced problem with zero nonlinearity and coefficients.
    pub fn reduced(grid: &Grid<T>, p0: T, alpha: ExponentField<T>, source: GridFunction<T>) -> Self {
        Self {
            kind: ProblemKind::Reduced,
            grid: grid.clone(),
            p: ExponentField::constant(grid, p0),
            alpha1: alpha.clone(),
            alpha,
            nonlinearity: Nonlinearity::zero(grid),
            coefficients: Coefficients::zeros(grid),
            floor: T::one(),
            source,
            eta: T::lit(DEFAULT_ETA),
            p1: None,
            leading_factor: T::one(),
        }
    }

    /// A main problem with zero nonlinearity and coefficients.
    pub fn main(
        grid: &Grid<T>,
        p: ExponentField<T>,
        xi: ExponentField<T>,
        source: GridFunction<T>,
    ) -> Self {
        Self {
            kind: ProblemKind::Main,
            grid: grid.clone(),
            p,
            alpha1: xi.clone(),
            alpha: xi,
            nonlinearity: Nonlinearity::zero(grid),
            coefficients: Coefficients::zeros(grid),
            floor: T::one(),
            source,
            eta: T::lit(DEFAULT_ETA),
            p1: None,
            leading_factor: T::one(),
        }
    }

    pub fn with_nonlinearity(mut self, c: Nonlinearity<T>, coefficients: Coefficients<T>) -> Self {
        self.nonlinearity = c;
        self.coefficients = coefficients;
        self
    }

    /// Checks grid consistency and the exponent bounds of the problem form.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        g.ensure_same(self.p.grid(), "p")?;
        g.ensure_same(self.alpha.grid(), "alpha")?;
        g.ensure_same(self.alpha1.grid(), "alpha1")?;
        g.ensure_same(self.nonlinearity.grid(), "nonlinearity")?;
        g.ensure_same(self.source.grid(), "source")?;
        if self.coefficients.len() != g.len() {
            return Err(Error::GridMismatch("coefficients".into()));
        }
        if !(self.eta > T::zero() && self.eta < T::one()) {
            return Err(Error::Config(format!("eta = {} must lie in (0, 1)", self.eta)));
        }
        if !(self.floor > T::zero()) {
            return Err(Error::Config(format!("floor = {} must be positive", self.floor)));
        }
        if !(self.leading_factor > T::zero()) || !self.leading_factor.is_finite() {
            return Err(Error::Config("leading factor must be positive".into()));
        }
        self.p.check_p_field(self.p_name())?;
        for (f, name) in [(&self.alpha, "alpha"), (&self.alpha1, "alpha1")] {
            f.finite_values()?;
            if let Some(inf) = f.infimum() {
                if inf < T::one() {
                    return Err(Error::Config(format!("{name} must be at least 1, found {inf}")));
                }
            }
        }
        match self.kind {
            ProblemKind::Reduced => {
                if !self.p.is_constant() {
                    return Err(Error::Config("reduced problem needs a constant p0".into()));
                }
            }
            ProblemKind::Main => {
                let p1 = self.p1();
                if p1 < T::lit(2.0) || p1 > self.p_min() {
                    return Err(Error::Config(format!(
                        "p1 = {p1} must satisfy 2 <= p1 <= inf p = {}",
                        self.p_min()
                    )));
                }
            }
        }
        Ok(())
    }

    fn p_name(&self) -> &'static str {
        match self.kind {
            ProblemKind::Main => "p",
            ProblemKind::Reduced => "p0",
        }
    }

    pub fn p_min(&self) -> T {
        self.p.infimum().unwrap_or(T::nan())
    }

    /// The constant exponent `p0` of a reduced problem.
    pub fn p0(&self) -> Result<T> {
        if self.kind != ProblemKind::Reduced || !self.p.is_constant() {
            return Err(Error::Config("p0 is defined for reduced problems only".into()));
        }
        self.p.finite_at(0)
    }

    /// Reduction exponent `p1`, configured or `inf p`.
    pub fn p1(&self) -> T {
        self.p1.unwrap_or_else(|| self.p_min())
    }

    pub fn analysis_dim(&self) -> usize {
        self.grid.analysis_dim()
    }

    /// Scale `s` and nodal exponent `ρ` of the divergence term `-s Δ(|u|^{ρ-2} u)`.
    pub(crate) fn flux(&self) -> Result<(T, Vec<T>)> {
        let rho = self.p.finite_values()?;
        let scale = match self.kind {
            ProblemKind::Main => T::one(),
            ProblemKind::Reduced => self.leading_factor / (rho[0] - T::one()),
        };
        Ok((scale, rho))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonlinearity_reads_fields_and_coordinates() {
        let g = Grid::interval(0.0, 1.0, 11, 3).unwrap();
        let k: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let c = Nonlinearity::parse(&g, "k*tau + x", vec![("k".into(), k)]).unwrap();
        assert!((c.eval(10, 2.0) - 21.0).abs() < 1e-15);
        let (v, d) = c.eval_with_derivative(3, 1.0);
        assert!((v - 3.3).abs() < 1e-14);
        assert_eq!(d, 3.0);
        assert!(Nonlinearity::parse(&g, "z*tau", vec![]).is_err());
        assert!(Nonlinearity::<f64>::parse(&g, "tau", vec![("x".into(), vec![0.0; 11])]).is_err());
    }

    #[test]
    fn compose_substitutes_tau() {
        let g = Grid::interval(0.0, 1.0, 9, 3).unwrap();
        let c = Nonlinearity::parse(&g, "tau^2", vec![]).unwrap();
        let b = c
            .compose(&Expr::parse("tau*s").unwrap(), vec![("s".into(), vec![3.0; 9])])
            .unwrap();
        assert_eq!(b.eval(4, 2.0), 36.0);
    }

    #[test]
    fn coefficients_must_be_nonnegative() {
        let mut v: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; 9]);
        assert!(Coefficients::new(v.clone()).is_ok());
        v[3][2] = -1.0;
        assert!(matches!(Coefficients::new(v), Err(Error::Domain { node: 2, .. })));
    }

    #[test]
    fn validation() {
        let g = Grid::interval(0.0, 1.0, 9, 3).unwrap();
        let alpha = ExponentField::constant(&g, 1.5);
        let s = ProblemSpec::reduced(&g, 3.0, alpha.clone(), GridFunction::zeros(&g));
        assert!(s.validate().is_ok());
        assert_eq!(s.p0().unwrap(), 3.0);
        let mut bad = s.clone();
        bad.eta = 1.5;
        assert!(bad.validate().is_err());
        let p = ExponentField::from_fn(&g, |x, _| 2.0 + x);
        let mut m = ProblemSpec::main(&g, p, ExponentField::constant(&g, 2.0), GridFunction::zeros(&g));
        assert!(m.validate().is_ok());
        assert_eq!(m.p1(), 2.0);
        m.p1 = Some(2.5);
        assert!(m.validate().is_err());
    }
}
