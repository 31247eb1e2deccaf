//! Damped Newton solver in the flux variable `w = |u|^{ρ-2} u`.
//!
//! In `w` the divergence term is the linear operator `-s Δ_h w`; the only
//! nonlinearity is the pointwise term `c(x, φ⁻¹(w))`. Main problems are first
//! rewritten by [`reduce_problem`] and solved in the same way.

use crate::discrete::neg_laplacian;
use crate::error::{Error, Result};
use crate::estimates::{
    check_hypotheses, membership_report, weak_residual, CheckConfig, HypothesisReport,
    MembershipReport,
};
use crate::exponent::ExponentField;
use crate::grid::{Grid, GridFunction};
use crate::linalg::{BandedLu, BandedMatrix};
use crate::problem::{ProblemKind, ProblemSpec};
use crate::scalar::Scalar;
use crate::transform::{phi1_inverse, reduce_problem};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig<T> {
    /// Bound on `max|F| / max(1, max|h|)` for the discrete system `F(w) = 0`.
    pub tol: T,
    pub max_steps: usize,
    /// Smallest damping factor tried by the backtracking line search.
    pub min_step: T,
    /// Floor on `|w|` in the derivative of `φ⁻¹`.
    pub delta_reg: T,
    /// Run under-relaxed fixed-point iterations when Newton stops short.
    pub fixed_point: bool,
    pub max_fixed_point: usize,
    /// Solve even when hypothesis checks fail.
    pub force: bool,
    pub check: CheckConfig,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10).max(T::epsilon() * T::lit(64.0)),
            max_steps: 100,
            min_step: T::lit(2f64.powi(-20)),
            delta_reg: T::lit(1e-12),
            fixed_point: false,
            max_fixed_point: 10_000,
            force: false,
            check: CheckConfig::default(),
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::Config(format!("tolerance {} must be positive", self.tol)));
        }
        if !(self.delta_reg >= T::zero()) {
            return Err(Error::Config(format!(
                "regularization floor {} must be nonnegative",
                self.delta_reg
            )));
        }
        if !(self.min_step > T::zero() && self.min_step <= T::one()) {
            return Err(Error::Config(format!(
                "minimum step {} must lie in (0, 1]",
                self.min_step
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

impl SolveStatus {
    pub fn label(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::LineSearchFailed => "line_search_failed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Newton,
    FixedPoint,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Newton => "newton",
            Method::FixedPoint => "fixed_point",
        }
    }
}

/// One accepted iterate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub method: Method,
    /// Scaled max-norm of the residual.
    pub residual: T,
    /// Euclidean norm of the residual.
    pub residual_l2: T,
    /// Damping factor of the step leading here (0 for the initial guess).
    pub step: T,
}

#[derive(Clone, Debug)]
pub struct SolveReport<T> {
    pub status: SolveStatus,
    /// Method that produced the final iterate.
    pub method: Method,
    pub u: GridFunction<T>,
    /// Reduced variable `v = |u|^γ u` of a main problem.
    pub v: Option<GridFunction<T>>,
    /// Flux variable the system was solved in.
    pub w: GridFunction<T>,
    /// Accepted Newton plus fixed-point steps.
    pub iterations: usize,
    pub final_residual: T,
    pub history: Vec<IterationRecord<T>>,
    /// Largest hat-function weak residual of `u` for the given problem.
    pub weak_residual_max: T,
    /// Largest hat-function weak residual of `v` for the reduced problem.
    pub reduced_residual_max: Option<T>,
    /// `max|h| · mes(Ω)`, the scale weak residuals are compared against.
    pub data_scale: T,
    pub membership: MembershipReport<T>,
    pub hypotheses: HypothesisReport<T>,
}

impl<T> SolveReport<T> {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Interior unknowns and the assembled `s L` of one problem.
struct System<'a, T: Scalar> {
    spec: &'a ProblemSpec<T>,
    scale: T,
    rho: Vec<T>,
    interior: Vec<usize>,
    lap: BandedMatrix<T>,
    h_scale: T,
}

impl<'a, T: Scalar> System<'a, T> {
    fn new(spec: &'a ProblemSpec<T>) -> Result<Self> {
        let grid = &spec.grid;
        let (scale, rho) = spec.flux()?;
        let interior = grid.interior_nodes();
        let mut index = vec![usize::MAX; grid.len()];
        for (i, &k) in interior.iter().enumerate() {
            index[k] = i;
        }
        let mut band = 0usize;
        for &k in &interior {
            for d in 0..grid.dim() {
                for step in [-1, 1] {
                    if let Some(nb) = grid.neighbour(k, d, step) {
                        if index[nb] != usize::MAX {
                            band = band.max(index[nb].abs_diff(index[k]));
                        }
                    }
                }
            }
        }
        let mut lap = BandedMatrix::zeros(interior.len(), band, band);
        for (i, &k) in interior.iter().enumerate() {
            for d in 0..grid.dim() {
                let h = grid.spacing(d);
                let c = scale / (h * h);
                lap.add(i, i, c + c);
                for step in [-1, 1] {
                    if let Some(nb) = grid.neighbour(k, d, step) {
                        if index[nb] != usize::MAX {
                            lap.add(i, index[nb], -c);
                        }
                    }
                }
            }
        }
        let src = spec.source.values();
        let h_scale = interior
            .iter()
            .fold(T::one(), |m, &k| m.max(src[k].abs()));
        Ok(Self {
            spec,
            scale,
            rho,
            interior,
            lap,
            h_scale,
        })
    }

    fn inverse(&self, k: usize, w: T) -> T {
        let r = self.rho[k];
        w.signed_pow(-(r - T::lit(2.0)) / (r - T::one()))
    }

    fn expand(&self, x: &[T]) -> Vec<T> {
        let mut full = vec![T::zero(); self.spec.grid.len()];
        for (i, &k) in self.interior.iter().enumerate() {
            full[k] = x[i];
        }
        full
    }

    fn residual(&self, x: &[T]) -> Vec<T> {
        let full = self.expand(x);
        let lap = neg_laplacian(&self.spec.grid, &full);
        let h = self.spec.source.values();
        self.interior
            .iter()
            .map(|&k| {
                let u = self.inverse(k, full[k]);
                self.scale * lap[k] + self.spec.nonlinearity.eval(k, u) - h[k]
            })
            .collect()
    }

    /// Newton Jacobian; `secant` raises each diagonal term to the slope
    /// `(g(w) - g(0))/w` of the pointwise term where that is larger.
    fn jacobian(&self, x: &[T], delta: T, secant: bool) -> Result<BandedLu<T>> {
        let mut j = self.lap.clone();
        let (one, two) = (T::one(), T::lit(2.0));
        for (i, &k) in self.interior.iter().enumerate() {
            let r = self.rho[k];
            let dinv = if r == two {
                one
            } else {
                (one / (r - one)) * x[i].abs().max(delta).powf(-(r - two) / (r - one))
            };
            let u = self.inverse(k, x[i]);
            let (g, dc) = self.spec.nonlinearity.eval_with_derivative(k, u);
            let mut d = dc * dinv;
            if secant && x[i] != T::zero() {
                let slope = (g - self.spec.nonlinearity.eval(k, T::zero())) / x[i];
                if slope.is_finite() && !(slope <= d) {
                    d = slope;
                }
            }
            if d.is_finite() {
                j.add(i, i, d);
            }
        }
        j.factor()
    }

    fn scaled_norm(&self, f: &[T]) -> T {
        f.iter().fold(T::zero(), |m, v| m.max(v.abs())) / self.h_scale
    }

    /// `s L x = h - c(x, φ⁻¹(w))` at the given nodal `w`.
    fn picard_target(&self, x: &[T]) -> Vec<T> {
        let h = self.spec.source.values();
        self.interior
            .iter()
            .enumerate()
            .map(|(i, &k)| h[k] - self.spec.nonlinearity.eval(k, self.inverse(k, x[i])))
            .collect()
    }
}

fn l2<T: Scalar>(f: &[T]) -> T {
    f.iter().fold(T::zero(), |s, v| s + *v * *v).sqrt()
}

struct Iterate<T> {
    w: Vec<T>,
    status: SolveStatus,
    method: Method,
    iterations: usize,
    residual: T,
    history: Vec<IterationRecord<T>>,
}

fn iterate<T: Scalar>(spec: &ProblemSpec<T>, cfg: &SolverConfig<T>) -> Result<Iterate<T>> {
    let sys = System::new(spec)?;
    let delta = cfg.delta_reg.max(T::min_positive_value());
    let lap_lu = sys.lap.clone().factor()?;
    let zeros = vec![T::zero(); sys.interior.len()];
    let mut x = lap_lu.solve(&sys.picard_target(&zeros));
    let mut f = sys.residual(&x);
    let mut r = sys.scaled_norm(&f);
    let mut history = vec![IterationRecord {
        iteration: 0,
        method: Method::Newton,
        residual: r,
        residual_l2: l2(&f),
        step: T::zero(),
    }];
    let mut status = SolveStatus::MaxIterations;
    let mut steps = 0;
    while steps < cfg.max_steps {
        if r <= cfg.tol {
            status = SolveStatus::Converged;
            break;
        }
        let f_norm = l2(&f);
        let neg: Vec<T> = f.iter().map(|v| -*v).collect();
        let search = |secant: bool| -> Result<Option<(Vec<T>, Vec<T>, T, T)>> {
            let dx = sys.jacobian(&x, delta, secant)?.solve(&neg);
            let mut lambda = T::one();
            loop {
                let trial: Vec<T> = x.iter().zip(&dx).map(|(a, d)| *a + lambda * *d).collect();
                let ft = sys.residual(&trial);
                let n = l2(&ft);
                if n.is_finite() && n <= f_norm {
                    return Ok(Some((trial, ft, n, lambda)));
                }
                lambda = lambda * T::lit(0.5);
                if lambda < cfg.min_step {
                    return Ok(None);
                }
            }
        };
        let mut accepted = search(false)?;
        // Damped or failed Newton: compare with the secant-safeguarded step.
        if accepted.as_ref().is_none_or(|a| a.3 < T::one()) {
            if let Some(alt) = search(true)? {
                if accepted.as_ref().is_none_or(|a| alt.2 < a.2) {
                    accepted = Some(alt);
                }
            }
        }
        let Some((trial, ft, n, lambda)) = accepted else {
            status = SolveStatus::LineSearchFailed;
            break;
        };
        steps += 1;
        x = trial;
        f = ft;
        r = sys.scaled_norm(&f);
        history.push(IterationRecord {
            iteration: steps,
            method: Method::Newton,
            residual: r,
            residual_l2: n,
            step: lambda,
        });
    }
    if status == SolveStatus::MaxIterations && r <= cfg.tol {
        status = SolveStatus::Converged;
    }
    let mut method = Method::Newton;
    if status != SolveStatus::Converged && cfg.fixed_point {
        method = Method::FixedPoint;
        let relax = T::lit(0.5);
        let mut fp_steps = 0;
        status = SolveStatus::MaxIterations;
        while fp_steps < cfg.max_fixed_point {
            if r <= cfg.tol {
                status = SolveStatus::Converged;
                break;
            }
            let z = lap_lu.solve(&sys.picard_target(&x));
            for (a, b) in x.iter_mut().zip(&z) {
                *a += relax * (*b - *a);
            }
            f = sys.residual(&x);
            r = sys.scaled_norm(&f);
            fp_steps += 1;
            history.push(IterationRecord {
                iteration: steps + fp_steps,
                method: Method::FixedPoint,
                residual: r,
                residual_l2: l2(&f),
                step: relax,
            });
            if !r.is_finite() {
                break;
            }
        }
        if r <= cfg.tol {
            status = SolveStatus::Converged;
        }
        steps += fp_steps;
    }
    Ok(Iterate {
        w: sys.expand(&x),
        status,
        method,
        iterations: steps,
        residual: r,
        history,
    })
}

fn gate<T: Scalar>(spec: &ProblemSpec<T>, cfg: &SolverConfig<T>) -> Result<HypothesisReport<T>> {
    cfg.validate()?;
    spec.validate()?;
    let report = check_hypotheses(spec, &cfg.check)?;
    if !report.pass() && !cfg.force {
        return Err(Error::Hypotheses(
            report.failed().into_iter().map(String::from).collect(),
        ));
    }
    Ok(report)
}

fn data_scale<T: Scalar>(spec: &ProblemSpec<T>) -> T {
    spec.source.max_abs() * spec.grid.measure()
}

/// Solves `-(k/(p0-1)) Δ_h w + c(x, φ⁻¹(w)) = h`, `w = |u|^{p0-2} u`.
pub fn solve_reduced<T: Scalar>(
    spec: &ProblemSpec<T>,
    cfg: &SolverConfig<T>,
) -> Result<SolveReport<T>> {
    if spec.kind != ProblemKind::Reduced {
        return Err(Error::Config("solve_reduced expects a reduced problem".into()));
    }
    let hypotheses = gate(spec, cfg)?;
    let it = iterate(spec, cfg)?;
    let w = GridFunction::new(spec.grid.clone(), it.w)?;
    let p0 = spec.p0()?;
    let u = w.map(|t| t.signed_pow(-(p0 - T::lit(2.0)) / (p0 - T::one())));
    let weak = weak_residual(&u, spec, None)?;
    let membership = membership_report(&u, spec)?;
    Ok(SolveReport {
        status: it.status,
        method: it.method,
        u,
        v: None,
        w,
        iterations: it.iterations,
        final_residual: it.residual,
        history: it.history,
        weak_residual_max: weak.max,
        reduced_residual_max: None,
        data_scale: data_scale(spec),
        membership,
        hypotheses,
    })
}

/// Solves a main problem through its reduction in `v = |u|^γ u`.
pub fn solve_main<T: Scalar>(spec: &ProblemSpec<T>, cfg: &SolverConfig<T>) -> Result<SolveReport<T>> {
    if spec.kind != ProblemKind::Main {
        return Err(Error::Config("solve_main expects a main problem".into()));
    }
    let hypotheses = gate(spec, cfg)?;
    let red = reduce_problem(spec)?;
    let it = iterate(&red.spec, cfg)?;
    let w = GridFunction::new(spec.grid.clone(), it.w)?;
    let p1 = spec.p1();
    let v = w.map(|t| t.signed_pow(-(p1 - T::lit(2.0)) / (p1 - T::one())));
    let u = phi1_inverse(&v, &red.derived.gamma)?;
    let reduced = weak_residual(&v, &red.spec, None)?;
    let weak = weak_residual(&u, spec, None)?;
    let membership = membership_report(&u, spec)?;
    Ok(SolveReport {
        status: it.status,
        method: it.method,
        u,
        v: Some(v),
        w,
        iterations: it.iterations,
        final_residual: it.residual,
        history: it.history,
        weak_residual_max: weak.max,
        reduced_residual_max: Some(reduced.max),
        data_scale: data_scale(spec),
        membership,
        hypotheses,
    })
}

/// Dispatches on the problem form.
pub fn solve<T: Scalar>(spec: &ProblemSpec<T>, cfg: &SolverConfig<T>) -> Result<SolveReport<T>> {
    match spec.kind {
        ProblemKind::Reduced => solve_reduced(spec, cfg),
        ProblemKind::Main => solve_main(spec, cfg),
    }
}

/// Errors on one grid of a refinement study.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementRow<T> {
    pub nodes: usize,
    pub h: T,
    /// `max|u - u*|`.
    pub error_u: T,
    /// `max|w - w*|` in the flux variable.
    pub error_w: T,
    pub iterations: usize,
    pub status: SolveStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable<T> {
    pub rows: Vec<RefinementRow<T>>,
    /// Observed orders between consecutive rows; `None` where an error is zero.
    pub order_u: Vec<Option<T>>,
    pub order_w: Vec<Option<T>>,
    /// Errors in `w` never grow under refinement.
    pub monotone: bool,
}

impl<T: Scalar> ConvergenceTable<T> {
    /// Order between the two finest grids.
    pub fn final_order_w(&self) -> Option<T> {
        self.order_w.last().copied().flatten()
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.status == SolveStatus::Converged)
    }
}

fn observed_orders<T: Scalar>(rows: &[RefinementRow<T>], err: impl Fn(&RefinementRow<T>) -> T) -> Vec<Option<T>> {
    rows.windows(2)
        .map(|p| {
            let (a, b) = (err(&p[0]), err(&p[1]));
            (a > T::zero() && b > T::zero()).then(|| (a / b).ln() / (p[0].h / p[1].h).ln())
        })
        .collect()
}

/// Solves on `base` refined to each node count (per axis) and compares with `exact`.
pub fn refinement_study<T: Scalar>(
    base: &Grid<T>,
    nodes: &[usize],
    build: impl Fn(&Grid<T>) -> Result<ProblemSpec<T>>,
    exact: impl Fn(T, T) -> T,
    cfg: &SolverConfig<T>,
) -> Result<ConvergenceTable<T>> {
    if nodes.len() < 2 {
        return Err(Error::Config("refinement study needs at least two grids".into()));
    }
    let mut rows = Vec::with_capacity(nodes.len());
    for &n in nodes {
        let grid = base.refined(&vec![n; base.dim()])?;
        let spec = build(&grid)?;
        spec.grid.ensure_same(&grid, "refinement problem")?;
        let report = solve(&spec, cfg)?;
        let u_star = GridFunction::from_fn(&grid, &exact);
        let rho = spec.flux()?.1;
        let w_star = ExponentField::from_values(grid.clone(), rho.clone())
            .map(|_| u_star.map_indexed(|k, t| t.signed_pow(rho[k] - T::lit(2.0))))?;
        let err = |a: &GridFunction<T>, b: &GridFunction<T>| -> Result<T> { Ok(a.sub(b)?.max_abs()) };
        rows.push(RefinementRow {
            nodes: n,
            h: grid.spacing(0),
            error_u: err(&report.u, &u_star)?,
            error_w: err(&report.w, &w_star)?,
            iterations: report.iterations,
            status: report.status,
        });
    }
    let order_u = observed_orders(&rows, |r| r.error_u);
    let order_w = observed_orders(&rows, |r| r.error_w);
    let monotone = rows.windows(2).all(|p| p[1].error_w <= p[0].error_w);
    Ok(ConvergenceTable {
        rows,
        order_u,
        order_w,
        monotone,
    })
}
