//! Variable-exponent power maps, the reduction of the main problem to a
//! constant-exponent one, and the log-moment inequality constants.

use crate::error::{Error, Result};
use crate::exponent::{derived_fields, partition, DerivedFields, DomainPartition, ExponentField, Region};
use crate::expr::Expr;
use crate::grid::{gradient, GridFunction};
use crate::modular::nodal_weights;
use crate::problem::{Coefficients, ProblemKind, ProblemSpec};
use crate::scalar::Scalar;

/// Name of the field carrying `γ` in a reduced nonlinearity.
pub const GAMMA_FIELD: &str = "gamma";

fn nodal_exponent<T: Scalar>(u: &GridFunction<T>, e: &ExponentField<T>) -> Result<Vec<T>> {
    u.grid().ensure_same(e.grid(), "exponent")?;
    e.finite_values()
}

/// `φ0(u) = |u|^{p-2} u`.
pub fn phi0<T: Scalar>(u: &GridFunction<T>, p: &ExponentField<T>) -> Result<GridFunction<T>> {
    let p = nodal_exponent(u, p)?;
    let two = T::lit(2.0);
    Ok(u.map_indexed(|k, t| t.signed_pow(p[k] - two)))
}

/// `φ0⁻¹(v) = |v|^{-(p-2)/(p-1)} v`.
pub fn phi0_inverse<T: Scalar>(v: &GridFunction<T>, p: &ExponentField<T>) -> Result<GridFunction<T>> {
    let p = nodal_exponent(v, p)?;
    let (one, two) = (T::one(), T::lit(2.0));
    Ok(v.map_indexed(|k, t| t.signed_pow(-(p[k] - two) / (p[k] - one))))
}

/// `φ1(u) = |u|^γ u`.
pub fn phi1<T: Scalar>(u: &GridFunction<T>, gamma: &ExponentField<T>) -> Result<GridFunction<T>> {
    let g = nodal_exponent(u, gamma)?;
    Ok(u.map_indexed(|k, t| t.signed_pow(g[k])))
}

/// `φ1⁻¹(v) = |v|^{-γ/(γ+1)} v`.
pub fn phi1_inverse<T: Scalar>(
    v: &GridFunction<T>,
    gamma: &ExponentField<T>,
) -> Result<GridFunction<T>> {
    let g = nodal_exponent(v, gamma)?;
    Ok(v.map_indexed(|k, t| t.signed_pow(-g[k] / (g[k] + T::one()))))
}

/// The two summands of `D_i(|u|^{ρ-2} u)` per axis.
#[derive(Clone, Debug)]
pub struct DerivativeTerms<T> {
    /// `(ρ-1)|u|^{ρ-2} D_i u`.
    pub analytic: Vec<GridFunction<T>>,
    /// `(D_i ρ)|u|^{ρ-2} u ln|u|`, zero where `u = 0`.
    pub log_term: Vec<GridFunction<T>>,
}

impl<T: Scalar> DerivativeTerms<T> {
    /// Per-axis sum of both terms.
    pub fn total(&self) -> Result<Vec<GridFunction<T>>> {
        self.analytic
            .iter()
            .zip(&self.log_term)
            .map(|(a, l)| a.add(l))
            .collect()
    }
}

/// Both summands with nodal gradients of `u` and `ρ`.
pub fn derivative_terms<T: Scalar>(
    u: &GridFunction<T>,
    rho: &ExponentField<T>,
) -> Result<DerivativeTerms<T>> {
    let r = nodal_exponent(u, rho)?;
    let du = u.gradient();
    let drho = gradient(u.grid(), &r);
    derivative_terms_with(u, rho, &du, &drho)
}

/// Both summands with supplied gradients `du[i][node]` and `drho[i][node]`.
pub fn derivative_terms_with<T: Scalar>(
    u: &GridFunction<T>,
    rho: &ExponentField<T>,
    du: &[Vec<T>],
    drho: &[Vec<T>],
) -> Result<DerivativeTerms<T>> {
    let r = nodal_exponent(u, rho)?;
    let dim = u.grid().dim();
    if du.len() != dim || drho.len() != dim {
        return Err(Error::GridMismatch("gradient has the wrong number of axes".into()));
    }
    let (one, two) = (T::one(), T::lit(2.0));
    let mut analytic = Vec::with_capacity(dim);
    let mut log_term = Vec::with_capacity(dim);
    for i in 0..dim {
        if du[i].len() != u.len() || drho[i].len() != u.len() {
            return Err(Error::GridMismatch(format!("gradient component {i}")));
        }
        let a = (0..u.len())
            .map(|k| {
                let t = u[k];
                if t == T::zero() && r[k] > two {
                    T::zero()
                } else {
                    (r[k] - one) * t.abs().powf(r[k] - two) * du[i][k]
                }
            })
            .collect();
        let l = (0..u.len())
            .map(|k| {
                let t = u[k];
                if t == T::zero() || drho[i][k] == T::zero() {
                    T::zero()
                } else {
                    drho[i][k] * t.signed_pow(r[k] - two) * t.abs().ln()
                }
            })
            .collect();
        analytic.push(GridFunction::new(u.grid().clone(), a)?);
        log_term.push(GridFunction::new(u.grid().clone(), l)?);
    }
    Ok(DerivativeTerms { analytic, log_term })
}

/// Constants of `∫|u|^ζ |ln|u||^β <= M1 ∫|u|^{ζ+ε} + M2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogConstants<T> {
    pub m1: T,
    pub m2: T,
}

/// `M1 = (β/(e ε))^β`, `M2 = (β/(e ζ⁻))^β mes(Ω)`.
pub fn log_inequality_constants<T: Scalar>(
    zeta: &ExponentField<T>,
    beta: T,
    eps: T,
    measure: T,
) -> Result<LogConstants<T>> {
    if !(eps > T::zero()) {
        return Err(Error::Config(format!("epsilon = {eps} must be positive")));
    }
    if !(beta > T::one()) {
        return Err(Error::Config(format!("beta = {beta} must exceed 1")));
    }
    let zmin = zeta
        .infimum()
        .ok_or_else(|| Error::Config("empty exponent field".into()))?;
    if zmin < T::one() {
        return Err(Error::Config(format!("zeta must be at least 1, found {zmin}")));
    }
    let e = T::E();
    Ok(LogConstants {
        m1: (beta / (e * eps)).powf(beta),
        m2: (beta / (e * zmin)).powf(beta) * measure,
    })
}

/// Both sides of the log-moment inequality for `u`: `(∫|u|^ζ|ln|u||^β, ∫|u|^{ζ+ε})`.
pub fn log_moment_sides<T: Scalar>(
    u: &GridFunction<T>,
    zeta: &ExponentField<T>,
    beta: T,
    eps: T,
) -> Result<(T, T)> {
    let z = nodal_exponent(u, zeta)?;
    let w = nodal_weights(u.grid());
    let mut lhs = T::zero();
    let mut rhs = T::zero();
    for k in 0..u.len() {
        let a = u[k].abs();
        if a == T::zero() {
            continue;
        }
        lhs += w[k] * a.powf(z[k]) * a.ln().abs().powf(beta);
        rhs += w[k] * a.powf(z[k] + eps);
    }
    Ok((lhs, rhs))
}

/// Derived exponents and the partition of a main problem.
pub fn main_partition<T: Scalar>(
    spec: &ProblemSpec<T>,
) -> Result<(DerivedFields<T>, DomainPartition<T>)> {
    if spec.kind != ProblemKind::Main {
        return Err(Error::Config("expected a main problem".into()));
    }
    let d = derived_fields(&spec.p, spec.p1(), &spec.alpha, spec.analysis_dim())?;
    let part = partition(&spec.alpha, &spec.p, spec.eta, &d.p_tilde)?;
    Ok((d, part))
}

/// Output of [`reduce_problem`].
#[derive(Clone, Debug)]
pub struct Reduction<T> {
    /// The constant-exponent problem in the variable `v = |u|^γ u`.
    pub spec: ProblemSpec<T>,
    pub derived: DerivedFields<T>,
    /// Partition of the main problem.
    pub partition: DomainPartition<T>,
    /// Threshold of the reduced partition.
    pub eta_tilde: T,
    /// Thresholds keeping the partition unchanged lie in `[lower, upper)`.
    pub feasible: (T, T),
    /// Whether the reduced partition classifies every node as the main one.
    pub partition_preserved: bool,
    /// Young parameter used on Ω₃.
    pub epsilon: T,
}

/// Rewrites the main problem in the variable `v = |u|^γ u`.
///
/// The result has exponent `p1`, leading factor `p1 - 1`, growth exponents
/// `θ` and `(ξ1+γ)/(γ+1)`, nonlinearity `b(x, v) = a(x, φ1⁻¹(v))`, and
/// coefficients obtained from Young's inequality where `γ > 0`.
pub fn reduce_problem<T: Scalar>(spec: &ProblemSpec<T>) -> Result<Reduction<T>> {
    spec.validate()?;
    let (derived, part) = main_partition(spec)?;
    let grid = spec.grid.clone();
    let len = grid.len();
    let p1 = spec.p1();
    let one = T::one();
    let g = derived.gamma.finite_values()?;
    let theta = derived.theta.finite_values()?;
    let xi = spec.alpha.finite_values()?;
    let xi1 = spec.alpha1.finite_values()?;

    let alpha1: Vec<T> = (0..len).map(|k| (xi1[k] + g[k]) / (g[k] + one)).collect();

    if spec.nonlinearity.field(GAMMA_FIELD).is_some() {
        return Err(Error::Config(format!(
            "field name `{GAMMA_FIELD}` is reserved for the reduction"
        )));
    }
    let inverse = Expr::parse("sign(tau)*abs(tau)^(1/(gamma+1))")?;
    let b = spec
        .nonlinearity
        .compose(&inverse, vec![(GAMMA_FIELD.to_string(), g.clone())])?;

    let a = spec.coefficients.all();
    let mut c: [Vec<T>; 6] = a.clone();
    let epsilon = spec.floor * T::lit(0.5);
    let mut any_omega3_shift = false;
    for k in 0..len {
        if g[k] <= T::zero() {
            continue;
        }
        match part.region(k) {
            Region::Omega1 => {}
            Region::Omega2 => {
                let mu2 = (xi1[k] + g[k]) / xi1[k];
                c[2][k] = a[2][k] + one;
                c[3][k] = a[3][k].powf(mu2);
            }
            Region::Omega3 => {
                any_omega3_shift = true;
                let r = (xi[k] + g[k]) / xi[k];
                let rp = (xi[k] + g[k]) / g[k];
                let young = (epsilon * rp).powf(-r / rp) / r;
                c[4][k] = (a[4][k] - epsilon).max(T::zero());
                c[5][k] = young * a[5][k].powf(r);
            }
        }
    }
    let floor = if any_omega3_shift {
        spec.floor - epsilon
    } else {
        spec.floor
    };

    // Thresholds t with theta < p1 - t exactly on omega1.
    let mut lower = T::neg_infinity();
    let mut upper = T::infinity();
    for k in 0..len {
        let gap = p1 - theta[k];
        if part.region(k) == Region::Omega1 {
            upper = upper.min(gap);
        } else {
            lower = lower.max(gap);
        }
    }
    let gamma_max = derived.gamma.supremum().unwrap_or(T::zero());
    let candidate = spec.eta / (gamma_max + one);
    let in_unit = |t: T| t > T::zero() && t < one;
    let feasible = |t: T| t >= lower && t < upper;
    let (eta_tilde, preserved) = if in_unit(candidate) && feasible(candidate) {
        (candidate, true)
    } else {
        let lo = lower.max(T::zero());
        let hi = upper.min(one);
        let mid = if lo == T::zero() {
            hi * T::lit(0.5)
        } else {
            lo + (hi - lo) * T::lit(0.5)
        };
        if lo < hi && in_unit(mid) && feasible(mid) {
            (mid, true)
        } else {
            (candidate, false)
        }
    };

    let reduced = ProblemSpec {
        kind: ProblemKind::Reduced,
        grid: grid.clone(),
        p: ExponentField::constant(&grid, p1),
        alpha: derived.theta.clone(),
        alpha1: ExponentField::from_values(grid.clone(), alpha1)?,
        nonlinearity: b,
        coefficients: Coefficients::new(c)?,
        floor,
        source: spec.source.clone(),
        eta: eta_tilde,
        p1: None,
        leading_factor: p1 - one,
    };
    Ok(Reduction {
        spec: reduced,
        derived,
        partition: part,
        eta_tilde,
        feasible: (lower, upper),
        partition_preserved: preserved,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::problem::Nonlinearity;

    fn unit(nodes: usize) -> Grid<f64> {
        Grid::interval(0.0, 1.0, nodes, 3).unwrap()
    }

    #[test]
    fn phi0_examples() {
        let g = unit(11);
        let u = GridFunction::from_fn(&g, |x, _| x - 0.3);
        let two = ExponentField::constant(&g, 2.0);
        assert_eq!(phi0(&u, &two).unwrap(), u);
        let three = ExponentField::constant(&g, 3.0);
        let m2 = GridFunction::constant(&g, -2.0);
        assert_eq!(phi0(&m2, &three).unwrap()[0], -4.0);
        let m4 = GridFunction::constant(&g, -4.0);
        assert!((phi0_inverse(&m4, &three).unwrap()[0] + 2.0).abs() < 1e-15);
        let p = ExponentField::from_fn(&g, |x, _| 2.0 + x);
        assert_eq!(phi0(&GridFunction::constant(&g, 4.0), &p).unwrap()[10], 16.0);
    }

    #[test]
    fn phi1_examples() {
        let g = unit(11);
        let u = GridFunction::constant(&g, 3.0);
        assert_eq!(phi1(&u, &ExponentField::constant(&g, 0.0)).unwrap(), u);
        let one = ExponentField::constant(&g, 1.0);
        assert_eq!(phi1(&u, &one).unwrap()[2], 9.0);
        let nine = GridFunction::constant(&g, 9.0);
        assert!((phi1_inverse(&nine, &one).unwrap()[2] - 3.0).abs() < 1e-15);
        let gx = ExponentField::from_fn(&g, |x, _| x);
        let v = phi1(&GridFunction::constant(&g, 4.0), &gx).unwrap();
        assert!((v[5] - 8.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_terms_zero_cases() {
        let g = unit(11);
        let u = GridFunction::from_fn(&g, |x, _| x.exp());
        let t = derivative_terms(&u, &ExponentField::constant(&g, 3.0)).unwrap();
        assert!(t.log_term[0].values().iter().all(|v| *v == 0.0));
        let z = derivative_terms(&GridFunction::zeros(&g), &ExponentField::from_fn(&g, |x, _| 2.0 + x)).unwrap();
        assert!(z.analytic[0].is_zero() && z.log_term[0].is_zero());
    }

    #[test]
    fn log_constants_example() {
        let g = unit(11);
        let c = log_inequality_constants(&ExponentField::constant(&g, 2.0), 2.0, 0.5, 1.0).unwrap();
        assert!((c.m1 - (4.0 / std::f64::consts::E).powi(2)).abs() < 1e-14);
        assert!((c.m2 - (-2.0f64).exp()).abs() < 1e-15);
        assert!(log_inequality_constants(&ExponentField::constant(&g, 2.0), 2.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn constant_exponent_reduction_is_identity() {
        let g = unit(17);
        let p = ExponentField::constant(&g, 3.0);
        let xi = ExponentField::constant(&g, 2.5);
        let c = Nonlinearity::parse(&g, "abs(tau)^(1.5)*tau", vec![]).unwrap();
        let spec = ProblemSpec::main(&g, p, xi.clone(), GridFunction::from_fn(&g, |x, _| x))
            .with_nonlinearity(c.clone(), Coefficients::zeros(&g));
        let r = reduce_problem(&spec).unwrap();
        assert_eq!(r.spec.kind, ProblemKind::Reduced);
        assert_eq!(r.spec.leading_factor, 2.0);
        assert_eq!(r.spec.alpha, xi);
        assert!(r.partition_preserved);
        for k in 0..g.len() {
            for tau in [-2.0, 0.0, 0.7] {
                assert_eq!(r.spec.nonlinearity.eval(k, tau), c.eval(k, tau));
            }
        }
    }
}
