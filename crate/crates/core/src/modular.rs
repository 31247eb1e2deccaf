//! Modulars, Luxemburg norms, first-order Sobolev norms, and the inclusion
//! and embedding predicates of variable-exponent spaces.

use crate::error::{Error, Result};
use crate::exponent::{Exponent, ExponentField};
use crate::grid::{Grid, GridFunction};
use crate::scalar::Scalar;

const MAX_BISECTIONS: usize = 200;
const MAX_BRACKET_STEPS: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum QuadratureKind {
    #[default]
    Trapezoid,
    Midpoint,
}

/// Discretisation of `∫_Ω · dx` on a uniform grid.
///
/// The trapezoid rule weights nodes. The midpoint rule evaluates the integrand
/// at cell centres on the average of the corner inputs.
#[derive(Clone, Debug)]
pub struct QuadratureRule<T> {
    kind: QuadratureKind,
    grid: Grid<T>,
    weights: Vec<T>,
}

impl<T: Scalar> QuadratureRule<T> {
    pub fn new(grid: &Grid<T>, kind: QuadratureKind) -> Self {
        let weights = match kind {
            QuadratureKind::Trapezoid => nodal_weights(grid),
            QuadratureKind::Midpoint => {
                let cells: usize = grid.axes().iter().map(|a| a.nodes - 1).product();
                vec![grid.cell_measure(); cells]
            }
        };
        Self {
            kind,
            grid: grid.clone(),
            weights,
        }
    }

    pub fn trapezoid(grid: &Grid<T>) -> Self {
        Self::new(grid, QuadratureKind::Trapezoid)
    }

    pub fn midpoint(grid: &Grid<T>) -> Self {
        Self::new(grid, QuadratureKind::Midpoint)
    }

    pub fn kind(&self) -> QuadratureKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    /// Node weights (trapezoid) or cell weights (midpoint).
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Integrates `f` applied to the pointwise values of `inputs`.
    pub fn integrate(&self, inputs: &[&[T]], f: impl Fn(&[T]) -> T) -> T {
        let mut buf = vec![T::zero(); inputs.len()];
        let mut total = T::zero();
        match self.kind {
            QuadratureKind::Trapezoid => {
                for (k, w) in self.weights.iter().enumerate() {
                    for (b, inp) in buf.iter_mut().zip(inputs) {
                        *b = inp[k];
                    }
                    total += *w * f(&buf);
                }
            }
            QuadratureKind::Midpoint => {
                for (c, w) in self.weights.iter().enumerate() {
                    let corners = cell_corners(&self.grid, c);
                    let scale = T::one() / T::from_count(corners.len());
                    for (b, inp) in buf.iter_mut().zip(inputs) {
                        *b = corners.iter().fold(T::zero(), |s, &k| s + inp[k]) * scale;
                    }
                    total += *w * f(&buf);
                }
            }
        }
        total
    }
}

fn cell_corners<T: Scalar>(grid: &Grid<T>, cell: usize) -> Vec<usize> {
    let nx = grid.axis(0).nodes;
    if grid.dim() == 1 {
        vec![cell, cell + 1]
    } else {
        let (cx, cy) = (cell % (nx - 1), cell / (nx - 1));
        vec![
            grid.node_index(cx, cy),
            grid.node_index(cx + 1, cy),
            grid.node_index(cx, cy + 1),
            grid.node_index(cx + 1, cy + 1),
        ]
    }
}

/// Tensor-product trapezoid weights; they sum to `mes(Ω)`.
pub fn nodal_weights<T: Scalar>(grid: &Grid<T>) -> Vec<T> {
    let half = T::lit(0.5);
    let axis_weights: Vec<Vec<T>> = grid
        .axes()
        .iter()
        .map(|a| {
            let h = a.spacing();
            (0..a.nodes)
                .map(|i| if i == 0 || i + 1 == a.nodes { h * half } else { h })
                .collect()
        })
        .collect();
    (0..grid.len())
        .map(|k| {
            let ix = grid.multi_index(k);
            axis_weights
                .iter()
                .enumerate()
                .fold(T::one(), |w, (d, aw)| w * aw[ix[d]])
        })
        .collect()
}

/// `Σ w_i |u_i|^{p_i}` over finite nodes plus `max |u_i|` over `∞` nodes.
/// Undefined nodes are outside the integration domain.
pub(crate) fn modular_values<T: Scalar>(weights: &[T], u: &[T], p: &[Exponent<T>]) -> T {
    let mut integral = T::zero();
    let mut sup = T::zero();
    for ((w, &v), e) in weights.iter().zip(u).zip(p) {
        match e {
            Exponent::Finite(q) => {
                if v != T::zero() {
                    integral += *w * v.abs().powf(*q);
                }
            }
            Exponent::Infinite => sup = sup.max(v.abs()),
            Exponent::Undefined => {}
        }
    }
    integral + sup
}

fn check_exponent_at_least_one<T: Scalar>(p: &ExponentField<T>) -> Result<()> {
    for (node, e) in p.values().iter().enumerate() {
        if let Exponent::Finite(q) = e {
            if *q < T::one() {
                return Err(Error::domain(node, format!("exponent {q} is below 1")));
            }
        }
    }
    Ok(())
}

/// The modular `σ_p(u)` with the trapezoid rule.
pub fn modular<T: Scalar>(u: &GridFunction<T>, p: &ExponentField<T>) -> Result<T> {
    modular_with(&QuadratureRule::trapezoid(u.grid()), u, p)
}

pub fn modular_with<T: Scalar>(
    rule: &QuadratureRule<T>,
    u: &GridFunction<T>,
    p: &ExponentField<T>,
) -> Result<T> {
    u.grid().ensure_same(p.grid(), "exponent")?;
    u.grid().ensure_same(rule.grid(), "quadrature")?;
    check_exponent_at_least_one(p)?;
    match rule.kind() {
        QuadratureKind::Trapezoid => Ok(modular_values(rule.weights(), u.values(), p.values())),
        QuadratureKind::Midpoint => {
            let q = p.finite_values().map_err(|_| {
                Error::Unsupported("midpoint quadrature needs a finite exponent at every node".into())
            })?;
            Ok(rule.integrate(&[u.values(), &q], |a| {
                if a[0] == T::zero() {
                    T::zero()
                } else {
                    a[0].abs().powf(a[1])
                }
            }))
        }
    }
}

/// Luxemburg norm `inf{λ > 0 : σ_p(u/λ) <= 1}` with the trapezoid rule.
pub fn luxemburg_norm<T: Scalar>(u: &GridFunction<T>, p: &ExponentField<T>) -> Result<T> {
    luxemburg_norm_with(&QuadratureRule::trapezoid(u.grid()), u, p)
}

pub fn luxemburg_norm_with<T: Scalar>(
    rule: &QuadratureRule<T>,
    u: &GridFunction<T>,
    p: &ExponentField<T>,
) -> Result<T> {
    u.grid().ensure_same(p.grid(), "exponent")?;
    u.grid().ensure_same(rule.grid(), "quadrature")?;
    check_exponent_at_least_one(p)?;
    if let Some(node) = p.values().iter().position(|e| e.is_infinite()) {
        return Err(Error::Unsupported(format!(
            "norm with an infinite exponent (node {node})"
        )));
    }
    if rule.kind() == QuadratureKind::Midpoint {
        p.finite_values().map_err(|_| {
            Error::Unsupported("midpoint quadrature needs a finite exponent at every node".into())
        })?;
    }
    let sigma = |lambda: T| -> Result<T> { modular_with(rule, &u.scaled(T::one() / lambda), p) };
    luxemburg_root(u, p, sigma)
}

/// Luxemburg norm over raw nodal data; undefined exponent nodes are skipped.
pub(crate) fn luxemburg_values<T: Scalar>(
    weights: &[T],
    u: &[T],
    p: &[Exponent<T>],
) -> Result<T> {
    if let Some(node) = p.iter().position(|e| e.is_infinite()) {
        return Err(Error::Unsupported(format!(
            "norm with an infinite exponent (node {node})"
        )));
    }
    let peak = u
        .iter()
        .zip(p)
        .filter(|(_, e)| e.is_defined())
        .fold(T::zero(), |m, (v, _)| m.max(v.abs()));
    if peak == T::zero() {
        return Ok(T::zero());
    }
    let mut scratch = vec![T::zero(); u.len()];
    let mut sigma = |lambda: T| -> T {
        let inv = T::one() / lambda;
        for (s, v) in scratch.iter_mut().zip(u) {
            *s = *v * inv;
        }
        modular_values(weights, &scratch, p)
    };
    bisect_unit_level(peak, &mut sigma)
}

fn luxemburg_root<T: Scalar>(
    u: &GridFunction<T>,
    p: &ExponentField<T>,
    sigma: impl Fn(T) -> Result<T>,
) -> Result<T> {
    let peak = u
        .values()
        .iter()
        .zip(p.values())
        .filter(|(_, e)| e.is_defined())
        .fold(T::zero(), |m, (v, _)| m.max(v.abs()));
    if peak == T::zero() {
        return Ok(T::zero());
    }
    let mut failure = None;
    let mut f = |lambda: T| match sigma(lambda) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            T::nan()
        }
    };
    let out = bisect_unit_level(peak, &mut f);
    match failure {
        Some(e) => Err(e),
        None => out,
    }
}

/// Finds `λ` with `σ(λ) = 1` for the decreasing map `σ`, starting at `λ0`.
fn bisect_unit_level<T: Scalar>(lambda0: T, sigma: &mut impl FnMut(T) -> T) -> Result<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let tol = T::lit(1e-10).max(T::lit(32.0) * T::epsilon());
    let s0 = sigma(lambda0);
    if s0.is_nan() {
        return Err(Error::Numerical("modular evaluation failed".into()));
    }
    if (s0 - one).abs() <= tol {
        return Ok(lambda0);
    }
    // Bracket: sigma(lo) > 1 >= sigma(hi).
    let (mut lo, mut hi) = if s0 > one {
        let mut hi = lambda0;
        let mut steps = 0;
        loop {
            let lo = hi;
            hi = hi * two;
            steps += 1;
            if sigma(hi) <= one {
                break (lo, hi);
            }
            if steps > MAX_BRACKET_STEPS || !hi.is_finite() {
                return Err(Error::Numerical(format!("could not bracket the norm above {lo}")));
            }
        }
    } else {
        let mut lo = lambda0;
        let mut steps = 0;
        loop {
            let hi = lo;
            lo = lo / two;
            steps += 1;
            if sigma(lo) > one {
                break (lo, hi);
            }
            if steps > MAX_BRACKET_STEPS || lo == T::zero() {
                return Err(Error::Numerical(format!("could not bracket the norm below {hi}")));
            }
        }
    };
    let mut best = (T::infinity(), hi);
    for _ in 0..MAX_BISECTIONS {
        let mid = lo + (hi - lo) / two;
        let s = sigma(mid);
        let err = (s - one).abs();
        if err < best.0 {
            best = (err, mid);
        }
        if err <= tol {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if s > one {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 <= tol {
        return Ok(best.1);
    }
    Err(Error::Numerical(format!(
        "Luxemburg bisection stalled: bracket [{lo:e}, {hi:e}], best |sigma - 1| = {:e}",
        best.0
    )))
}

/// `‖u‖ + Σ_i ‖D_i u‖` in `L^{p(x)}` with the nodal gradient.
pub fn sobolev_norm<T: Scalar>(u: &GridFunction<T>, p: &ExponentField<T>) -> Result<T> {
    sobolev_norm_with(&QuadratureRule::trapezoid(u.grid()), u, p)
}

pub fn sobolev_norm_with<T: Scalar>(
    rule: &QuadratureRule<T>,
    u: &GridFunction<T>,
    p: &ExponentField<T>,
) -> Result<T> {
    let mut total = luxemburg_norm_with(rule, u, p)?;
    for d in u.gradient() {
        let du = GridFunction::new(u.grid().clone(), d)?;
        total += luxemburg_norm_with(rule, &du, p)?;
    }
    Ok(total)
}

/// Outcome of a nodal predicate: overall verdict and first failing node.
#[derive(Clone, Debug, PartialEq)]
pub struct PredicateResult {
    pub holds: bool,
    pub witness: Option<usize>,
}

/// `L^{p1} ⊂ L^{p2}` holds iff `p2 <= p1` at every node.
pub fn inclusion_check<T: Scalar>(
    p1: &ExponentField<T>,
    p2: &ExponentField<T>,
) -> Result<PredicateResult> {
    p1.grid().ensure_same(p2.grid(), "p2")?;
    let witness = (0..p1.len()).find(|&k| !exponent_le(p2.get(k), p1.get(k)));
    Ok(PredicateResult {
        holds: witness.is_none(),
        witness,
    })
}

fn exponent_le<T: Scalar>(a: Exponent<T>, b: Exponent<T>) -> bool {
    match (a, b) {
        (Exponent::Undefined, _) | (_, Exponent::Undefined) => true,
        (_, Exponent::Infinite) => true,
        (Exponent::Infinite, Exponent::Finite(_)) => false,
        (Exponent::Finite(x), Exponent::Finite(y)) => x <= y,
    }
}

/// Result of the Sobolev embedding predicate.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingResult<T> {
    pub holds: bool,
    pub witness: Option<usize>,
    /// `n p/(n - m p) - q` per node; `None` where `m p >= n`.
    pub margin: Vec<Option<T>>,
}

/// `W^{m,p} ↪ L^q` requires `m p(x) < n` and `q(x) < n p(x)/(n - m p(x))` nodally.
pub fn embedding_check<T: Scalar>(
    m: usize,
    p: &ExponentField<T>,
    q: &ExponentField<T>,
    n: usize,
) -> Result<EmbeddingResult<T>> {
    p.grid().ensure_same(q.grid(), "q")?;
    if m < 1 || n < 2 {
        return Err(Error::Config(format!("embedding needs m >= 1 and n >= 2, got m={m}, n={n}")));
    }
    let (mt, nt) = (T::from_count(m), T::from_count(n));
    let mut margin = Vec::with_capacity(p.len());
    let mut witness = None;
    for k in 0..p.len() {
        let pv = p.finite_at(k)?;
        let qv = q.finite_at(k)?;
        let entry = if mt * pv < nt {
            Some(nt * pv / (nt - mt * pv) - qv)
        } else {
            None
        };
        let ok = matches!(entry, Some(g) if g > T::zero());
        if !ok && witness.is_none() {
            witness = Some(k);
        }
        margin.push(entry);
    }
    Ok(EmbeddingResult {
        holds: witness.is_none(),
        witness,
        margin,
    })
}
