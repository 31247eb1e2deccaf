//! Nodal exponent fields and every derived exponent built from them.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

/// Value of an exponent at one node.
///
/// `Infinite` is the dedicated sentinel for `p = ∞`. `Undefined` marks nodes
/// outside the subdomain on which a piecewise field is defined.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent<T> {
    Finite(T),
    Infinite,
    Undefined,
}

impl<T: Scalar> Exponent<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Exponent::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_defined(self) -> bool {
        !matches!(self, Exponent::Undefined)
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinite)
    }
}

impl<T: Scalar> fmt::Display for Exponent<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(v) => write!(f, "{v}"),
            Exponent::Infinite => write!(f, "inf"),
            Exponent::Undefined => write!(f, "undefined"),
        }
    }
}

/// An exponent sampled at the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentField<T> {
    grid: Grid<T>,
    values: Vec<Exponent<T>>,
}

impl<T: Scalar> ExponentField<T> {
    pub fn from_exponents(grid: Grid<T>, values: Vec<Exponent<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "exponent field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        for (node, v) in values.iter().enumerate() {
            if let Exponent::Finite(x) = v {
                if !x.is_finite() {
                    return Err(Error::domain(node, "non-finite exponent value"));
                }
            }
        }
        Ok(Self { grid, values })
    }

    pub fn from_values(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        let values = values.into_iter().map(Exponent::Finite).collect();
        Self::from_exponents(grid, values)
    }

    pub fn constant(grid: &Grid<T>, v: T) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![Exponent::Finite(v); grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(T, T) -> T) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let [x, y] = grid.coords(k);
                Exponent::Finite(f(x, y))
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Exponent<T>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, node: usize) -> Exponent<T> {
        self.values[node]
    }

    /// Finite value at `node`, or a domain error naming the node.
    pub fn finite_at(&self, node: usize) -> Result<T> {
        match self.values[node] {
            Exponent::Finite(v) => Ok(v),
            Exponent::Infinite => Err(Error::domain(node, "exponent is infinite")),
            Exponent::Undefined => Err(Error::domain(node, "exponent is undefined here")),
        }
    }

    /// Finite values; fails on any infinite or undefined node.
    pub fn finite_values(&self) -> Result<Vec<T>> {
        (0..self.len()).map(|k| self.finite_at(k)).collect()
    }

    /// Infimum over defined nodes (`∞` counts as +∞).
    pub fn infimum(&self) -> Option<T> {
        self.values
            .iter()
            .filter_map(|v| match v {
                Exponent::Finite(x) => Some(*x),
                Exponent::Infinite => Some(T::infinity()),
                Exponent::Undefined => None,
            })
            .reduce(T::min)
    }

    /// Supremum over defined nodes (`∞` counts as +∞).
    pub fn supremum(&self) -> Option<T> {
        self.values
            .iter()
            .filter_map(|v| match v {
                Exponent::Finite(x) => Some(*x),
                Exponent::Infinite => Some(T::infinity()),
                Exponent::Undefined => None,
            })
            .reduce(T::max)
    }

    /// Declared bounds `(inf, sup)`; every defined node must lie inside.
    pub fn check_bounds(&self, lo: T, hi: T) -> Result<()> {
        if lo > hi {
            return Err(Error::Config(format!("declared bounds inverted: {lo} > {hi}")));
        }
        for (node, v) in self.values.iter().enumerate() {
            let x = match v {
                Exponent::Finite(x) => *x,
                Exponent::Infinite => T::infinity(),
                Exponent::Undefined => continue,
            };
            if x < lo || x > hi {
                return Err(Error::domain(
                    node,
                    format!("exponent {x} outside declared bounds [{lo}, {hi}]"),
                ));
            }
        }
        Ok(())
    }

    /// Enforces `2 <= p(x) < ∞` at every node.
    pub fn check_p_field(&self, name: &str) -> Result<()> {
        for (node, v) in self.values.iter().enumerate() {
            match v {
                Exponent::Finite(x) if *x >= T::lit(2.0) => {}
                Exponent::Finite(x) => {
                    return Err(Error::domain(node, format!("{name} = {x} is below 2")))
                }
                _ => return Err(Error::domain(node, format!("{name} must be finite"))),
            }
        }
        Ok(())
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }

    pub fn has_infinite(&self) -> bool {
        self.values.iter().any(|v| v.is_infinite())
    }

    /// Applies `f` to finite values; sentinels pass through unchanged.
    pub fn map_finite(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .map(|v| match v {
                    Exponent::Finite(x) => Exponent::Finite(f(*x)),
                    other => *other,
                })
                .collect(),
        }
    }

    /// Keeps values where `mask` is set and marks the rest undefined.
    pub fn restricted(&self, mask: &[bool]) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(mask)
                .map(|(v, m)| if *m { *v } else { Exponent::Undefined })
                .collect(),
        }
    }
}

/// Conjugate exponent `p* = p/(p-1)`, with `1 ↦ ∞` and `∞ ↦ 1`.
pub fn conjugate<T: Scalar>(p: &ExponentField<T>) -> Result<ExponentField<T>> {
    let values = p
        .values
        .iter()
        .enumerate()
        .map(|(node, v)| conjugate_value(*v).map_err(|m| Error::domain(node, m)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExponentField {
        grid: p.grid.clone(),
        values,
    })
}

pub(crate) fn conjugate_value<T: Scalar>(v: Exponent<T>) -> Result<Exponent<T>, String> {
    Ok(match v {
        Exponent::Finite(x) if x < T::one() => {
            return Err(format!("conjugate needs p >= 1, found {x}"))
        }
        Exponent::Finite(x) if x == T::one() => Exponent::Infinite,
        Exponent::Finite(x) => Exponent::Finite(x / (x - T::one())),
        Exponent::Infinite => Exponent::Finite(T::one()),
        Exponent::Undefined => Exponent::Undefined,
    })
}

/// `q0 = p0/(p0-1)` and the critical exponent `p̃ = n p0 / (n - q0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalExponents<T> {
    pub q0: T,
    pub p_tilde: T,
}

pub fn critical_exponents<T: Scalar>(p0: T, n: usize) -> Result<CriticalExponents<T>> {
    if !(p0 > T::one()) || !p0.is_finite() {
        return Err(Error::Config(format!("critical exponents need finite p0 > 1, got {p0}")));
    }
    let q0 = p0 / (p0 - T::one());
    let n = T::from_count(n);
    if n <= q0 {
        return Err(Error::Config(
            "critical exponent undefined for this analysis dimension".into(),
        ));
    }
    Ok(CriticalExponents {
        q0,
        p_tilde: n * p0 / (n - q0),
    })
}

/// Exponents derived from `p`, the constant `p1` and the growth field `ξ`.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedFields<T> {
    /// `γ = (p - p1)/(p1 - 1)`.
    pub gamma: ExponentField<T>,
    /// `θ = (ξ + γ)/(γ + 1)`.
    pub theta: ExponentField<T>,
    /// `q1 = p1/(p1 - 1)`.
    pub q1: T,
    /// `p̃1 = n p1/(n - q1)`.
    pub p_tilde1: T,
    /// `p̃(x) = p̃1 (γ + 1) - γ`.
    pub p_tilde: ExponentField<T>,
}

pub fn derived_fields<T: Scalar>(
    p: &ExponentField<T>,
    p1: T,
    xi: &ExponentField<T>,
    n: usize,
) -> Result<DerivedFields<T>> {
    p.grid.ensure_same(&xi.grid, "xi")?;
    if p1 < T::lit(2.0) {
        return Err(Error::Config(format!("p1 = {p1} must be at least 2")));
    }
    let crit = critical_exponents(p1, n)?;
    let one = T::one();
    let mut gamma = Vec::with_capacity(p.len());
    let mut theta = Vec::with_capacity(p.len());
    let mut p_tilde = Vec::with_capacity(p.len());
    for node in 0..p.len() {
        let pv = p.finite_at(node)?;
        let xv = xi.finite_at(node)?;
        if p1 > pv {
            return Err(Error::domain(node, format!("p1 = {p1} exceeds p = {pv}")));
        }
        if xv <= one {
            return Err(Error::domain(node, format!("xi = {xv} must exceed 1")));
        }
        let g = (pv - p1) / (p1 - one);
        gamma.push(Exponent::Finite(g));
        theta.push(Exponent::Finite((xv + g) / (g + one)));
        p_tilde.push(Exponent::Finite(crit.p_tilde * (g + one) - g));
    }
    let grid = p.grid.clone();
    Ok(DerivedFields {
        gamma: ExponentField { grid: grid.clone(), values: gamma },
        theta: ExponentField { grid: grid.clone(), values: theta },
        q1: crit.q0,
        p_tilde1: crit.p_tilde,
        p_tilde: ExponentField { grid, values: p_tilde },
    })
}

/// Subdomain label of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    Omega1,
    Omega2,
    Omega3,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Omega1, Region::Omega2, Region::Omega3];

    pub fn label(self) -> &'static str {
        match self {
            Region::Omega1 => "omega1",
            Region::Omega2 => "omega2",
            Region::Omega3 => "omega3",
        }
    }
}

/// Disjoint classification of the nodes into three growth regimes.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainPartition<T> {
    grid: Grid<T>,
    regions: Vec<Region>,
    eta: T,
    p_tilde: ExponentField<T>,
}

impl<T: Scalar> DomainPartition<T> {
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn p_tilde(&self) -> &ExponentField<T> {
        &self.p_tilde
    }

    pub fn region(&self, node: usize) -> Region {
        self.regions[node]
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn mask(&self, region: Region) -> Vec<bool> {
        self.regions.iter().map(|r| *r == region).collect()
    }

    /// Mask of the union of several regions.
    pub fn mask_any(&self, regions: &[Region]) -> Vec<bool> {
        self.regions.iter().map(|r| regions.contains(r)).collect()
    }

    pub fn count(&self, region: Region) -> usize {
        self.regions.iter().filter(|r| **r == region).count()
    }

    pub fn is_empty(&self, region: Region) -> bool {
        self.count(region) == 0
    }
}

/// Classifies nodes by `α` against `[1, p_ref-η)`, `[p_ref-η, p̃)` and `[p̃, ∞)`.
pub fn partition<T: Scalar>(
    alpha: &ExponentField<T>,
    p_ref: &ExponentField<T>,
    eta: T,
    p_tilde: &ExponentField<T>,
) -> Result<DomainPartition<T>> {
    if !(eta > T::zero() && eta < T::one()) {
        return Err(Error::Config(format!("eta = {eta} must lie in (0, 1)")));
    }
    alpha.grid.ensure_same(&p_ref.grid, "p_ref")?;
    alpha.grid.ensure_same(&p_tilde.grid, "p_tilde")?;
    let mut regions = Vec::with_capacity(alpha.len());
    for node in 0..alpha.len() {
        let a = alpha.finite_at(node)?;
        let pr = p_ref.finite_at(node)?;
        let pt = p_tilde.finite_at(node)?;
        if a < T::one() {
            return Err(Error::domain(node, format!("growth exponent {a} is below 1")));
        }
        if pt <= pr {
            return Err(Error::domain(
                node,
                format!("critical exponent {pt} does not exceed {pr}"),
            ));
        }
        let r = if a < pr - eta {
            Region::Omega1
        } else if a < pt {
            Region::Omega2
        } else {
            Region::Omega3
        };
        regions.push(r);
    }
    Ok(DomainPartition {
        grid: alpha.grid.clone(),
        regions,
        eta,
        p_tilde: p_tilde.clone(),
    })
}

/// Integrability exponents of the zero- and first-order coefficients:
/// `β1 = α*` on Ω₁ and `q0` elsewhere; `β = p0 α*/(p0-α)` on Ω₁,
/// `p̃ α*/(p̃-α)` on Ω₂ and `∞` on Ω₃.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaFields<T> {
    pub beta: ExponentField<T>,
    pub beta1: ExponentField<T>,
}

pub fn beta_fields<T: Scalar>(
    partition: &DomainPartition<T>,
    alpha: &ExponentField<T>,
    p0: T,
    p_tilde: T,
) -> Result<BetaFields<T>> {
    partition.grid.ensure_same(&alpha.grid, "alpha")?;
    let q0 = p0 / (p0 - T::one());
    let alpha_star = conjugate(alpha)?;
    let mut beta = Vec::with_capacity(alpha.len());
    let mut beta1 = Vec::with_capacity(alpha.len());
    for node in 0..alpha.len() {
        let a = alpha.finite_at(node)?;
        let star = alpha_star.get(node);
        let region = partition.region(node);
        beta1.push(match region {
            Region::Omega1 => star,
            _ => Exponent::Finite(q0),
        });
        let b = match region {
            Region::Omega1 => scaled_ratio(star, p0, a, node, "alpha reaches p0 on omega1")?,
            Region::Omega2 => {
                scaled_ratio(star, p_tilde, a, node, "alpha reaches the critical exponent on omega2")?
            }
            Region::Omega3 => Exponent::Infinite,
        };
        beta.push(b);
    }
    let grid = alpha.grid.clone();
    Ok(BetaFields {
        beta: ExponentField { grid: grid.clone(), values: beta },
        beta1: ExponentField { grid, values: beta1 },
    })
}

// `top * star / (top - a)` with `star` possibly infinite.
fn scaled_ratio<T: Scalar>(
    star: Exponent<T>,
    top: T,
    a: T,
    node: usize,
    failure: &str,
) -> Result<Exponent<T>> {
    let denom = top - a;
    if denom <= T::zero() {
        return Err(Error::domain(node, failure));
    }
    Ok(match star {
        Exponent::Finite(s) => Exponent::Finite(top * s / denom),
        _ => Exponent::Infinite,
    })
}

/// Integrability exponents for the coefficients of the main problem.
#[derive(Clone, Debug, PartialEq)]
pub struct MuFields<T> {
    /// `(p+γ)/(p-ξ1)` on Ω₂.
    pub mu1: ExponentField<T>,
    /// `(ξ1+γ)/ξ1` on Ω₂.
    pub mu2: ExponentField<T>,
    /// `(ξ+γ)/ξ` on Ω₃.
    pub mu3: ExponentField<T>,
    /// `θ*` on Ω₁, `q1` on Ω₂ ∪ Ω₃.
    pub mu4: ExponentField<T>,
    /// `p1 θ*/(p1-θ)` on Ω₁, `p̃1 θ*/(p̃1-θ)` on Ω₂, `∞` on Ω₃.
    pub mu: ExponentField<T>,
}

pub fn mu_fields<T: Scalar>(
    partition: &DomainPartition<T>,
    p: &ExponentField<T>,
    xi: &ExponentField<T>,
    xi1: &ExponentField<T>,
    derived: &DerivedFields<T>,
    p1: T,
) -> Result<MuFields<T>> {
    let grid = partition.grid.clone();
    for (f, name) in [(p, "p"), (xi, "xi"), (xi1, "xi1")] {
        grid.ensure_same(&f.grid, name)?;
    }
    let len = grid.len();
    let mut mu1 = vec![Exponent::Undefined; len];
    let mut mu2 = vec![Exponent::Undefined; len];
    let mut mu3 = vec![Exponent::Undefined; len];
    for node in 0..len {
        let g = derived.gamma.finite_at(node)?;
        match partition.region(node) {
            Region::Omega1 => {}
            Region::Omega2 => {
                let pv = p.finite_at(node)?;
                let x1 = xi1.finite_at(node)?;
                if pv - x1 <= T::zero() {
                    return Err(Error::domain(node, "xi1 reaches p on omega2"));
                }
                if x1 <= T::zero() {
                    return Err(Error::domain(node, "xi1 must be positive on omega2"));
                }
                mu1[node] = Exponent::Finite((pv + g) / (pv - x1));
                mu2[node] = Exponent::Finite((x1 + g) / x1);
            }
            Region::Omega3 => {
                let x = xi.finite_at(node)?;
                mu3[node] = Exponent::Finite((x + g) / x);
            }
        }
    }
    let b = beta_fields(partition, &derived.theta, p1, derived.p_tilde1)?;
    Ok(MuFields {
        mu1: ExponentField { grid: grid.clone(), values: mu1 },
        mu2: ExponentField { grid: grid.clone(), values: mu2 },
        mu3: ExponentField { grid, values: mu3 },
        mu4: b.beta1,
        mu: b.beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(nodes: usize) -> Grid<f64> {
        Grid::interval(0.0, 1.0, nodes, 3).unwrap()
    }

    #[test]
    fn conjugate_examples() {
        let g = unit(11);
        let c = conjugate(&ExponentField::constant(&g, 3.0)).unwrap();
        assert!(c.values().iter().all(|v| *v == Exponent::Finite(1.5)));
        let c = conjugate(&ExponentField::constant(&g, 2.0)).unwrap();
        assert!(c.values().iter().all(|v| *v == Exponent::Finite(2.0)));
        let c = conjugate(&ExponentField::from_fn(&g, |x, _| 2.0 + x)).unwrap();
        assert_eq!(c.get(10), Exponent::Finite(1.5));
    }

    #[test]
    fn conjugate_sentinels_and_errors() {
        let g = unit(9);
        let mut values = vec![Exponent::Finite(2.0); 9];
        values[0] = Exponent::Finite(1.0);
        values[1] = Exponent::Infinite;
        values[2] = Exponent::Undefined;
        let p = ExponentField::from_exponents(g.clone(), values).unwrap();
        let c = conjugate(&p).unwrap();
        assert_eq!(
            &c.values()[..3],
            &[Exponent::Infinite, Exponent::Finite(1.0), Exponent::Undefined]
        );
        let mut raw = vec![2.0; 9];
        raw[1] = 0.5;
        let bad = ExponentField::from_values(g, raw).unwrap();
        match conjugate(&bad) {
            Err(Error::Domain { node, .. }) => assert_eq!(node, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn critical_exponent_examples() {
        let c = critical_exponents(2.0, 3).unwrap();
        assert_eq!((c.q0, c.p_tilde), (2.0, 6.0));
        let c = critical_exponents(3.0, 3).unwrap();
        assert_eq!((c.q0, c.p_tilde), (1.5, 6.0));
        assert!(critical_exponents(2.0, 2).is_err());
    }

    #[test]
    fn derived_field_examples() {
        let g = unit(11);
        let p = ExponentField::from_fn(&g, |x, _| 2.0 + x);
        let xi = ExponentField::constant(&g, 3.0);
        let d = derived_fields(&p, 2.0, &xi, 3).unwrap();
        for k in 0..g.len() {
            let x = g.coords(k)[0];
            assert!((d.gamma.finite_at(k).unwrap() - x).abs() < 1e-15);
        }
        assert!((d.theta.finite_at(10).unwrap() - 2.0).abs() < 1e-15);
        assert!(derived_fields(&p, 2.5, &xi, 3).is_err());

        let pc = ExponentField::constant(&g, 3.0);
        let d = derived_fields(&pc, 3.0, &xi, 3).unwrap();
        assert!(d.gamma.values().iter().all(|v| *v == Exponent::Finite(0.0)));
        assert_eq!(d.theta, xi);
    }

    #[test]
    fn partition_classifies_half_open_ranges() {
        let g = unit(11);
        let alpha = ExponentField::from_fn(&g, |x, _| 1.5 + 2.0 * x);
        let p0 = ExponentField::constant(&g, 2.0);
        let pt = ExponentField::constant(&g, 6.0);
        let part = partition(&alpha, &p0, 0.1, &pt).unwrap();
        assert_eq!(part.count(Region::Omega1), 2);
        assert_eq!(part.count(Region::Omega2), 9);
        assert!(part.is_empty(Region::Omega3));
        assert!(partition(&alpha, &p0, 1.0, &pt).is_err());
        assert!(partition(&alpha, &p0, 0.0, &pt).is_err());

        let a = ExponentField::constant(&g, 6.0);
        let part = partition(&a, &p0, 0.1, &pt).unwrap();
        assert_eq!(part.count(Region::Omega3), g.len());
    }

    #[test]
    fn mu3_and_beta1_examples() {
        let g = unit(9);
        // p = 3, p1 = 2 gives gamma = 1; with n = 10 the critical field is 4, so xi = 4 is omega3.
        let p = ExponentField::constant(&g, 3.0);
        let xi = ExponentField::constant(&g, 4.0);
        let d = derived_fields(&p, 2.0, &xi, 10).unwrap();
        let part = partition(&xi, &p, 0.05, &d.p_tilde).unwrap();
        assert_eq!(part.count(Region::Omega3), g.len());
        let mu = mu_fields(&part, &p, &xi, &xi, &d, 2.0).unwrap();
        assert!(mu.mu3.values().iter().all(|v| *v == Exponent::Finite(1.25)));
        assert!(mu.mu.values().iter().all(|v| v.is_infinite()));

        let alpha = ExponentField::constant(&g, 1.5);
        let p0 = ExponentField::constant(&g, 3.0);
        let pt = ExponentField::constant(&g, 6.0);
        let part = partition(&alpha, &p0, 0.05, &pt).unwrap();
        let b = beta_fields(&part, &alpha, 3.0, 6.0).unwrap();
        assert_eq!(b.beta1, conjugate(&alpha).unwrap());
    }
}
