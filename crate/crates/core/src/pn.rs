//! pn-spaces: the seminorm `[u]_{S,α,β}`, the power map identifying them with
//! `W^{1,β}`, the induced metric, and the embedding-exponent predicates.

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::GridFunction;
use crate::modular::{nodal_weights, sobolev_norm};
use crate::scalar::Scalar;

/// Index `(α, β)` of a first-order pn-space; `α >= 0`, `β >= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PnIndex<T> {
    alpha: T,
    beta: T,
}

impl<T: Scalar> PnIndex<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        if !(alpha >= T::zero()) || !alpha.is_finite() {
            return Err(Error::Config(format!("pn index needs alpha >= 0, got {alpha}")));
        }
        if !(beta >= T::one()) || !beta.is_finite() {
            return Err(Error::Config(format!("pn index needs beta >= 1, got {beta}")));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.beta
    }
}

/// `Σ_i ∫ |u|^α |D_i u|^β`, the seminorm raised to the power `α + β`.
pub fn pn_energy<T: Scalar>(u: &GridFunction<T>, idx: PnIndex<T>) -> T {
    let w = nodal_weights(u.grid());
    let grad = u.gradient();
    let mut total = T::zero();
    for d in &grad {
        for (k, wk) in w.iter().enumerate() {
            let du = d[k].abs();
            if du == T::zero() {
                continue;
            }
            total += *wk * u[k].abs().powf(idx.alpha) * du.powf(idx.beta);
        }
    }
    total
}

/// `[u]_{S,α,β} = (Σ_i ∫ |u|^α |D_i u|^β)^{1/(α+β)}`.
pub fn pn_seminorm<T: Scalar>(u: &GridFunction<T>, idx: PnIndex<T>) -> T {
    pn_energy(u, idx).powf(T::one() / (idx.alpha + idx.beta))
}

/// Seminorm of the zero-trace class; `u` must vanish on the boundary.
pub fn pn_seminorm_dirichlet<T: Scalar>(u: &GridFunction<T>, idx: PnIndex<T>) -> Result<T> {
    if !u.vanishes_on_boundary() {
        return Err(Error::Config("function does not vanish on the boundary".into()));
    }
    Ok(pn_seminorm(u, idx))
}

/// `φ(t) = |t|^{α/β} t`.
pub fn pn_phi<T: Scalar>(u: &GridFunction<T>, idx: PnIndex<T>) -> GridFunction<T> {
    let e = idx.alpha / idx.beta;
    u.map(|t| t.signed_pow(e))
}

/// `φ⁻¹(v) = |v|^{-α/(α+β)} v`.
pub fn pn_phi_inverse<T: Scalar>(v: &GridFunction<T>, idx: PnIndex<T>) -> GridFunction<T> {
    let e = -idx.alpha / (idx.alpha + idx.beta);
    v.map(|t| t.signed_pow(e))
}

/// `d(u, v) = ‖φ(u) - φ(v)‖_{W^{1,β}}`.
pub fn pn_metric<T: Scalar>(u: &GridFunction<T>, v: &GridFunction<T>, idx: PnIndex<T>) -> Result<T> {
    let diff = pn_phi(u, idx).sub(&pn_phi(v, idx))?;
    let beta = ExponentField::constant(u.grid(), idx.beta);
    sobolev_norm(&diff, &beta)
}

/// Inclusion `S̊_{α,β} ⊆ S̊_{α1,β1}`:
/// `β >= β1`, `α1/β1 >= α/β`, `α1 + β1 <= α + β`.
pub fn pn_inclusion<T: Scalar>(idx: PnIndex<T>, target: PnIndex<T>) -> bool {
    idx.beta >= target.beta
        && target.alpha / target.beta >= idx.alpha / idx.beta
        && target.alpha + target.beta <= idx.alpha + idx.beta
}

/// `n(α+β)/(n-β)`, defined for `n > β`.
pub fn pn_embedding_exponent<T: Scalar>(idx: PnIndex<T>, n: usize) -> Option<T> {
    let n = T::from_count(n);
    (n > idx.beta).then(|| n * (idx.alpha + idx.beta) / (n - idx.beta))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PnEmbeddingReport<T> {
    /// `n(α+β)/(n-β)`; `None` when `n <= β`.
    pub exponent: Option<T>,
    /// Continuous embedding into `L^r`; `None` when undefined.
    pub continuous: Option<bool>,
    /// Compact embedding into `L^r` (strict inequality).
    pub compact: Option<bool>,
    /// `W^{1,p}_0 ⊂ S̊_{α,β}` iff `p >= α + β`.
    pub sobolev_inclusion: bool,
    /// Inclusion into the target index, when one is given.
    pub inclusion: Option<bool>,
}

pub fn pn_embedding_report<T: Scalar>(
    idx: PnIndex<T>,
    n: usize,
    r: T,
    p: T,
    target: Option<PnIndex<T>>,
) -> PnEmbeddingReport<T> {
    let exponent = pn_embedding_exponent(idx, n);
    PnEmbeddingReport {
        exponent,
        continuous: exponent.map(|e| e >= r),
        compact: exponent.map(|e| e > r),
        sobolev_inclusion: p >= idx.alpha + idx.beta,
        inclusion: target.map(|t| pn_inclusion(idx, t)),
    }
}
