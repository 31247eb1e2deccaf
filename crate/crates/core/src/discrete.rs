//! The finite-difference operator shared by the solver, the weak residual and
//! manufactured sources.
//!
//! On every grid the divergence term is discretised with the edge form
//! `Σ_edges |cell| D(Φ) D(w)`, whose action on nodal hat functions is the
//! five-point (or three-point) Laplacian scaled by the cell measure.

use crate::error::Result;
use crate::grid::{Grid, GridFunction};
use crate::problem::ProblemSpec;
use crate::scalar::Scalar;

/// `(-Δ_h v)` at interior nodes, zero on the boundary.
pub fn neg_laplacian<T: Scalar>(grid: &Grid<T>, v: &[T]) -> Vec<T> {
    let two = T::lit(2.0);
    let inv_h2: Vec<T> = (0..grid.dim())
        .map(|d| {
            let h = grid.spacing(d);
            T::one() / (h * h)
        })
        .collect();
    (0..grid.len())
        .map(|k| {
            if grid.is_boundary(k) {
                return T::zero();
            }
            let mut s = T::zero();
            for (d, ih) in inv_h2.iter().enumerate() {
                let a = grid.neighbour(k, d, -1).expect("interior node has neighbours");
                let b = grid.neighbour(k, d, 1).expect("interior node has neighbours");
                s += *ih * (two * v[k] - v[a] - v[b]);
            }
            s
        })
        .collect()
}

/// Nodal flux variable `|u|^{ρ-2} u`.
pub(crate) fn flux_variable<T: Scalar>(u: &[T], rho: &[T]) -> Vec<T> {
    let two = T::lit(2.0);
    u.iter()
        .zip(rho)
        .map(|(t, r)| t.signed_pow(*r - two))
        .collect()
}

/// Pointwise left-hand side `-s Δ_h(|u|^{ρ-2}u) + c(x, u)`.
///
/// At boundary nodes only `c(x, u)` is returned.
pub fn apply_operator<T: Scalar>(spec: &ProblemSpec<T>, u: &GridFunction<T>) -> Result<Vec<T>> {
    spec.grid.ensure_same(u.grid(), "u")?;
    let (scale, rho) = spec.flux()?;
    let phi = flux_variable(u.values(), &rho);
    let lap = neg_laplacian(&spec.grid, &phi);
    Ok((0..u.len())
        .map(|k| scale * lap[k] + spec.nonlinearity.eval(k, u[k]))
        .collect())
}

/// Source for which `u*` solves the discrete problem exactly.
pub fn manufacture_source<T: Scalar>(
    spec: &ProblemSpec<T>,
    u_star: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    let h = apply_operator(spec, u_star)?;
    GridFunction::new(spec.grid.clone(), h)
}

/// Hat-function residuals `R_k = r(hat_k)` at interior nodes, zero on the boundary.
///
/// The weak residual of any test function `w` vanishing on the boundary is
/// `Σ_k R_k w_k`.
pub fn nodal_residual<T: Scalar>(spec: &ProblemSpec<T>, u: &GridFunction<T>) -> Result<Vec<T>> {
    let lhs = apply_operator(spec, u)?;
    let cell = spec.grid.cell_measure();
    let h = spec.source.values();
    Ok((0..u.len())
        .map(|k| {
            if spec.grid.is_boundary(k) {
                T::zero()
            } else {
                cell * (lhs[k] - h[k])
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_of_quadratic_is_exact() {
        let g = Grid::rectangle((0.0, 1.0), (0.0, 2.0), (9, 11), 3).unwrap();
        let v: Vec<f64> = (0..g.len())
            .map(|k| {
                let [x, y] = g.coords(k);
                x * x + 3.0 * y * y
            })
            .collect();
        let l = neg_laplacian(&g, &v);
        for k in 0..g.len() {
            if !g.is_boundary(k) {
                assert!((l[k] + 8.0).abs() < 1e-10);
            }
        }
    }
}
