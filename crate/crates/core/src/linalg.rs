//! Banded LU factorisation with partial pivoting.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Square matrix with `kl` sub-diagonals and `ku` super-diagonals.
///
/// Each row stores `2 kl + ku + 1` entries so that row swaps during
/// factorisation have room for fill-in.
#[derive(Clone, Debug)]
pub struct BandedMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandedMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        (off >= 0 && (off as usize) < self.width && i < self.n && j < self.n)
            .then(|| i * self.width + off as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.slot(i, j).map_or(T::zero(), |s| self.data[s])
    }

    /// Adds `v` at `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band"
        );
        let s = self.slot(i, j).expect("entry inside band");
        self.data[s] += v;
    }

    /// `A x` using the declared band.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + 1).min(self.n);
                (lo..hi).fold(T::zero(), |s, j| s + self.get(i, j) * x[j])
            })
            .collect()
    }

    /// In-place LU factorisation.
    pub fn factor(mut self) -> Result<BandedLu<T>> {
        let n = self.n;
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + self.kl + 1).min(n);
            let last_col = (k + self.kl + self.ku + 1).min(n);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::Numerical(format!("singular matrix at pivot {k}")));
            }
            pivots[k] = p;
            if p != k {
                for j in k..last_col {
                    let a = self.slot(k, j).expect("pivot row slot");
                    let b = self.slot(p, j).expect("swap row slot");
                    self.data.swap(a, b);
                }
            }
            let diag = self.get(k, k);
            for i in k + 1..last_row {
                let si = self.slot(i, k).expect("multiplier slot");
                let l = self.data[si] / diag;
                self.data[si] = l;
                if l == T::zero() {
                    continue;
                }
                for j in k + 1..last_col {
                    let akj = self.get(k, j);
                    if akj != T::zero() {
                        let s = self.slot(i, j).expect("fill slot");
                        self.data[s] -= l * akj;
                    }
                }
            }
        }
        Ok(BandedLu { lu: self, pivots })
    }
}

/// Factors produced by [`BandedMatrix::factor`].
#[derive(Clone, Debug)]
pub struct BandedLu<T> {
    lu: BandedMatrix<T>,
    pivots: Vec<usize>,
}

impl<T: Scalar> BandedLu<T> {
    /// Overwrites `b` with the solution of `A x = b`.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let a = &self.lu;
        let n = a.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == T::zero() {
                continue;
            }
            for i in k + 1..(k + a.kl + 1).min(n) {
                b[i] -= a.get(i, k) * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..(i + a.kl + a.ku + 1).min(n) {
                s -= a.get(i, j) * b[j];
            }
            b[i] = s / a.get(i, i);
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal() {
        let n = 50;
        let mut a = BandedMatrix::<f64>::zeros(n, 1, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.matvec(&x);
        let y = a.clone().factor().unwrap().solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn pivots_on_zero_diagonal() {
        // Needs row swaps: zero leading diagonal entry.
        let n = 6;
        let mut a = BandedMatrix::<f64>::zeros(n, 2, 1);
        let entries = [
            (0, 0, 0.0), (0, 1, 1.0), (1, 0, 3.0), (1, 1, 1.0), (1, 2, 2.0),
            (2, 0, 1.0), (2, 1, -2.0), (2, 2, 0.5), (2, 3, 1.0), (3, 1, 4.0),
            (3, 2, 1.0), (3, 3, -1.0), (3, 4, 2.0), (4, 2, 1.0), (4, 3, 1.0),
            (4, 4, 0.0), (4, 5, 1.0), (5, 3, 2.0), (5, 4, 1.0), (5, 5, 3.0),
        ];
        for (i, j, v) in entries {
            a.add(i, j, v);
        }
        let x = [1.0, -2.0, 0.5, 3.0, -1.0, 2.0];
        let b = a.matvec(&x);
        let y = a.factor().unwrap().solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12, "{u} vs {v}");
        }
    }

    #[test]
    fn singular_is_an_error() {
        let a = BandedMatrix::<f64>::zeros(3, 1, 1);
        assert!(a.factor().is_err());
    }
}
