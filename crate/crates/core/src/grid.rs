//! Uniform tensor grids in one or two dimensions and nodal grid functions.
//!
//! Nodes are stored row-major with the first axis running fastest, so node
//! `(ix, iy)` lives at index `ix + nx * iy`.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One axis of a uniform grid: the closed interval `[lo, hi]` with `nodes` points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Axis<T> {
    pub lo: T,
    pub hi: T,
    pub nodes: usize,
}

impl<T: Scalar> Axis<T> {
    pub fn spacing(&self) -> T {
        (self.hi - self.lo) / T::from_count(self.nodes - 1)
    }

    pub fn coord(&self, i: usize) -> T {
        if i + 1 == self.nodes {
            self.hi
        } else {
            self.lo + T::from_count(i) * self.spacing()
        }
    }

    pub fn length(&self) -> T {
        self.hi - self.lo
    }
}

/// A uniform grid on a box in `R^d`, `d ∈ {1, 2}`.
///
/// `analysis_dim` is the space dimension `n` that enters the embedding and
/// critical-exponent formulas. It is independent of `d`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid<T> {
    axes: Vec<Axis<T>>,
    analysis_dim: usize,
}

impl<T: Scalar> Grid<T> {
    pub fn new(axes: Vec<Axis<T>>, analysis_dim: usize) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::Config(format!(
                "grid dimension must be 1 or 2, got {}",
                axes.len()
            )));
        }
        for (k, a) in axes.iter().enumerate() {
            if a.nodes < 3 {
                return Err(Error::Config(format!(
                    "axis {k} needs at least 3 nodes, got {}",
                    a.nodes
                )));
            }
            if !(a.hi > a.lo) || !a.lo.is_finite() || !a.hi.is_finite() {
                return Err(Error::Config(format!("axis {k} has an empty or non-finite extent")));
            }
        }
        let total: usize = axes.iter().map(|a| a.nodes).product();
        if total < 9 {
            return Err(Error::Config(format!("grid needs at least 9 nodes, got {total}")));
        }
        if analysis_dim < 2 {
            return Err(Error::Config(format!(
                "analysis dimension must be at least 2, got {analysis_dim}"
            )));
        }
        Ok(Self { axes, analysis_dim })
    }

    /// Uniform grid on `[lo, hi]`.
    pub fn interval(lo: T, hi: T, nodes: usize, analysis_dim: usize) -> Result<Self> {
        Self::new(vec![Axis { lo, hi, nodes }], analysis_dim)
    }

    /// Uniform grid on `[x0, x1] × [y0, y1]`.
    pub fn rectangle(
        x: (T, T),
        y: (T, T),
        nodes: (usize, usize),
        analysis_dim: usize,
    ) -> Result<Self> {
        Self::new(
            vec![
                Axis { lo: x.0, hi: x.1, nodes: nodes.0 },
                Axis { lo: y.0, hi: y.1, nodes: nodes.1 },
            ],
            analysis_dim,
        )
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn analysis_dim(&self) -> usize {
        self.analysis_dim
    }

    pub fn with_analysis_dim(mut self, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("analysis dimension must be at least 2, got {n}")));
        }
        self.analysis_dim = n;
        Ok(self)
    }

    pub fn axes(&self) -> &[Axis<T>] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis<T> {
        &self.axes[k]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, k: usize) -> T {
        self.axes[k].spacing()
    }

    /// Lebesgue measure of the box.
    pub fn measure(&self) -> T {
        self.axes.iter().fold(T::one(), |m, a| m * a.length())
    }

    /// Measure of one cell.
    pub fn cell_measure(&self) -> T {
        self.axes.iter().fold(T::one(), |m, a| m * a.spacing())
    }

    /// Axis indices of a node.
    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        let nx = self.axes[0].nodes;
        [node % nx, node / nx]
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        ix + self.axes[0].nodes * iy
    }

    /// Coordinates `[x, y]` of a node; `y = 0` on one-dimensional grids.
    pub fn coords(&self, node: usize) -> [T; 2] {
        let [ix, iy] = self.multi_index(node);
        let x = self.axes[0].coord(ix);
        let y = if self.dim() == 2 {
            self.axes[1].coord(iy)
        } else {
            T::zero()
        };
        [x, y]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let idx = self.multi_index(node);
        self.axes
            .iter()
            .enumerate()
            .any(|(k, a)| idx[k] == 0 || idx[k] + 1 == a.nodes)
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_boundary(i)).collect()
    }

    /// Index of the neighbour of `node` displaced by `step ∈ {-1, +1}` along axis `k`.
    pub fn neighbour(&self, node: usize, k: usize, step: isize) -> Option<usize> {
        let mut idx = self.multi_index(node);
        let target = idx[k] as isize + step;
        if target < 0 || target >= self.axes[k].nodes as isize {
            return None;
        }
        idx[k] = target as usize;
        Some(self.node_index(idx[0], idx[1]))
    }

    /// Same grid with a different node count per axis.
    pub fn refined(&self, nodes: &[usize]) -> Result<Self> {
        if nodes.len() != self.dim() {
            return Err(Error::Config(format!(
                "expected {} node counts, got {}",
                self.dim(),
                nodes.len()
            )));
        }
        let axes = self
            .axes
            .iter()
            .zip(nodes)
            .map(|(a, &n)| Axis { lo: a.lo, hi: a.hi, nodes: n })
            .collect();
        Self::new(axes, self.analysis_dim)
    }

    pub(crate) fn ensure_same(&self, other: &Grid<T>, what: &str) -> Result<()> {
        if self.axes == other.axes {
            Ok(())
        } else {
            Err(Error::GridMismatch(what.to_string()))
        }
    }
}

/// Nodal values on a grid.
///
/// With `dirichlet_zero` set, every boundary value is exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T> {
    grid: Grid<T>,
    values: Vec<T>,
    dirichlet_zero: bool,
}

impl<T: Scalar> GridFunction<T> {
    pub fn new(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            dirichlet_zero: false,
        })
    }

    /// Grid function with boundary values forced to zero.
    pub fn new_dirichlet(grid: Grid<T>, mut values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        for (i, v) in values.iter_mut().enumerate() {
            if grid.is_boundary(i) {
                *v = T::zero();
            }
        }
        Ok(Self {
            grid,
            values,
            dirichlet_zero: true,
        })
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self {
            values: vec![T::zero(); grid.len()],
            grid: grid.clone(),
            dirichlet_zero: true,
        }
    }

    pub fn constant(grid: &Grid<T>, c: T) -> Self {
        Self {
            values: vec![c; grid.len()],
            grid: grid.clone(),
            dirichlet_zero: c == T::zero(),
        }
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: &Grid<T>, f: impl Fn(T, T) -> T) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let [x, y] = grid.coords(i);
                f(x, y)
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
            dirichlet_zero: false,
        }
    }

    /// Samples `f(x, y)` and forces zero boundary values.
    pub fn from_fn_dirichlet(grid: &Grid<T>, f: impl Fn(T, T) -> T) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                if grid.is_boundary(i) {
                    T::zero()
                } else {
                    let [x, y] = grid.coords(i);
                    f(x, y)
                }
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
            dirichlet_zero: true,
        }
    }

    /// Hat function: one at `node`, zero elsewhere.
    pub fn hat(grid: &Grid<T>, node: usize) -> Self {
        let mut values = vec![T::zero(); grid.len()];
        values[node] = T::one();
        Self {
            grid: grid.clone(),
            dirichlet_zero: !grid.is_boundary(node),
            values,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn dirichlet_zero(&self) -> bool {
        self.dirichlet_zero
    }

    /// True when every boundary value is exactly zero, whether or not the flag is set.
    pub fn vanishes_on_boundary(&self) -> bool {
        (0..self.grid.len()).all(|i| !self.grid.is_boundary(i) || self.values[i] == T::zero())
    }

    /// Applies `f` nodewise, keeping the grid and the boundary flag when `f(0) = 0`.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let values: Vec<T> = self.values.iter().map(|&v| f(v)).collect();
        let keep = self.dirichlet_zero && f(T::zero()) == T::zero();
        Self {
            grid: self.grid.clone(),
            values,
            dirichlet_zero: keep,
        }
    }

    /// Applies `f(node, value)` nodewise.
    pub fn map_indexed(&self, f: impl Fn(usize, T) -> T) -> Self {
        let values: Vec<T> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i, v))
            .collect();
        let mut out = Self {
            grid: self.grid.clone(),
            values,
            dirichlet_zero: false,
        };
        out.dirichlet_zero = self.dirichlet_zero && out.vanishes_on_boundary();
        out
    }

    pub fn scaled(&self, c: T) -> Self {
        self.map(|v| c * v)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "difference of grid functions")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            values,
            dirichlet_zero: self.dirichlet_zero && other.dirichlet_zero,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "sum of grid functions")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            values,
            dirichlet_zero: self.dirichlet_zero && other.dirichlet_zero,
        })
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == T::zero())
    }

    /// Discrete partial derivatives, one vector per axis.
    ///
    /// Interior nodes use central differences; the first and last node on each
    /// axis use the second-order one-sided formula `(∓3u₀ ± 4u₁ ∓ u₂) / 2h`.
    pub fn gradient(&self) -> Vec<Vec<T>> {
        gradient(&self.grid, &self.values)
    }

    /// Reads a CSV table with header `x,value` or `x,y,value`, row-major.
    ///
    /// Coordinates must match the grid nodes to within `1e-9` relative to the spacing.
    pub fn read_csv(grid: &Grid<T>, reader: impl Read) -> Result<Self> {
        let values = read_nodal_csv(grid, reader)?;
        Self::new(grid.clone(), values)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        write_nodal_csv(&self.grid, writer, "value", |i| format_sci(self.values[i]))
    }
}

impl<T> std::ops::Index<usize> for GridFunction<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

pub(crate) fn gradient<T: Scalar>(grid: &Grid<T>, values: &[T]) -> Vec<Vec<T>> {
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    (0..grid.dim())
        .map(|k| {
            let h = grid.spacing(k);
            let n = grid.axis(k).nodes;
            (0..grid.len())
                .map(|i| {
                    let ik = grid.multi_index(i)[k];
                    let at = |s: isize| values[grid.neighbour(i, k, s).expect("in range")];
                    if ik == 0 {
                        (-three * values[i] + four * at(1) - at(2)) / (two * h)
                    } else if ik + 1 == n {
                        (three * values[i] - four * at(-1) + at(-2)) / (two * h)
                    } else {
                        (at(1) - at(-1)) / (two * h)
                    }
                })
                .collect()
        })
        .collect()
}

/// Seventeen significant digits, scientific notation.
pub fn format_sci<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}

pub(crate) fn read_nodal_csv<T: Scalar>(grid: &Grid<T>, reader: impl Read) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected: Vec<&str> = if grid.dim() == 1 {
        vec!["x", "value"]
    } else {
        vec!["x", "y", "value"]
    };
    if headers.len() != expected.len() || headers.iter().zip(&expected).any(|(h, e)| h != *e) {
        return Err(Error::Config(format!(
            "csv header must be `{}`, got `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut values = Vec::with_capacity(grid.len());
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if row >= grid.len() {
            return Err(Error::Config(format!(
                "csv has more rows than the grid's {} nodes",
                grid.len()
            )));
        }
        let parse = |s: &str, col: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| {
                Error::Config(format!("csv row {}: column `{col}` is not a number: `{s}`", row + 2))
            })
        };
        let coords = grid.coords(row);
        for k in 0..grid.dim() {
            let c = parse(&record[k], expected[k])?;
            let tol = 1e-9 * grid.spacing(k).to_f64_lossy();
            if (c - coords[k].to_f64_lossy()).abs() > tol {
                return Err(Error::Config(format!(
                    "csv row {}: coordinate {} = {c} does not match grid node {}",
                    row + 2,
                    expected[k],
                    coords[k]
                )));
            }
        }
        values.push(T::lit(parse(&record[grid.dim()], "value")?));
    }
    if values.len() != grid.len() {
        return Err(Error::Config(format!(
            "csv has {} rows, grid has {} nodes",
            values.len(),
            grid.len()
        )));
    }
    Ok(values)
}

pub(crate) fn write_nodal_csv<T: Scalar>(
    grid: &Grid<T>,
    writer: impl Write,
    column: &str,
    value: impl Fn(usize) -> String,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if grid.dim() == 1 {
        w.write_record(["x", column])?;
    } else {
        w.write_record(["x", "y", column])?;
    }
    for i in 0..grid.len() {
        let [x, y] = grid.coords(i);
        if grid.dim() == 1 {
            w.write_record([format_sci(x), value(i)])?;
        } else {
            w.write_record([format_sci(x), format_sci(y), value(i)])?;
        }
    }
    w.flush()?;
    Ok(())
}
