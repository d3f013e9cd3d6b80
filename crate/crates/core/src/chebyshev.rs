//! Chebyshev collocation on intervals and rectangles.
//!
//! Nodes are the second-kind (extrema) Chebyshev points, stored in ascending
//! order. All interpolation goes through the barycentric formula, which stays
//! well conditioned for every grid size used here.

use std::f64::consts::PI;

use faer::Mat;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Relative distance (in units of the interval length) under which an
/// evaluation point is treated as coinciding with a node.
pub const NODE_TOLERANCE: f64 = 1e-14;

/// Second-kind Chebyshev points mapped to `[a, b]`, ascending, with exact
/// endpoints.
pub fn cheb_points(n: usize, a: f64, b: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "Chebyshev grid needs at least 2 points, got {n}"
        )));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "invalid interval [{a}, {b}]"
        )));
    }
    let m = (n - 1) as f64;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut pts: Vec<f64> = (0..n)
        .map(|k| {
            // -cos(k pi / m) written as a sine so that symmetric nodes come out
            // exactly symmetric.
            let t = (PI * (2.0 * k as f64 - m) / (2.0 * m)).sin();
            mid + half * t
        })
        .collect();
    pts[0] = a;
    pts[n - 1] = b;
    Ok(pts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    a: f64,
    b: f64,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid1D {
    pub fn new(n: usize, a: f64, b: f64) -> Result<Self> {
        let points = cheb_points(n, a, b)?;
        let weights = (0..n)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                if k == 0 || k == n - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        Ok(Self {
            a,
            b,
            points,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn bary_weights(&self) -> &[f64] {
        &self.weights
    }

    fn coincident_node(&self, x: f64) -> Option<usize> {
        let tol = NODE_TOLERANCE * (self.b - self.a);
        // Nodes are sorted; the nearest one is adjacent to the insertion point.
        let pos = self.points.partition_point(|&p| p < x);
        [pos.wrapping_sub(1), pos]
            .into_iter()
            .filter(|&k| k < self.n())
            .find(|&k| (x - self.points[k]).abs() <= tol)
    }

    /// Lagrange basis values at `x` (one row of an interpolation matrix).
    pub fn basis_at(&self, x: f64) -> Vec<f64> {
        let n = self.n();
        let mut row = vec![0.0; n];
        if let Some(k) = self.coincident_node(x) {
            row[k] = 1.0;
            return row;
        }
        let mut denom = 0.0;
        for k in 0..n {
            let t = self.weights[k] / (x - self.points[k]);
            row[k] = t;
            denom += t;
        }
        for v in &mut row {
            *v /= denom;
        }
        row
    }
}

/// Barycentric interpolant of nodal `values` evaluated at `x`.
pub fn bary_eval(g: &Grid1D, values: &[f64], x: f64) -> f64 {
    assert_eq!(values.len(), g.n());
    if let Some(k) = g.coincident_node(x) {
        return values[k];
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..g.n() {
        let t = g.weights[k] / (x - g.points[k]);
        num += t * values[k];
        den += t;
    }
    num / den
}

/// First-derivative collocation matrix (n x n).
pub fn diff_matrix(g: &Grid1D) -> Mat<f64> {
    let n = g.n();
    let x = &g.points;
    let w = &g.weights;
    let mut d = Mat::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (w[j] / w[i]) / (x[i] - x[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}

/// Interpolation matrix from the nodes of `src` to arbitrary points.
pub fn interp_matrix(src: &Grid1D, dst_points: &[f64]) -> Mat<f64> {
    let mut m = Mat::zeros(dst_points.len(), src.n());
    for (r, &x) in dst_points.iter().enumerate() {
        for (c, v) in src.basis_at(x).into_iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    m
}

/// Tensor-product Chebyshev grid. Linear node index is x-fastest:
/// `index(i, j) = j * nx + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    gx: Grid1D,
    gy: Grid1D,
}

impl TensorGrid {
    pub fn new(gx: Grid1D, gy: Grid1D) -> Self {
        Self { gx, gy }
    }

    pub fn on_rect(nx: usize, ny: usize, x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        Ok(Self::new(Grid1D::new(nx, x.0, x.1)?, Grid1D::new(ny, y.0, y.1)?))
    }

    pub fn gx(&self) -> &Grid1D {
        &self.gx
    }

    pub fn gy(&self) -> &Grid1D {
        &self.gy
    }

    pub fn nx(&self) -> usize {
        self.gx.n()
    }

    pub fn ny(&self) -> usize {
        self.gy.n()
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx() && j < self.ny());
        j * self.nx() + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx(), idx / self.nx())
    }

    pub fn point(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.coords(idx);
        (self.gx.points[i], self.gy.points[j])
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// True when the node lies on the boundary of the grid's rectangle.
    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j) = self.coords(idx);
        i == 0 || j == 0 || i + 1 == self.nx() || j + 1 == self.ny()
    }

    fn same_rect(&self, other: &TensorGrid) -> bool {
        self.gx.interval() == other.gx.interval() && self.gy.interval() == other.gy.interval()
    }

    /// Sparse interpolation row for a single point.
    pub fn basis_at(&self, x: f64, y: f64) -> Vec<(usize, f64)> {
        let rx = self.gx.basis_at(x);
        let ry = self.gy.basis_at(y);
        let mut row = Vec::new();
        for (j, &wy) in ry.iter().enumerate() {
            if wy == 0.0 {
                continue;
            }
            for (i, &wx) in rx.iter().enumerate() {
                if wx != 0.0 {
                    row.push((self.index(i, j), wx * wy));
                }
            }
        }
        row
    }

    /// Evaluates the tensor interpolant of nodal `values` at a point.
    pub fn eval(&self, values: &[f64], x: f64, y: f64) -> f64 {
        self.basis_at(x, y)
            .into_iter()
            .map(|(k, w)| w * values[k])
            .sum()
    }
}

pub fn tensor_interp_matrix(src: &TensorGrid, dst_points: &[(f64, f64)]) -> CsrMatrix {
    CsrMatrix::from_rows(
        src.len(),
        dst_points.iter().map(|&(x, y)| src.basis_at(x, y)),
    )
}

/// Restriction (fine to coarse) and prolongation (coarse to fine) between two
/// grids on the same rectangle.
pub fn restriction_prolongation(
    fine: &TensorGrid,
    coarse: &TensorGrid,
) -> Result<(CsrMatrix, CsrMatrix)> {
    if !fine.same_rect(coarse) {
        return Err(Error::InvalidArgument(
            "restriction/prolongation grids cover different rectangles".into(),
        ));
    }
    if coarse.nx() > fine.nx() || coarse.ny() > fine.ny() {
        return Err(Error::InvalidArgument(format!(
            "coarse grid {}x{} is finer than fine grid {}x{}",
            coarse.nx(),
            coarse.ny(),
            fine.nx(),
            fine.ny()
        )));
    }
    let r = tensor_interp_matrix(fine, &coarse.points());
    let p = tensor_interp_matrix(coarse, &fine.points());
    Ok((r, p))
}
