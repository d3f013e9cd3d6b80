use faer::Mat;

use crate::chebyshev::{diff_matrix, TensorGrid};

/// Differentiation matrices of one tensor grid. Second derivatives are the
/// squares of the first-derivative matrices.
#[derive(Debug, Clone)]
pub struct GridOps {
    grid: TensorGrid,
    dx: Mat<f64>,
    dy: Mat<f64>,
    dxx: Mat<f64>,
    dyy: Mat<f64>,
}

impl GridOps {
    pub fn new(grid: TensorGrid) -> Self {
        let dx = diff_matrix(grid.gx());
        let dy = diff_matrix(grid.gy());
        let dxx = &dx * &dx;
        let dyy = &dy * &dy;
        Self {
            grid,
            dx,
            dy,
            dxx,
            dyy,
        }
    }

    pub fn grid(&self) -> &TensorGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    fn along_x(&self, m: &Mat<f64>, u: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut out = vec![0.0; nx * ny];
        for j in 0..ny {
            let line = &u[j * nx..(j + 1) * nx];
            for i in 0..nx {
                out[j * nx + i] = (0..nx).map(|k| m[(i, k)] * line[k]).sum();
            }
        }
        out
    }

    fn along_y(&self, m: &Mat<f64>, u: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut out = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                out[j * nx + i] = (0..ny).map(|k| m[(j, k)] * u[k * nx + i]).sum();
            }
        }
        out
    }

    pub fn apply_dx(&self, u: &[f64]) -> Vec<f64> {
        self.along_x(&self.dx, u)
    }

    pub fn apply_dy(&self, u: &[f64]) -> Vec<f64> {
        self.along_y(&self.dy, u)
    }

    pub fn apply_dxx(&self, u: &[f64]) -> Vec<f64> {
        self.along_x(&self.dxx, u)
    }

    pub fn apply_dyy(&self, u: &[f64]) -> Vec<f64> {
        self.along_y(&self.dyy, u)
    }

    /// Nonzeros of row `node` of the tensor x-derivative.
    pub fn dx_row(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (i, j) = self.grid.coords(node);
        (0..self.grid.nx()).map(move |k| (self.grid.index(k, j), self.dx[(i, k)]))
    }

    pub fn dy_row(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (i, j) = self.grid.coords(node);
        (0..self.grid.ny()).map(move |k| (self.grid.index(i, k), self.dy[(j, k)]))
    }

    /// Nonzeros of row `node` of the tensor Laplacian; the diagonal appears
    /// twice (once per direction).
    pub fn lap_row(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (i, j) = self.grid.coords(node);
        let xs = (0..self.grid.nx()).map(move |k| (self.grid.index(k, j), self.dxx[(i, k)]));
        let ys = (0..self.grid.ny()).map(move |k| (self.grid.index(i, k), self.dyy[(j, k)]));
        xs.chain(ys)
    }
}

/// Nodal values of all components on one grid, with cached derivatives.
/// Values are component-major: component `c` occupies `c*n..(c+1)*n`.
#[derive(Debug)]
pub struct LocalField<'a> {
    ops: &'a GridOps,
    values: &'a [f64],
    ux: Vec<Vec<f64>>,
    uy: Vec<Vec<f64>>,
    lap: Vec<Vec<f64>>,
}

impl<'a> LocalField<'a> {
    pub fn new(ops: &'a GridOps, values: &'a [f64], ncomp: usize) -> Self {
        let n = ops.len();
        assert_eq!(values.len(), n * ncomp, "field length does not match grid");
        let mut ux = Vec::with_capacity(ncomp);
        let mut uy = Vec::with_capacity(ncomp);
        let mut lap = Vec::with_capacity(ncomp);
        for c in 0..ncomp {
            let u = &values[c * n..(c + 1) * n];
            ux.push(ops.apply_dx(u));
            uy.push(ops.apply_dy(u));
            let mut l = ops.apply_dxx(u);
            for (a, b) in l.iter_mut().zip(ops.apply_dyy(u)) {
                *a += b;
            }
            lap.push(l);
        }
        Self {
            ops,
            values,
            ux,
            uy,
            lap,
        }
    }

    pub fn ops(&self) -> &GridOps {
        self.ops
    }

    pub fn point(&self, node: usize) -> (f64, f64) {
        self.ops.grid().point(node)
    }

    #[inline]
    pub fn value(&self, c: usize, node: usize) -> f64 {
        self.values[c * self.ops.len() + node]
    }

    #[inline]
    pub fn dx(&self, c: usize, node: usize) -> f64 {
        self.ux[c][node]
    }

    #[inline]
    pub fn dy(&self, c: usize, node: usize) -> f64 {
        self.uy[c][node]
    }

    #[inline]
    pub fn lap(&self, c: usize, node: usize) -> f64 {
        self.lap[c][node]
    }
}

/// Writes the linearization of the residual rows of one node into a local
/// Jacobian. Row `(c, node)` sits at `c*n + node`; column `(c', k)` at
/// `c'*n + k`.
pub struct JacobianRows<'a> {
    mat: &'a mut Mat<f64>,
    ops: &'a GridOps,
    node: usize,
}

impl<'a> JacobianRows<'a> {
    pub fn new(mat: &'a mut Mat<f64>, ops: &'a GridOps, node: usize) -> Self {
        Self { mat, ops, node }
    }

    #[inline]
    pub fn add(&mut self, row_comp: usize, col_comp: usize, col_node: usize, v: f64) {
        let n = self.ops.len();
        self.mat[(row_comp * n + self.node, col_comp * n + col_node)] += v;
    }

    /// `d(residual_rc)/d(u_cc)` at this node.
    pub fn add_value(&mut self, row_comp: usize, col_comp: usize, v: f64) {
        let node = self.node;
        self.add(row_comp, col_comp, node, v);
    }

    pub fn add_dx(&mut self, row_comp: usize, col_comp: usize, scale: f64) {
        let ops = self.ops;
        for (k, d) in ops.dx_row(self.node) {
            self.add(row_comp, col_comp, k, scale * d);
        }
    }

    pub fn add_dy(&mut self, row_comp: usize, col_comp: usize, scale: f64) {
        let ops = self.ops;
        for (k, d) in ops.dy_row(self.node) {
            self.add(row_comp, col_comp, k, scale * d);
        }
    }

    pub fn add_lap(&mut self, row_comp: usize, col_comp: usize, scale: f64) {
        let ops = self.ops;
        for (k, d) in ops.lap_row(self.node) {
            self.add(row_comp, col_comp, k, scale * d);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_caches_on_polynomial() {
        let grid = TensorGrid::on_rect(9, 7, (0.0, 1.0), (-1.0, 2.0)).unwrap();
        let ops = GridOps::new(grid.clone());
        let u: Vec<f64> = grid.points().iter().map(|&(x, y)| x * x * y + y.powi(3)).collect();
        let f = LocalField::new(&ops, &u, 1);
        for k in 0..grid.len() {
            let (x, y) = grid.point(k);
            assert!((f.dx(0, k) - 2.0 * x * y).abs() < 1e-11);
            assert!((f.dy(0, k) - (x * x + 3.0 * y * y)).abs() < 1e-10);
            assert!((f.lap(0, k) - (2.0 * y + 6.0 * y)).abs() < 1e-9);
        }
    }

    #[test]
    fn rows_match_applied_operators() {
        let grid = TensorGrid::on_rect(5, 6, (0.0, 1.0), (0.0, 2.0)).unwrap();
        let ops = GridOps::new(grid.clone());
        let u: Vec<f64> = (0..grid.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        let dx = ops.apply_dx(&u);
        let dy = ops.apply_dy(&u);
        let mut lap = ops.apply_dxx(&u);
        for (a, b) in lap.iter_mut().zip(ops.apply_dyy(&u)) {
            *a += b;
        }
        for node in 0..grid.len() {
            let rx: f64 = ops.dx_row(node).map(|(k, d)| d * u[k]).sum();
            let ry: f64 = ops.dy_row(node).map(|(k, d)| d * u[k]).sum();
            let rl: f64 = ops.lap_row(node).map(|(k, d)| d * u[k]).sum();
            assert!((rx - dx[node]).abs() < 1e-12);
            assert!((ry - dy[node]).abs() < 1e-12);
            assert!((rl - lap[node]).abs() < 1e-10);
        }
    }
}
