//! Dense reference implementations built directly from the textbook
//! formulas with nalgebra. Nothing here calls the library's numerics; the
//! library is only consulted for geometry (boxes and node classes).
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use schwarz::decomposition::{Decomposition, NodeKind, Subdomain};

/// Extrema points `−cos(kπ/(n−1))` mapped to `[a, b]`, ascending.
pub fn cheb_nodes(n: usize, a: f64, b: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let s = -(PI * k as f64 / (n - 1) as f64).cos();
            a + (b - a) * (s + 1.0) / 2.0
        })
        .collect()
}

/// Closed-form collocation derivative matrix on the mapped extrema points.
pub fn cheb_diff(n: usize, a: f64, b: f64) -> DMatrix<f64> {
    let s: Vec<f64> = (0..n).map(|k| -(PI * k as f64 / (n - 1) as f64).cos()).collect();
    let c = |k: usize| if k == 0 || k == n - 1 { 2.0 } else { 1.0 };
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[(i, j)] = c(i) / c(j) * sign / (s[i] - s[j]);
            }
        }
    }
    for i in 0..n {
        let row: f64 = (0..n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -row;
    }
    d * (2.0 / (b - a))
}

/// Lagrange basis values by the product formula.
pub fn lagrange(points: &[f64], x: f64) -> Vec<f64> {
    (0..points.len())
        .map(|k| {
            points
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != k)
                .map(|(_, &p)| (x - p) / (points[k] - p))
                .product()
        })
        .collect()
}

/// Dense differential operators of one box, node index `j·nx + i`.
pub struct BoxOps {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub dx: DMatrix<f64>,
    pub dy: DMatrix<f64>,
    pub lap: DMatrix<f64>,
}

impl BoxOps {
    pub fn new(nx: usize, ny: usize, x: (f64, f64), y: (f64, f64)) -> Self {
        let d1x = cheb_diff(nx, x.0, x.1);
        let d1y = cheb_diff(ny, y.0, y.1);
        let dx = DMatrix::identity(ny, ny).kronecker(&d1x);
        let dy = d1y.kronecker(&DMatrix::identity(nx, nx));
        let lap = &dx * &dx + &dy * &dy;
        Self {
            xs: cheb_nodes(nx, x.0, x.1),
            ys: cheb_nodes(ny, y.0, y.1),
            dx,
            dy,
            lap,
        }
    }

    pub fn for_subdomain(s: &Subdomain) -> Self {
        let r = s.rect;
        Self::new(s.grid.nx(), s.grid.ny(), (r.x0, r.x1), (r.y0, r.y1))
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn point(&self, k: usize) -> (f64, f64) {
        let nx = self.xs.len();
        (self.xs[k % nx], self.ys[k / nx])
    }

    /// Interpolant of nodal `values` at `(x, y)`.
    pub fn eval(&self, values: &[f64], x: f64, y: f64) -> f64 {
        let (lx, ly) = (lagrange(&self.xs, x), lagrange(&self.ys, y));
        let nx = self.xs.len();
        let mut acc = 0.0;
        for (j, wy) in ly.iter().enumerate() {
            for (i, wx) in lx.iter().enumerate() {
                acc += wy * wx * values[j * nx + i];
            }
        }
        acc
    }
}

/// Row classes of a box standing alone: every boundary node is physical.
pub fn standalone_kinds(nx: usize, ny: usize) -> Vec<NodeKind> {
    (0..nx * ny)
        .map(|k| {
            let (i, j) = (k % nx, k / nx);
            if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
                NodeKind::Physical
            } else {
                NodeKind::Interior
            }
        })
        .collect()
}

pub fn burgers_data(x: f64, y: f64) -> f64 {
    let t = 3.0 * PI / 16.0;
    (t.cos() * x + t.sin() * y).atan()
}

pub fn lid(y: f64) -> f64 {
    let s = (y - 1.0) / 0.1;
    if y <= 0.9 || s * s >= 1.0 {
        0.0
    } else {
        (s * s / (s * s - 1.0)).exp()
    }
}

/// Reference PDE models, written out independently of the library.
#[derive(Clone, Copy, Debug)]
pub enum Model {
    /// `Δu = −2π² sin(πx) sin(πy)`, `u = 0` on the boundary.
    Poisson,
    Burgers { nu: f64 },
    Cavity { re: f64 },
}

impl Model {
    pub fn ncomp(&self) -> usize {
        match self {
            Model::Cavity { .. } => 3,
            _ => 1,
        }
    }

    /// Local residual `f_i(u_i)`, component-major.
    pub fn residual(&self, ops: &BoxOps, kinds: &[NodeKind], u: &[f64]) -> Vec<f64> {
        let n = ops.len();
        let comp = |c: usize| DVector::from_column_slice(&u[c * n..(c + 1) * n]);
        let mut out = vec![0.0; u.len()];
        match *self {
            Model::Poisson => {
                let lap = &ops.lap * comp(0);
                for k in 0..n {
                    let (x, y) = ops.point(k);
                    out[k] = match kinds[k] {
                        NodeKind::Interior => lap[k] + 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin(),
                        NodeKind::Physical => u[k],
                        NodeKind::Interface(_) => u[k],
                    };
                }
            }
            Model::Burgers { nu } => {
                let v = comp(0);
                let (lap, ux, uy) = (&ops.lap * &v, &ops.dx * &v, &ops.dy * &v);
                for k in 0..n {
                    let (x, y) = ops.point(k);
                    out[k] = match kinds[k] {
                        NodeKind::Interior => nu * lap[k] - u[k] * (ux[k] + uy[k]),
                        NodeKind::Physical => u[k] - burgers_data(x, y),
                        NodeKind::Interface(_) => u[k],
                    };
                }
            }
            Model::Cavity { re } => {
                let (uu, vv, ww) = (comp(0), comp(1), comp(2));
                let (lu, lv, lw) = (&ops.lap * &uu, &ops.lap * &vv, &ops.lap * &ww);
                let (wx, wy) = (&ops.dx * &ww, &ops.dy * &ww);
                let (uy, vx) = (&ops.dy * &uu, &ops.dx * &vv);
                for k in 0..n {
                    let (_, y) = ops.point(k);
                    let r = match kinds[k] {
                        NodeKind::Interior => [
                            -lu[k] - wy[k],
                            -lv[k] + wx[k],
                            -lw[k] / re + uu[k] * wx[k] + vv[k] * wy[k],
                        ],
                        NodeKind::Physical => [uu[k] - lid(y), vv[k], ww[k] + uy[k] - vx[k]],
                        NodeKind::Interface(_) => [uu[k], vv[k], ww[k]],
                    };
                    for c in 0..3 {
                        out[c * n + k] = r[c];
                    }
                }
            }
        }
        out
    }

    /// Local Jacobian by central differences of [`Model::residual`].
    pub fn fd_jacobian(&self, ops: &BoxOps, kinds: &[NodeKind], u: &[f64]) -> DMatrix<f64> {
        let m = u.len();
        let mut j = DMatrix::zeros(m, m);
        let mut w = u.to_vec();
        for c in 0..m {
            let h = 1e-6 * u[c].abs().max(1.0);
            w[c] = u[c] + h;
            let fp = self.residual(ops, kinds, &w);
            w[c] = u[c] - h;
            let fm = self.residual(ops, kinds, &w);
            w[c] = u[c];
            for r in 0..m {
                j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        j
    }

    /// Exact local Jacobian for the scalar models.
    pub fn jacobian(&self, ops: &BoxOps, kinds: &[NodeKind], u: &[f64]) -> DMatrix<f64> {
        let n = ops.len();
        let mut j = DMatrix::zeros(n, n);
        match *self {
            Model::Poisson => {
                for k in 0..n {
                    if kinds[k] == NodeKind::Interior {
                        j.row_mut(k).copy_from(&ops.lap.row(k));
                    } else {
                        j[(k, k)] = 1.0;
                    }
                }
            }
            Model::Burgers { nu } => {
                let v = DVector::from_column_slice(u);
                let s = &ops.dx * &v + &ops.dy * &v;
                for k in 0..n {
                    if kinds[k] == NodeKind::Interior {
                        for c in 0..n {
                            j[(k, c)] = nu * ops.lap[(k, c)] - u[k] * (ops.dx[(k, c)] + ops.dy[(k, c)]);
                        }
                        j[(k, k)] -= s[k];
                    } else {
                        j[(k, k)] = 1.0;
                    }
                }
            }
            Model::Cavity { .. } => return self.fd_jacobian(ops, kinds, u),
        }
        j
    }
}

/// Dense reference for a whole decomposition: local residuals and the
/// transfer operator assembled from product-form Lagrange interpolation.
pub struct DenseSystem {
    pub model: Model,
    pub boxes: Vec<BoxOps>,
    pub kinds: Vec<Vec<NodeKind>>,
    pub offsets: Vec<usize>,
    pub transfer: DMatrix<f64>,
}

impl DenseSystem {
    pub fn new(dec: &Decomposition, model: Model) -> Self {
        let nc = model.ncomp();
        let boxes: Vec<BoxOps> = dec.subdomains().iter().map(BoxOps::for_subdomain).collect();
        let kinds: Vec<Vec<NodeKind>> = dec.subdomains().iter().map(|s| s.kinds().to_vec()).collect();
        let mut offsets = vec![0];
        for b in &boxes {
            offsets.push(offsets.last().unwrap() + nc * b.len());
        }
        let dim = *offsets.last().unwrap();
        let mut transfer = DMatrix::zeros(dim, dim);
        for (i, b) in boxes.iter().enumerate() {
            let n = b.len();
            for k in 0..n {
                if let NodeKind::Interface(j) = kinds[i][k] {
                    let (x, y) = b.point(k);
                    let src = &boxes[j];
                    let (lx, ly) = (lagrange(&src.xs, x), lagrange(&src.ys, y));
                    let snx = src.xs.len();
                    for c in 0..nc {
                        for (jj, wy) in ly.iter().enumerate() {
                            for (ii, wx) in lx.iter().enumerate() {
                                let col = offsets[j] + c * src.len() + jj * snx + ii;
                                transfer[(offsets[i] + c * n + k, col)] += wy * wx;
                            }
                        }
                    }
                }
            }
        }
        Self {
            model,
            boxes,
            kinds,
            offsets,
            transfer,
        }
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block<'a>(&self, u: &'a [f64], i: usize) -> &'a [f64] {
        &u[self.offsets[i]..self.offsets[i + 1]]
    }

    /// `cat⟨f_i(u_i)⟩`.
    pub fn local_residuals(&self, u: &[f64]) -> Vec<f64> {
        (0..self.boxes.len())
            .flat_map(|i| self.model.residual(&self.boxes[i], &self.kinds[i], self.block(u, i)))
            .collect()
    }

    pub fn apply_transfer(&self, u: &[f64]) -> Vec<f64> {
        (&self.transfer * DVector::from_column_slice(u)).as_slice().to_vec()
    }

    /// `f(u) − T u`.
    pub fn nks_residual(&self, u: &[f64]) -> Vec<f64> {
        let tu = self.apply_transfer(u);
        self.local_residuals(u).iter().zip(&tu).map(|(a, b)| a - b).collect()
    }

    /// Block-diagonal `f'(u)`.
    pub fn block_jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..self.boxes.len() {
            let o = self.offsets[i];
            let b = self.model.jacobian(&self.boxes[i], &self.kinds[i], self.block(u, i));
            j.view_mut((o, o), b.shape()).copy_from(&b);
        }
        j
    }
}

/// Dense Newton on one box with every boundary node physical.
pub fn newton_single_box(model: Model, ops: &BoxOps, u0: &[f64], tol: f64) -> Vec<f64> {
    let kinds = standalone_kinds(ops.xs.len(), ops.ys.len());
    let mut u = DVector::from_column_slice(u0);
    for _ in 0..100 {
        let f = DVector::from_vec(model.residual(ops, &kinds, u.as_slice()));
        if f.norm() <= tol {
            return u.as_slice().to_vec();
        }
        let j = model.jacobian(ops, &kinds, u.as_slice());
        let step = j.lu().solve(&f).expect("singular reference Jacobian");
        let mut lambda = 1.0;
        loop {
            let trial = &u - &step * lambda;
            let ft = DVector::from_vec(model.residual(ops, &kinds, trial.as_slice()));
            if ft.norm() < f.norm() || lambda < 1e-3 {
                u = trial;
                break;
            }
            lambda *= 0.5;
        }
    }
    panic!("reference Newton did not converge");
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let s: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / s.max(f64::MIN_POSITIVE)
}
