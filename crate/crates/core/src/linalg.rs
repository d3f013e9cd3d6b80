//! Dense vector and matrix helpers shared by the local and outer solvers.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Accum, Mat, MatMut, MatRef, Par};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// `A x` for a dense column-major matrix.
pub fn matvec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![0.0; a.nrows()];
    faer::linalg::matmul::matmul(
        MatMut::from_column_major_slice_mut(&mut y, a.nrows(), 1),
        Accum::Replace,
        a.as_ref(),
        MatRef::from_column_major_slice(x, x.len(), 1),
        1.0,
        Par::Seq,
    );
    y
}

/// LU factorization of a local Jacobian, tagged with the state it was
/// computed at.
#[derive(Debug, Clone)]
pub struct FactoredJacobian {
    lu: PartialPivLu<f64>,
    /// Row equilibration applied before factoring: collocation rows and
    /// boundary rows differ in scale by orders of magnitude.
    row_scale: Vec<f64>,
    state: Vec<f64>,
}

impl FactoredJacobian {
    /// Returns `None` when a pivot is zero or non-finite.
    pub fn new(jac: &Mat<f64>, state: &[f64]) -> Option<Self> {
        let row_scale: Vec<f64> = (0..jac.nrows())
            .map(|r| {
                let m = (0..jac.ncols()).fold(0.0_f64, |m, c| m.max(jac[(r, c)].abs()));
                if m > 0.0 && m.is_finite() { 1.0 / m } else { 1.0 }
            })
            .collect();
        let scaled = Mat::from_fn(jac.nrows(), jac.ncols(), |r, c| row_scale[r] * jac[(r, c)]);
        let lu = scaled.partial_piv_lu();
        let u = lu.U();
        let n = u.nrows().min(u.ncols());
        for k in 0..n {
            let p = u[(k, k)];
            if p == 0.0 || !p.is_finite() {
                return None;
            }
        }
        Some(Self {
            lu,
            row_scale,
            state: state.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    /// State the factorization was computed at.
    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Same factorization, re-tagged. Only valid when the Jacobian does not
    /// depend on the state.
    pub fn with_state(mut self, state: &[f64]) -> Self {
        self.state = state.to_vec();
        self
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        for (v, s) in x.iter_mut().zip(&self.row_scale) {
            *v *= s;
        }
        self.lu
            .solve_in_place(MatMut::from_column_major_slice_mut(x, n, 1));
    }
}
