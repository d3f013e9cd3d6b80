use super::{JacobianRows, LocalField, PdeProblem};
use crate::error::{Error, Result};

const U: usize = 0;
const V: usize = 1;
const W: usize = 2;

/// Smooth lid velocity: `exp(s²/(s²−1))` with `s = (y−1)/0.1` for `y > 0.9`,
/// zero below. Equals 1 at `y = 1` and vanishes with all derivatives at
/// `y = 0.9`.
pub fn lid_profile(y: f64) -> f64 {
    let s = (y - 1.0) / 0.1;
    if y <= 0.9 || s * s >= 1.0 {
        return 0.0;
    }
    let s2 = s * s;
    (s2 / (s2 - 1.0)).exp()
}

fn lid_derivative(y: f64) -> f64 {
    let s = (y - 1.0) / 0.1;
    if y <= 0.9 || s * s >= 1.0 {
        return 0.0;
    }
    let q = s * s - 1.0;
    lid_profile(y) * (-2.0 * s / (q * q)) / 0.1
}

/// Regularized driven cavity in velocity-vorticity form, components
/// `(u, v, ω)`.
#[derive(Debug, Clone, Copy)]
pub struct Cavity {
    re: f64,
}

impl Cavity {
    pub fn new(re: f64) -> Result<Self> {
        if !(re > 0.0) || !re.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Reynolds number must be positive, got {re}"
            )));
        }
        Ok(Self { re })
    }

    pub fn re(&self) -> f64 {
        self.re
    }
}

impl PdeProblem for Cavity {
    fn name(&self) -> &'static str {
        "cavity"
    }

    fn ncomp(&self) -> usize {
        3
    }

    fn interior_residual(&self, f: &LocalField, k: usize, out: &mut [f64]) {
        out[U] = -f.lap(U, k) - f.dy(W, k);
        out[V] = -f.lap(V, k) + f.dx(W, k);
        out[W] = -f.lap(W, k) / self.re + f.value(U, k) * f.dx(W, k) + f.value(V, k) * f.dy(W, k);
    }

    fn interior_jacobian(&self, f: &LocalField, k: usize, rows: &mut JacobianRows) {
        rows.add_lap(U, U, -1.0);
        rows.add_dy(U, W, -1.0);

        rows.add_lap(V, V, -1.0);
        rows.add_dx(V, W, 1.0);

        rows.add_lap(W, W, -1.0 / self.re);
        rows.add_value(W, U, f.dx(W, k));
        rows.add_dx(W, W, f.value(U, k));
        rows.add_value(W, V, f.dy(W, k));
        rows.add_dy(W, W, f.value(V, k));
    }

    fn boundary_residual(&self, f: &LocalField, k: usize, out: &mut [f64]) {
        let (_, y) = f.point(k);
        out[U] = f.value(U, k) - lid_profile(y);
        out[V] = f.value(V, k);
        out[W] = f.value(W, k) + f.dy(U, k) - f.dx(V, k);
    }

    fn boundary_jacobian(&self, _f: &LocalField, _k: usize, rows: &mut JacobianRows) {
        rows.add_value(U, U, 1.0);
        rows.add_value(V, V, 1.0);
        rows.add_value(W, W, 1.0);
        rows.add_dy(W, U, 1.0);
        rows.add_dx(W, V, -1.0);
    }

    fn pseudo_time_sign(&self) -> f64 {
        1.0
    }

    fn initial_guess(&self, _x: f64, y: f64, out: &mut [f64]) {
        out[U] = lid_profile(y);
        out[V] = 0.0;
        out[W] = -lid_derivative(y);
    }
}
