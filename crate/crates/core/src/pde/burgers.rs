use std::f64::consts::PI;

use super::{JacobianRows, LocalField, PdeProblem};
use crate::error::{Error, Result};

/// Dirichlet data `arctan(cos(3π/16) x + sin(3π/16) y)`.
pub fn burgers_boundary(x: f64, y: f64) -> f64 {
    let theta = 3.0 * PI / 16.0;
    (theta.cos() * x + theta.sin() * y).atan()
}

/// Scalar steady Burgers: `ν Δu − u (u_x + u_y) = 0`.
#[derive(Debug, Clone, Copy)]
pub struct Burgers {
    nu: f64,
}

impl Burgers {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "viscosity must be positive, got {nu}"
            )));
        }
        Ok(Self { nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

impl PdeProblem for Burgers {
    fn name(&self) -> &'static str {
        "burgers"
    }

    fn ncomp(&self) -> usize {
        1
    }

    fn interior_residual(&self, f: &LocalField, node: usize, out: &mut [f64]) {
        let u = f.value(0, node);
        out[0] = self.nu * f.lap(0, node) - u * (f.dx(0, node) + f.dy(0, node));
    }

    fn interior_jacobian(&self, f: &LocalField, node: usize, rows: &mut JacobianRows) {
        let u = f.value(0, node);
        rows.add_lap(0, 0, self.nu);
        rows.add_value(0, 0, -(f.dx(0, node) + f.dy(0, node)));
        rows.add_dx(0, 0, -u);
        rows.add_dy(0, 0, -u);
    }

    fn boundary_residual(&self, f: &LocalField, node: usize, out: &mut [f64]) {
        let (x, y) = f.point(node);
        out[0] = f.value(0, node) - burgers_boundary(x, y);
    }

    fn boundary_jacobian(&self, _f: &LocalField, _node: usize, rows: &mut JacobianRows) {
        rows.add_value(0, 0, 1.0);
    }

    fn pseudo_time_sign(&self) -> f64 {
        -1.0
    }

    fn initial_guess(&self, x: f64, y: f64, out: &mut [f64]) {
        out[0] = burgers_boundary(x, y);
    }
}
