use std::fmt;
use std::sync::Arc;

use super::{JacobianRows, LocalField, PdeProblem};

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Linear control problem: `Δu − forcing = 0` in the interior,
/// `u − boundary = 0` on the physical boundary.
#[derive(Clone)]
pub struct Poisson {
    forcing: ScalarFn,
    boundary: ScalarFn,
}

impl Poisson {
    pub fn new<F>(forcing: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            forcing: Arc::new(forcing),
            boundary: Arc::new(|_, _| 0.0),
        }
    }

    /// Dirichlet data `u = g` instead of `u = 0`.
    pub fn with_boundary<G>(mut self, g: G) -> Self
    where
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.boundary = Arc::new(g);
        self
    }
}

impl fmt::Debug for Poisson {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Poisson").finish_non_exhaustive()
    }
}

impl PdeProblem for Poisson {
    fn name(&self) -> &'static str {
        "poisson"
    }

    fn ncomp(&self) -> usize {
        1
    }

    fn interior_residual(&self, field: &LocalField, node: usize, out: &mut [f64]) {
        let (x, y) = field.point(node);
        out[0] = field.lap(0, node) - (self.forcing)(x, y);
    }

    fn interior_jacobian(&self, _field: &LocalField, _node: usize, rows: &mut JacobianRows) {
        rows.add_lap(0, 0, 1.0);
    }

    fn boundary_residual(&self, field: &LocalField, node: usize, out: &mut [f64]) {
        let (x, y) = field.point(node);
        out[0] = field.value(0, node) - (self.boundary)(x, y);
    }

    fn boundary_jacobian(&self, _field: &LocalField, _node: usize, rows: &mut JacobianRows) {
        rows.add_value(0, 0, 1.0);
    }

    fn pseudo_time_sign(&self) -> f64 {
        -1.0
    }

    fn initial_guess(&self, x: f64, y: f64, out: &mut [f64]) {
        out[0] = (self.boundary)(x, y);
    }

    fn is_linear(&self) -> bool {
        true
    }
}
