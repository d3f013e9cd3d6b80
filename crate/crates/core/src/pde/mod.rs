//! Nonlinear PDE definitions evaluated by collocation on a subdomain grid.
//!
//! A problem supplies the interior operator, the physical boundary operator,
//! and their exact linearizations. Residuals and Jacobian rows are produced
//! one node at a time from a [`LocalField`], which already holds the
//! derivatives of every component.

mod burgers;
mod cavity;
mod field;
mod poisson;

use std::fmt::Debug;
use std::sync::Arc;

pub use burgers::{burgers_boundary, Burgers};
pub use cavity::{lid_profile, Cavity};
pub use field::{GridOps, JacobianRows, LocalField};
pub use poisson::Poisson;

use crate::error::Result;

pub trait PdeProblem: Send + Sync + Debug {
    fn name(&self) -> &'static str;

    /// Number of solution components.
    fn ncomp(&self) -> usize;

    /// Residual of every component of the interior operator at `node`.
    fn interior_residual(&self, field: &LocalField, node: usize, out: &mut [f64]);

    fn interior_jacobian(&self, field: &LocalField, node: usize, rows: &mut JacobianRows);

    /// Residual of every component of the boundary operator at `node`.
    fn boundary_residual(&self, field: &LocalField, node: usize, out: &mut [f64]);

    fn boundary_jacobian(&self, field: &LocalField, node: usize, rows: &mut JacobianRows);

    /// Starting state of the outer iteration at a point.
    fn initial_guess(&self, x: f64, y: f64, out: &mut [f64]);

    /// Whether the Jacobian is independent of the state.
    fn is_linear(&self) -> bool {
        false
    }

    /// Sign `s` such that `s ∂u/∂t + r(u) = 0` is a stable evolution for the
    /// interior residual `r`: `−1` when the principal part is `+Δ`, `+1`
    /// when it is `−Δ`.
    fn pseudo_time_sign(&self) -> f64;
}

/// `Δu = forcing` with homogeneous Dirichlet data.
pub fn poisson_problem<F>(forcing: F) -> Arc<dyn PdeProblem>
where
    F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
{
    Arc::new(Poisson::new(forcing))
}

pub fn burgers_problem(nu: f64) -> Result<Arc<dyn PdeProblem>> {
    Ok(Arc::new(Burgers::new(nu)?))
}

pub fn cavity_problem(re: f64) -> Result<Arc<dyn PdeProblem>> {
    Ok(Arc::new(Cavity::new(re)?))
}
