//! Per-subdomain operator `f_i`, its exact Jacobian, and the local nonlinear
//! solve used by the nonlinearly preconditioned residual.
//!
//! Rows are aligned with the unknowns: the row of component `c` at node `k`
//! is the PDE residual when `k` is in `X_i`, the boundary residual when `k`
//! is in `G_i0`, and the nodal value itself when `k` is in some `G_ij`.

use std::sync::Arc;

use faer::Mat;

use crate::decomposition::{NodeKind, Subdomain};
use crate::error::{Error, Result};
use crate::linalg::{self, FactoredJacobian};
use crate::pde::{GridOps, JacobianRows, LocalField, PdeProblem};

#[derive(Debug, Clone, Copy)]
pub struct LocalSolveOptions {
    /// Stop when `‖f_i(w) − t_i‖ ≤ tol · max(1, ‖f_i(u_i) − t_i‖)`, or when a
    /// full Newton step is below `tol · max(1, ‖w‖∞)` in max norm.
    pub tol: f64,
    pub max_iterations: usize,
    /// Step halvings allowed when the residual norm does not decrease.
    pub max_halvings: usize,
    /// Pseudo-transient steps tried when damped Newton stalls; 0 disables
    /// the fallback.
    pub max_pseudo_steps: usize,
    pub initial_time_step: f64,
}

impl Default for LocalSolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iterations: 50,
            max_halvings: 8,
            max_pseudo_steps: 400,
            initial_time_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LocalSolveStats {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LocalSolution {
    /// Correction `z_i` with `f_i(u_i − z_i) = t_i`.
    pub z: Vec<f64>,
    /// Factorization of `f_i'(u_i − z_i)`.
    pub jacobian: FactoredJacobian,
    pub stats: LocalSolveStats,
}

#[derive(Debug, Clone)]
pub struct LocalOperator {
    id: usize,
    ops: GridOps,
    kinds: Vec<NodeKind>,
    problem: Arc<dyn PdeProblem>,
}

impl LocalOperator {
    pub fn new(sub: &Subdomain, problem: Arc<dyn PdeProblem>) -> Self {
        Self {
            id: sub.id,
            ops: GridOps::new(sub.grid.clone()),
            kinds: sub.kinds().to_vec(),
            problem,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn ops(&self) -> &GridOps {
        &self.ops
    }

    pub fn n_nodes(&self) -> usize {
        self.ops.len()
    }

    pub fn ncomp(&self) -> usize {
        self.problem.ncomp()
    }

    /// Block length `n_i × ncomp`.
    pub fn dim(&self) -> usize {
        self.n_nodes() * self.ncomp()
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn problem(&self) -> &Arc<dyn PdeProblem> {
        &self.problem
    }

    /// `f_i(u_i)`.
    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let nc = self.ncomp();
        let n = self.n_nodes();
        assert_eq!(u.len(), n * nc);
        let field = LocalField::new(&self.ops, u, nc);
        let mut out = vec![0.0; n * nc];
        let mut buf = vec![0.0; nc];
        for (k, kind) in self.kinds.iter().enumerate() {
            match kind {
                NodeKind::Interior => self.problem.interior_residual(&field, k, &mut buf),
                NodeKind::Physical => self.problem.boundary_residual(&field, k, &mut buf),
                NodeKind::Interface(_) => {
                    for (c, b) in buf.iter_mut().enumerate() {
                        *b = u[c * n + k];
                    }
                }
            }
            for c in 0..nc {
                out[c * n + k] = buf[c];
            }
        }
        out
    }

    /// `f_i'(u_i)`, dense.
    pub fn jacobian(&self, u: &[f64]) -> Mat<f64> {
        let nc = self.ncomp();
        let n = self.n_nodes();
        assert_eq!(u.len(), n * nc);
        let field = LocalField::new(&self.ops, u, nc);
        let mut jac = Mat::zeros(n * nc, n * nc);
        for (k, kind) in self.kinds.iter().enumerate() {
            let mut rows = JacobianRows::new(&mut jac, &self.ops, k);
            match kind {
                NodeKind::Interior => self.problem.interior_jacobian(&field, k, &mut rows),
                NodeKind::Physical => self.problem.boundary_jacobian(&field, k, &mut rows),
                NodeKind::Interface(_) => {
                    for c in 0..nc {
                        rows.add_value(c, c, 1.0);
                    }
                }
            }
        }
        jac
    }

    pub fn factor(&self, u: &[f64]) -> Result<FactoredJacobian> {
        FactoredJacobian::new(&self.jacobian(u), u).ok_or(Error::SingularBlock(self.id))
    }

    /// Solves `f_i(u_i − z_i) = t_i` for `z_i`: damped Newton with dense
    /// direct solves, falling back to pseudo-transient continuation from
    /// `u_i` when Newton stalls at a nonzero residual.
    pub fn solve(&self, u: &[f64], t: &[f64], opts: &LocalSolveOptions) -> Result<LocalSolution> {
        assert_eq!(t.len(), u.len());
        let norm0 = linalg::norm2(&linalg::sub(&self.eval(u), t));
        let target = opts.tol * norm0.max(1.0);
        let newton = self.newton(u, t, target, opts, LocalSolveStats::default());
        let (w, factor, stats) = match newton {
            Err(Error::LocalDivergence { .. }) if opts.max_pseudo_steps > 0 => self.pseudo_transient(u, t, target, opts)?,
            other => other?,
        };
        Ok(LocalSolution {
            z: linalg::sub(u, &w),
            jacobian: factor,
            stats,
        })
    }

    fn divergence(&self, stats: LocalSolveStats) -> Error {
        Error::LocalDivergence {
            subdomain: self.id,
            iterations: stats.iterations,
            history: stats.residual_history,
        }
    }

    /// Damped Newton from `start`; returns the iterate, the factorization
    /// of the Jacobian there, and the accumulated statistics.
    fn newton(
        &self,
        start: &[f64],
        t: &[f64],
        target: f64,
        opts: &LocalSolveOptions,
        mut stats: LocalSolveStats,
    ) -> Result<(Vec<f64>, FactoredJacobian, LocalSolveStats)> {
        let mut w = start.to_vec();
        let mut res = linalg::sub(&self.eval(&w), t);
        let mut norm = linalg::norm2(&res);
        if stats.residual_history.is_empty() {
            stats.residual_history.push(norm);
        }
        if !norm.is_finite() {
            return Err(self.divergence(stats));
        }

        let mut converged = norm <= target;
        let mut last_factor: Option<FactoredJacobian> = None;
        let mut steps = 0;
        while !converged {
            if steps == opts.max_iterations {
                return Err(self.divergence(stats));
            }
            steps += 1;
            stats.iterations += 1;
            let factor = self.factor(&w)?;
            let mut step = factor.solve(&res);
            for s in &mut step {
                *s = -*s;
            }
            let tiny_step = linalg::norm_inf(&step) <= opts.tol * linalg::norm_inf(&w).max(1.0);

            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..=opts.max_halvings {
                let mut trial = w.clone();
                linalg::axpy(lambda, &step, &mut trial);
                let trial_res = linalg::sub(&self.eval(&trial), t);
                let trial_norm = linalg::norm2(&trial_res);
                if trial_norm.is_finite() && trial_norm < norm {
                    accepted = Some((trial, trial_res, trial_norm));
                    break;
                }
                lambda *= 0.5;
            }
            match accepted {
                Some((trial, trial_res, trial_norm)) => {
                    w = trial;
                    res = trial_res;
                    norm = trial_norm;
                    stats.residual_history.push(norm);
                    converged = norm <= target || (lambda == 1.0 && tiny_step);
                    if self.problem.is_linear() {
                        last_factor = Some(factor);
                    }
                }
                // No decrease is possible from a negligible step: the
                // residual sits at its rounding floor.
                None if tiny_step => {
                    converged = true;
                    last_factor = Some(factor);
                }
                None => return Err(self.divergence(stats)),
            }
        }

        let factor = match last_factor {
            Some(f) if f.state() == w.as_slice() => f,
            Some(f) if self.problem.is_linear() => f.with_state(&w),
            _ => self.factor(&w)?,
        };
        Ok((w, factor, stats))
    }

    /// Pseudo-transient continuation `s (w − w_k)/Δt + f_i(w) − t_i = 0`
    /// on interior rows, one linearized step per pseudo-time level, with
    /// `Δt` grown by the residual ratio. Finishes with Newton once the
    /// residual has dropped far enough.
    fn pseudo_transient(
        &self,
        u: &[f64],
        t: &[f64],
        target: f64,
        opts: &LocalSolveOptions,
    ) -> Result<(Vec<f64>, FactoredJacobian, LocalSolveStats)> {
        let n = self.n_nodes();
        let sign = self.problem.pseudo_time_sign();
        let rows: Vec<usize> = (0..self.ncomp())
            .flat_map(|c| {
                self.kinds
                    .iter()
                    .enumerate()
                    .filter(|(_, k)| **k == NodeKind::Interior)
                    .map(move |(k, _)| c * n + k)
            })
            .collect();

        let mut stats = LocalSolveStats::default();
        let mut w = u.to_vec();
        let mut res = linalg::sub(&self.eval(&w), t);
        let mut norm = linalg::norm2(&res);
        let norm0 = norm;
        stats.residual_history.push(norm);
        let mut dt = opts.initial_time_step;
        for _ in 0..opts.max_pseudo_steps {
            if norm <= target || norm <= 1e-6 * norm0 {
                break;
            }
            stats.iterations += 1;
            let mut jac = self.jacobian(&w);
            for &r in &rows {
                jac[(r, r)] += sign / dt;
            }
            let factor = FactoredJacobian::new(&jac, &w).ok_or(Error::SingularBlock(self.id))?;
            let step = factor.solve(&res);
            let mut trial = w.clone();
            linalg::axpy(-1.0, &step, &mut trial);
            let trial_res = linalg::sub(&self.eval(&trial), t);
            let next = linalg::norm2(&trial_res);
            // Linearized steps that blow the residual up are retried with a
            // shorter pseudo-time step.
            if !next.is_finite() || next > 2.0 * norm {
                dt *= 0.25;
                continue;
            }
            stats.residual_history.push(next);
            w = trial;
            res = trial_res;
            dt = (dt * norm / next).min(1e12);
            norm = next;
        }
        if norm > 1e-6 * norm0 && norm > target {
            return Err(self.divergence(stats));
        }
        self.newton(&w, t, target, opts, stats)
    }
}
