//! Unrestarted right-preconditioned GMRES and an inexact Newton driver with
//! backtracking, shared by every outer system.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Nonlinear system with a matrix-free Jacobian. `linearize(u)` must come
/// before `jacobian_apply(u, ·)` and `precondition(u, ·)` at the same `u`.
pub trait OuterSystem: Send {
    fn dim(&self) -> usize;

    fn residual(&mut self, u: &[f64]) -> Result<Vec<f64>>;

    fn linearize(&mut self, u: &[f64]) -> Result<()>;

    fn jacobian_apply(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>>;

    /// Whether the residual is affine in `u`. A linear system is solved in
    /// one Newton step: the Krylov tolerance is set from the target instead
    /// of the forcing schedule.
    fn is_linear(&self) -> bool {
        false
    }

    fn has_preconditioner(&self) -> bool {
        false
    }

    /// Right preconditioner `M⁻¹ r`.
    fn precondition(&self, _u: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }
}

impl<S: OuterSystem + ?Sized> OuterSystem for Box<S> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn residual(&mut self, u: &[f64]) -> Result<Vec<f64>> {
        (**self).residual(u)
    }
    fn linearize(&mut self, u: &[f64]) -> Result<()> {
        (**self).linearize(u)
    }
    fn jacobian_apply(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        (**self).jacobian_apply(u, v)
    }
    fn is_linear(&self) -> bool {
        (**self).is_linear()
    }
    fn has_preconditioner(&self) -> bool {
        (**self).has_preconditioner()
    }
    fn precondition(&self, u: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        (**self).precondition(u, r)
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Estimated `‖b − A x‖ / ‖b‖`.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Matrix-free linear operator or preconditioner handed to [`gmres`].
pub type LinearMap<'a> = dyn FnMut(&[f64]) -> Result<Vec<f64>> + 'a;

/// Solves `A x = b` from `x0 = 0` with right preconditioning `A M⁻¹ y = b`.
pub fn gmres(
    apply: &mut LinearMap<'_>,
    mut precond: Option<&mut LinearMap<'_>>,
    b: &[f64],
    tol: f64,
    max_iterations: usize,
) -> Result<GmresOutcome> {
    let n = b.len();
    let beta = linalg::norm2(b);
    if !beta.is_finite() {
        return Err(Error::NumericalBreakdown("non-finite right-hand side".into()));
    }
    if beta == 0.0 {
        return Ok(GmresOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }

    let mut basis: Vec<Vec<f64>> = vec![b.iter().map(|v| v / beta).collect()];
    // Column k of the Hessenberg matrix, already rotated.
    let mut hess: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];
    let mut relres = 1.0;
    let mut converged = false;

    let precondition = |v: &[f64], p: &mut Option<&mut LinearMap<'_>>| -> Result<Vec<f64>> {
        match p {
            Some(m) => m(v),
            None => Ok(v.to_vec()),
        }
    };

    for k in 0..max_iterations {
        let z = precondition(&basis[k], &mut precond)?;
        let mut w = apply(&z)?;
        if w.len() != n || !linalg::all_finite(&w) {
            return Err(Error::NumericalBreakdown(format!(
                "operator produced a non-finite vector at Krylov step {}",
                k + 1
            )));
        }
        let w_norm = linalg::norm2(&w);
        let mut h = vec![0.0; k + 2];
        for _pass in 0..2 {
            for (j, v) in basis.iter().enumerate() {
                let c = linalg::dot(&w, v);
                h[j] += c;
                linalg::axpy(-c, v, &mut w);
            }
        }
        let h_next = linalg::norm2(&w);
        h[k + 1] = h_next;

        for j in 0..k {
            let t = cs[j] * h[j] + sn[j] * h[j + 1];
            h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
            h[j] = t;
        }
        let r = h[k].hypot(h[k + 1]);
        if r == 0.0 || !r.is_finite() {
            return Err(Error::NumericalBreakdown(format!(
                "singular Krylov projection at step {}",
                k + 1
            )));
        }
        cs.push(h[k] / r);
        sn.push(h[k + 1] / r);
        h[k] = r;
        h[k + 1] = 0.0;
        g.push(-sn[k] * g[k]);
        g[k] *= cs[k];
        hess.push(h);

        relres = g[k + 1].abs() / beta;
        let happy = h_next <= 1e-14 * w_norm;
        if relres <= tol || happy {
            converged = true;
            break;
        }
        basis.push(w.iter().map(|v| v / h_next).collect());
    }

    let m = hess.len();
    let mut y = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = g[i];
        for (j, yj) in y.iter().enumerate().skip(i + 1) {
            s -= hess[j][i] * yj;
        }
        y[i] = s / hess[i][i];
    }
    let mut vy = vec![0.0; n];
    for (v, yj) in basis.iter().zip(&y) {
        linalg::axpy(*yj, v, &mut vy);
    }
    let x = precondition(&vy, &mut precond)?;
    if !linalg::all_finite(&x) {
        return Err(Error::NumericalBreakdown("non-finite Krylov solution".into()));
    }
    Ok(GmresOutcome {
        x,
        iterations: m,
        relative_residual: relres,
        converged,
    })
}

/// Krylov tolerance schedule: `η_0` fixed, then
/// `scale · (‖F_k‖ / ‖F_{k−1}‖)^exponent` clamped to `[min, max]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ForcingSchedule {
    pub initial: f64,
    pub scale: f64,
    pub exponent: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for ForcingSchedule {
    fn default() -> Self {
        Self {
            initial: 1e-4,
            scale: 1e-4,
            exponent: 2.0,
            min: 1e-12,
            max: 1e-4,
        }
    }
}

impl ForcingSchedule {
    pub fn eta(&self, current: f64, previous: Option<f64>) -> f64 {
        match previous {
            None => self.initial,
            Some(p) if p > 0.0 => (self.scale * (current / p).powf(self.exponent)).clamp(self.min, self.max),
            Some(_) => self.min,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Converged when `‖F(u_k)‖ ≤ rtol · ‖F(u_0)‖`.
    pub rtol: f64,
    /// or when `‖F(u_k)‖ ≤ atol`.
    pub atol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub gmres_max_iterations: usize,
    pub forcing: ForcingSchedule,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 0.0,
            max_iterations: 50,
            max_halvings: 8,
            gmres_max_iterations: 200,
            forcing: ForcingSchedule::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

/// One row per outer iterate; row 0 is the initial guess.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual_norm: f64,
    pub relative_residual: f64,
    /// Krylov tolerance used for the step that produced this iterate.
    pub eta: Option<f64>,
    pub gmres_iterations: Option<usize>,
    /// Wall time spent in residual evaluations for this step.
    pub residual_seconds: f64,
    /// Wall time spent linearizing and in the Krylov solve for this step.
    pub jacobian_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// Number of accepted Newton steps.
    pub fn outer_iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn total_gmres_iterations(&self) -> usize {
        self.records.iter().filter_map(|r| r.gmres_iterations).sum()
    }

    pub fn initial_residual(&self) -> f64 {
        self.records[0].residual_norm
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.residual_norm)
    }

    pub fn final_relative_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.relative_residual)
    }

    pub fn residual_seconds(&self) -> f64 {
        self.records.iter().map(|r| r.residual_seconds).sum()
    }

    pub fn jacobian_seconds(&self) -> f64 {
        self.records.iter().map(|r| r.jacobian_seconds).sum()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.records {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<IterationRecord>> {
        let mut rd = csv::Reader::from_reader(r);
        let mut out = Vec::new();
        for rec in rd.deserialize() {
            out.push(rec?);
        }
        Ok(out)
    }
}

/// Inexact Newton with GMRES inner solves and step halving. Recoverable
/// errors from trial residuals count as failed trials.
pub fn inexact_newton(
    system: &mut dyn OuterSystem,
    u0: &[f64],
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = system.dim();
    if u0.len() != n {
        return Err(Error::LayoutMismatch {
            expected: n,
            actual: u0.len(),
        });
    }
    let mut u = u0.to_vec();
    let t = Instant::now();
    let mut res = system.residual(&u)?;
    let first_seconds = t.elapsed().as_secs_f64();
    let mut norm = linalg::norm2(&res);
    if !norm.is_finite() {
        return Err(Error::NumericalBreakdown("non-finite initial residual".into()));
    }
    let norm0 = norm;
    let rel = |x: f64| if norm0 > 0.0 { x / norm0 } else { 0.0 };
    let target = (opts.rtol * norm0).max(opts.atol);
    let mut records = vec![IterationRecord {
        iteration: 0,
        residual_norm: norm,
        relative_residual: rel(norm),
        eta: None,
        gmres_iterations: None,
        residual_seconds: first_seconds,
        jacobian_seconds: 0.0,
    }];
    let mut previous: Option<f64> = None;

    let termination = loop {
        if norm <= target {
            break Termination::Converged;
        }
        if records.len() > opts.max_iterations {
            break Termination::MaxIterations;
        }
        let eta = if system.is_linear() {
            (0.1 * target / norm).clamp(f64::EPSILON, opts.forcing.max)
        } else {
            opts.forcing.eta(norm, previous)
        };

        let t = Instant::now();
        system.linearize(&u)?;
        let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
        let sys_ref: &dyn OuterSystem = &*system;
        let mut apply = |v: &[f64]| sys_ref.jacobian_apply(&u, v);
        let mut pc = |v: &[f64]| sys_ref.precondition(&u, v);
        let pc_opt: Option<&mut LinearMap<'_>> = if sys_ref.has_preconditioner() {
            Some(&mut pc)
        } else {
            None
        };
        let krylov = gmres(&mut apply, pc_opt, &rhs, eta, opts.gmres_max_iterations)?;
        let jacobian_seconds = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut trial = u.clone();
            linalg::axpy(lambda, &krylov.x, &mut trial);
            match system.residual(&trial) {
                Ok(r) => {
                    let rn = linalg::norm2(&r);
                    if rn.is_finite() && rn < norm {
                        accepted = Some((trial, r, rn));
                        break;
                    }
                }
                Err(e) if e.is_recoverable() => {}
                Err(e) => return Err(e),
            }
            lambda *= 0.5;
        }
        let residual_seconds = t.elapsed().as_secs_f64();

        let Some((trial, r, rn)) = accepted else {
            break Termination::LineSearchFailed;
        };
        previous = Some(norm);
        u = trial;
        res = r;
        norm = rn;
        records.push(IterationRecord {
            iteration: records.len(),
            residual_norm: norm,
            relative_residual: rel(norm),
            eta: Some(eta),
            gmres_iterations: Some(krylov.iterations),
            residual_seconds,
            jacobian_seconds,
        });
    };

    // A failed line search may leave the system cached at a rejected trial.
    if termination != Termination::Converged {
        let _ = system.residual(&u);
    }
    Ok((u, SolveReport { records, termination }))
}
