//! Coarse-space FAS correction `c(u)` and the two-level system
//! `h(u) = c(u) + F(u + c(u))`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chebyshev::restriction_prolongation;
use crate::error::{Error, Result};
use crate::linalg;
use crate::local::LocalSolveOptions;
use crate::newton_krylov::{gmres, inexact_newton, LinearMap, NewtonOptions, OuterSystem, SolveReport};
use crate::solvers::{Discretization, NksSystem, SnkSystem};
use crate::sparse::CsrMatrix;

/// Fine and coarse discretizations over the same subdomain boxes, with
/// block-diagonal restriction and prolongation.
#[derive(Debug)]
pub struct CoarseSpace {
    fine: Arc<Discretization>,
    coarse: Arc<Discretization>,
    restriction: Vec<CsrMatrix>,
    prolongation: Vec<CsrMatrix>,
}

impl CoarseSpace {
    pub fn new(fine: Arc<Discretization>, nx: usize, ny: usize) -> Result<Arc<Self>> {
        let coarse = fine.with_grid_size(nx, ny)?;
        let mut restriction = Vec::new();
        let mut prolongation = Vec::new();
        for (f, c) in fine
            .decomposition()
            .subdomains()
            .iter()
            .zip(coarse.decomposition().subdomains())
        {
            let (r, p) = restriction_prolongation(&f.grid, &c.grid)?;
            restriction.push(r);
            prolongation.push(p);
        }
        Ok(Arc::new(Self {
            fine,
            coarse,
            restriction,
            prolongation,
        }))
    }

    pub fn fine(&self) -> &Arc<Discretization> {
        &self.fine
    }

    pub fn coarse(&self) -> &Arc<Discretization> {
        &self.coarse
    }

    pub fn restriction(&self, i: usize) -> &CsrMatrix {
        &self.restriction[i]
    }

    pub fn prolongation(&self, i: usize) -> &CsrMatrix {
        &self.prolongation[i]
    }

    fn map(&self, ops: &[CsrMatrix], from: &crate::transfer::Layout, to: &crate::transfer::Layout, v: &[f64]) -> Result<Vec<f64>> {
        from.check(v)?;
        let nc = from.ncomp();
        let blocks: Vec<Vec<f64>> = ops
            .par_iter()
            .enumerate()
            .map(|(i, m)| {
                let (ns, nt) = (from.nodes(i), to.nodes(i));
                let vi = from.block(v, i);
                let mut out = Vec::with_capacity(nc * nt);
                for c in 0..nc {
                    out.extend(m.matvec(&vi[c * ns..(c + 1) * ns]));
                }
                out
            })
            .collect();
        Ok(to.concat(blocks))
    }

    /// `R u`, blockwise.
    pub fn restrict(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.map(&self.restriction, self.fine.layout(), self.coarse.layout(), u)
    }

    /// `P û`, blockwise.
    pub fn prolong(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.map(&self.prolongation, self.coarse.layout(), self.fine.layout(), u)
    }
}

/// Which operator the FAS coarse equation is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FasForm {
    /// `f − T` on both levels, whatever the outer operator.
    #[default]
    Discrete,
    /// The nonlinearly preconditioned `g` on both levels; the coarse
    /// equation then needs coarse local solves inside each coarse residual.
    Preconditioned,
}

/// How the coarse FAS equation is solved for the discrete form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarseSolver {
    /// Newton on `w − f̂⁻¹(T̂w + τ)`, which has the same roots as
    /// `f̂(w) − T̂w = τ` but is far less sensitive to the starting guess.
    #[default]
    Preconditioned,
    /// Newton directly on `f̂(w) − T̂w − τ`.
    Direct,
}

#[derive(Debug, Clone, Copy)]
pub struct FasOptions {
    pub solver: CoarseSolver,
    /// Scale `σ` of the restricted fine residual; the correction is
    /// `P ê / σ`. `σ = 1` is the plain scheme.
    pub damping: f64,
    pub newton: NewtonOptions,
    /// Relative GMRES tolerance of the coarse linear solve in `c'(u) v`.
    pub linear_tol: f64,
    pub linear_max_iterations: usize,
    pub local: LocalSolveOptions,
}

impl Default for FasOptions {
    fn default() -> Self {
        Self {
            solver: CoarseSolver::default(),
            damping: 1.0,
            newton: NewtonOptions {
                rtol: 1e-11,
                ..NewtonOptions::default()
            },
            linear_tol: 1e-12,
            linear_max_iterations: 200,
            local: LocalSolveOptions::default(),
        }
    }
}

pub trait CoarseCorrection: Send {
    /// `c(u)`; caches what `jacobian_apply` needs at `u`.
    fn correction(&mut self, u: &[f64]) -> Result<Vec<f64>>;

    fn linearize(&mut self, u: &[f64]) -> Result<()>;

    /// `c'(u) v`.
    fn jacobian_apply(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>>;

    /// Whether `c` is affine in `u`.
    fn is_linear(&self) -> bool {
        false
    }
}

/// `F̂(e + base) − shift` on the coarse level.
struct Shifted<'a> {
    inner: &'a mut dyn OuterSystem,
    base: &'a [f64],
    shift: &'a [f64],
}

impl OuterSystem for Shifted<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn residual(&mut self, e: &[f64]) -> Result<Vec<f64>> {
        let r = self.inner.residual(&linalg::add(e, self.base))?;
        Ok(linalg::sub(&r, self.shift))
    }
    fn linearize(&mut self, e: &[f64]) -> Result<()> {
        self.inner.linearize(&linalg::add(e, self.base))
    }
    fn jacobian_apply(&self, e: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.inner.jacobian_apply(&linalg::add(e, self.base), v)
    }
    fn is_linear(&self) -> bool {
        self.inner.is_linear()
    }
    fn has_preconditioner(&self) -> bool {
        self.inner.has_preconditioner()
    }
    fn precondition(&self, e: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        self.inner.precondition(&linalg::add(e, self.base), r)
    }
}

struct FasState {
    fine_state: Vec<f64>,
    coarse_base: Vec<f64>,
    coarse_endpoint: Vec<f64>,
    correction: Vec<f64>,
    report: SolveReport,
}

/// Full approximation scheme correction: solve
/// `F̂(ê + Ru) − F̂(Ru) + R F(u) = 0` for `ê` and return `P ê`.
pub struct FasCorrection {
    space: Arc<CoarseSpace>,
    fine: Box<dyn OuterSystem>,
    coarse_at_base: Box<dyn OuterSystem>,
    coarse_at_endpoint: Box<dyn OuterSystem>,
    form: FasForm,
    options: FasOptions,
    state: Option<FasState>,
    coarse_outer_iterations: usize,
}

impl FasCorrection {
    pub fn new(space: Arc<CoarseSpace>, form: FasForm, options: FasOptions) -> Self {
        let build = |disc: &Arc<Discretization>| -> Box<dyn OuterSystem> {
            match form {
                FasForm::Discrete => Box::new(NksSystem::new(disc.clone())),
                FasForm::Preconditioned => Box::new(SnkSystem::new(disc.clone(), options.local)),
            }
        };
        Self {
            fine: build(space.fine()),
            coarse_at_base: build(space.coarse()),
            coarse_at_endpoint: build(space.coarse()),
            space,
            form,
            options,
            state: None,
            coarse_outer_iterations: 0,
        }
    }

    pub fn space(&self) -> &Arc<CoarseSpace> {
        &self.space
    }

    /// Report of the latest coarse Newton solve.
    pub fn last_coarse_report(&self) -> Option<&SolveReport> {
        self.state.as_ref().map(|s| &s.report)
    }

    /// Coarse Newton steps summed over every correction computed so far.
    pub fn coarse_outer_iterations(&self) -> usize {
        self.coarse_outer_iterations
    }

    fn current(&self, u: &[f64]) -> Result<&FasState> {
        match &self.state {
            Some(s) if s.fine_state == u => Ok(s),
            _ => Err(Error::StateMismatch("coarse correction was computed at a different state")),
        }
    }
}

impl CoarseCorrection for FasCorrection {
    fn is_linear(&self) -> bool {
        self.space.fine().problem().is_linear()
    }

    fn correction(&mut self, u: &[f64]) -> Result<Vec<f64>> {
        if let Some(s) = &self.state {
            if s.fine_state == u {
                return Ok(s.correction.clone());
            }
        }
        let fine_res = self.fine.residual(u)?;
        let base = self.space.restrict(u)?;
        let base_res = self.coarse_at_base.residual(&base)?;
        let sigma = self.options.damping;
        let mut restricted = self.space.restrict(&fine_res)?;
        restricted.iter_mut().for_each(|r| *r *= sigma);
        let shift = linalg::sub(&base_res, &restricted);

        // The coarse equation is a difference of two coarse residuals, so
        // its attainable accuracy is limited by their rounding error.
        let mut newton = self.options.newton;
        let floor = 1e-13 * linalg::norm2(&base_res).max(linalg::norm2(&restricted));
        newton.atol = newton.atol.max(floor);

        let (e, report) = if self.form == FasForm::Discrete && self.options.solver == CoarseSolver::Preconditioned {
            let mut sys = SnkSystem::new(self.space.coarse().clone(), self.options.local).with_source(shift)?;
            newton.atol = self.options.newton.atol.max(1e-13 * linalg::norm_inf(&base).max(1.0));
            let (w, report) = inexact_newton(&mut sys, &base, &newton)?;
            (linalg::sub(&w, &base), report)
        } else {
            let zero = vec![0.0; base.len()];
            let mut sys = Shifted {
                inner: self.coarse_at_endpoint.as_mut(),
                base: &base,
                shift: &shift,
            };
            inexact_newton(&mut sys, &zero, &newton)?
        };
        if !report.converged() {
            return Err(Error::CoarseDivergence(format!(
                "coarse Newton stopped with {:?} at relative residual {:.3e} after {} steps",
                report.termination,
                report.final_relative_residual(),
                report.outer_iterations()
            )));
        }
        self.coarse_outer_iterations += report.outer_iterations();
        let endpoint = linalg::add(&e, &base);
        let mut correction = self.space.prolong(&e)?;
        correction.iter_mut().for_each(|c| *c /= sigma);
        self.state = Some(FasState {
            fine_state: u.to_vec(),
            coarse_base: base,
            coarse_endpoint: endpoint,
            correction: correction.clone(),
            report,
        });
        Ok(correction)
    }

    fn linearize(&mut self, u: &[f64]) -> Result<()> {
        self.correction(u)?;
        let s = self.state.as_ref().expect("correction sets state");
        let (base, endpoint) = (s.coarse_base.clone(), s.coarse_endpoint.clone());
        self.fine.linearize(u)?;
        self.coarse_at_base.linearize(&base)?;
        self.coarse_at_endpoint.linearize(&endpoint)
    }

    fn jacobian_apply(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let s = self.current(u)?;
        let fine_dir = self.fine.jacobian_apply(u, v)?;
        let restricted = self.space.restrict(&fine_dir)?;
        let vc = self.space.restrict(v)?;
        let at_end = self.coarse_at_endpoint.jacobian_apply(&s.coarse_endpoint, &vc)?;
        let at_base = self.coarse_at_base.jacobian_apply(&s.coarse_base, &vc)?;
        let mut rhs = linalg::sub(&at_base, &at_end);
        linalg::axpy(-self.options.damping, &restricted, &mut rhs);

        let op = self.coarse_at_endpoint.as_ref();
        let end = &s.coarse_endpoint;
        let mut apply = |w: &[f64]| op.jacobian_apply(end, w);
        let mut pc = |w: &[f64]| op.precondition(end, w);
        let pc_opt: Option<&mut LinearMap<'_>> =
            if op.has_preconditioner() { Some(&mut pc) } else { None };
        let out = gmres(
            &mut apply,
            pc_opt,
            &rhs,
            self.options.linear_tol,
            self.options.linear_max_iterations,
        )?;
        let mut cv = self.space.prolong(&out.x)?;
        cv.iter_mut().for_each(|c| *c /= self.options.damping);
        Ok(cv)
    }
}

/// `c(u) = 0`: the two-level system collapses onto its base.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoCorrection {
    dim: usize,
}

impl NoCorrection {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl CoarseCorrection for NoCorrection {
    fn correction(&mut self, _u: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.dim])
    }
    fn linearize(&mut self, _u: &[f64]) -> Result<()> {
        Ok(())
    }
    fn jacobian_apply(&self, _u: &[f64], _v: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.dim])
    }
    fn is_linear(&self) -> bool {
        true
    }
}

/// `h(u) = c(u) + F(u + c(u))` with
/// `h'(u) v = c'(u) v + F'(u + c(u)) (v + c'(u) v)`.
pub struct TwoLevelSystem<C: CoarseCorrection> {
    coarse: C,
    base: Box<dyn OuterSystem>,
    cache: Option<(Vec<f64>, Vec<f64>)>,
}

impl<C: CoarseCorrection> TwoLevelSystem<C> {
    pub fn new(coarse: C, base: Box<dyn OuterSystem>) -> Self {
        Self {
            coarse,
            base,
            cache: None,
        }
    }

    pub fn coarse(&self) -> &C {
        &self.coarse
    }

    fn shifted(&self, u: &[f64]) -> Result<Vec<f64>> {
        match &self.cache {
            Some((state, c)) if state == u => Ok(linalg::add(u, c)),
            _ => Err(Error::StateMismatch("two-level caches were built at a different state")),
        }
    }
}

impl<C: CoarseCorrection> OuterSystem for TwoLevelSystem<C> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn residual(&mut self, u: &[f64]) -> Result<Vec<f64>> {
        let c = self.coarse.correction(u)?;
        let shifted = linalg::add(u, &c);
        let r = self.base.residual(&shifted)?;
        let h = linalg::add(&c, &r);
        self.cache = Some((u.to_vec(), c));
        Ok(h)
    }

    fn linearize(&mut self, u: &[f64]) -> Result<()> {
        if !matches!(&self.cache, Some((s, _)) if s == u) {
            self.residual(u)?;
        }
        self.coarse.linearize(u)?;
        let shifted = self.shifted(u)?;
        self.base.linearize(&shifted)
    }

    fn jacobian_apply(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let shifted = self.shifted(u)?;
        let cv = self.coarse.jacobian_apply(u, v)?;
        let dir = linalg::add(v, &cv);
        let bv = self.base.jacobian_apply(&shifted, &dir)?;
        Ok(linalg::add(&cv, &bv))
    }

    fn is_linear(&self) -> bool {
        self.coarse.is_linear() && self.base.is_linear()
    }
}
