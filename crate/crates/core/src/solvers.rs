//! Outer systems over the global field: the block-preconditioned discrete
//! system `f(u) − Tu` and the nonlinearly preconditioned residual
//! `g(u) = u − f⁻¹(Tu)`.

use std::sync::{Arc, OnceLock};

use faer::Mat;
use rayon::prelude::*;

use crate::decomposition::{Decomposition, NodeKind};
use crate::error::{Error, Result};
use crate::linalg::{self, FactoredJacobian};
use crate::local::{LocalOperator, LocalSolveOptions, LocalSolution};
use crate::newton_krylov::OuterSystem;
use crate::pde::PdeProblem;
use crate::transfer::{Layout, TransferOperator};

/// Everything a level of the method needs: geometry, local operators and
/// the interface transfer.
#[derive(Debug)]
pub struct Discretization {
    decomposition: Decomposition,
    problem: Arc<dyn PdeProblem>,
    locals: Vec<LocalOperator>,
    transfer: TransferOperator,
}

impl Discretization {
    pub fn new(decomposition: Decomposition, problem: Arc<dyn PdeProblem>) -> Result<Arc<Self>> {
        let transfer = TransferOperator::build(&decomposition, problem.ncomp())?;
        let locals = decomposition
            .subdomains()
            .iter()
            .map(|s| LocalOperator::new(s, problem.clone()))
            .collect();
        Ok(Arc::new(Self {
            decomposition,
            problem,
            locals,
            transfer,
        }))
    }

    /// Same problem and subdomain boxes on `nx × ny` grids.
    pub fn with_grid_size(&self, nx: usize, ny: usize) -> Result<Arc<Self>> {
        Self::new(self.decomposition.with_grid_size(nx, ny)?, self.problem.clone())
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    pub fn problem(&self) -> &Arc<dyn PdeProblem> {
        &self.problem
    }

    pub fn locals(&self) -> &[LocalOperator] {
        &self.locals
    }

    pub fn transfer(&self) -> &TransferOperator {
        &self.transfer
    }

    pub fn layout(&self) -> &Arc<Layout> {
        self.transfer.layout()
    }

    pub fn len(&self) -> usize {
        self.layout().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Problem initial guess sampled at every node of every subdomain.
    pub fn initial_guess(&self) -> Vec<f64> {
        let nc = self.problem.ncomp();
        let blocks = self
            .decomposition
            .subdomains()
            .iter()
            .map(|s| {
                let n = s.n_nodes();
                let mut out = vec![0.0; n * nc];
                let mut buf = vec![0.0; nc];
                for k in 0..n {
                    let (x, y) = s.grid.point(k);
                    self.problem.initial_guess(x, y, &mut buf);
                    for c in 0..nc {
                        out[c * n + k] = buf[c];
                    }
                }
                out
            })
            .collect();
        self.layout().concat(blocks)
    }

    /// `cat⟨f_i(u_i)⟩`.
    pub fn local_residuals(&self, u: &[f64]) -> Result<Vec<f64>> {
        let layout = self.layout();
        layout.check(u)?;
        let blocks: Vec<Vec<f64>> = self
            .locals
            .par_iter()
            .enumerate()
            .map(|(i, op)| op.eval(layout.block(u, i)))
            .collect();
        Ok(layout.concat(blocks))
    }

    /// Largest mismatch `|u_i(x) − ũ_j(x)|` over interface nodes.
    pub fn interface_mismatch(&self, u: &[f64]) -> Result<f64> {
        let tu = self.transfer.apply(u)?;
        let layout = self.layout();
        let mut worst = 0.0_f64;
        for (i, s) in self.decomposition.subdomains().iter().enumerate() {
            let n = s.n_nodes();
            let (ui, ti) = (layout.block(u, i), layout.block(&tu, i));
            for (k, kind) in s.kinds().iter().enumerate() {
                if let NodeKind::Interface(_) = kind {
                    for c in 0..layout.ncomp() {
                        worst = worst.max((ui[c * n + k] - ti[c * n + k]).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Runs `f` for every subdomain in parallel and returns the results in
/// subdomain order; on failure the lowest-index error wins.
fn par_blocks<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = (0..n).into_par_iter().map(f).collect();
    results.into_iter().collect()
}

struct NksLinearization {
    state: Vec<f64>,
    jacobians: Vec<Mat<f64>>,
    factors: Vec<OnceLock<Option<FactoredJacobian>>>,
}

/// `F(u) = f(u) − Tu` with the block-diagonal right preconditioner
/// `diag(f_i'(u_i))⁻¹`.
pub struct NksSystem {
    disc: Arc<Discretization>,
    lin: Option<NksLinearization>,
}

impl NksSystem {
    pub fn new(disc: Arc<Discretization>) -> Self {
        Self { disc, lin: None }
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    fn current(&self, u: &[f64]) -> Result<&NksLinearization> {
        match &self.lin {
            Some(l) if l.state == u => Ok(l),
            _ => Err(Error::StateMismatch("block Jacobians were built at a different state")),
        }
    }
}

impl OuterSystem for NksSystem {
    fn dim(&self) -> usize {
        self.disc.len()
    }

    fn residual(&mut self, u: &[f64]) -> Result<Vec<f64>> {
        let mut f = self.disc.local_residuals(u)?;
        let tu = self.disc.transfer.apply(u)?;
        linalg::axpy(-1.0, &tu, &mut f);
        Ok(f)
    }

    fn linearize(&mut self, u: &[f64]) -> Result<()> {
        if matches!(&self.lin, Some(l) if l.state == u) {
            return Ok(());
        }
        let layout = self.disc.layout().clone();
        layout.check(u)?;
        let jacobians: Vec<Mat<f64>> = self
            .disc
            .locals
            .par_iter()
            .enumerate()
            .map(|(i, op)| op.jacobian(layout.block(u, i)))
            .collect();
        let factors = (0..jacobians.len()).map(|_| OnceLock::new()).collect();
        self.lin = Some(NksLinearization {
            state: u.to_vec(),
            jacobians,
            factors,
        });
        Ok(())
    }

    fn jacobian_apply(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let lin = self.current(u)?;
        let layout = self.disc.layout();
        layout.check(v)?;
        let tv = self.disc.transfer.apply(v)?;
        let blocks: Vec<Vec<f64>> = lin
            .jacobians
            .par_iter()
            .enumerate()
            .map(|(i, jac)| linalg::sub(&linalg::matvec(jac, layout.block(v, i)), layout.block(&tv, i)))
            .collect();
        Ok(layout.concat(blocks))
    }

    fn is_linear(&self) -> bool {
        self.disc.problem().is_linear()
    }

    fn has_preconditioner(&self) -> bool {
        true
    }

    fn precondition(&self, u: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        let lin = self.current(u)?;
        let layout = self.disc.layout();
        layout.check(r)?;
        let blocks = par_blocks(layout.n_blocks(), |i| {
            let factor = lin.factors[i]
                .get_or_init(|| FactoredJacobian::new(&lin.jacobians[i], layout.block(u, i)))
                .as_ref()
                .ok_or(Error::SingularBlock(i))?;
            Ok(factor.solve(layout.block(r, i)))
        })?;
        Ok(layout.concat(blocks))
    }
}

/// Per-state cache of the local solves behind `g(u)`.
#[derive(Debug, Clone)]
pub struct SnkCache {
    state: Vec<f64>,
    pub residual: Vec<f64>,
    pub factors: Vec<FactoredJacobian>,
    /// Local Newton iterations per subdomain.
    pub local_iterations: Vec<usize>,
}

/// `g(u) = u − f⁻¹(Tu)`, evaluated by one transfer and independent local
/// nonlinear solves.
pub struct SnkSystem {
    disc: Arc<Discretization>,
    options: LocalSolveOptions,
    source: Option<Vec<f64>>,
    cache: Option<SnkCache>,
    local_solves: usize,
    local_iterations: usize,
}

impl SnkSystem {
    pub fn new(disc: Arc<Discretization>, options: LocalSolveOptions) -> Self {
        Self {
            disc,
            options,
            source: None,
            cache: None,
            local_solves: 0,
            local_iterations: 0,
        }
    }

    /// `u − f⁻¹(Tu + s)`: roots solve `f(u) − Tu = s`.
    pub fn with_source(mut self, source: Vec<f64>) -> Result<Self> {
        self.disc.layout().check(&source)?;
        self.source = Some(source);
        self.cache = None;
        Ok(self)
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn cache(&self) -> Option<&SnkCache> {
        self.cache.as_ref()
    }

    /// Total (local solves, local Newton iterations) over the lifetime of
    /// this system.
    pub fn local_work(&self) -> (usize, usize) {
        (self.local_solves, self.local_iterations)
    }

    fn current(&self, u: &[f64]) -> Result<&SnkCache> {
        match &self.cache {
            Some(c) if c.state == u => Ok(c),
            _ => Err(Error::StateMismatch("local factorizations were computed at a different state")),
        }
    }
}

impl OuterSystem for SnkSystem {
    fn dim(&self) -> usize {
        self.disc.len()
    }

    fn residual(&mut self, u: &[f64]) -> Result<Vec<f64>> {
        if let Some(c) = &self.cache {
            if c.state == u {
                return Ok(c.residual.clone());
            }
        }
        let layout = self.disc.layout().clone();
        let mut tu = self.disc.transfer.apply(u)?;
        if let Some(s) = &self.source {
            linalg::axpy(1.0, s, &mut tu);
        }
        let opts = self.options;
        let locals = &self.disc.locals;
        let solutions: Vec<LocalSolution> = par_blocks(locals.len(), |i| {
            locals[i].solve(layout.block(u, i), layout.block(&tu, i), &opts)
        })?;
        let mut blocks = Vec::with_capacity(solutions.len());
        let mut factors = Vec::with_capacity(solutions.len());
        let mut iterations = Vec::with_capacity(solutions.len());
        for s in solutions {
            blocks.push(s.z);
            factors.push(s.jacobian);
            iterations.push(s.stats.iterations);
        }
        self.local_solves += iterations.len();
        self.local_iterations += iterations.iter().sum::<usize>();
        let residual = layout.concat(blocks);
        self.cache = Some(SnkCache {
            state: u.to_vec(),
            residual: residual.clone(),
            factors,
            local_iterations: iterations,
        });
        Ok(residual)
    }

    fn linearize(&mut self, u: &[f64]) -> Result<()> {
        self.residual(u).map(|_| ())
    }

    fn is_linear(&self) -> bool {
        self.disc.problem().is_linear()
    }

    fn jacobian_apply(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let cache = self.current(u)?;
        let layout = self.disc.layout();
        layout.check(v)?;
        let tv = self.disc.transfer.apply(v)?;
        let blocks: Vec<Vec<f64>> = cache
            .factors
            .par_iter()
            .enumerate()
            .map(|(i, f)| linalg::sub(layout.block(v, i), &f.solve(layout.block(&tv, i))))
            .collect();
        Ok(layout.concat(blocks))
    }
}
