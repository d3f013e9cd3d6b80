use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::config::{ExperimentConfig, ProblemKind, SolverKind};
use crate::decomposition::{Decomposition, Rect};
use crate::error::{Error, Result};
use crate::local::LocalSolveOptions;
use crate::newton_krylov::{inexact_newton, NewtonOptions, OuterSystem, SolveReport};
use crate::pde::{burgers_problem, cavity_problem, PdeProblem, Poisson};
use crate::solvers::{Discretization, NksSystem, SnkSystem};
use crate::twolevel::{CoarseSpace, FasCorrection, FasOptions, TwoLevelSystem};

/// Environment variable that overrides the configured thread count.
pub const THREADS_ENV: &str = "SCHWARZ_THREADS";

pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<(Arc<dyn PdeProblem>, Rect)> {
    let p = &cfg.problem;
    let (problem, default_domain): (Arc<dyn PdeProblem>, Rect) = match p.kind {
        // Manufactured solution sin(πx) sin(πy).
        ProblemKind::Poisson => (
            Arc::new(Poisson::new(|x, y| -2.0 * PI * PI * (PI * x).sin() * (PI * y).sin())),
            Rect::unit_square(),
        ),
        ProblemKind::Burgers => (
            burgers_problem(p.nu.ok_or_else(|| Error::Config("missing nu".into()))?)?,
            Rect::new(-1.0, 1.0, -1.0, 1.0)?,
        ),
        ProblemKind::Cavity => (
            cavity_problem(p.re.ok_or_else(|| Error::Config("missing re".into()))?)?,
            Rect::unit_square(),
        ),
    };
    let domain = match cfg.decomposition.domain {
        Some([x0, x1, y0, y1]) => Rect::new(x0, x1, y0, y1)?,
        None => default_domain,
    };
    Ok((problem, domain))
}

pub fn build_discretization(cfg: &ExperimentConfig) -> Result<Arc<Discretization>> {
    cfg.validate()?;
    let (problem, domain) = build_problem(cfg)?;
    let d = &cfg.decomposition;
    let dec = Decomposition::build_uniform(domain, d.mx, d.my, d.overlap, d.nx, d.ny)?;
    Discretization::new(dec, problem)
}

fn local_options(cfg: &ExperimentConfig) -> LocalSolveOptions {
    LocalSolveOptions {
        tol: cfg.solver.local_tol,
        ..LocalSolveOptions::default()
    }
}

pub fn newton_options(cfg: &ExperimentConfig) -> NewtonOptions {
    NewtonOptions {
        rtol: cfg.solver.rtol,
        max_iterations: cfg.solver.max_outer,
        gmres_max_iterations: cfg.solver.gmres_max,
        ..NewtonOptions::default()
    }
}

/// Outer system for the configured solver.
pub fn build_system(cfg: &ExperimentConfig, disc: &Arc<Discretization>) -> Result<Box<dyn OuterSystem>> {
    let local = local_options(cfg);
    Ok(match cfg.solver.kind {
        SolverKind::Nks => Box::new(NksSystem::new(disc.clone())),
        SolverKind::Snk => Box::new(SnkSystem::new(disc.clone(), local)),
        SolverKind::Snk2 => {
            let coarse = cfg
                .coarse
                .as_ref()
                .ok_or_else(|| Error::Config("snk2 requires a [coarse] section".into()))?;
            let space = CoarseSpace::new(disc.clone(), coarse.nx, coarse.ny)?;
            let mut opts = FasOptions {
                local,
                ..FasOptions::default()
            };
            opts.newton.rtol = cfg.solver.coarse_tol;
            let fas = FasCorrection::new(space, coarse.form, opts);
            Box::new(TwoLevelSystem::new(fas, Box::new(SnkSystem::new(disc.clone(), local))))
        }
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub label: String,
    pub solver: SolverKind,
    pub threads: usize,
    pub report: SolveReport,
    pub solution: Vec<f64>,
    pub discretization: Arc<Discretization>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingSummary {
    pub label: String,
    pub solver: String,
    pub threads: usize,
    pub converged: bool,
    pub outer_iterations: usize,
    pub gmres_iterations: usize,
    pub final_relative_residual: f64,
    pub total_seconds: f64,
    pub residual_seconds: f64,
    pub jacobian_seconds: f64,
}

impl ExperimentOutcome {
    pub fn timing(&self) -> TimingSummary {
        TimingSummary {
            label: self.label.clone(),
            solver: self.solver.name().into(),
            threads: self.threads,
            converged: self.report.converged(),
            outer_iterations: self.report.outer_iterations(),
            gmres_iterations: self.report.total_gmres_iterations(),
            final_relative_residual: self.report.final_relative_residual(),
            total_seconds: self.total_seconds,
            residual_seconds: self.report.residual_seconds(),
            jacobian_seconds: self.report.jacobian_seconds(),
        }
    }

    /// Writes `history.csv`, `timing.csv`, `decomposition.toml` and the
    /// resolved `config.toml` into `dir`.
    pub fn write_artifacts(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.report.write_csv(fs::File::create(dir.join("history.csv"))?)?;
        let mut w = csv::Writer::from_path(dir.join("timing.csv"))?;
        w.serialize(self.timing())?;
        w.flush()?;
        let geometry = toml::to_string(&self.discretization.decomposition().summary())
            .map_err(|e| Error::Config(e.to_string()))?;
        fs::write(dir.join("decomposition.toml"), geometry)?;
        fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
        Ok(())
    }
}

pub fn run_with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Builds the configured discretization and solver stack and runs inexact
/// Newton from the problem's initial guess. Artifacts are written when the
/// config names an output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let disc = build_discretization(cfg)?;
    let threads = cfg.solver.threads;
    let outcome = run_with_pool(threads, || -> Result<ExperimentOutcome> {
        let start = Instant::now();
        let mut system = build_system(cfg, &disc)?;
        let u0 = disc.initial_guess();
        let (solution, report) = inexact_newton(system.as_mut(), &u0, &newton_options(cfg))?;
        Ok(ExperimentOutcome {
            label: cfg.label(),
            solver: cfg.solver.kind,
            threads,
            report,
            solution,
            discretization: disc.clone(),
            total_seconds: start.elapsed().as_secs_f64(),
        })
    })??;
    if let Some(dir) = &cfg.output.dir {
        outcome.write_artifacts(cfg, dir)?;
    }
    Ok(outcome)
}
