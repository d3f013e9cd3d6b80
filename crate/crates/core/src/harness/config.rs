use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::twolevel::FasForm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Poisson,
    Burgers,
    Cavity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Nks,
    Snk,
    Snk2,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Nks => "nks",
            Self::Snk => "snk",
            Self::Snk2 => "snk2",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Burgers viscosity.
    pub nu: Option<f64>,
    /// Cavity Reynolds number.
    pub re: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionConfig {
    pub mx: usize,
    pub my: usize,
    /// Overlap as a fraction of the zone width on each interior side.
    #[serde(default = "default_overlap")]
    pub overlap: f64,
    pub nx: usize,
    pub ny: usize,
    /// `[x0, x1, y0, y1]`; defaults to the problem's usual domain.
    pub domain: Option<[f64; 4]>,
}

fn default_overlap() -> f64 {
    0.25
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub form: FasForm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_local_tol")]
    pub local_tol: f64,
    #[serde(default = "default_coarse_tol")]
    pub coarse_tol: f64,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default = "default_gmres_max")]
    pub gmres_max: usize,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_rtol() -> f64 {
    1e-10
}
fn default_local_tol() -> f64 {
    1e-12
}
fn default_coarse_tol() -> f64 {
    1e-11
}
fn default_max_outer() -> usize {
    50
}
fn default_gmres_max() -> usize {
    200
}
fn default_threads() -> usize {
    1
}
fn default_seed() -> u64 {
    0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// One experiment, fully determined by this file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub problem: ProblemConfig,
    pub decomposition: DecompositionConfig,
    pub coarse: Option<CoarseConfig>,
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seed for anything randomized; the solvers themselves are not.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let d = &self.decomposition;
        if d.mx == 0 || d.my == 0 {
            return bad("decomposition needs at least one zone per direction".into());
        }
        if d.nx < 3 || d.ny < 3 {
            return bad(format!("grid {}x{} too small, need at least 3 points", d.nx, d.ny));
        }
        if !(0.0..1.0).contains(&d.overlap) {
            return bad(format!("overlap {} outside [0, 1)", d.overlap));
        }
        match self.problem.kind {
            ProblemKind::Burgers if !self.problem.nu.is_some_and(|v| v > 0.0) => {
                return bad("burgers needs a positive `nu`".into())
            }
            ProblemKind::Cavity if !self.problem.re.is_some_and(|v| v > 0.0) => {
                return bad("cavity needs a positive `re`".into())
            }
            _ => {}
        }
        let s = &self.solver;
        if s.threads == 0 || s.max_outer == 0 || s.gmres_max == 0 {
            return bad("solver counts must be positive".into());
        }
        for (name, v) in [("rtol", s.rtol), ("local_tol", s.local_tol), ("coarse_tol", s.coarse_tol)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        match (&self.coarse, s.kind) {
            (None, SolverKind::Snk2) => return bad("snk2 requires a [coarse] section".into()),
            (Some(c), _) if c.nx < 3 || c.ny < 3 || c.nx > d.nx || c.ny > d.ny => {
                return bad(format!(
                    "coarse grid {}x{} must be at least 3x3 and no finer than {}x{}",
                    c.nx, c.ny, d.nx, d.ny
                ))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!(
                "{:?}-{}x{}-{}",
                self.problem.kind, self.decomposition.mx, self.decomposition.my, self.solver.kind.name()
            )
            .to_lowercase()
        })
    }
}
