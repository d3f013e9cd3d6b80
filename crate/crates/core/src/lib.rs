//! Overlapping Schwarz decomposition with per-subdomain Chebyshev
//! collocation, solved by Newton–Krylov–Schwarz, by Schwarz-preconditioned
//! Newton–Krylov, and by its two-level variant with a coarse FAS correction.

pub mod chebyshev;
pub mod decomposition;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod local;
pub mod newton_krylov;
pub mod pde;
pub mod solvers;
pub mod sparse;
pub mod transfer;
pub mod twolevel;

pub use error::{Error, Result};
