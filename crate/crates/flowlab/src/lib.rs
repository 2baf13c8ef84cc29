//! Numerical laboratory for gradient flows with branching equilibrium
//! manifolds: spectral Galerkin discretization, an exactly solvable
//! non-local flow used as an integration oracle, kernel-dimension checks
//! at degenerate equilibria, and convergence-rate classification.

pub mod basis;
pub mod cli;
pub mod equilibria;
pub mod error;
pub mod flows;
pub mod integrate;
pub mod metrics;
pub mod nonlocal;

pub use error::{Error, Result};
