//! Path-cover adaptive algebraic multigrid for weighted graph Laplacians.
//!
//! The building blocks are a CSR matrix type ([`sparse`]), graph readers and
//! generators ([`graph_io`]), matching and path-cover aggregation
//! ([`coarsening`]), hierarchies and cycles ([`multigrid`]) and the adaptive
//! outer solvers ([`adaptive`]).

pub mod adaptive;
pub mod cli;
pub mod coarsening;
pub mod error;
pub mod graph_io;
pub mod multigrid;
pub mod sparse;

pub use adaptive::{
    approximate_smooth_error, baseline_uaamg, solve_general, solve_homogeneous, AdaptiveConfig, Resetup, SolveReport,
};
pub use error::{Error, Result};
pub use multigrid::{mwm_setup, pc_setup, CycleParams, Hierarchy};
pub use sparse::SparseMatrix;
