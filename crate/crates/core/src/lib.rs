//! Relaxed IMEX finite-volume schemes for degenerate reaction-diffusion
//! equations and systems, `u_t = D div(A(u) grad u) + g(u)`, in one and two
//! space dimensions.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Stencil loops read more clearly with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod error;
pub mod findiff;
pub mod harness;
pub mod mesh;
pub mod models;
pub mod output;
pub mod reconstruct;
pub mod relax;

pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
pub use findiff::{BoundaryKind, BoundaryPair};
pub use harness::{convergence_study, error_norm, Norm, Reference, RunReport};
pub use mesh::{make_grid, Field, Grid, Grid1D, Grid2D};
pub use models::Problem;
pub use reconstruct::ReconstructionKind;
pub use relax::{run, PhiPolicy, SchemeConfig, Simulation, Snapshot, Solver, Tableau};
