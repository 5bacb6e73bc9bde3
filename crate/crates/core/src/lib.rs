//! Nonlocal diffusion with Neumann-type exterior conditions on uniform
//! Cartesian grids.
//!
//! A [`Discretization`] bundles a [`Grid`], a [`Kernel`] and the table of
//! cell-pair interaction weights. Strong operators, bilinear forms, solvers
//! and constant estimators all read from that one table.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod linalg;
pub mod solve;

pub use analysis::{ConstantReport, EigenOptions};
pub use assembly::{Discretization, SparseOperator};
pub use error::{Error, Result};
pub use geometry::{build_grid, detect_nonlocal_boundary, Aabb, CellTag, Domain, Grid};
pub use kernel::{Kernel, Point};
pub use solve::{RobinSet, SolveResult, SolveStatus, SolverOptions};
