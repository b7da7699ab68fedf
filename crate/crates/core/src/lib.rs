//! Subspace evolution and transfer (SET) for consistent low-rank matrix
//! completion.
//!
//! Given the observed entries `X_Ω` of an `m × n` matrix and a target rank
//! `r`, the solver searches the Grassmann manifold of `r`-dimensional column
//! spaces for one whose least-squares fit reproduces every observation. Each
//! outer iteration first looks for *barriers* (maximizers of per-column
//! residual terms that block descent) and jumps across the nearest one, then
//! runs a geodesic line search along a rank-one descent direction.
//!
//! Module map:
//!
//! * [`matrix`], [`io`]: masked matrices, projections, file formats.
//! * [`grassmann`]: orthonormal bases and geodesics.
//! * [`objective`]: the least-squares fit, gradient and search direction.
//! * [`extremals`]: closed-form minimizer/maximizer of each column term.
//! * [`evolution`]: bracketing plus golden-section line search.
//! * [`transfer`]: barrier detection and subspace transfer.
//! * [`solver`]: the outer loop.
//! * [`bench`]: random instances and sampling-rate sweeps.
//! * [`checks`]: oracle checks runnable on demand (`setmc check`).
//! * [`cli`]: the `setmc` command line.

pub mod bench;
pub mod checks;
pub mod cli;
pub mod error;
pub mod evolution;
pub mod extremals;
pub mod grassmann;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod objective;
pub mod solver;
pub mod transfer;

pub use error::{Result, SetError};
pub use grassmann::{Basis, Rank1Geodesic};
pub use matrix::{DenseMatrix, Mask, ObservedMatrix};
pub use objective::{fit, Fit, SearchDirection};
pub use solver::{set_complete, SolverConfig, SolverReport, SolverStatus};
