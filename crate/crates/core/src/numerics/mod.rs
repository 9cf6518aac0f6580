//! Dense complex linear algebra and seeded random streams.
//!
//! Matrices here are small (tens of rows at most), so the solvers are plain
//! O(n³) dense routines. Nothing in this module forms an explicit inverse.

mod matrix;
mod rng;
mod solve;

pub use matrix::{inner, norm_sqr, CMatrix, Matrix, RMatrix, Scalar};
pub use rng::{tag, RngStream};
pub use solve::{general_solve, hermitian_solve, relative_residual, SINGULAR_PIVOT_RATIO};
