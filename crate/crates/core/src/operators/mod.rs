//! Discrete Laplacian and the first Dirichlet eigenpair.

mod eigen;
mod laplacian;

pub use eigen::{first_eigenpair, EigenPair, EIGEN_BUDGET, EIGEN_TOL};
pub use laplacian::{apply_interior, assemble, laplacian, Closure};
