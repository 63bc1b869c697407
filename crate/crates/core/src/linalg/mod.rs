//! Sparse iterative solvers for the full-order systems and small dense
//! kernels for POD and the reduced model.

pub mod dense;
pub mod krylov;
pub mod sparse;

pub use dense::{lu_solve, sym_eig, DenseMatrix, LuFactors, SymmetricEigen};
pub use krylov::{bicgstab_solve, cg_solve, Solution, SolverOptions, DEFAULT_TOLERANCE};
pub use sparse::{CsrBuilder, CsrMatrix};
