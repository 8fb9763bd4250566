//! Sparse storage, direct factorization, operator norms and eigenvalue
//! computations.

pub mod eigen;
pub mod lu;
pub mod matrix;

pub use eigen::{dense_complex_eigenvalues, eigs_shift_invert, operator_norm_2, Norm2Estimate};
pub use lu::{lu_factorize, LuFactors, LuSolve, LuStats};
pub use matrix::SparseMatrix;
