//! Real linear/semidefinite cone programming.
//!
//! Problems are stated in the standard form of [`ConicProblem`] and solved by
//! a homogeneous primal-dual interior-point method with Nesterov–Todd scaling
//! and Mehrotra predictor-corrector steps. Complex Hermitian matrix
//! inequalities enter through [`embed_hermitian`].

pub mod certify;
pub mod embed;
pub mod error;
pub mod problem;
pub mod solver;
pub mod sparse;
pub mod svec;

pub use certify::{certify_point, certify_solution, CertificateReport};
pub use embed::embed_hermitian;
pub use error::ConicError;
pub use problem::{AffineExpr, Cone, ConicProblem, ProblemBuilder, SymmetricAffine, VarHandle, VariableMap};
pub use solver::{
    solve, solve_with, ConicBackend, ConicSolution, InteriorPoint, IterationRecord, Residuals,
    SolveStatus, SolverSettings,
};
pub use sparse::SparseMatrix;
