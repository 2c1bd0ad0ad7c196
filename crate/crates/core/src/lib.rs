//! Finite-dimensional laboratory for KMS states, modular theory, trace
//! inequalities on noncommutative L_p spaces and Dyson-type expansionals.

pub mod config;
pub mod error;
pub mod exponentiable;
pub mod expansional;
pub mod matrix;
pub mod modular;
pub mod perturbation;
pub mod runner;
pub mod quadrature;
pub mod random;
pub mod report;
pub mod schatten;
pub mod simplex;
pub mod suites;

pub use error::{Error, Result};
pub use expansional::{OperatorPath, SeriesBudget, Side};
pub use matrix::{ComplexMatrix, HermitianEigen, MatrixFn, PolarParts};
pub use modular::GnsContext;
pub use report::BoundReport;
pub use schatten::SchattenIndex;
