//! Linear optimization over products of free, nonnegative, second-order and
//! rotated second-order cones.
//!
//! Problems are held in standard form ([`ConicProblem`]), usually assembled
//! with [`ProblemBuilder`], solved by [`solve`] and checked by [`certify`].

mod builder;
mod certify;
pub mod dump;
mod error;
mod problem;
mod settings;
mod solution;
mod solve;

pub use builder::{ProblemBuilder, Row, Var};
pub use certify::{certify, certify_vectors, cone_violation, ResidualReport};
pub use error::ConicError;
pub use problem::{Cone, ConeKind, ConicProblem, SparseMatrix};
pub use settings::SolverSettings;
pub use solution::{ConicSolution, SolveStatus};
pub use solve::solve;
