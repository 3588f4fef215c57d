//! Exact mixed-integer linear programming for desk-scale models.
//!
//! Build a [`ModelSpec`] with finite-bounded continuous and binary
//! variables, then call [`solve`]. The solver is a depth-first
//! branch-and-bound over a dense bounded simplex; see [`solve`] for the
//! search policy. [`lp_format`] writes and reads models in the common
//! CPLEX-style LP text format for cross-checking with external tools.

mod lp;
pub mod lp_format;
mod model;
mod presolve;
mod solve;

pub use model::{Comparison, Constraint, Integrality, ModelError, ModelSpec, Sense, VarId, Variable};
pub use solve::{solve, MilpSolution, SolveOptions, SolveStatus};
