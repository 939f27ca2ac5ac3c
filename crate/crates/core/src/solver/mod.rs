//! Global assembly, Dirichlet elimination, static condensation and Newton
//! iterations.

mod condense;
mod newton;
mod problem;
mod sparse;

pub use condense::{newton_update, static_condense, CondensedSystem};
pub use newton::{
    continuation_schedule, max_divergence_residual, newton_solve, newton_solve_with, solve, solve_from,
    ContinuationStage, LinearSolverStats, NewtonConfig, NewtonReport, NewtonStatus, SolveReport,
};
pub use problem::{
    apply_dirichlet, assemble_jacobian, assemble_residual, field, zero_field, DiscreteProblem, DiscreteState,
    ProblemOptions, VectorField,
};
pub use sparse::{DenseLu, LinearSolver, SparseLu, SparseMatrix};
