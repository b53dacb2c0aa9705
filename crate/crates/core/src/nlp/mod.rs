//! Direct-transcription nonlinear programs and a dense SQP solver for them.

mod problem;
pub mod qp;
mod sqp;

pub use problem::{
    count_variables, finite_difference_check, BlockKind, Derivatives, Evaluation, FnProblem, NlpProblem, ProblemError,
    VariableBlock, VariableLayout,
};
pub use sqp::{solve, NlpSolution, SolveStatus, SolverOptions};
