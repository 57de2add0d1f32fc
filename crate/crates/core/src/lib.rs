//! Deterministic symbolic kernel for structured decision modeling.
//!
//! A decision problem is a scenario, a finite list of candidate actions and a
//! set of constraints. Upstream stages turn the scenario into an
//! action-attribute relevance grid `R` and a per-cell importance grid `w`.
//! This crate owns everything that happens after that without a model in the
//! loop: weights are sparsified, `R` is masked by the surviving weights, each
//! action's utility is its row sum and the feasible argmax is selected.

pub mod constraint;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod problem;
pub mod trace;

pub use constraint::{feasible_actions, parse_constraint, Constraint, ConstraintKind};
pub use error::{KernelError, ProblemError};
pub use grid::Grid;
pub use kernel::{
    apply_mask, render_objective, row_utilities, runner_up, select_action, solve_symbolic,
    sparsify_weights, FilterPolicy, FilteredMatrix, ObjectiveRendering, SymbolicSolution,
    WeightMatrix,
};
pub use problem::{
    canonical_attribute, AttributeTable, ChoiceIndexing, DecisionProblem, RelevanceCell,
    NOT_MENTIONED,
};
pub use trace::{DecisionOutcome, Stage, Step, Trace, TraceEvent, Usage};
