//! Multi-objective bilevel optimization.
//!
//! The crate solves problems of the form
//!
//! ```text
//! min_x  ( F_1(x, y*(x)) + g_1(x), …, F_m(x, y*(x)) + g_m(x) )
//! s.t.   y*(x) = argmin_y f(x, y)
//! ```
//!
//! with `f` strongly convex in `y`. It contains:
//!
//! - [`problem`]: the [`BilevelProblem`] oracle interface and a seeded quadratic
//!   test family with closed-form lower-level solution and hypergradients.
//! - [`direction`]: the per-iteration x-subproblem (min-norm point of the convex
//!   hull of approximate hypergradients, plus a weighted-ℓ₁ proximal variant).
//! - [`gmoba`]: the single-loop gMOBA solver with Lyapunov diagnostics.
//! - [`moml`]: a truncated iterative-differentiation baseline.
//! - [`pareto`]: exact Pareto fronts for the quadratic family.
//! - [`metrics`]: purity, GD, spreads, spacing, `d_p` and feasibility.
//! - [`l2o`]: the unrolled, trainable warm start that precedes gMOBA.
//! - [`harness`]: multi-start campaigns, config files and CSV/JSON output.
//!
//! Runnable walkthroughs for each piece live in the crate's `examples/`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(a > 0.0)` also rejects NaN.

pub mod direction;
pub mod error;
pub mod gmoba;
pub mod harness;
pub mod l2o;
pub mod metrics;
pub mod moml;
pub mod pareto;
pub mod problem;
pub mod rng;

pub use direction::{min_norm_simplex, solve_x_subproblem, stationarity_residual, DirectionResult, SimplexWeights};
pub use error::{Error, Result};
pub use gmoba::{gmoba_step, hypergradient_error, lyapunov, solve, RunRecord, SolverConfig, SolverState, Termination};
pub use pareto::{nondominated_filter, scalarized_solution, sweep_front, ParetoFront};
pub use problem::{
    generate_instance, recommend_steps, BilevelProblem, Constraint, EvalPoint, ExactOracle, Matrix, Nonsmooth,
    ProblemDims, QuadraticInstance, Vector,
};
