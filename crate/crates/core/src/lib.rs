//! Linear-programming solvers for finite discounted Markov decision processes.
//!
//! The crate covers three ways of computing (approximate) value functions:
//!
//! * the exact LP over all state values,
//! * the approximate LP (ALP), which restricts the value function to the span
//!   of a feature matrix `Φ` and keeps all `n·d` Bellman constraints,
//! * the generalized reduced LP (GRLP), which replaces those constraints by
//!   `m` nonnegative combinations `Wᵀ` of them.
//!
//! Alongside the solvers sit the least-upper-bound projection `Γ` and its
//! aggregated counterpart `Γ̃`, which are used to compute the terms of the
//! GRLP error bound `(6·ε* + 2·E_T)/(1-α)`, and a controlled single-queue
//! benchmark together with the experiment drivers that tabulate those terms.

pub mod alp;
pub mod analysis;
pub mod error;
pub mod experiment;
pub mod lp;
pub mod mdp;
pub mod projection;
pub mod queue;

pub use alp::{
    aggregation_w, build_alp_constraints, ideal_row_weights, random_w, row_weights_by_c, sampled_w,
    selection_w, solve_alp, solve_exact_lp, solve_grlp, AlpSolution, AlpSystem,
    ConstraintAggregator, FeatureMatrix, StateWeights, WKind,
};
pub use analysis::{
    error_report, et_term, grlp_error_bound, optimal_lagrange, weighted_l1_error, ErrorReport,
    EtTerm, ReportOptions,
};
pub use error::{Error, Result};
pub use lp::{chebyshev_fit, lp_solve, ChebyshevFit, DenseLp, LpOutcome, LpStatus, SearchBox};
pub use mdp::{BellmanTargets, MdpModel, Policy, TransitionMatrix, ValueFunction};
pub use projection::{
    alub_project, fixed_point, lub_of_optimal, lub_project, FixedPoint, Projection,
    ProjectionContext,
};
pub use queue::{geometric_c, polynomial_features, FeatureBasis, QueueConfig, RateOverflow};
