//! Terms of the GRLP error bound
//!
//! ```text
//! ‖J* − Ĵ‖_{1,c} ≤ (6·ε* + 2·E_T) / (1 − α),
//! ε* = min_r ‖J* − Φr‖∞,   E_T = ‖ΓJ̄ − Γ̃J̄‖∞,   J̄ = ΓJ*,
//! ```
//!
//! plus the optimal Lagrange multipliers of the exact LP.

use log::warn;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::alp::{solve_grlp, ConstraintAggregator, FeatureMatrix, StateWeights};
use crate::error::{check_len, Error, Result};
use crate::lp::{chebyshev_fit, SearchBox};
use crate::mdp::{MdpModel, Policy, ValueFunction, DENSE_EVAL_LIMIT};
use crate::projection::{alub_project, lub_of_optimal, lub_project, ProjectionContext};

/// Projections are only computed while `n·d` stays below this.
pub const PROJECTION_GUARD: usize = 100_000;

/// `‖x − y‖_{1,c} = Σ c(i)|x(i) − y(i)|`.
pub fn weighted_l1_error(x: &[f64], y: &[f64], c: &StateWeights) -> Result<f64> {
    check_len("compared vector length", x.len(), y.len())?;
    check_len("state weights", x.len(), c.len())?;
    Ok(x.iter()
        .zip(y)
        .zip(c.iter())
        .map(|((a, b), w)| w * (a - b).abs())
        .sum())
}

/// `(6·ε* + 2·E_T)/(1 − α)`.
pub fn grlp_error_bound(eps_star: f64, e_t: f64, alpha: f64) -> f64 {
    (6.0 * eps_star + 2.0 * e_t) / (1.0 - alpha)
}

/// `E_T` together with the vectors it is computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct EtTerm {
    pub value: f64,
    /// `J̄ = ΓJ*`.
    pub j_bar: ValueFunction,
    /// `ΓJ̄`.
    pub lub: ValueFunction,
    /// `Γ̃J̄`.
    pub alub: ValueFunction,
    pub box_clipped: bool,
}

fn projection_guard(model: &MdpModel) -> Result<()> {
    let nd = model.num_states() * model.num_actions();
    if nd > PROJECTION_GUARD {
        return Err(Error::GuardExceeded {
            what: "state-action count for projections",
            limit: PROJECTION_GUARD,
            actual: nd,
        });
    }
    Ok(())
}

/// `E_T = ‖ΓJ̄ − Γ̃J̄‖∞`. Since `Γ̃` relaxes `Γ`, this is `max_i (ΓJ̄ − Γ̃J̄)(i)`.
pub fn et_term(
    model: &MdpModel,
    phi: &FeatureMatrix,
    w: &ConstraintAggregator,
    j_star: &[f64],
    search_box: SearchBox,
) -> Result<EtTerm> {
    projection_guard(model)?;
    let lub_ctx = ProjectionContext::lub(model, phi, search_box)?;
    let alub_ctx = ProjectionContext::aggregated(model, phi, w, search_box)?;
    let j_bar = lub_of_optimal(&lub_ctx, j_star)?;
    let lub = lub_project(&lub_ctx, &j_bar.values)?;
    let alub = alub_project(&alub_ctx, &j_bar.values)?;
    let value = lub.values.sup_distance(&alub.values);
    Ok(EtTerm {
        value,
        box_clipped: j_bar.box_clipped || lub.box_clipped || alub.box_clipped,
        j_bar: j_bar.values,
        lub: lub.values,
        alub: alub.values,
    })
}

/// Discounted state-action visit counts under `u*` from initial law `c`:
/// `λ*(s, u*(s)) = (cᵀ(I − αP_{u*})⁻¹)(s)` and zero off-policy, returned
/// action-major. The entries sum to `1/(1 − α)`.
pub fn optimal_lagrange(model: &MdpModel, c: &StateWeights, u_star: &Policy) -> Result<Vec<f64>> {
    let n = model.num_states();
    if n > DENSE_EVAL_LIMIT {
        return Err(Error::GuardExceeded {
            what: "state count for dense multiplier solve",
            limit: DENSE_EVAL_LIMIT,
            actual: n,
        });
    }
    check_len("state weights", n, c.len())?;
    check_len("policy length", n, u_star.len())?;
    let (p, _) = model.policy_dense(&Policy::new(
        u_star.actions().to_vec(),
        model.num_actions(),
    )?);
    let system = (DMatrix::identity(n, n) - p * model.alpha()).transpose();
    let rhs = nalgebra::DVector::from_column_slice(c);
    let visits = system.lu().solve(&rhs).ok_or(Error::NotConverged {
        what: "multiplier solve",
        iterations: 0,
        residual: f64::INFINITY,
    })?;
    let mut out = vec![0.0; n * model.num_actions()];
    for s in 0..n {
        out[u_star.action(s) * n + s] = visits[s];
    }
    Ok(out)
}

/// Tolerances for [`error_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub value_iteration_tol: f64,
    pub max_iter: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            value_iteration_tol: 1e-9,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    /// `ε* = ‖J* − Φr*‖∞`.
    pub eps_star: f64,
    /// `E_T`; `None` when the projection guard was exceeded.
    pub e_t: Option<f64>,
    pub bound_rhs: Option<f64>,
    /// `‖J* − Ĵ‖_{1,c}`.
    pub lhs_weighted_l1: f64,
    pub grlp_objective: f64,
    pub box_clipped: bool,
}

impl ErrorReport {
    pub fn bound_holds(&self) -> Option<bool> {
        self.bound_rhs
            .map(|rhs| self.lhs_weighted_l1 <= rhs + 1e-9 * (1.0 + rhs.abs()))
    }
}

/// Runs value iteration, the sup-norm fit, the GRLP and both projections, and
/// checks the bound. A violated bound is an error unless some LP was box
/// clipped, in which case it is only logged.
pub fn error_report(
    model: &MdpModel,
    phi: &FeatureMatrix,
    w: &ConstraintAggregator,
    c: &StateWeights,
    search_box: SearchBox,
    options: ReportOptions,
) -> Result<ErrorReport> {
    let j_star = model.value_iteration(options.value_iteration_tol, options.max_iter)?;
    let fit = chebyshev_fit(phi.matrix(), &j_star, search_box)?;
    let grlp = solve_grlp(model, phi, w, c, search_box)?;
    let lhs = weighted_l1_error(&j_star, &grlp.values, c)?;
    let mut box_clipped = fit.box_clipped || grlp.box_clipped;

    let e_t = match et_term(model, phi, w, &j_star, search_box) {
        Ok(term) => {
            box_clipped |= term.box_clipped;
            Some(term.value)
        }
        Err(Error::GuardExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    let report = ErrorReport {
        eps_star: fit.eps,
        e_t,
        bound_rhs: e_t.map(|e| grlp_error_bound(fit.eps, e, model.alpha())),
        lhs_weighted_l1: lhs,
        grlp_objective: grlp.objective,
        box_clipped,
    };
    if report.bound_holds() == Some(false) {
        let rhs = report.bound_rhs.unwrap_or(f64::NAN);
        if box_clipped {
            warn!("error bound violated ({lhs} > {rhs}) with a binding box");
        } else {
            return Err(Error::BoundViolated { lhs, rhs });
        }
    }
    Ok(report)
}
