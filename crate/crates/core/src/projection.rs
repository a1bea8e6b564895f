//! Least-upper-bound projection `Γ` and its aggregated relaxation `Γ̃`.
//!
//! `(ΓJ)(i)` is the smallest value `(Φr)(i)` can take over the feature
//! vectors that dominate `TJ`:
//!
//! ```text
//! (ΓJ)(i)  = min (Φr)(i)   s.t.   Φr ≥ TJ,                     r ∈ box
//! (Γ̃J)(i) = min (Φr)(i)   s.t.   Wᵀ[Φr]_a ≥ Wᵀ[g_a + αP_aJ]_a, r ∈ box
//! ```
//!
//! one small LP per coordinate. Both operators are monotone max-norm
//! contractions with factor `α`, so they have unique fixed points `Ṽ` and
//! `V̂`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::alp::{ConstraintAggregator, FeatureMatrix};
use crate::error::{check_len, Error, Result};
use crate::lp::{solve_ref, LpRef, SearchBox};
use crate::mdp::{sup_distance, MdpModel, ValueFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    /// `Γ`
    LeastUpperBound,
    /// `Γ̃`
    Aggregated,
}

/// Model, features, optional aggregator and box for one projection operator.
/// The constraint left-hand side (`Φ`, or `Wᵀ` applied to `Φ` stacked per
/// action) is computed once at construction.
#[derive(Debug, Clone)]
pub struct ProjectionContext<'a> {
    model: &'a MdpModel,
    phi: &'a FeatureMatrix,
    w: Option<&'a ConstraintAggregator>,
    search_box: SearchBox,
    lhs: DMatrix<f64>,
}

impl<'a> ProjectionContext<'a> {
    pub fn lub(model: &'a MdpModel, phi: &'a FeatureMatrix, search_box: SearchBox) -> Result<Self> {
        check_len("feature rows", model.num_states(), phi.num_states())?;
        Ok(Self {
            model,
            phi,
            w: None,
            search_box,
            lhs: phi.matrix().clone(),
        })
    }

    pub fn aggregated(
        model: &'a MdpModel,
        phi: &'a FeatureMatrix,
        w: &'a ConstraintAggregator,
        search_box: SearchBox,
    ) -> Result<Self> {
        check_len("feature rows", model.num_states(), phi.num_states())?;
        let nd = model.num_states() * model.num_actions();
        check_len("aggregator rows", nd, w.nrows())?;
        let lhs = w.matrix().transpose() * phi.stacked(model.num_actions());
        Ok(Self {
            model,
            phi,
            w: Some(w),
            search_box,
            lhs,
        })
    }

    pub fn kind(&self) -> ProjectionKind {
        match self.w {
            None => ProjectionKind::LeastUpperBound,
            Some(_) => ProjectionKind::Aggregated,
        }
    }

    pub fn model(&self) -> &MdpModel {
        self.model
    }

    pub fn features(&self) -> &FeatureMatrix {
        self.phi
    }

    fn rhs(&self, j: &[f64]) -> Result<Vec<f64>> {
        let targets = self.model.bellman_targets(j)?;
        Ok(match self.w {
            None => targets.max_over_actions(),
            Some(w) => {
                let stacked = DVector::from_column_slice(targets.stacked());
                (w.matrix().transpose() * stacked).iter().copied().collect()
            }
        })
    }

    /// Applies the operator (`Γ` or `Γ̃`, depending on construction).
    pub fn apply(&self, j: &[f64]) -> Result<Projection> {
        let rhs = self.rhs(j)?;
        let phi = self.phi.matrix();
        let n = phi.nrows();
        let (lower, upper) = self.search_box.bounds(phi.ncols());
        let results = (0..n)
            .into_par_iter()
            .map(|i| {
                let objective: Vec<f64> = phi.row(i).iter().copied().collect();
                let outcome = solve_ref(LpRef {
                    objective: &objective,
                    constraints: &self.lhs,
                    rhs: &rhs,
                    lower: &lower,
                    upper: &upper,
                })?;
                let (_, value, clipped) = outcome.into_solution()?;
                Ok((value, clipped))
            })
            .collect::<Result<Vec<_>>>()?;
        let box_clipped = results.iter().any(|r| r.1);
        Ok(Projection {
            values: ValueFunction::new(results.into_iter().map(|r| r.0).collect())?,
            box_clipped,
        })
    }
}

/// Output of one projection; `box_clipped` is set if any coordinate LP had a
/// binding box bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub values: ValueFunction,
    pub box_clipped: bool,
}

/// `ΓJ`.
pub fn lub_project(ctx: &ProjectionContext<'_>, j: &[f64]) -> Result<Projection> {
    if ctx.kind() != ProjectionKind::LeastUpperBound {
        return Err(Error::InvalidInput(
            "least-upper-bound projection takes a context without W".into(),
        ));
    }
    ctx.apply(j)
}

/// `Γ̃J`.
pub fn alub_project(ctx: &ProjectionContext<'_>, j: &[f64]) -> Result<Projection> {
    if ctx.kind() != ProjectionKind::Aggregated {
        return Err(Error::InvalidInput(
            "aggregated projection needs a context with W".into(),
        ));
    }
    ctx.apply(j)
}

/// `J̄ = ΓJ*`.
pub fn lub_of_optimal(ctx: &ProjectionContext<'_>, j_star: &[f64]) -> Result<Projection> {
    lub_project(ctx, j_star)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub values: ValueFunction,
    pub iterations: usize,
    /// `‖V_t − proj(V_t)‖∞` for each iterate.
    pub residuals: Vec<f64>,
    pub box_clipped: bool,
}

/// Iterates `V ← proj(V)` from `j0` until `‖V − proj(V)‖∞ ≤ tol·(1 − α)`.
/// The returned vector is the last projected iterate.
pub fn fixed_point(
    ctx: &ProjectionContext<'_>,
    j0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let threshold = tol * (1.0 - ctx.model.alpha());
    let mut v = j0.to_vec();
    let mut residuals = Vec::new();
    let mut box_clipped = false;
    for it in 1..=max_iter {
        let next = ctx.apply(&v)?;
        box_clipped |= next.box_clipped;
        let residual = sup_distance(&next.values, &v);
        residuals.push(residual);
        v = next.values.into_inner();
        if residual <= threshold {
            return Ok(FixedPoint {
                values: ValueFunction::new(v)?,
                iterations: it,
                residuals,
                box_clipped,
            });
        }
    }
    Err(Error::NotConverged {
        what: "projected fixed-point iteration",
        iterations: max_iter,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}
