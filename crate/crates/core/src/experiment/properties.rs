//! Randomized invariant suite over small seeded instances.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::PropertySettings;
use super::instances::{random_instance, InstanceParams, RandomInstance};
use super::write_json;
use crate::alp::{build_alp_constraints, selection_w, solve_alp, solve_exact_lp, solve_grlp};
use crate::analysis::{error_report, optimal_lagrange, weighted_l1_error, ReportOptions};
use crate::error::{Error, Result};
use crate::lp::{chebyshev_fit, lp_solve, DenseLp, SearchBox};
use crate::mdp::sup_distance;
use crate::projection::{fixed_point, ProjectionContext};

/// Invariants checked per trial, in report order.
pub const INVARIANTS: [&str; 24] = [
    "model_validation",
    "bellman_monotone",
    "bellman_shift",
    "bellman_contraction",
    "value_iteration",
    "exact_lp_agreement",
    "lub_monotone",
    "lub_shift",
    "lub_contraction",
    "alub_monotone",
    "alub_shift",
    "alub_contraction",
    "alub_below_lub",
    "grlp_relaxes_alp",
    "objective_monotone",
    "rlp_equivalence",
    "alp_bound",
    "lub_optimal_bound",
    "fixed_point_dominance",
    "ordering_chain",
    "fixed_point_bounds",
    "grlp_error_bound",
    "multiplier_mass",
    "weighted_norm_below_sup",
];

const OPERATOR_TOL: f64 = 1e-8;
const ORDER_TOL: f64 = 1e-6;
// Fixed-point iterates are accurate to this in ‖·‖∞. LP round-off puts a floor
// near 1e-10 under the residual, so the stopping threshold tol·(1 − α) must
// stay above it even for α close to 1.
const FIXED_POINT_TOL: f64 = 5e-7;
const FIXED_POINT_MAX_ITER: usize = 1_000_000;

/// `Ok(())` passes; `Err` carries the failure message.
pub type Outcome = std::result::Result<(), String>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantTally {
    pub name: String,
    pub passed: usize,
    pub failed: usize,
    /// Trials where an earlier step (building the instance) failed.
    pub skipped: usize,
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub trials: usize,
    pub seed: u64,
    pub invariants: Vec<InvariantTally>,
    pub all_passed: bool,
}

impl PropertyReport {
    pub fn tally(&self, name: &str) -> Option<&InvariantTally> {
        self.invariants.iter().find(|t| t.name == name)
    }
}

fn params(settings: &PropertySettings) -> InstanceParams {
    InstanceParams {
        max_states: settings.max_states,
        max_actions: settings.max_actions,
        max_features: settings.max_features,
        alpha: settings.alpha,
        states: settings.states,
        corrupt_row_sum: settings.corrupt_row_sum,
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<Outcome> {
    Ok(if ok { Ok(()) } else { Err(msg()) })
}

/// Largest `b(i) − a(i)`, i.e. how far `a ≥ b` is from holding.
fn excess(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| y - x)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
}

/// Monotonicity, shifting and contraction of one operator.
fn operator_checks(
    rng: &mut ChaCha8Rng,
    alpha: f64,
    n: usize,
    apply: impl Fn(&[f64]) -> Result<Vec<f64>>,
    tol: f64,
) -> [Result<Outcome>; 3] {
    let j1 = random_vec(rng, n, 5.0);
    let j2: Vec<f64> = j1.iter().map(|v| v - rng.random_range(0.0..=2.0)).collect();
    let k = rng.random_range(-3.0..=3.0);
    let j3 = random_vec(rng, n, 5.0);

    let monotone = (|| {
        let (a, b) = (apply(&j1)?, apply(&j2)?);
        let gap = excess(&a, &b);
        ensure(gap <= tol, || format!("order broken by {gap:e}"))
    })();
    let shift = (|| {
        let shifted: Vec<f64> = j1.iter().map(|v| v + k).collect();
        let a = apply(&shifted)?;
        let b: Vec<f64> = apply(&j1)?.iter().map(|v| v + alpha * k).collect();
        let gap = sup_distance(&a, &b);
        ensure(gap <= tol, || format!("shift off by {gap:e}"))
    })();
    let contraction = (|| {
        let lhs = sup_distance(&apply(&j1)?, &apply(&j3)?);
        let rhs = alpha * sup_distance(&j1, &j3);
        ensure(lhs <= rhs + tol, || {
            format!("{lhs} > α·{} = {rhs}", rhs / alpha)
        })
    })();
    [monotone, shift, contraction]
}

/// All invariant outcomes for one built instance, in [`INVARIANTS`] order
/// minus the leading `model_validation`.
pub fn check_instance(inst: &RandomInstance, seed: u64) -> Vec<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let RandomInstance { model, phi, c, w } = inst;
    let n = model.num_states();
    let alpha = model.alpha();
    let search_box = SearchBox::default();
    let mut out: Vec<Result<Outcome>> = Vec::new();

    let bellman = |j: &[f64]| -> Result<Vec<f64>> { Ok(model.bellman_apply(j)?.into_inner()) };
    out.extend(operator_checks(&mut rng, alpha, n, bellman, 1e-10));

    let j_star = model.value_iteration(1e-9, 1_000_000);
    let vi = (|| {
        let j = dep(&j_star)?;
        let res = sup_distance(&j, &model.bellman_apply(&j)?);
        if res > 2e-9 {
            return ensure(false, || format!("residual {res:e} above 2·tol"));
        }
        let u = model.greedy_policy(&j)?;
        let gap = model.policy_evaluate(&u)?.sup_distance(&j);
        ensure(gap <= 1e-6, || {
            format!("greedy policy value off by {gap:e}")
        })
    })();
    out.push(vi);
    let j_star = match j_star {
        Ok(j) => j,
        Err(e) => return fill(out, e.to_string()),
    };

    out.push((|| {
        let exact = solve_exact_lp(model, c)?;
        let gap = exact.sup_distance(&j_star);
        ensure(gap <= 1e-6, || {
            format!("exact LP differs from value iteration by {gap:e}")
        })
    })());

    let lub = ProjectionContext::lub(model, phi, search_box);
    let alub = ProjectionContext::aggregated(model, phi, w, search_box);
    let (lub, alub) = match (lub, alub) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return fill(out, e.to_string()),
    };
    let lub_apply = |j: &[f64]| -> Result<Vec<f64>> { Ok(lub.apply(j)?.values.into_inner()) };
    let alub_apply = |j: &[f64]| -> Result<Vec<f64>> { Ok(alub.apply(j)?.values.into_inner()) };
    out.extend(operator_checks(&mut rng, alpha, n, lub_apply, OPERATOR_TOL));
    out.extend(operator_checks(
        &mut rng,
        alpha,
        n,
        alub_apply,
        OPERATOR_TOL,
    ));

    let probe = random_vec(&mut rng, n, 5.0);
    out.push((|| {
        let gap = excess(&lub_apply(&probe)?, &alub_apply(&probe)?);
        ensure(gap <= OPERATOR_TOL, || format!("Γ̃J exceeds ΓJ by {gap:e}"))
    })());

    let alp = solve_alp(model, phi, c, search_box);
    let grlp = solve_grlp(model, phi, w, c, search_box);

    out.push((|| {
        let alp = dep(&alp)?;
        let system = build_alp_constraints(model, phi)?;
        let mut r = alp.weights.clone();
        r[0] += rng.random_range(0.0..=1.0);
        let (wa, wb) = system.aggregate(w)?;
        let lhs = &wa * nalgebra::DVector::from_column_slice(&r);
        let scale = 1.0 + wb.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gap = excess(lhs.as_slice(), &wb);
        ensure(gap <= 1e-9 * scale, || {
            format!("aggregated constraint violated by {gap:e}")
        })
    })());

    out.push((|| {
        let (alp, grlp) = (dep(&alp)?, dep(&grlp)?);
        let slack = 1e-8 * (1.0 + alp.objective.abs());
        ensure(grlp.objective <= alp.objective + slack, || {
            format!(
                "GRLP objective {} above ALP objective {}",
                grlp.objective, alp.objective
            )
        })
    })());

    out.push((|| {
        let system = build_alp_constraints(model, phi)?;
        let nd = system.num_rows();
        let count = rng.random_range(1..=nd);
        let rows: Vec<usize> = (0..count).map(|_| rng.random_range(0..nd)).collect();
        let via_w = solve_grlp(model, phi, &selection_w(&rows, nd)?, c, search_box)?;
        let a = DMatrix::from_fn(rows.len(), phi.num_features(), |i, j| {
            system.a[(rows[i], j)]
        });
        let b: Vec<f64> = rows.iter().map(|&r| system.b[r]).collect();
        let direct = lp_solve(&DenseLp::boxed(c.objective(phi), a, b, search_box)?)?;
        let (_, value, _) = direct.into_solution()?;
        let gap = (value - via_w.objective).abs();
        ensure(gap <= 1e-9, || format!("objectives differ by {gap:e}"))
    })());

    let fit = chebyshev_fit(phi.matrix(), &j_star, search_box);
    out.push((|| {
        let (alp, fit) = (dep(&alp)?, dep(&fit)?);
        let lhs = weighted_l1_error(&j_star, &alp.values, c)?;
        let rhs = 2.0 * fit.eps / (1.0 - alpha);
        ensure(lhs <= rhs + 1e-8, || format!("{lhs} > {rhs}"))
    })());

    let j_bar = lub.apply(&j_star);
    out.push((|| {
        let (j_bar, fit) = (dep(&j_bar)?, dep(&fit)?);
        let lhs = j_bar.values.sup_distance(&j_star);
        ensure(lhs <= 2.0 * fit.eps + OPERATOR_TOL, || {
            format!("{lhs} > 2·{}", fit.eps)
        })
    })());

    let zeros = vec![0.0; n];
    let v_lub = fixed_point(&lub, &zeros, FIXED_POINT_TOL, FIXED_POINT_MAX_ITER);
    let v_alub = fixed_point(&alub, &zeros, FIXED_POINT_TOL, FIXED_POINT_MAX_ITER);
    out.push((|| {
        let v = dep(&v_lub)?;
        let gap = excess(&v.values, &model.bellman_apply(&v.values)?);
        ensure(gap <= ORDER_TOL, || format!("TṼ exceeds Ṽ by {gap:e}"))
    })());

    out.push((|| {
        let alp = dep(&alp)?;
        let grlp = dep(&grlp)?;
        let v = dep(&v_lub)?;
        let vh = dep(&v_alub)?;
        let checks = [
            ("J̃ ≥ Ṽ", excess(&alp.values, &v.values)),
            ("Ṽ ≥ J*", excess(&v.values, &j_star)),
            ("Ĵ ≥ V̂", excess(&grlp.values, &vh.values)),
        ];
        match checks.iter().find(|(_, gap)| *gap > ORDER_TOL) {
            Some((what, gap)) => ensure(false, || format!("{what} broken by {gap:e}")),
            None => Ok(Ok(())),
        }
    })());

    out.push((|| {
        let v = dep(&v_lub)?;
        let vh = dep(&v_alub)?;
        let j_bar = dep(&j_bar)?;
        let e_t = alub
            .apply(&j_bar.values)?
            .values
            .sup_distance(&lub.apply(&j_bar.values)?.values);
        let base = j_bar.values.sup_distance(&j_star);
        let lub_gap = v.values.sup_distance(&j_star) - base / (1.0 - alpha);
        let alub_gap = vh.values.sup_distance(&j_star) - (base + e_t) / (1.0 - alpha);
        ensure(lub_gap <= ORDER_TOL && alub_gap <= ORDER_TOL, || {
            format!("bounds exceeded by {lub_gap:e} (Γ) and {alub_gap:e} (Γ̃)")
        })
    })());

    out.push((|| {
        let report = error_report(model, phi, w, c, search_box, ReportOptions::default())?;
        if report.box_clipped {
            return ensure(false, || "an LP hit the search box".into());
        }
        ensure(report.bound_holds() == Some(true), || {
            format!("{} > {:?}", report.lhs_weighted_l1, report.bound_rhs)
        })
    })());

    out.push((|| {
        let u = model.greedy_policy(&j_star)?;
        let mass: f64 = optimal_lagrange(model, c, &u)?.iter().sum();
        let expected = 1.0 / (1.0 - alpha);
        ensure((mass - expected).abs() <= 1e-8, || {
            format!("mass {mass} ≠ {expected}")
        })
    })());

    out.push((|| {
        let grlp = dep(&grlp)?;
        let l1 = weighted_l1_error(&j_star, &grlp.values, c)?;
        let sup = grlp.values.sup_distance(&j_star);
        ensure(l1 <= sup + 1e-12, || format!("{l1} > {sup}"))
    })());

    out.into_iter().map(flatten).collect()
}

/// Borrows the result of a shared earlier step, turning its failure into
/// this check's failure.
fn dep<T>(r: &Result<T>) -> Result<&T> {
    r.as_ref()
        .map_err(|e| Error::InvalidInput(format!("prerequisite failed: {e}")))
}

/// Pads the outcomes computed so far with `msg` for every remaining check.
fn fill(out: Vec<Result<Outcome>>, msg: String) -> Vec<Outcome> {
    let mut res: Vec<Outcome> = out.into_iter().map(flatten).collect();
    res.resize(INVARIANTS.len() - 1, Err(msg));
    res
}

fn flatten(r: Result<Outcome>) -> Outcome {
    r.unwrap_or_else(|e: Error| Err(e.to_string()))
}

fn trial(params: &InstanceParams, seed: u64) -> Vec<Option<Outcome>> {
    match random_instance(params, seed) {
        Ok(inst) => std::iter::once(Some(Ok(())))
            .chain(check_instance(&inst, seed).into_iter().map(Some))
            .collect(),
        Err(e) => std::iter::once(Some(Err(e.to_string())))
            .chain(std::iter::repeat(None).take(INVARIANTS.len() - 1))
            .collect(),
    }
}

/// Runs `settings.trials` seeded instances (seeds `seed, seed + 1, …`)
/// through every invariant.
pub fn run_property_suite(settings: &PropertySettings) -> Result<PropertyReport> {
    settings.validate()?;
    let params = params(settings);
    let results: Vec<Vec<Option<Outcome>>> = (0..settings.trials as u64)
        .into_par_iter()
        .map(|t| trial(&params, settings.seed.wrapping_add(t)))
        .collect();
    let mut invariants: Vec<InvariantTally> = INVARIANTS
        .iter()
        .map(|name| InvariantTally {
            name: (*name).into(),
            passed: 0,
            failed: 0,
            skipped: 0,
            first_failure: None,
        })
        .collect();
    for (t, outcomes) in results.into_iter().enumerate() {
        for (tally, outcome) in invariants.iter_mut().zip(outcomes) {
            match outcome {
                None => tally.skipped += 1,
                Some(Ok(())) => tally.passed += 1,
                Some(Err(msg)) => {
                    tally.failed += 1;
                    tally.first_failure.get_or_insert_with(|| {
                        format!(
                            "trial {t} (seed {}): {msg}",
                            settings.seed.wrapping_add(t as u64)
                        )
                    });
                }
            }
        }
    }
    let all_passed = invariants.iter().all(|t| t.failed == 0 && t.skipped == 0);
    Ok(PropertyReport {
        trials: settings.trials,
        seed: settings.seed,
        invariants,
        all_passed,
    })
}

/// Writes `properties.json`.
pub fn write_property_report(report: &PropertyReport, out: &Path) -> Result<()> {
    write_json(&out.join("properties.json"), report)
}
