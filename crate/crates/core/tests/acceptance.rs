//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Criterion numbers given as arguments
//! restrict the run, e.g. `cargo test --test acceptance -- 1 5`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use grlp::experiment::instances::{
    random_instance, random_model, random_state_weights, InstanceParams,
};
use grlp::experiment::{
    run_property_suite, run_table1, run_table2, ExperimentConfig, PropertyReport, PropertySettings,
    Scenario, WRecipe, WRecipeKind,
};
use grlp::{
    aggregation_w, build_alp_constraints, error_report, fixed_point, geometric_c, lp_solve,
    polynomial_features, selection_w, solve_alp, solve_exact_lp, solve_grlp, weighted_l1_error,
    DenseLp, FeatureBasis, ProjectionContext, QueueConfig, ReportOptions, SearchBox, StateWeights,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Largest amount by which `a ≥ b` fails.
fn excess(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| y - x)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The default 100-trial property run shared by criteria 6, 7, 8 and 10.
fn shared_report() -> &'static PropertyReport {
    static REPORT: OnceLock<PropertyReport> = OnceLock::new();
    REPORT.get_or_init(|| run_property_suite(&PropertySettings::default()).unwrap())
}

fn tallies_full(names: &[&str], trials: usize) -> Verdict {
    let report = shared_report();
    let mut details = Vec::new();
    let mut ok = true;
    for name in names {
        let t = report.tally(name).unwrap();
        ok &= t.passed == trials;
        details.push(format!("{name} {}/{trials}", t.passed));
        if let Some(f) = &t.first_failure {
            details.push(format!("first failure: {f}"));
        }
    }
    verdict(ok, details.join(", "))
}

fn exact_solution_agreement() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=10);
        let d = rng.random_range(1..=3);
        let alpha = rng.random_range(0.5..0.99);
        let m = random_model(&mut rng, n, d, alpha).map_err(|e| e.to_string())?;
        let c = random_state_weights(&mut rng, n).map_err(|e| e.to_string())?;
        let vi = m
            .value_iteration(1e-9, 10_000_000)
            .map_err(|e| e.to_string())?;
        let lp = solve_exact_lp(&m, &c).map_err(|e| e.to_string())?;
        worst = worst.max(sup(&vi, &lp));
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-6 && elapsed < Duration::from_secs(10),
        format!(
            "max ‖J_LP − J_VI‖∞ = {worst:.2e} (tol 1e-6) over 50 models in {}",
            secs(elapsed)
        ),
    )
}

fn table1_aggregation_cell() -> Verdict {
    let target = 54.15;
    let mut parts = Vec::new();
    let mut ok = false;
    for basis in [FeatureBasis::Normalized, FeatureBasis::Raw] {
        let start = Instant::now();
        let mut cfg = ExperimentConfig::preset(Scenario::Qs);
        cfg.feature_basis = basis;
        let row = run_table1(&cfg).map_err(|e| e.to_string())?.rows.remove(0);
        let elapsed = start.elapsed();
        let e_t = row.e_t.unwrap_or(f64::NAN);
        let clipped = row.box_clipped.unwrap_or(true);
        ok |= within(e_t, target, 0.02) && !clipped && elapsed < Duration::from_secs(30);
        parts.push(format!(
            "{basis:?}: E_T(W_a) = {e_t:.4} box_clipped={clipped} ({})",
            secs(elapsed)
        ));
    }
    verdict(ok, format!("target {target} ± 2%; {}", parts.join("; ")))
}

fn table1_rankings() -> Verdict {
    let seeds: Vec<u64> = (0..20).collect();
    let mut cfg = ExperimentConfig::preset(Scenario::Qs);
    cfg.w = vec![
        WRecipe::deterministic(WRecipeKind::Aggregation),
        WRecipe::seeded(WRecipeKind::Ideal, seeds.clone()),
        WRecipe::seeded(WRecipeKind::Random, seeds),
    ];
    let table = run_table1(&cfg).map_err(|e| e.to_string())?;
    let of = |kind: &str| -> Vec<f64> {
        table
            .rows
            .iter()
            .filter(|r| r.w_kind == kind)
            .filter_map(|r| r.e_t)
            .collect()
    };
    let clipped = table
        .rows
        .iter()
        .filter(|r| r.box_clipped == Some(true))
        .count();
    let agg = of("aggregation")[0];
    let (ideal, random) = (median(of("ideal")), median(of("random")));
    verdict(
        random > 2.0 * agg && ideal < random,
        format!(
            "E_T(W_a) = {agg:.4}, median E_T(W_i) = {ideal:.4}, median E_T(W_r) = {random:.4}; \
             need W_r > 2·W_a and W_i < W_r ({clipped}/{} cells box clipped)",
            table.rows.len()
        ),
    )
}

fn table2_cells() -> Verdict {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::preset(Scenario::Ql);
    cfg.w = vec![
        WRecipe::deterministic(WRecipeKind::Aggregation),
        WRecipe::seeded(WRecipeKind::Random, vec![0, 1, 2]),
    ];
    let table = run_table2(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let cell = |kind: &str, zeta: f64| {
        table
            .rows
            .iter()
            .filter(|r| r.w_kind == kind && r.zeta == Some(zeta))
            .map(|r| {
                (
                    r.l1c_error.unwrap_or(f64::NAN),
                    r.box_clipped.unwrap_or(true),
                )
            })
            .collect::<Vec<_>>()
    };
    let (a09, c09) = cell("aggregation", 0.9)[0];
    let (a999, c999) = cell("aggregation", 0.999)[0];
    let random_min = cell("random", 0.9)
        .iter()
        .map(|r| r.0)
        .fold(f64::INFINITY, f64::min);
    let ok = within(a09, 220.0, 0.15)
        && within(a999, 82.0, 0.15)
        && random_min >= 50.0 * a09
        && elapsed < Duration::from_secs(15 * 60);
    verdict(
        ok,
        format!(
            "W_a: ζ=0.9 → {a09:.2} (target 220 ± 15%, box_clipped={c09}), \
             ζ=0.999 → {a999:.2} (target 82 ± 15%, box_clipped={c999}); \
             min W_r at ζ=0.9 = {random_min:.4e} = {:.1}× W_a (need ≥ 50×); {}",
            random_min / a09,
            secs(elapsed)
        ),
    )
}

fn grlp_bound_randomized() -> Verdict {
    let params = InstanceParams {
        max_states: 8,
        ..Default::default()
    };
    let mut violations = Vec::new();
    let mut worst_ratio = 0.0f64;
    for seed in 0..100 {
        let inst = random_instance(&params, 1000 + seed).map_err(|e| e.to_string())?;
        match error_report(
            &inst.model,
            &inst.phi,
            &inst.w,
            &inst.c,
            SearchBox::default(),
            ReportOptions::default(),
        ) {
            Ok(r) if r.box_clipped => violations.push(format!("seed {seed}: box clipped")),
            Ok(r) => {
                let rhs = r.bound_rhs.unwrap();
                if r.bound_holds() != Some(true) {
                    violations.push(format!("seed {seed}: {} > {rhs}", r.lhs_weighted_l1));
                }
                if rhs > 0.0 {
                    worst_ratio = worst_ratio.max(r.lhs_weighted_l1 / rhs);
                }
            }
            Err(e) => violations.push(format!("seed {seed}: {e}")),
        }
    }
    verdict(
        violations.is_empty(),
        format!(
            "{} violations in 100 instances (n ≤ 8); largest lhs/rhs = {worst_ratio:.3}{}",
            violations.len(),
            violations
                .first()
                .map(|v| format!("; first: {v}"))
                .unwrap_or_default()
        ),
    )
}

fn operator_lemmas() -> Verdict {
    tallies_full(
        &[
            "bellman_monotone",
            "bellman_shift",
            "bellman_contraction",
            "lub_monotone",
            "lub_shift",
            "lub_contraction",
            "alub_monotone",
            "alub_shift",
            "alub_contraction",
        ],
        100,
    )
}

fn ordering_chain() -> Verdict {
    let randomized = tallies_full(&["ordering_chain"], 100);
    let qs = (|| -> grlp::Result<(f64, f64, f64)> {
        let cfg = QueueConfig::small();
        let m = cfg.build_mdp()?;
        let phi = polynomial_features(cfg.n, cfg.k, FeatureBasis::Normalized)?;
        let c = StateWeights::uniform(cfg.n);
        let w = aggregation_w(cfg.n, m.num_actions(), cfg.m)?;
        let b = SearchBox::default();
        let j_star = m.value_iteration(1e-10, 1_000_000)?;
        let alp = solve_alp(&m, &phi, &c, b)?;
        let grlp = solve_grlp(&m, &phi, &w, &c, b)?;
        let zeros = vec![0.0; cfg.n];
        let v = fixed_point(&ProjectionContext::lub(&m, &phi, b)?, &zeros, 1e-8, 100_000)?;
        let vh = fixed_point(
            &ProjectionContext::aggregated(&m, &phi, &w, b)?,
            &zeros,
            1e-8,
            100_000,
        )?;
        Ok((
            excess(&alp.values, &v.values),
            excess(&v.values, &j_star),
            excess(&grlp.values, &vh.values),
        ))
    })();
    let (qs_ok, qs_detail) = match qs {
        Ok((a, b, c)) => (
            a.max(b).max(c) <= 1e-6,
            format!("Q_S worst violations J̃≥Ṽ {a:.2e}, Ṽ≥J* {b:.2e}, Ĵ≥V̂ {c:.2e}"),
        ),
        Err(e) => (false, format!("Q_S failed: {e}")),
    };
    match randomized {
        Ok(d) => verdict(qs_ok, format!("{d}; {qs_detail} (slack 1e-6)")),
        Err(d) => Err(format!("{d}; {qs_detail} (slack 1e-6)")),
    }
}

fn fixed_point_bounds() -> Verdict {
    tallies_full(&["fixed_point_bounds"], 100)
}

fn rlp_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let inst =
            random_instance(&InstanceParams::default(), 5000 + seed).map_err(|e| e.to_string())?;
        let system = build_alp_constraints(&inst.model, &inst.phi).map_err(|e| e.to_string())?;
        let nd = system.num_rows();
        let count = rng.random_range(1..=nd);
        let rows: Vec<usize> = (0..count).map(|_| rng.random_range(0..nd)).collect();
        let w = selection_w(&rows, nd).map_err(|e| e.to_string())?;
        let via_w = solve_grlp(&inst.model, &inst.phi, &w, &inst.c, SearchBox::default())
            .map_err(|e| e.to_string())?;
        let a = DMatrix::from_fn(rows.len(), inst.phi.num_features(), |i, j| {
            system.a[(rows[i], j)]
        });
        let b = rows.iter().map(|&r| system.b[r]).collect();
        let lp = DenseLp::boxed(inst.c.objective(&inst.phi), a, b, SearchBox::default())
            .map_err(|e| e.to_string())?;
        let direct = lp_solve(&lp).map_err(|e| e.to_string())?;
        worst = worst.max((direct.value - via_w.objective).abs());
    }
    verdict(
        worst <= 1e-9,
        format!("max objective gap {worst:.2e} over 50 systems (tol 1e-9)"),
    )
}

fn alp_bound() -> Verdict {
    tallies_full(&["alp_bound"], 100)
}

fn greedy_policy_quality() -> Verdict {
    let cfg = QueueConfig::large();
    let run = || -> grlp::Result<(f64, bool)> {
        let m = cfg.build_mdp()?;
        let phi = polynomial_features(cfg.n, cfg.k, FeatureBasis::Normalized)?;
        let c = geometric_c(cfg.n, 0.999)?;
        let w = aggregation_w(cfg.n, m.num_actions(), cfg.m)?;
        let j_star = m.value_iteration(1e-7, 10_000_000)?;
        let grlp = solve_grlp(&m, &phi, &w, &c, SearchBox::default())?;
        let u = m.greedy_policy(&grlp.values)?;
        let j_u = m.policy_evaluate(&u)?;
        let zero = vec![0.0; cfg.n];
        let ratio = weighted_l1_error(&j_star, &j_u, &c)? / weighted_l1_error(&j_star, &zero, &c)?;
        Ok((ratio, grlp.box_clipped))
    };
    let (ratio, clipped) = run().map_err(|e| e.to_string())?;
    verdict(
        ratio < 0.05,
        format!(
            "‖J* − J_û‖_{{1,c}} / ‖J*‖_{{1,c}} = {ratio:.3e} (need < 0.05), box_clipped={clipped}"
        ),
    )
}

fn main() {
    let criteria: [(usize, &str, fn() -> Verdict); 11] = [
        (
            1,
            "exact LP agrees with value iteration",
            exact_solution_agreement,
        ),
        (
            2,
            "table1 aggregation cell on the small queue",
            table1_aggregation_cell,
        ),
        (3, "table1 recipe ranking over 20 seeds", table1_rankings),
        (4, "table2 cells on the large queue", table2_cells),
        (
            5,
            "GRLP error bound on random instances",
            grlp_bound_randomized,
        ),
        (6, "monotone/shift/contraction of T, Γ, Γ̃", operator_lemmas),
        (7, "ordering chain J̃ ≥ Ṽ ≥ J*, Ĵ ≥ V̂", ordering_chain),
        (8, "fixed-point error bounds", fixed_point_bounds),
        (
            9,
            "selection-matrix GRLP equals row-subset LP",
            rlp_equivalence,
        ),
        (10, "ALP error bound", alp_bound),
        (
            11,
            "greedy policy from the GRLP on the large queue",
            greedy_policy_quality,
        ),
    ];
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let outcome =
            catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS [{id:>2}] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{id:>2}] {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
