//! Library results against independent brute-force computations.

use grlp::experiment::instances::{random_features, random_model, random_state_weights};
use grlp::{
    aggregation_w, chebyshev_fit, lp_solve, lub_project, optimal_lagrange, polynomial_features,
    solve_alp, solve_exact_lp, solve_grlp, DenseLp, FeatureBasis, FeatureMatrix, MdpModel, Policy,
    ProjectionContext, QueueConfig, SearchBox, StateWeights,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense transition row of `P_a` at state `s`.
fn dense_row(m: &MdpModel, a: usize, s: usize) -> Vec<f64> {
    let mut row = vec![0.0; m.num_states()];
    for (j, p) in m.transition(a).row(s) {
        row[j] += p;
    }
    row
}

/// Gaussian elimination with partial pivoting on a copy of `a`.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// `J_u = (I − αP_u)⁻¹ g_u` by elimination.
fn policy_value(m: &MdpModel, u: &[usize]) -> Vec<f64> {
    let n = m.num_states();
    let a = (0..n)
        .map(|s| {
            let row = dense_row(m, u[s], s);
            (0..n)
                .map(|j| if j == s { 1.0 } else { 0.0 } - m.alpha() * row[j])
                .collect()
        })
        .collect();
    let b = (0..n).map(|s| m.rewards(u[s])[s]).collect();
    gauss_solve(a, b)
}

/// `J*` as the component-wise best of all `dⁿ` deterministic policies.
fn enumerate_optimal(m: &MdpModel) -> Vec<f64> {
    let (n, d) = (m.num_states(), m.num_actions());
    let mut best = vec![f64::NEG_INFINITY; n];
    for code in 0..d.pow(n as u32) {
        let u: Vec<usize> = (0..n).map(|s| code / d.pow(s as u32) % d).collect();
        for (b, v) in best.iter_mut().zip(policy_value(m, &u)) {
            *b = b.max(v);
        }
    }
    best
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn optimal_values_match_policy_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..25 {
        let n = rng.random_range(1..=5);
        let d = rng.random_range(1..=3);
        let alpha = rng.random_range(0.3..0.97);
        let m = random_model(&mut rng, n, d, alpha).unwrap();
        let oracle = enumerate_optimal(&m);
        let vi = m.value_iteration(1e-10, 1_000_000).unwrap();
        assert!(sup(&vi, &oracle) < 1e-8);
        let c = random_state_weights(&mut rng, n).unwrap();
        let exact = solve_exact_lp(&m, &c).unwrap();
        assert!(sup(&exact, &oracle) < 1e-7, "{:?} vs {oracle:?}", exact);
        let u = m.greedy_policy(&vi).unwrap();
        assert!(sup(&m.policy_evaluate(&u).unwrap(), &oracle) < 1e-8);
    }
}

#[test]
fn small_queue_optimum_matches_enumeration() {
    let m = QueueConfig::small().build_mdp().unwrap();
    let oracle = enumerate_optimal(&m);
    let vi = m.value_iteration(1e-10, 1_000_000).unwrap();
    assert!(sup(&vi, &oracle) < 1e-8);
    // all values sit between the best and worst constant reward streams
    for v in &oracle {
        assert!(*v < 0.0 && *v > -(9.0 + 60.0 * 0.4f64.powi(3)) / 0.02);
    }
}

#[test]
fn policy_value_matches_truncated_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let n = rng.random_range(2..=8);
        let d = rng.random_range(1..=3);
        let m = random_model(&mut rng, n, d, 0.8).unwrap();
        let u: Vec<usize> = (0..n).map(|_| rng.random_range(0..d)).collect();
        let g: Vec<f64> = (0..n).map(|s| m.rewards(u[s])[s]).collect();
        // Σ_t α^t P_u^t g, truncated where α^t < 1e-14
        let mut term = g.clone();
        let mut total = g;
        for _ in 0..200 {
            term = (0..n)
                .map(|s| {
                    let row = dense_row(&m, u[s], s);
                    m.alpha() * row.iter().zip(&term).map(|(p, v)| p * v).sum::<f64>()
                })
                .collect();
            total.iter_mut().zip(&term).for_each(|(t, v)| *t += v);
        }
        let policy = Policy::new(u, d).unwrap();
        assert!(sup(&m.policy_evaluate(&policy).unwrap(), &total) < 1e-10);
    }
}

#[test]
fn stationary_distribution_matches_linear_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let n = rng.random_range(2..=8);
        let m = random_model(&mut rng, n, 2, 0.9).unwrap();
        let u: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        // πᵀ(P − I) = 0 with the last equation replaced by Σπ = 1
        let p: Vec<Vec<f64>> = (0..n).map(|s| dense_row(&m, u[s], s)).collect();
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| p[i][j] - if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        a[n - 1] = vec![1.0; n];
        let mut b = vec![0.0; n];
        b[n - 1] = 1.0;
        let oracle = gauss_solve(a, b);
        let pi = m
            .stationary_distribution(&Policy::new(u, 2).unwrap(), 1e-12)
            .unwrap();
        // random dense rows give an irreducible chain, so π is unique
        assert!(sup(&pi, &oracle) < 1e-8, "{pi:?} vs {oracle:?}");
    }
}

/// `min_a max_i |y_i − a − b·x_i|` for fixed `b` is half the spread of `y − b·x`.
fn affine_eps(x: &[f64], y: &[f64], b: f64) -> f64 {
    let r: Vec<f64> = x.iter().zip(y).map(|(xi, yi)| yi - b * xi).collect();
    let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
    (hi - lo) / 2.0
}

#[test]
fn chebyshev_fit_matches_slope_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let n = rng.random_range(3..=12);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        // convex in the slope: golden-section search
        let (mut lo, mut hi) = (-100.0f64, 100.0f64);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if affine_eps(&x, &y, m1) < affine_eps(&x, &y, m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let oracle = affine_eps(&x, &y, (lo + hi) / 2.0);
        let phi = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
        let fit = chebyshev_fit(&phi, &y, SearchBox::default()).unwrap();
        assert!((fit.eps - oracle).abs() < 1e-8, "{} vs {oracle}", fit.eps);
    }
}

/// Minimizes `cᵀr` over `A r ≥ b`, `r ∈ [−h, h]²` by visiting every vertex.
fn vertex_min(c: [f64; 2], a: &DMatrix<f64>, b: &[f64], h: f64) -> Option<f64> {
    let mut lines: Vec<([f64; 2], f64)> = (0..a.nrows())
        .map(|i| ([a[(i, 0)], a[(i, 1)]], b[i]))
        .collect();
    lines.extend([
        ([1.0, 0.0], -h),
        ([-1.0, 0.0], -h),
        ([0.0, 1.0], -h),
        ([0.0, -1.0], -h),
    ]);
    let feasible = |r: [f64; 2]| {
        (0..a.nrows())
            .all(|i| a[(i, 0)] * r[0] + a[(i, 1)] * r[1] >= b[i] - 1e-7 * (1.0 + b[i].abs()))
            && r.iter().all(|v| v.abs() <= h * (1.0 + 1e-12))
    };
    let mut best: Option<f64> = None;
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let ([a1, b1], c1) = lines[i];
            let ([a2, b2], c2) = lines[j];
            let det = a1 * b2 - a2 * b1;
            if det.abs() < 1e-12 {
                continue;
            }
            let r = [(c1 * b2 - c2 * b1) / det, (a1 * c2 - a2 * c1) / det];
            if feasible(r) {
                let v = c[0] * r[0] + c[1] * r[1];
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    }
    best
}

#[test]
fn two_variable_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut infeasible = 0;
    for _ in 0..200 {
        let rows = rng.random_range(1..=6);
        let a = DMatrix::from_fn(rows, 2, |_, _| rng.random_range(-1.0..1.0));
        let b: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let h = 10.0;
        let lp =
            DenseLp::boxed(c.to_vec(), a.clone(), b.clone(), SearchBox::new(h).unwrap()).unwrap();
        let out = lp_solve(&lp).unwrap();
        match vertex_min(c, &a, &b, h) {
            Some(v) => {
                assert!(!out.is_infeasible());
                assert!(
                    (out.value - v).abs() < 1e-7 * (1.0 + v.abs()),
                    "{} vs {v}",
                    out.value
                );
            }
            None => {
                infeasible += 1;
                assert!(out.is_infeasible());
            }
        }
    }
    assert!(infeasible > 0, "sample should include infeasible systems");
}

#[test]
fn lub_projection_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..15 {
        let n = rng.random_range(2..=6);
        let d = rng.random_range(1..=3);
        let m = random_model(&mut rng, n, d, 0.9).unwrap();
        let phi = random_features(&mut rng, n, 2).unwrap();
        let j: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let tj = m.bellman_apply(&j).unwrap();
        let h = 1e4;
        let ctx = ProjectionContext::lub(&m, &phi, SearchBox::new(h).unwrap()).unwrap();
        let proj = lub_project(&ctx, &j).unwrap();
        for i in 0..n {
            let c = [phi.matrix()[(i, 0)], phi.matrix()[(i, 1)]];
            let v = vertex_min(c, phi.matrix(), &tj, h).unwrap();
            assert!((proj.values[i] - v).abs() < 1e-7 * (1.0 + v.abs()));
        }
    }
}

#[test]
fn multipliers_match_discounted_visit_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 5;
    let m = random_model(&mut rng, n, 2, 0.7).unwrap();
    let c = random_state_weights(&mut rng, n).unwrap();
    let u = m
        .greedy_policy(&m.value_iteration(1e-10, 100_000).unwrap())
        .unwrap();
    // Σ_t α^t (cᵀP_u^t)(s)
    let mut dist = c.to_vec();
    let mut visits = vec![0.0; n];
    let mut scale = 1.0;
    for _ in 0..300 {
        visits
            .iter_mut()
            .zip(&dist)
            .for_each(|(v, p)| *v += scale * p);
        let mut next = vec![0.0; n];
        for s in 0..n {
            for (j, p) in m.transition(u.action(s)).row(s) {
                next[j] += dist[s] * p;
            }
        }
        dist = next;
        scale *= m.alpha();
    }
    let lambda = optimal_lagrange(&m, &c, &u).unwrap();
    for s in 0..n {
        assert!((lambda[u.action(s) * n + s] - visits[s]).abs() < 1e-10);
        let other = 1 - u.action(s);
        assert_eq!(lambda[other * n + s], 0.0);
    }
}

#[test]
fn raw_and_normalized_bases_span_the_same_space() {
    let cfg = QueueConfig::small();
    let m = cfg.build_mdp().unwrap();
    let c = StateWeights::uniform(cfg.n);
    let raw = polynomial_features(cfg.n, cfg.k, FeatureBasis::Raw).unwrap();
    let norm = polynomial_features(cfg.n, cfg.k, FeatureBasis::Normalized).unwrap();
    let a = solve_alp(&m, &raw, &c, SearchBox::default()).unwrap();
    let b = solve_alp(&m, &norm, &c, SearchBox::default()).unwrap();
    assert!(!a.box_clipped && !b.box_clipped);
    assert!(sup(&a.values, &b.values) < 1e-8);

    let w = aggregation_w(cfg.n, 2, cfg.m).unwrap();
    let a = solve_grlp(&m, &raw, &w, &c, SearchBox::default()).unwrap();
    let b = solve_grlp(&m, &norm, &w, &c, SearchBox::default()).unwrap();
    assert!(!a.box_clipped && !b.box_clipped);
    assert!(sup(&a.values, &b.values) < 1e-8);

    let j = m.value_iteration(1e-10, 1_000_000).unwrap();
    let pa = lub_project(
        &ProjectionContext::lub(&m, &raw, SearchBox::default()).unwrap(),
        &j,
    )
    .unwrap();
    let pb = lub_project(
        &ProjectionContext::lub(&m, &norm, SearchBox::default()).unwrap(),
        &j,
    )
    .unwrap();
    assert!(sup(&pa.values, &pb.values) < 1e-7);
}

#[test]
fn identity_features_reduce_alp_to_exact_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let m = random_model(&mut rng, 6, 3, 0.85).unwrap();
    let c = random_state_weights(&mut rng, 6).unwrap();
    let alp = solve_alp(&m, &FeatureMatrix::identity(6), &c, SearchBox::default()).unwrap();
    assert!(sup(&alp.values, &enumerate_optimal(&m)) < 1e-8);
}
