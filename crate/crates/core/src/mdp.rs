//! Finite discounted MDPs: Bellman operator, value iteration, policy
//! evaluation and stationary distributions.
//!
//! Transition kernels are stored row-sparse so that the queue benchmark with
//! `n = 10⁴` states fits comfortably in memory; dense constructors are
//! provided for small hand-written models.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// Above this state count policy evaluation switches from a dense LU solve to
/// fixed-point iteration.
pub const DENSE_EVAL_LIMIT: usize = 2000;

/// Row-compressed stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    probs: Vec<f64>,
}

impl TransitionMatrix {
    /// Builds a matrix from explicit `(next_state, probability)` lists, one per
    /// row. Zero entries are dropped; duplicate columns are summed.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        check_len("transition rows", n, rows.len())?;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut probs = Vec::new();
        row_ptr.push(0);
        for (s, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            let mut sum = 0.0;
            let start = cols.len();
            for (c, p) in row {
                if c >= n {
                    return Err(Error::InvalidModel(format!(
                        "row {s} references state {c} outside 0..{n}"
                    )));
                }
                if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "row {s} has probability {p} outside [0, 1]"
                    )));
                }
                sum += p;
                if p == 0.0 {
                    continue;
                }
                if cols.len() > start && *cols.last().unwrap() == c {
                    *probs.last_mut().unwrap() += p;
                } else {
                    cols.push(c);
                    probs.push(p);
                }
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidModel(format!("row {s} sums to {sum}, not 1")));
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            n,
            row_ptr,
            cols,
            probs,
        })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let sparse = rows
            .iter()
            .map(|row| {
                check_len("transition row length", n, row.len())?;
                Ok(row.iter().copied().enumerate().collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(n, sparse)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            probs: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, s: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[s]..self.row_ptr[s + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.probs[range].iter().copied())
    }

    /// `(P v)(s) = Σ_{s'} p(s, s') v(s')`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|s| self.row(s).map(|(c, p)| p * v[c]).sum())
            .collect()
    }

    /// Row vector times matrix: `(πᵀP)(s') = Σ_s π(s) p(s, s')`.
    pub fn apply_left(&self, pi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (s, &w) in pi.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (c, p) in self.row(s) {
                out[c] += w * p;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for s in 0..self.n {
            for (c, p) in self.row(s) {
                m[(s, c)] += p;
            }
        }
        m
    }
}

/// Real vector indexed by state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueFunction(Vec<f64>);

impl ValueFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "value function entry {i} is not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `‖self − other‖∞`.
    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        sup_distance(&self.0, &other.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ValueFunction {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }
}

impl Deref for ValueFunction {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<ValueFunction> for Vec<f64> {
    fn from(v: ValueFunction) -> Self {
        v.0
    }
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Stationary deterministic policy: one action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy(Vec<usize>);

impl Policy {
    pub fn new(actions: Vec<usize>, num_actions: usize) -> Result<Self> {
        if let Some((s, &a)) = actions.iter().enumerate().find(|(_, &a)| a >= num_actions) {
            return Err(Error::InvalidInput(format!(
                "policy picks action {a} in state {s}, but only {num_actions} actions exist"
            )));
        }
        Ok(Self(actions))
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn action(&self, s: usize) -> usize {
        self.0[s]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Un-maximized Bellman targets `Q[a][s] = g_a(s) + α (P_a J)(s)`, stored
/// action-major so that row `a·n + s` of the stacked vector is `(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BellmanTargets {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl BellmanTargets {
    pub fn get(&self, a: usize, s: usize) -> f64 {
        self.data[a * self.n + s]
    }

    pub fn action(&self, a: usize) -> &[f64] {
        &self.data[a * self.n..(a + 1) * self.n]
    }

    /// The `n·d` vector in action-major order.
    pub fn stacked(&self) -> &[f64] {
        &self.data
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn num_actions(&self) -> usize {
        self.d
    }

    /// Per-state maximum over actions, i.e. `TJ`.
    pub fn max_over_actions(&self) -> Vec<f64> {
        (0..self.n)
            .map(|s| {
                (0..self.d)
                    .map(|a| self.get(a, s))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    /// Per-state argmax; ties go to the lowest action index.
    pub fn argmax_over_actions(&self) -> Vec<usize> {
        (0..self.n)
            .map(|s| {
                let mut best = 0;
                for a in 1..self.d {
                    if self.get(a, s) > self.get(best, s) {
                        best = a;
                    }
                }
                best
            })
            .collect()
    }
}

/// Finite MDP `(S, A, P, g)` with discount `α`. Rewards are maximized.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpModel {
    n: usize,
    transitions: Vec<TransitionMatrix>,
    rewards: Vec<Vec<f64>>,
    alpha: f64,
}

impl MdpModel {
    /// `transitions[a]` is `P_a`, `rewards[a][s]` is `g_a(s)`.
    pub fn new(
        transitions: Vec<TransitionMatrix>,
        rewards: Vec<Vec<f64>>,
        alpha: f64,
    ) -> Result<Self> {
        if transitions.is_empty() {
            return Err(Error::InvalidModel(
                "at least one action is required".into(),
            ));
        }
        let n = transitions[0].n();
        if n == 0 {
            return Err(Error::InvalidModel("at least one state is required".into()));
        }
        for p in &transitions {
            check_len("states per transition matrix", n, p.n())?;
        }
        check_len("reward rows", transitions.len(), rewards.len())?;
        for (a, g) in rewards.iter().enumerate() {
            check_len("rewards per action", n, g.len())?;
            if let Some(s) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "reward g_{a}({s}) is not finite"
                )));
            }
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidModel(format!(
                "discount factor {alpha} is not inside (0, 1)"
            )));
        }
        Ok(Self {
            n,
            transitions,
            rewards,
            alpha,
        })
    }

    /// Dense constructor: `transitions[a][s][s']`.
    pub fn from_dense(
        transitions: &[Vec<Vec<f64>>],
        rewards: Vec<Vec<f64>>,
        alpha: f64,
    ) -> Result<Self> {
        let p = transitions
            .iter()
            .map(|rows| TransitionMatrix::from_dense(rows))
            .collect::<Result<Vec<_>>>()?;
        Self::new(p, rewards, alpha)
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn num_actions(&self) -> usize {
        self.transitions.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn transition(&self, a: usize) -> &TransitionMatrix {
        &self.transitions[a]
    }

    pub fn rewards(&self, a: usize) -> &[f64] {
        &self.rewards[a]
    }

    /// Largest absolute reward; `J*` is bounded by this over `1 − α`.
    pub fn max_abs_reward(&self) -> f64 {
        self.rewards
            .iter()
            .flatten()
            .fold(0.0, |m, g| m.max(g.abs()))
    }

    fn check_value(&self, j: &[f64]) -> Result<()> {
        check_len("value function length", self.n, j.len())
    }

    fn check_policy(&self, u: &Policy) -> Result<()> {
        check_len("policy length", self.n, u.len())?;
        Policy::new(u.actions().to_vec(), self.num_actions()).map(|_| ())
    }

    pub fn bellman_targets(&self, j: &[f64]) -> Result<BellmanTargets> {
        self.check_value(j)?;
        let mut data = Vec::with_capacity(self.n * self.num_actions());
        for (p, g) in self.transitions.iter().zip(&self.rewards) {
            let next = p.apply(j);
            data.extend(g.iter().zip(next).map(|(g, v)| g + self.alpha * v));
        }
        Ok(BellmanTargets {
            n: self.n,
            d: self.num_actions(),
            data,
        })
    }

    /// `(TJ)(s) = max_a ( g_a(s) + α Σ p_a(s,s') J(s') )`.
    pub fn bellman_apply(&self, j: &[f64]) -> Result<ValueFunction> {
        Ok(ValueFunction(self.bellman_targets(j)?.max_over_actions()))
    }

    /// Iterates `J ← TJ` from zero until `‖J − TJ‖∞ ≤ tol·(1−α)/(2α)`, which
    /// puts the returned vector within `tol` of `J*` in sup norm.
    pub fn value_iteration(&self, tol: f64, max_iter: usize) -> Result<ValueFunction> {
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tolerance {tol} must be positive"
            )));
        }
        let threshold = tol * (1.0 - self.alpha) / (2.0 * self.alpha);
        let mut j = vec![0.0; self.n];
        let mut residual = f64::INFINITY;
        for _ in 0..max_iter {
            let tj = self.bellman_apply(&j)?.0;
            residual = sup_distance(&tj, &j);
            j = tj;
            // j is now T(previous), whose own residual is at most α·residual.
            if residual <= threshold {
                return Ok(ValueFunction(j));
            }
        }
        Err(Error::NotConverged {
            what: "value iteration",
            iterations: max_iter,
            residual,
        })
    }

    /// Greedy policy with respect to `J`; ties go to the lowest action index.
    pub fn greedy_policy(&self, j: &[f64]) -> Result<Policy> {
        Ok(Policy(self.bellman_targets(j)?.argmax_over_actions()))
    }

    /// `P_u` as a dense matrix and `g_u` for a policy.
    pub(crate) fn policy_dense(&self, u: &Policy) -> (DMatrix<f64>, DVector<f64>) {
        let mut p = DMatrix::zeros(self.n, self.n);
        let mut g = DVector::zeros(self.n);
        for s in 0..self.n {
            let a = u.action(s);
            g[s] = self.rewards[a][s];
            for (c, prob) in self.transitions[a].row(s) {
                p[(s, c)] += prob;
            }
        }
        (p, g)
    }

    fn policy_step(&self, u: &Policy, j: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|s| {
                let a = u.action(s);
                let next: f64 = self.transitions[a].row(s).map(|(c, p)| p * j[c]).sum();
                self.rewards[a][s] + self.alpha * next
            })
            .collect()
    }

    /// Solves `(I − αP_u) J = g_u`.
    pub fn policy_evaluate(&self, u: &Policy) -> Result<ValueFunction> {
        self.check_policy(u)?;
        const RESIDUAL_TOL: f64 = 1e-8;
        let j = if self.n <= DENSE_EVAL_LIMIT {
            let (p, g) = self.policy_dense(u);
            let system = DMatrix::identity(self.n, self.n) - p * self.alpha;
            let lu = system.clone().lu();
            let mut x = lu.solve(&g).ok_or(Error::NotConverged {
                what: "policy evaluation",
                iterations: 0,
                residual: f64::INFINITY,
            })?;
            // one refinement step
            let r = &g - &system * &x;
            if let Some(dx) = lu.solve(&r) {
                x += dx;
            }
            x.iter().copied().collect()
        } else {
            let mut j = vec![0.0; self.n];
            let mut converged = false;
            for _ in 0..1_000_000 {
                let next = self.policy_step(u, &j);
                let delta = sup_distance(&next, &j);
                j = next;
                if delta <= RESIDUAL_TOL * 0.5 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NotConverged {
                    what: "policy evaluation",
                    iterations: 1_000_000,
                    residual: sup_distance(&self.policy_step(u, &j), &j),
                });
            }
            j
        };
        let residual = sup_distance(&self.policy_step(u, &j), &j);
        if residual > RESIDUAL_TOL {
            return Err(Error::NotConverged {
                what: "policy evaluation",
                iterations: 0,
                residual,
            });
        }
        ValueFunction::new(j)
    }

    /// Stationary distribution of the chain `P_u`.
    ///
    /// A damped power iteration (`π ← 0.99·πP_u + 0.01/n`) gives a unique
    /// starting point; lazy iterations `π ← (π + πP_u)/2`, which share the
    /// chain's stationary distributions but are aperiodic, then drive the
    /// undamped residual `‖πP_u − π‖₁` below `tol`.
    pub fn stationary_distribution(&self, u: &Policy, tol: f64) -> Result<Vec<f64>> {
        self.check_policy(u)?;
        const DAMPING: f64 = 0.99;
        const MAX_ITER: usize = 500_000;
        let n = self.n;
        let step = |pi: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (s, &w) in pi.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (c, p) in self.transitions[u.action(s)].row(s) {
                    out[c] += w * p;
                }
            }
            out
        };
        let normalize = |pi: &mut Vec<f64>| {
            let total: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|x| *x /= total);
        };
        let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();

        let mut pi = vec![1.0 / n as f64; n];
        for _ in 0..MAX_ITER {
            let mut next: Vec<f64> = step(&pi)
                .into_iter()
                .map(|x| DAMPING * x + (1.0 - DAMPING) / n as f64)
                .collect();
            normalize(&mut next);
            let delta = l1(&next, &pi);
            pi = next;
            if delta <= tol * 1e-2 {
                break;
            }
        }
        let mut residual = f64::INFINITY;
        for _ in 0..MAX_ITER {
            let moved = step(&pi);
            residual = l1(&moved, &pi);
            if residual <= tol {
                return Ok(pi);
            }
            pi = pi.iter().zip(&moved).map(|(a, b)| 0.5 * (a + b)).collect();
            normalize(&mut pi);
        }
        Err(Error::NotConverged {
            what: "stationary distribution",
            iterations: MAX_ITER,
            residual,
        })
    }
}
