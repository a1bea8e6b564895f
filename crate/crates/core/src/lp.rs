//! Dense linear programs with box bounds:
//!
//! ```text
//! min cᵀx   s.t.   A x ≥ b,   l ≤ x ≤ u
//! ```
//!
//! Every LP in this crate has few variables (at most a handful of feature
//! weights) and possibly many rows, so the solver runs a primal simplex with
//! Bland's rule on the *dual* program
//!
//! ```text
//! max b'ᵀλ − wᵀμ   s.t.   Aᵀλ − μ + s = c,   λ, μ, s ≥ 0
//! ```
//!
//! with `x = l + y`, `w = u − l` and `b' = b − A l`. Its basis is only
//! `k × k`. Because the box is finite the dual always has a trivial feasible
//! start (`s_j = c_j` or `μ_j = −c_j`), so no phase-one problem is needed; an
//! unbounded dual ray certifies primal infeasibility. The primal point is
//! read off the optimal basis as `Bᵀ y = b̃_B`.
//!
//! The basis is re-factorized from the original data on every pivot, which
//! costs `O(k³)` and keeps reduced costs (the primal constraint violations)
//! accurate to round-off.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const OPTIMALITY_TOL: f64 = 1e-11;
const FEASIBILITY_TOL: f64 = 1e-9;
const CLIP_TOL: f64 = 1e-9;

/// Axis-aligned box `[−h, h]^k` standing in for the compact decision set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    half_width: f64,
}

impl SearchBox {
    pub const DEFAULT_HALF_WIDTH: f64 = 1e6;

    pub fn new(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "box half-width {half_width} must be positive and finite"
            )));
        }
        Ok(Self { half_width })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn bounds(&self, k: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![-self.half_width; k], vec![self.half_width; k])
    }
}

impl Default for SearchBox {
    fn default() -> Self {
        Self {
            half_width: Self::DEFAULT_HALF_WIDTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLp {
    objective: Vec<f64>,
    constraints: DMatrix<f64>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DenseLp {
    pub fn new(
        objective: Vec<f64>,
        constraints: DMatrix<f64>,
        rhs: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        let k = objective.len();
        if k == 0 {
            return Err(Error::InvalidInput(
                "an LP needs at least one variable".into(),
            ));
        }
        check_len("constraint columns", k, constraints.ncols())?;
        check_len("right-hand side", constraints.nrows(), rhs.len())?;
        check_len("lower bounds", k, lower.len())?;
        check_len("upper bounds", k, upper.len())?;
        let all_finite = objective
            .iter()
            .chain(constraints.iter())
            .chain(&rhs)
            .chain(&lower)
            .chain(&upper)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidInput("LP data must be finite".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::InvalidInput(
                "lower bound exceeds upper bound".into(),
            ));
        }
        Ok(Self {
            objective,
            constraints,
            rhs,
            lower,
            upper,
        })
    }

    pub fn boxed(
        objective: Vec<f64>,
        constraints: DMatrix<f64>,
        rhs: Vec<f64>,
        search_box: SearchBox,
    ) -> Result<Self> {
        let (lower, upper) = search_box.bounds(objective.len());
        Self::new(objective, constraints, rhs, lower, upper)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &DMatrix<f64> {
        &self.constraints
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest amount by which `x` violates a row, `max_i (b_i − A_i x)₊`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        (0..self.num_rows())
            .map(|i| {
                let ax: f64 = (0..self.num_vars())
                    .map(|j| self.constraints[(i, j)] * x[j])
                    .sum();
                (self.rhs[i] - ax).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Row tolerance used for feasibility claims: `1e-7·(1 + ‖b‖∞)`.
    pub fn feasibility_tolerance(&self) -> f64 {
        1e-7 * (1.0 + self.rhs.iter().fold(0.0_f64, |m, b| m.max(b.abs())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    /// Optimal, but at least one box bound carries a positive multiplier:
    /// widening the box would improve the objective.
    BoxClipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Empty when infeasible.
    pub x: Vec<f64>,
    /// `+∞` when infeasible.
    pub value: f64,
}

impl LpOutcome {
    pub fn box_clipped(&self) -> bool {
        self.status == LpStatus::BoxClipped
    }

    pub fn is_infeasible(&self) -> bool {
        self.status == LpStatus::Infeasible
    }

    pub fn into_solution(self) -> Result<(Vec<f64>, f64, bool)> {
        match self.status {
            LpStatus::Infeasible => Err(Error::Infeasible),
            s => Ok((self.x, self.value, s == LpStatus::BoxClipped)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum DualVar {
    Row(usize),
    Upper(usize),
    Lower(usize),
}

struct DualProblem {
    k: usize,
    // scaled rows, row-major k-vectors
    rows: Vec<Vec<f64>>,
    // b' = b̂ − Â l
    row_cost: Vec<f64>,
    width: Vec<f64>,
    objective: Vec<f64>,
}

impl DualProblem {
    fn num_cols(&self) -> usize {
        self.rows.len() + 2 * self.k
    }

    fn var(&self, q: usize) -> DualVar {
        let m = self.rows.len();
        if q < m {
            DualVar::Row(q)
        } else if q < m + self.k {
            DualVar::Upper(q - m)
        } else {
            DualVar::Lower(q - m - self.k)
        }
    }

    fn column(&self, q: usize) -> DVector<f64> {
        match self.var(q) {
            DualVar::Row(i) => DVector::from_column_slice(&self.rows[i]),
            DualVar::Upper(j) => {
                let mut v = DVector::zeros(self.k);
                v[j] = -1.0;
                v
            }
            DualVar::Lower(j) => {
                let mut v = DVector::zeros(self.k);
                v[j] = 1.0;
                v
            }
        }
    }

    fn cost(&self, q: usize) -> f64 {
        match self.var(q) {
            DualVar::Row(i) => self.row_cost[i],
            DualVar::Upper(j) => -self.width[j],
            DualVar::Lower(_) => 0.0,
        }
    }

    /// Reduced cost of column `q` given primal `y`, with its tolerance.
    fn reduced_cost(&self, q: usize, y: &DVector<f64>) -> (f64, f64) {
        match self.var(q) {
            DualVar::Row(i) => {
                let ay: f64 = self.rows[i].iter().zip(y.iter()).map(|(a, y)| a * y).sum();
                let mag: f64 = self.rows[i]
                    .iter()
                    .zip(y.iter())
                    .map(|(a, y)| (a * y).abs())
                    .sum();
                (self.row_cost[i] - ay, 1.0 + self.row_cost[i].abs() + mag)
            }
            DualVar::Upper(j) => (y[j] - self.width[j], 1.0 + self.width[j] + y[j].abs()),
            DualVar::Lower(j) => (-y[j], 1.0 + y[j].abs()),
        }
    }
}

/// Borrowed LP data, so callers solving many LPs over one constraint matrix
/// need not copy it.
#[derive(Clone, Copy)]
pub(crate) struct LpRef<'a> {
    pub objective: &'a [f64],
    pub constraints: &'a DMatrix<f64>,
    pub rhs: &'a [f64],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

impl LpRef<'_> {
    fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}

/// Solves a box-constrained LP to a vertex optimum. Deterministic: the same
/// input always yields bit-identical output.
pub fn lp_solve(lp: &DenseLp) -> Result<LpOutcome> {
    solve_ref(LpRef {
        objective: &lp.objective,
        constraints: &lp.constraints,
        rhs: &lp.rhs,
        lower: &lp.lower,
        upper: &lp.upper,
    })
}

pub(crate) fn solve_ref(lp: LpRef<'_>) -> Result<LpOutcome> {
    let k = lp.num_vars();
    let b_scale = 1.0 + lp.rhs.iter().fold(0.0_f64, |m, b| m.max(b.abs()));

    let mut rows = Vec::with_capacity(lp.num_rows());
    let mut row_cost = Vec::with_capacity(lp.num_rows());
    for i in 0..lp.num_rows() {
        let row: Vec<f64> = (0..k).map(|j| lp.constraints[(i, j)]).collect();
        let scale = row.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        if scale == 0.0 {
            if lp.rhs[i] > FEASIBILITY_TOL * b_scale {
                return Ok(infeasible());
            }
            continue;
        }
        let scaled: Vec<f64> = row.iter().map(|a| a / scale).collect();
        let shift: f64 = scaled.iter().zip(lp.lower).map(|(a, l)| a * l).sum();
        row_cost.push(lp.rhs[i] / scale - shift);
        rows.push(scaled);
    }
    let scaled_b_max = row_cost.iter().fold(0.0_f64, |m, b| m.max(b.abs()));
    let dual = DualProblem {
        k,
        rows,
        row_cost,
        width: lp.upper.iter().zip(lp.lower).map(|(u, l)| u - l).collect(),
        objective: lp.objective.to_vec(),
    };
    let m = dual.rows.len();
    let c = DVector::from_column_slice(&dual.objective);

    let mut basis: Vec<usize> = (0..k)
        .map(|j| {
            if dual.objective[j] >= 0.0 {
                m + k + j
            } else {
                m + j
            }
        })
        .collect();
    let mut excluded = vec![false; dual.num_cols()];
    let max_iter = 50_000 + 200 * dual.num_cols();

    for _ in 0..max_iter {
        let b_mat =
            DMatrix::from_columns(&basis.iter().map(|&q| dual.column(q)).collect::<Vec<_>>());
        let lu = b_mat.clone().lu();
        let x_b = lu.solve(&c).ok_or(Error::IterationLimit(0))?;
        let cost_b = DVector::from_iterator(k, basis.iter().map(|&q| dual.cost(q)));
        let y = b_mat
            .transpose()
            .lu()
            .solve(&cost_b)
            .ok_or(Error::IterationLimit(0))?;

        // Bland: the lowest-index improving column enters.
        let entering = (0..dual.num_cols()).find(|&q| {
            if excluded[q] || basis.contains(&q) {
                return false;
            }
            let (r, mag) = dual.reduced_cost(q, &y);
            r > OPTIMALITY_TOL * mag
        });
        let Some(q) = entering else {
            return Ok(finish(&lp, &dual, &basis, &x_b, &y));
        };

        let d = lu.solve(&dual.column(q)).ok_or(Error::IterationLimit(0))?;
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..k {
            if d[r] <= PIVOT_TOL {
                continue;
            }
            let theta = x_b[r].max(0.0) / d[r];
            leave = match leave {
                None => Some((r, theta)),
                Some((br, bt)) => {
                    let tie = (theta - bt).abs() <= 1e-12 * (1.0 + bt.abs());
                    if (tie && basis[r] < basis[br]) || (!tie && theta < bt) {
                        Some((r, theta))
                    } else {
                        Some((br, bt))
                    }
                }
            };
        }
        match leave {
            Some((r, _)) => basis[r] = q,
            None => {
                // Unbounded dual ray: the primal cannot satisfy column q's
                // constraint. Tolerate violations inside the feasibility band.
                let (violation, _) = dual.reduced_cost(q, &y);
                let band = match dual.var(q) {
                    DualVar::Row(_) => FEASIBILITY_TOL * (1.0 + scaled_b_max),
                    _ => FEASIBILITY_TOL * b_scale,
                };
                if violation <= band {
                    excluded[q] = true;
                } else {
                    return Ok(infeasible());
                }
            }
        }
    }
    Err(Error::IterationLimit(max_iter))
}

fn infeasible() -> LpOutcome {
    LpOutcome {
        status: LpStatus::Infeasible,
        x: Vec::new(),
        value: f64::INFINITY,
    }
}

fn finish(
    lp: &LpRef<'_>,
    dual: &DualProblem,
    basis: &[usize],
    x_b: &DVector<f64>,
    y: &DVector<f64>,
) -> LpOutcome {
    let x: Vec<f64> = (0..lp.num_vars())
        .map(|j| (lp.lower[j] + y[j]).clamp(lp.lower[j], lp.upper[j]))
        .collect();
    let c_scale = 1.0 + lp.objective.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let clipped = basis
        .iter()
        .zip(x_b.iter())
        .any(|(&q, &v)| !matches!(dual.var(q), DualVar::Row(_)) && v > CLIP_TOL * c_scale);
    let value = lp.evaluate(&x);
    LpOutcome {
        status: if clipped {
            LpStatus::BoxClipped
        } else {
            LpStatus::Optimal
        },
        x,
        value,
    }
}

/// Result of a sup-norm best fit `min_r ‖target − Φr‖∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevFit {
    pub coeffs: Vec<f64>,
    /// `‖target − Φ·coeffs‖∞`, unique even when the minimizer is not.
    pub eps: f64,
    pub box_clipped: bool,
    /// `Φ` lacks full column rank; the minimizers then form a face.
    pub rank_deficient: bool,
}

pub fn column_rank(phi: &DMatrix<f64>) -> usize {
    if phi.ncols() == 0 || phi.nrows() == 0 {
        return 0;
    }
    let sv = phi.clone().svd(false, false).singular_values;
    let max = sv.iter().fold(0.0_f64, |m, s| m.max(*s));
    let tol = phi.nrows().max(phi.ncols()) as f64 * f64::EPSILON * max;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Solves `min t` over `(r, t)` subject to `−t ≤ target − Φr ≤ t`, with `r`
/// confined to `search_box`.
pub fn chebyshev_fit(
    phi: &DMatrix<f64>,
    target: &[f64],
    search_box: SearchBox,
) -> Result<ChebyshevFit> {
    let (n, k) = phi.shape();
    check_len("fit target length", n, target.len())?;
    let t_max = target.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut a = DMatrix::zeros(2 * n, k + 1);
    let mut b = Vec::with_capacity(2 * n);
    for i in 0..n {
        for j in 0..k {
            a[(i, j)] = phi[(i, j)];
            a[(n + i, j)] = -phi[(i, j)];
        }
        a[(i, k)] = 1.0;
        a[(n + i, k)] = 1.0;
    }
    b.extend_from_slice(target);
    b.extend(target.iter().map(|v| -v));
    let mut objective = vec![0.0; k + 1];
    objective[k] = 1.0;
    let (mut lower, mut upper) = search_box.bounds(k);
    // t ≥ 0 is implied by the rows, so its own bounds never bind.
    lower.push(-1.0);
    upper.push(t_max + 1.0);
    let lp = DenseLp::new(objective, a, b, lower, upper)?;
    let (x, _, box_clipped) = lp_solve(&lp)?.into_solution()?;
    let coeffs = x[..k].to_vec();
    let eps = (0..n)
        .map(|i| {
            let fit: f64 = (0..k).map(|j| phi[(i, j)] * coeffs[j]).sum();
            (target[i] - fit).abs()
        })
        .fold(0.0, f64::max);
    Ok(ChebyshevFit {
        coeffs,
        eps,
        box_clipped,
        rank_deficient: column_rank(phi) < k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lp1(c: f64, rows: &[(f64, f64)], l: f64, u: f64) -> DenseLp {
        let a = DMatrix::from_iterator(rows.len(), 1, rows.iter().map(|r| r.0));
        DenseLp::new(
            vec![c],
            a,
            rows.iter().map(|r| r.1).collect(),
            vec![l],
            vec![u],
        )
        .unwrap()
    }

    #[test]
    fn single_lower_bound_row() {
        let out = lp_solve(&lp1(1.0, &[(1.0, 3.0)], -10.0, 10.0)).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert_abs_diff_eq!(out.x[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.value, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn bound_active_optimum_is_flagged() {
        let out = lp_solve(&lp1(-1.0, &[], -2.0, 2.0)).unwrap();
        assert_eq!(out.status, LpStatus::BoxClipped);
        assert_eq!(out.x, vec![2.0]);
        assert_eq!(out.value, -2.0);
    }

    #[test]
    fn infeasible_against_box() {
        let out = lp_solve(&lp1(1.0, &[(1.0, 5.0)], -1.0, 1.0)).unwrap();
        assert!(out.is_infeasible());
        assert!(matches!(out.into_solution(), Err(Error::Infeasible)));
    }

    #[test]
    fn zero_row_with_positive_rhs_is_infeasible() {
        let out = lp_solve(&lp1(1.0, &[(0.0, 1.0)], -1.0, 1.0)).unwrap();
        assert!(out.is_infeasible());
        let out = lp_solve(&lp1(1.0, &[(0.0, -1.0)], -1.0, 1.0)).unwrap();
        assert_eq!(out.status, LpStatus::BoxClipped);
    }

    #[test]
    fn two_variable_vertex() {
        // min x + y  s.t. x + 2y ≥ 4, 3x + y ≥ 6  → (1.6, 1.2)
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0]);
        let lp = DenseLp::boxed(vec![1.0, 1.0], a, vec![4.0, 6.0], SearchBox::default()).unwrap();
        let out = lp_solve(&lp).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert_abs_diff_eq!(out.x[0], 1.6, epsilon = 1e-10);
        assert_abs_diff_eq!(out.x[1], 1.2, epsilon = 1e-10);
    }

    #[test]
    fn degenerate_face_is_not_clipped() {
        // min x s.t. x ≥ 1, x + y ≥ 0: y is free on a face, x's value is unique.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let lp = DenseLp::boxed(vec![1.0, 0.0], a, vec![1.0, 0.0], SearchBox::default()).unwrap();
        let out = lp_solve(&lp).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert_abs_diff_eq!(out.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_lp_data_rejected() {
        assert!(DenseLp::new(
            vec![1.0],
            DMatrix::zeros(0, 1),
            vec![],
            vec![1.0],
            vec![0.0]
        )
        .is_err());
        assert!(DenseLp::new(vec![], DMatrix::zeros(0, 0), vec![], vec![], vec![]).is_err());
        assert!(DenseLp::new(
            vec![f64::NAN],
            DMatrix::zeros(0, 1),
            vec![],
            vec![0.0],
            vec![1.0]
        )
        .is_err());
        assert!(SearchBox::new(0.0).is_err());
    }

    #[test]
    fn chebyshev_midpoint() {
        let phi = DMatrix::from_element(2, 1, 1.0);
        let fit = chebyshev_fit(&phi, &[0.0, 2.0], SearchBox::default()).unwrap();
        assert_abs_diff_eq!(fit.coeffs[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.eps, 1.0, epsilon = 1e-12);
        assert!(!fit.box_clipped);
        assert!(!fit.rank_deficient);
    }

    #[test]
    fn chebyshev_in_span_is_exact() {
        let phi = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let fit = chebyshev_fit(&phi, &[1.0, 3.0, 5.0], SearchBox::default()).unwrap();
        assert!(fit.eps < 1e-10);
    }

    #[test]
    fn chebyshev_flags_rank_deficiency() {
        let phi = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let fit = chebyshev_fit(&phi, &[0.0, 1.0, 2.0], SearchBox::default()).unwrap();
        assert!(fit.rank_deficient);
        assert_abs_diff_eq!(fit.eps, 1.0, epsilon = 1e-10);
    }
}
