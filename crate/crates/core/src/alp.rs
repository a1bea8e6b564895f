//! Exact LP, approximate LP and generalized reduced LP for discounted MDPs,
//! and the constructors for the constraint-aggregation matrix `W`.
//!
//! All `n·d`-row objects use action-major ordering: the constraint for state
//! `s` under action `a` lives in row `a·n + s`.

use std::ops::Deref;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::lp::{column_rank, lp_solve, DenseLp, SearchBox};
use crate::mdp::{MdpModel, Policy, ValueFunction};

/// State count above which the exact LP is refused.
pub const EXACT_LP_LIMIT: usize = 2000;

/// Feature matrix `Φ` (`n × k`) whose first column is all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(DMatrix<f64>);

impl FeatureMatrix {
    pub fn new(phi: DMatrix<f64>) -> Result<Self> {
        let (n, k) = phi.shape();
        if n == 0 || k == 0 {
            return Err(Error::InvalidInput(
                "feature matrix must be non-empty".into(),
            ));
        }
        if k > n {
            return Err(Error::InvalidInput(format!(
                "{k} features exceed {n} states"
            )));
        }
        if phi.column(0).iter().any(|&v| (v - 1.0).abs() > 1e-12) {
            return Err(Error::InvalidInput(
                "first feature column must be the constant one".into(),
            ));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("features must be finite".into()));
        }
        if column_rank(&phi) < k {
            return Err(Error::InvalidInput(
                "feature matrix is rank deficient".into(),
            ));
        }
        Ok(Self(phi))
    }

    /// Identity features (`Φ = I`), for which the ALP is the exact LP. The
    /// constant column is not present, so this bypasses the usual check.
    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn num_states(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.0.ncols()
    }

    /// `Φ r`.
    pub fn combine(&self, r: &[f64]) -> ValueFunction {
        let v = &self.0 * nalgebra::DVector::from_column_slice(r);
        ValueFunction::new(v.iter().copied().collect()).expect("finite features and weights")
    }

    /// `Φ` repeated `d` times vertically (`n·d × k`).
    pub fn stacked(&self, d: usize) -> DMatrix<f64> {
        let (n, k) = self.0.shape();
        DMatrix::from_fn(n * d, k, |row, j| self.0[(row % n, j)])
    }
}

impl Deref for FeatureMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// State-relevance weights `c`: a probability vector over states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateWeights(Vec<f64>);

impl StateWeights {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::InvalidInput(
                "state weights must be non-empty".into(),
            ));
        }
        if c.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(
                "state weights must be nonnegative".into(),
            ));
        }
        let total: f64 = c.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "state weights sum to {total}, not 1"
            )));
        }
        Ok(Self(c))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `cᵀΦ`.
    pub fn objective(&self, phi: &FeatureMatrix) -> Vec<f64> {
        (0..phi.num_features())
            .map(|j| {
                self.0
                    .iter()
                    .enumerate()
                    .map(|(s, c)| c * phi[(s, j)])
                    .sum()
            })
            .collect()
    }
}

impl Deref for StateWeights {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// The unfurled constraints `Φr ≥ TΦr` as `A r ≥ b`, one row per
/// state-action pair: `A = [(I − αP_a)Φ]_a`, `b = [g_a]_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlpSystem {
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    n: usize,
    d: usize,
}

impl AlpSystem {
    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn num_actions(&self) -> usize {
        self.d
    }

    pub fn num_rows(&self) -> usize {
        self.n * self.d
    }

    pub fn row_index(&self, s: usize, a: usize) -> usize {
        a * self.n + s
    }

    /// The aggregated system `(WᵀA, Wᵀb)`.
    pub fn aggregate(&self, w: &ConstraintAggregator) -> Result<(DMatrix<f64>, Vec<f64>)> {
        check_len("aggregator rows", self.num_rows(), w.nrows())?;
        let wt = w.matrix().transpose();
        let a = &wt * &self.a;
        let b = &wt * nalgebra::DVector::from_column_slice(&self.b);
        Ok((a, b.iter().copied().collect()))
    }
}

pub fn build_alp_constraints(model: &MdpModel, phi: &FeatureMatrix) -> Result<AlpSystem> {
    let n = model.num_states();
    let d = model.num_actions();
    check_len("feature rows", n, phi.num_states())?;
    let k = phi.num_features();
    let alpha = model.alpha();
    let mut a = DMatrix::zeros(n * d, k);
    for act in 0..d {
        let p = model.transition(act);
        for j in 0..k {
            let col: Vec<f64> = phi.column(j).iter().copied().collect();
            let next = p.apply(&col);
            for s in 0..n {
                a[(act * n + s, j)] = col[s] - alpha * next[s];
            }
        }
    }
    let b = (0..d).flat_map(|act| model.rewards(act).to_vec()).collect();
    Ok(AlpSystem { a, b, n, d })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WKind {
    Aggregation,
    SampledByC,
    SampledIdeal,
    Random,
    Selection,
}

/// Nonnegative `n·d × m` matrix whose columns combine ALP constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintAggregator {
    w: DMatrix<f64>,
    kind: WKind,
}

impl ConstraintAggregator {
    pub fn new(w: DMatrix<f64>, kind: WKind) -> Result<Self> {
        let (rows, m) = w.shape();
        if m == 0 || m > rows {
            return Err(Error::InvalidInput(format!(
                "aggregator has {m} columns for {rows} constraints"
            )));
        }
        if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(
                "aggregator entries must be nonnegative".into(),
            ));
        }
        if let Some(j) = (0..m).find(|&j| w.column(j).iter().all(|&v| v == 0.0)) {
            return Err(Error::InvalidInput(format!(
                "aggregator column {j} is all zero"
            )));
        }
        Ok(Self { w, kind })
    }

    /// `W = I`: the GRLP is then the ALP itself.
    pub fn identity(nd: usize) -> Self {
        Self {
            w: DMatrix::identity(nd, nd),
            kind: WKind::Selection,
        }
    }

    pub fn kind(&self) -> WKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn nrows(&self) -> usize {
        self.w.nrows()
    }

    pub fn num_columns(&self) -> usize {
        self.w.ncols()
    }
}

/// 0/1 matrix with column `j` selecting row `rows[j]`; the GRLP with it is
/// the reduced LP over those rows.
pub fn selection_w(rows: &[usize], nd: usize) -> Result<ConstraintAggregator> {
    if rows.is_empty() {
        return Err(Error::InvalidInput(
            "selection needs at least one row".into(),
        ));
    }
    let mut w = DMatrix::zeros(nd, rows.len());
    for (j, &r) in rows.iter().enumerate() {
        if r >= nd {
            return Err(Error::InvalidInput(format!(
                "selected row {r} outside 0..{nd}"
            )));
        }
        w[(r, j)] = 1.0;
    }
    // duplicates may push m past nd; that is still a valid selection
    Ok(ConstraintAggregator {
        w,
        kind: WKind::Selection,
    })
}

/// State aggregation: column `i` sums all constraints (every action) of the
/// `n/m` consecutive states `i·n/m … (i+1)·n/m − 1`.
pub fn aggregation_w(n: usize, d: usize, m: usize) -> Result<ConstraintAggregator> {
    if m == 0 || n % m != 0 {
        return Err(Error::InvalidInput(format!(
            "aggregate count {m} must divide the state count {n}"
        )));
    }
    let group = n / m;
    let mut w = DMatrix::zeros(n * d, m);
    for i in 0..m {
        for a in 0..d {
            for s in i * group..(i + 1) * group {
                w[(a * n + s, i)] = 1.0;
            }
        }
    }
    ConstraintAggregator::new(w, WKind::Aggregation)
}

/// Row weights for sampling by `c`: `(s, a)` gets `c(s)/d`.
pub fn row_weights_by_c(c: &StateWeights, d: usize) -> Vec<f64> {
    (0..d)
        .flat_map(|_| c.iter().map(move |&cs| cs / d as f64))
        .collect()
}

/// Row weights for the ideal sampler: `(s, u*(s))` gets `π_{u*}(s)`, all
/// off-policy rows get zero.
pub fn ideal_row_weights(stationary: &[f64], u_star: &Policy, d: usize) -> Result<Vec<f64>> {
    let n = stationary.len();
    check_len("policy length", n, u_star.len())?;
    let total: f64 = stationary.iter().sum();
    let mut w = vec![0.0; n * d];
    for s in 0..n {
        w[u_star.action(s) * n + s] = stationary[s] / total;
    }
    Ok(w)
}

/// Draws `m` rows i.i.d. (with replacement) from `weights` and returns their
/// selection matrix, tagged with `kind`.
pub fn sampled_w(
    weights: &[f64],
    m: usize,
    seed: u64,
    kind: WKind,
) -> Result<ConstraintAggregator> {
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "sampling weights must be a probability vector (sum {total})"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidInput(
            "at least one sample is required".into(),
        ));
    }
    let dist = WeightedIndex::new(weights)
        .map_err(|e| Error::InvalidInput(format!("degenerate sampling weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<usize> = (0..m).map(|_| dist.sample(&mut rng)).collect();
    let mut w = selection_w(&rows, weights.len())?;
    w.kind = kind;
    Ok(w)
}

/// Dense `nd × m` matrix with i.i.d. entries uniform on `(0, 1)`.
pub fn random_w(nd: usize, m: usize, seed: u64) -> Result<ConstraintAggregator> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // column-major fill keeps the draw order independent of nalgebra internals
    let mut w = DMatrix::zeros(nd, m);
    for j in 0..m {
        for i in 0..nd {
            w[(i, j)] = Open01.sample(&mut rng);
        }
    }
    ConstraintAggregator::new(w, WKind::Random)
}

/// Solution of an ALP or GRLP.
#[derive(Debug, Clone, PartialEq)]
pub struct AlpSolution {
    pub weights: Vec<f64>,
    pub values: ValueFunction,
    /// `cᵀΦr`.
    pub objective: f64,
    pub box_clipped: bool,
}

/// Exact LP `min cᵀJ s.t. J ≥ TJ`, solved directly over the `n` state values.
pub fn solve_exact_lp(model: &MdpModel, c: &StateWeights) -> Result<ValueFunction> {
    let n = model.num_states();
    if n > EXACT_LP_LIMIT {
        return Err(Error::GuardExceeded {
            what: "exact LP state count",
            limit: EXACT_LP_LIMIT,
            actual: n,
        });
    }
    check_len("state weights", n, c.len())?;
    let system = build_alp_constraints(model, &FeatureMatrix::identity(n))?;
    // |J*| ≤ max|g|/(1−α), so this box can never bind
    let half = 2.0 * model.max_abs_reward() / (1.0 - model.alpha()) + 1.0;
    let lp = DenseLp::boxed(c.to_vec(), system.a, system.b, SearchBox::new(half)?)?;
    let (x, _, _) = lp_solve(&lp)?.into_solution()?;
    ValueFunction::new(x)
}

fn solve_reduced(
    phi: &FeatureMatrix,
    c: &StateWeights,
    a: DMatrix<f64>,
    b: Vec<f64>,
    search_box: SearchBox,
) -> Result<AlpSolution> {
    check_len("state weights", phi.num_states(), c.len())?;
    let lp = DenseLp::boxed(c.objective(phi), a, b, search_box)?;
    let (weights, objective, box_clipped) = lp_solve(&lp)?.into_solution()?;
    Ok(AlpSolution {
        values: phi.combine(&weights),
        weights,
        objective,
        box_clipped,
    })
}

/// ALP: `min cᵀΦr s.t. Φr ≥ TΦr, r ∈ box`.
pub fn solve_alp(
    model: &MdpModel,
    phi: &FeatureMatrix,
    c: &StateWeights,
    search_box: SearchBox,
) -> Result<AlpSolution> {
    let system = build_alp_constraints(model, phi)?;
    solve_reduced(phi, c, system.a, system.b, search_box)
}

/// GRLP: `min cᵀΦr s.t. WᵀΦr ≥ WᵀTΦr, r ∈ box`.
pub fn solve_grlp(
    model: &MdpModel,
    phi: &FeatureMatrix,
    w: &ConstraintAggregator,
    c: &StateWeights,
    search_box: SearchBox,
) -> Result<AlpSolution> {
    let system = build_alp_constraints(model, phi)?;
    let (a, b) = system.aggregate(w)?;
    solve_reduced(phi, c, a, b, search_box)
}
