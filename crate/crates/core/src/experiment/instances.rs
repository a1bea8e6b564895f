//! Seeded random desk-scale instances for the property suite and tests.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alp::{ConstraintAggregator, FeatureMatrix, StateWeights, WKind};
use crate::error::{Error, Result};
use crate::mdp::MdpModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceParams {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_features: usize,
    pub alpha: Option<f64>,
    pub states: Option<usize>,
    pub corrupt_row_sum: Option<f64>,
}

impl Default for InstanceParams {
    fn default() -> Self {
        Self {
            max_states: 10,
            max_actions: 3,
            max_features: 3,
            alpha: None,
            states: None,
            corrupt_row_sum: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub model: MdpModel,
    pub phi: FeatureMatrix,
    pub c: StateWeights,
    pub w: ConstraintAggregator,
}

/// Row-stochastic matrix with roughly a third of the entries zeroed.
fn random_stochastic(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random::<f64>() < 0.3 {
                        0.0
                    } else {
                        rng.random()
                    }
                })
                .collect();
            if row.iter().all(|&v| v == 0.0) {
                row[rng.random_range(0..n)] = 1.0;
            }
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= total);
            row
        })
        .collect()
}

/// Random `n`-state, `d`-action model with rewards uniform on `[−1, 1]`.
pub fn random_model(rng: &mut ChaCha8Rng, n: usize, d: usize, alpha: f64) -> Result<MdpModel> {
    random_model_with(rng, n, d, alpha, None)
}

fn random_model_with(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    alpha: f64,
    corrupt_row_sum: Option<f64>,
) -> Result<MdpModel> {
    let mut transitions: Vec<_> = (0..d).map(|_| random_stochastic(rng, n)).collect();
    if let Some(f) = corrupt_row_sum {
        transitions[0][0].iter_mut().for_each(|v| *v *= f);
    }
    let rewards = (0..d)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    MdpModel::from_dense(&transitions, rewards, alpha)
}

/// A ones column followed by `k − 1` columns uniform on `[−1, 1]`, redrawn
/// until the matrix has full column rank.
pub fn random_features(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Result<FeatureMatrix> {
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "cannot draw {k} features for {n} states"
        )));
    }
    for _ in 0..100 {
        let phi = DMatrix::from_fn(n, k, |_, j| {
            if j == 0 {
                1.0
            } else {
                rng.random_range(-1.0..=1.0)
            }
        });
        if let Ok(f) = FeatureMatrix::new(phi) {
            return Ok(f);
        }
    }
    Err(Error::InvalidInput(
        "no full-rank feature draw in 100 attempts".into(),
    ))
}

/// Strictly positive state weights.
pub fn random_state_weights(rng: &mut ChaCha8Rng, n: usize) -> Result<StateWeights> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..=1.0)).collect();
    let total: f64 = raw.iter().sum();
    StateWeights::new(raw.into_iter().map(|v| v / total).collect())
}

/// Random nonnegative `nd × m` aggregator, `n ≤ m ≤ nd`, whose first `n`
/// columns each mix the constraints of a single state over all actions.
/// Those columns force `Φr ≥ T_μΦr` for some randomized policy `μ`, so the
/// GRLP and `Γ̃` are bounded without relying on the box. The remaining
/// columns are dense.
pub fn bounded_random_w(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    m: usize,
) -> Result<ConstraintAggregator> {
    if m < n || m > n * d {
        return Err(Error::InvalidInput(format!(
            "bounded aggregator needs {n} ≤ m ≤ {}, got {m}",
            n * d
        )));
    }
    let mut w = DMatrix::zeros(n * d, m);
    for s in 0..n {
        for a in 0..d {
            w[(a * n + s, s)] = rng.random_range(0.05..=1.0);
        }
    }
    for j in n..m {
        for i in 0..n * d {
            w[(i, j)] = rng.random::<f64>();
        }
    }
    ConstraintAggregator::new(w, WKind::Random)
}

/// One seeded instance: `n ∈ 2..=max_states` (or fixed), `d ∈ 1..=max_actions`,
/// `k ∈ 1..=min(max_features, n)`, `α ∈ [0.5, 0.95]` (or fixed).
pub fn random_instance(params: &InstanceParams, seed: u64) -> Result<RandomInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params
        .states
        .unwrap_or_else(|| rng.random_range(2..=params.max_states.max(2)));
    let d = rng.random_range(1..=params.max_actions.max(1));
    let k = rng.random_range(1..=params.max_features.clamp(1, n));
    let alpha = params.alpha.unwrap_or_else(|| rng.random_range(0.5..=0.95));
    let model = random_model_with(&mut rng, n, d, alpha, params.corrupt_row_sum)?;
    let phi = random_features(&mut rng, n, k)?;
    let c = random_state_weights(&mut rng, n)?;
    let m = rng.random_range(n..=n * d);
    let w = bounded_random_w(&mut rng, n, d, m)?;
    Ok(RandomInstance { model, phi, c, w })
}
