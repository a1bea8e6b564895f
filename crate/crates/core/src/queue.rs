//! Single controlled queue with a finite buffer.
//!
//! States are queue lengths `0..n`. Each step one of three events happens: an
//! arrival with probability `p`, a departure with probability `q(a)` set by
//! the chosen service level `a`, or nothing. Arrivals to a full buffer are
//! dropped. The reward `g_a(s) = −(s + 60·q(a)³)` charges for both queue
//! length and service effort.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::alp::{FeatureMatrix, StateWeights};
use crate::error::{Error, Result};
use crate::mdp::{MdpModel, TransitionMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueConfig {
    /// Number of states (buffer size + 1).
    pub n: usize,
    /// Arrival probability.
    pub p: f64,
    /// Service probability per action, nondecreasing.
    pub q: Vec<f64>,
    pub alpha: f64,
    /// Decay of the geometric state-relevance weights; `None` means uniform.
    #[serde(default)]
    pub zeta: Option<f64>,
    /// Number of polynomial features.
    pub k: usize,
    /// Number of aggregated constraints.
    pub m: usize,
    #[serde(default)]
    pub rate_overflow: RateOverflow,
}

/// What to do with an action whose `p + q(a)` exceeds one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateOverflow {
    #[default]
    Reject,
    /// Interior states move up with `p/(p+q)` and down with `q/(p+q)`, keeping
    /// the arrival/service ratio. Boundary rows are unchanged.
    Rescale,
}

impl QueueConfig {
    /// The ten-state, two-action system.
    pub fn small() -> Self {
        Self {
            n: 10,
            p: 0.2,
            q: vec![0.2, 0.4],
            alpha: 0.98,
            zeta: None,
            k: 2,
            m: 5,
            rate_overflow: RateOverflow::Reject,
        }
    }

    /// The 10⁴-state, four-action system. Its fastest service level has
    /// `p + q = 1.2`, so interior rows are rescaled.
    pub fn large() -> Self {
        Self {
            n: 10_000,
            p: 0.4,
            q: vec![0.2, 0.4, 0.6, 0.8],
            alpha: 0.98,
            zeta: Some(0.9),
            k: 4,
            m: 50,
            rate_overflow: RateOverflow::Rescale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.n == 0 {
            return bad("queue needs at least one state".into());
        }
        if self.q.is_empty() {
            return bad("queue needs at least one service level".into());
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return bad(format!("arrival probability {} outside (0, 1)", self.p));
        }
        if !(self.q[0] > 0.0) || self.q.windows(2).any(|w| !(w[0] <= w[1])) {
            return bad("service probabilities must be positive and nondecreasing".into());
        }
        let q_max = *self.q.last().unwrap();
        if !(q_max < 1.0) || !(q_max > self.p) {
            return bad(format!(
                "largest service probability {q_max} must lie in (p, 1) for stability"
            ));
        }
        if self.rate_overflow == RateOverflow::Reject {
            if let Some(&q) = self.q.iter().find(|&&q| self.p + q > 1.0) {
                return bad(format!("p + q = {} exceeds 1", self.p + q));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("discount {} outside (0, 1)", self.alpha));
        }
        if let Some(z) = self.zeta {
            if !(z > 0.0 && z < 1.0) {
                return bad(format!("zeta {z} outside (0, 1)"));
            }
        }
        if self.k == 0 || self.m == 0 {
            return bad("k and m must be positive".into());
        }
        Ok(())
    }

    pub fn num_actions(&self) -> usize {
        self.q.len()
    }

    pub fn build_mdp(&self) -> Result<MdpModel> {
        build_queue_mdp(self)
    }

    /// Geometric weights when `zeta` is set, uniform otherwise.
    pub fn state_weights(&self) -> Result<StateWeights> {
        match self.zeta {
            Some(z) => geometric_c(self.n, z),
            None => Ok(StateWeights::uniform(self.n)),
        }
    }
}

pub fn reward(s: usize, q: f64) -> f64 {
    -(s as f64 + 60.0 * q.powi(3))
}

pub fn build_queue_mdp(cfg: &QueueConfig) -> Result<MdpModel> {
    cfg.validate()?;
    let n = cfg.n;
    let p = cfg.p;
    let mut transitions = Vec::with_capacity(cfg.q.len());
    let mut rewards = Vec::with_capacity(cfg.q.len());
    for &q in &cfg.q {
        let (up, down) = if p + q > 1.0 {
            (p / (p + q), q / (p + q))
        } else {
            (p, q)
        };
        let rows = (0..n)
            .map(|s| {
                if n == 1 {
                    vec![(0, 1.0)]
                } else if s == 0 {
                    vec![(0, 1.0 - p), (1, p)]
                } else if s == n - 1 {
                    vec![(s - 1, q), (s, 1.0 - q)]
                } else {
                    vec![(s - 1, down), (s, (1.0 - up - down).max(0.0)), (s + 1, up)]
                }
            })
            .collect();
        transitions.push(TransitionMatrix::from_rows(n, rows)?);
        rewards.push((0..n).map(|s| reward(s, q)).collect());
    }
    MdpModel::new(transitions, rewards, cfg.alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureBasis {
    /// Powers of `s/(n−1)`; same span as raw powers, far better conditioned.
    #[default]
    Normalized,
    /// Powers of `s` itself.
    Raw,
}

/// Column `j` is `(s/(n−1))^j` (or `s^j` for [`FeatureBasis::Raw`]).
pub fn polynomial_features(n: usize, k: usize, basis: FeatureBasis) -> Result<FeatureMatrix> {
    if k == 0 {
        return Err(Error::InvalidInput(
            "at least one feature is required".into(),
        ));
    }
    if n < 2 && k > 1 {
        return Err(Error::InvalidInput(format!(
            "{k} polynomial features need at least two states"
        )));
    }
    let scale = match basis {
        FeatureBasis::Normalized if n > 1 => (n - 1) as f64,
        _ => 1.0,
    };
    let phi = DMatrix::from_fn(n, k, |s, j| (s as f64 / scale).powi(j as i32));
    FeatureMatrix::new(phi)
}

/// `c(s) ∝ ζ^s`, renormalized over `s = 0..n`.
pub fn geometric_c(n: usize, zeta: f64) -> Result<StateWeights> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::InvalidInput(format!("zeta {zeta} outside (0, 1)")));
    }
    let raw: Vec<f64> = (0..n).map(|s| zeta.powi(s as i32)).collect();
    let total: f64 = raw.iter().sum();
    StateWeights::new(raw.into_iter().map(|v| v / total).collect())
}
