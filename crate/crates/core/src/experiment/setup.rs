//! Turns an [`ExperimentConfig`] into a model, features, state weights and
//! constraint matrices.

use log::info;

use super::config::{ExperimentConfig, ModelFile, Scenario, WRecipe, WRecipeKind};
use crate::alp::{
    aggregation_w, ideal_row_weights, random_w, row_weights_by_c, sampled_w, ConstraintAggregator,
    FeatureMatrix, StateWeights, WKind,
};
use crate::error::{Error, Result};
use crate::mdp::{MdpModel, Policy, ValueFunction};
use crate::queue::{geometric_c, polynomial_features};

/// One state-weight vector; `zeta` is `None` for uniform or queue-default
/// weights.
#[derive(Debug, Clone)]
pub struct WeightCase {
    pub zeta: Option<f64>,
    pub c: StateWeights,
}

/// Everything the table and curve drivers share.
#[derive(Debug, Clone)]
pub struct Setup {
    pub scenario: Scenario,
    pub model: MdpModel,
    pub phi: FeatureMatrix,
    /// Default aggregate count.
    pub m: usize,
    pub cases: Vec<WeightCase>,
    pub j_star: ValueFunction,
    pub u_star: Policy,
    /// Stationary law of `u*`, computed only when an `ideal` recipe needs it.
    pub stationary: Option<Vec<f64>>,
}

pub fn load_model_file(path: &std::path::Path) -> Result<MdpModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    MdpModel::from_dense(&file.transitions, file.rewards, file.alpha)
}

pub fn build_setup(cfg: &ExperimentConfig) -> Result<Setup> {
    cfg.validate()?;
    let (model, k, m, default_c) = match cfg.queue_config() {
        Some(q) => (q.build_mdp()?, q.k, q.m, q.state_weights()?),
        None => {
            let custom = cfg
                .custom
                .as_ref()
                .ok_or_else(|| Error::Config("missing [custom] section".into()))?;
            let model = load_model_file(&custom.model)?;
            let c = StateWeights::uniform(model.num_states());
            (model, custom.k, custom.m, c)
        }
    };
    let n = model.num_states();
    let phi = polynomial_features(n, k, cfg.feature_basis)?;
    let cases = if cfg.zetas.is_empty() {
        let zeta = cfg.queue_config().and_then(|q| q.zeta);
        vec![WeightCase { zeta, c: default_c }]
    } else {
        cfg.zetas
            .iter()
            .map(|&z| {
                Ok(WeightCase {
                    zeta: Some(z),
                    c: geometric_c(n, z)?,
                })
            })
            .collect::<Result<_>>()?
    };

    let tol = cfg.tolerances.value_iteration_or(cfg.scenario);
    let j_star = model.value_iteration(tol, cfg.tolerances.max_iterations())?;
    let u_star = model.greedy_policy(&j_star)?;
    info!("value iteration done for {n} states");
    let stationary = if cfg.w.iter().any(|r| r.kind == WRecipeKind::Ideal) {
        Some(model.stationary_distribution(&u_star, cfg.tolerances.stationary())?)
    } else {
        None
    };
    Ok(Setup {
        scenario: cfg.scenario,
        model,
        phi,
        m,
        cases,
        j_star,
        u_star,
        stationary,
    })
}

impl Setup {
    /// Builds the constraint matrix of `recipe` for weights `c` and `seed`
    /// (ignored by deterministic recipes).
    pub fn build_w(
        &self,
        recipe: &WRecipe,
        c: &StateWeights,
        seed: Option<u64>,
    ) -> Result<ConstraintAggregator> {
        let n = self.model.num_states();
        let d = self.model.num_actions();
        let m = recipe.m.unwrap_or(self.m);
        let need_seed = || {
            seed.ok_or_else(|| {
                Error::Config(format!("recipe \"{}\" needs a seed", recipe.kind.name()))
            })
        };
        match recipe.kind {
            WRecipeKind::Aggregation => aggregation_w(n, d, m),
            WRecipeKind::Identity => Ok(ConstraintAggregator::identity(n * d)),
            WRecipeKind::ByC => {
                sampled_w(&row_weights_by_c(c, d), m, need_seed()?, WKind::SampledByC)
            }
            WRecipeKind::Ideal => {
                let pi = self
                    .stationary
                    .as_ref()
                    .ok_or_else(|| Error::Config("stationary law was not computed".into()))?;
                let weights = ideal_row_weights(pi, &self.u_star, d)?;
                sampled_w(&weights, m, need_seed()?, WKind::SampledIdeal)
            }
            WRecipeKind::Random => random_w(n * d, m, need_seed()?),
        }
    }
}
