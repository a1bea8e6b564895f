use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::SearchBox;
use crate::queue::{FeatureBasis, QueueConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Ten-state queue.
    Qs,
    /// 10⁴-state queue.
    Ql,
    /// Model read from a JSON file.
    Custom,
}

/// Constraint-matrix recipe. `ByC`, `Ideal` and `Random` are stochastic and
/// need explicit seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WRecipeKind {
    Aggregation,
    ByC,
    Ideal,
    Random,
    Identity,
}

impl WRecipeKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Aggregation => "aggregation",
            Self::ByC => "by_c",
            Self::Ideal => "ideal",
            Self::Random => "random",
            Self::Identity => "identity",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Self::ByC | Self::Ideal | Self::Random)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WRecipe {
    pub kind: WRecipeKind,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Column count; defaults to the scenario's `m`.
    #[serde(default)]
    pub m: Option<usize>,
}

impl WRecipe {
    pub fn deterministic(kind: WRecipeKind) -> Self {
        Self {
            kind,
            seeds: Vec::new(),
            m: None,
        }
    }

    pub fn seeded(kind: WRecipeKind, seeds: Vec<u64>) -> Self {
        Self {
            kind,
            seeds,
            m: None,
        }
    }

    /// One entry per table row: the seeds, or a single `None`.
    pub fn cells(&self) -> Vec<Option<u64>> {
        if self.kind.is_stochastic() {
            self.seeds.iter().copied().map(Some).collect()
        } else {
            vec![None]
        }
    }
}

/// Model file for `scenario = "custom"` plus its feature and aggregate counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    pub model: PathBuf,
    pub k: usize,
    pub m: usize,
}

/// JSON layout of a custom model: `transitions[a][s][s']`, `rewards[a][s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub alpha: f64,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Target `‖J − J*‖∞` for value iteration. Defaults: 1e-9, or 1e-7 on
    /// the large queue.
    pub value_iteration: Option<f64>,
    pub max_iterations: Option<usize>,
    pub stationary: Option<f64>,
    pub fixed_point: Option<f64>,
    pub fixed_point_max_iter: Option<usize>,
}

impl Tolerances {
    pub fn value_iteration_or(&self, scenario: Scenario) -> f64 {
        self.value_iteration.unwrap_or(match scenario {
            Scenario::Ql => 1e-7,
            _ => 1e-9,
        })
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations.unwrap_or(1_000_000)
    }

    pub fn stationary(&self) -> f64 {
        self.stationary.unwrap_or(1e-10)
    }

    pub fn fixed_point(&self) -> f64 {
        self.fixed_point.unwrap_or(1e-8)
    }

    pub fn fixed_point_max_iter(&self) -> usize {
        self.fixed_point_max_iter.unwrap_or(20_000)
    }
}

/// Settings of the randomized property suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertySettings {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_states")]
    pub max_states: usize,
    #[serde(default = "default_max_actions")]
    pub max_actions: usize,
    #[serde(default = "default_max_features")]
    pub max_features: usize,
    /// Fixed discount; drawn from `[0.5, 0.95]` otherwise.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Fixed state count; drawn from `2..=max_states` otherwise.
    #[serde(default)]
    pub states: Option<usize>,
    /// Scales row 0 of `P_0` by this factor before validation. For checking
    /// that the suite reports broken models.
    #[serde(default)]
    pub corrupt_row_sum: Option<f64>,
}

fn default_trials() -> usize {
    100
}
fn default_max_states() -> usize {
    10
}
fn default_max_actions() -> usize {
    3
}
fn default_max_features() -> usize {
    3
}

impl Default for PropertySettings {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            seed: 0,
            max_states: default_max_states(),
            max_actions: default_max_actions(),
            max_features: default_max_features(),
            alpha: None,
            states: None,
            corrupt_row_sum: None,
        }
    }
}

impl PropertySettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("properties.trials must be positive".into());
        }
        if !(2..=10).contains(&self.max_states) {
            return bad(format!(
                "properties.max_states {} outside 2..=10",
                self.max_states
            ));
        }
        if !(1..=3).contains(&self.max_actions) {
            return bad(format!(
                "properties.max_actions {} outside 1..=3",
                self.max_actions
            ));
        }
        if !(1..=3).contains(&self.max_features) {
            return bad(format!(
                "properties.max_features {} outside 1..=3",
                self.max_features
            ));
        }
        if let Some(n) = self.states {
            if !(1..=self.max_states).contains(&n) {
                return bad(format!(
                    "properties.states {n} outside 1..={}",
                    self.max_states
                ));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("properties.alpha {a} outside (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Per-state curves written by the `curves` command. Values are stored
/// negated, so that the (negative) rewards plot as positive costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// `J*`
    JStar,
    /// ALP solution `J̃`.
    JAlp,
    /// GRLP solution `Ĵ`.
    JGrlp,
    /// Fixed point `Ṽ` of `Γ`.
    VLub,
    /// Fixed point `V̂` of `Γ̃`.
    VAlub,
    /// `ΓJ̄`
    LubJBar,
    /// `Γ̃J̄`
    AlubJBar,
    /// Value `J_û` of the policy greedy with respect to `Ĵ`.
    JGreedy,
}

impl CurveKind {
    pub const ALL: [CurveKind; 8] = [
        Self::JStar,
        Self::JAlp,
        Self::JGrlp,
        Self::VLub,
        Self::VAlub,
        Self::LubJBar,
        Self::AlubJBar,
        Self::JGreedy,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            Self::JStar => "neg_j_star",
            Self::JAlp => "neg_j_alp",
            Self::JGrlp => "neg_j_grlp",
            Self::VLub => "neg_v_lub",
            Self::VAlub => "neg_v_alub",
            Self::LubJBar => "neg_lub_j_bar",
            Self::AlubJBar => "neg_alub_j_bar",
            Self::JGreedy => "neg_j_greedy",
        }
    }

    /// Whether the curve depends on the state weights `c`.
    pub fn depends_on_c(self) -> bool {
        matches!(self, Self::JAlp | Self::JGrlp | Self::JGreedy)
    }

    pub fn defaults(scenario: Scenario) -> Vec<CurveKind> {
        match scenario {
            Scenario::Qs => Self::ALL[..7].to_vec(),
            Scenario::Ql => vec![Self::JStar, Self::JGrlp, Self::JGreedy],
            Scenario::Custom => Self::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Replaces the scenario's preset queue.
    #[serde(default)]
    pub queue: Option<QueueConfig>,
    #[serde(default)]
    pub custom: Option<CustomModel>,
    /// Defaults to the aggregation recipe alone.
    #[serde(default = "default_recipes")]
    pub w: Vec<WRecipe>,
    /// Geometric state-weight decays; each gives its own `c`. Empty means the
    /// queue's own weights (uniform for the small queue).
    #[serde(default)]
    pub zetas: Vec<f64>,
    #[serde(default)]
    pub feature_basis: FeatureBasis,
    #[serde(default = "default_box")]
    pub box_half_width: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Curves to emit; empty means the scenario's default set.
    #[serde(default)]
    pub curves: Vec<CurveKind>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub properties: PropertySettings,
}

fn default_recipes() -> Vec<WRecipe> {
    vec![WRecipe::deterministic(WRecipeKind::Aggregation)]
}

fn default_box() -> f64 {
    SearchBox::DEFAULT_HALF_WIDTH
}

impl ExperimentConfig {
    /// Preset for a scenario with only the aggregation recipe.
    pub fn preset(scenario: Scenario) -> Self {
        Self {
            scenario,
            queue: None,
            custom: None,
            w: default_recipes(),
            zetas: match scenario {
                Scenario::Ql => vec![0.9, 0.999],
                _ => Vec::new(),
            },
            feature_basis: FeatureBasis::default(),
            box_half_width: default_box(),
            out_dir: None,
            curves: Vec::new(),
            tolerances: Tolerances::default(),
            properties: PropertySettings::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config. A relative custom-model path is taken
    /// relative to the config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text)?;
        if let Some(custom) = cfg.custom.as_mut() {
            if custom.model.is_relative() {
                if let Some(dir) = path.parent() {
                    custom.model = dir.join(&custom.model);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match self.scenario {
            Scenario::Custom => match &self.custom {
                None => return bad("scenario \"custom\" needs a [custom] section".into()),
                Some(c) if !c.model.is_file() => {
                    return bad(format!("model file {} does not exist", c.model.display()))
                }
                Some(_) if self.queue.is_some() => {
                    return bad("[queue] cannot be combined with scenario \"custom\"".into())
                }
                Some(_) => {}
            },
            _ if self.custom.is_some() => {
                return bad("[custom] is only valid with scenario \"custom\"".into())
            }
            _ => {}
        }
        if let Some(q) = &self.queue {
            q.validate()?;
        }
        if self.w.is_empty() {
            return bad("at least one W recipe is required".into());
        }
        let mut seen = BTreeSet::new();
        for r in &self.w {
            if r.kind.is_stochastic() && r.seeds.is_empty() {
                return bad(format!(
                    "W recipe \"{}\" needs explicit seeds",
                    r.kind.name()
                ));
            }
            if !r.kind.is_stochastic() && !r.seeds.is_empty() {
                return bad(format!("W recipe \"{}\" takes no seeds", r.kind.name()));
            }
            if r.m == Some(0) {
                return bad(format!("W recipe \"{}\" has m = 0", r.kind.name()));
            }
            if !seen.insert((r.kind.name(), r.m)) {
                return bad(format!("W recipe \"{}\" listed twice", r.kind.name()));
            }
        }
        if let Some(z) = self.zetas.iter().find(|z| !(**z > 0.0 && **z < 1.0)) {
            return bad(format!("zeta {z} outside (0, 1)"));
        }
        SearchBox::new(self.box_half_width)?;
        self.properties.validate()
    }

    /// Replaces the seeds of every stochastic recipe, and the property-suite
    /// seed, with `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        for r in self.w.iter_mut().filter(|r| r.kind.is_stochastic()) {
            r.seeds = vec![seed];
        }
        self.properties.seed = seed;
    }

    pub fn override_box(&mut self, half_width: f64) -> Result<()> {
        SearchBox::new(half_width)?;
        self.box_half_width = half_width;
        Ok(())
    }

    pub fn curve_kinds(&self) -> Vec<CurveKind> {
        if self.curves.is_empty() {
            CurveKind::defaults(self.scenario)
        } else {
            self.curves.clone()
        }
    }

    pub fn search_box(&self) -> SearchBox {
        SearchBox::new(self.box_half_width).unwrap_or_default()
    }

    /// The queue this config describes, if it is a queue scenario.
    pub fn queue_config(&self) -> Option<QueueConfig> {
        match self.scenario {
            Scenario::Qs => Some(self.queue.clone().unwrap_or_else(QueueConfig::small)),
            Scenario::Ql => Some(self.queue.clone().unwrap_or_else(QueueConfig::large)),
            Scenario::Custom => None,
        }
    }
}
