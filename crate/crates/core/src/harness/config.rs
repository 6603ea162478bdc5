//! Benchmark configuration.
//!
//! ```toml
//! [run]
//! preset = "desk"            # or "paper"
//! seed = 7                   # master seed
//! seeds = 5                  # trials per (variant, env)
//! variants = ["N-CPL", "RIW_C"]
//! envs = ["gridnav-sparse", "maze"]
//!
//! [learner]                  # overrides for every variant
//! learning_rate = 2.5e-4
//!
//! [variant.CPL]              # overrides for one variant
//! epochs = 4
//!
//! [env.maze]                 # custom environment; other names are presets
//! kind = "gridnav"
//! size = 6
//! reward = "dense"
//! ```

use std::collections::BTreeMap;

use serde::Deserialize;

use super::HarnessError;
use crate::agent::{AgentVariant, TrainRunConfig};
use crate::envs::{make_env, EnvSpec};
use crate::features::FeatureMode;
use crate::planner::NoveltyReset;
use crate::taxonomy::Sidedness;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Paper,
    #[default]
    Desk,
}

impl Preset {
    pub fn train_config(self) -> TrainRunConfig {
        match self {
            Preset::Paper => TrainRunConfig::default(),
            Preset::Desk => TrainRunConfig::desk(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    #[serde(default)]
    preset: Preset,
    #[serde(default)]
    seed: u64,
    seeds: Option<usize>,
    variants: Option<Vec<String>>,
    envs: Option<Vec<String>>,
    #[serde(default)]
    smrf_test: Sidedness,
}

/// Optional overrides of [`TrainRunConfig`] fields.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Overrides {
    total_budget: Option<u64>,
    interval_budget: Option<u64>,
    plan_budget: Option<u64>,
    horizon: Option<usize>,
    novelty_reset: Option<NoveltyReset>,
    eval_episodes: Option<usize>,
    max_episode_steps: Option<usize>,
    gamma: Option<f64>,
    target_update_steps: Option<u64>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    hidden: Option<Vec<usize>>,
    clip_rewards: Option<bool>,
    features: Option<FeatureMode>,
    tile_cols: Option<usize>,
    tile_rows: Option<usize>,
}

impl Overrides {
    fn apply(&self, c: &mut TrainRunConfig) {
        macro_rules! set {
            ($($src:ident => $($dst:ident).+;)*) => {
                $(if let Some(v) = self.$src.clone() { c.$($dst).+ = v; })*
            };
        }
        set! {
            total_budget => total_budget;
            interval_budget => interval_budget;
            plan_budget => plan.budget;
            horizon => plan.horizon;
            novelty_reset => plan.novelty_reset;
            eval_episodes => eval_episodes;
            max_episode_steps => max_episode_steps;
            gamma => gamma;
            target_update_steps => target_update_steps;
            batch_size => fit.batch_size;
            learning_rate => fit.learning_rate;
            epochs => fit.epochs;
            hidden => hidden;
            clip_rewards => clip_rewards;
            features => features.mode;
            tile_cols => features.tile_cols;
            tile_rows => features.tile_rows;
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    learner: Overrides,
    #[serde(default)]
    variant: BTreeMap<String, Overrides>,
    #[serde(default)]
    env: BTreeMap<String, toml::Table>,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub preset: Preset,
    pub master_seed: u64,
    pub seeds: usize,
    pub variants: Vec<AgentVariant>,
    pub envs: Vec<EnvSpec>,
    pub train: BTreeMap<AgentVariant, TrainRunConfig>,
    pub smrf_test: Sidedness,
}

pub const DEFAULT_SEEDS: usize = 5;

fn line_of(text: &str, needle: &str) -> Option<usize> {
    text.lines().position(|l| l.contains(needle)).map(|i| i + 1)
}

fn config_error(text: &str, needle: &str, message: String) -> HarnessError {
    HarnessError::Config {
        line: line_of(text, needle),
        message,
    }
}

fn validate(v: AgentVariant, c: &TrainRunConfig) -> Result<(), String> {
    let positive = [
        ("total_budget", c.total_budget),
        ("interval_budget", c.interval_budget),
        ("plan_budget", c.plan.budget),
        ("horizon", c.plan.horizon as u64),
        ("eval_episodes", c.eval_episodes as u64),
        ("max_episode_steps", c.max_episode_steps as u64),
        ("batch_size", c.fit.batch_size as u64),
        ("target_update_steps", c.target_update_steps),
    ];
    if let Some((name, _)) = positive.iter().find(|(_, x)| *x == 0) {
        return Err(format!("{v}: {name} must be positive"));
    }
    if !(c.fit.learning_rate >= 0.0 && c.fit.learning_rate.is_finite()) {
        return Err(format!("{v}: learning_rate must be finite and non-negative"));
    }
    if c.interval_budget > c.total_budget {
        return Err(format!("{v}: interval_budget exceeds total_budget"));
    }
    if !(c.gamma > 0.0 && c.gamma <= 1.0) {
        return Err(format!("{v}: gamma must lie in (0, 1]"));
    }
    Ok(())
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| HarnessError::Config {
            line: e.span().map(|s| text[..s.start].matches('\n').count() + 1),
            message: e.message().to_string(),
        })?;
        let variants = match &raw.run.variants {
            None => AgentVariant::ALL.to_vec(),
            Some(names) => names
                .iter()
                .map(|n| n.parse().map_err(|e| config_error(text, n, format!("{e}"))))
                .collect::<Result<_, _>>()?,
        };
        for name in raw.variant.keys() {
            let v: AgentVariant = name.parse().map_err(|e| config_error(text, name, format!("{e}")))?;
            if !variants.contains(&v) {
                return Err(config_error(text, name, format!("section for unused variant {v}")));
            }
        }
        let env_names = raw
            .run
            .envs
            .clone()
            .unwrap_or_else(|| crate::envs::registered_names().into_iter().map(String::from).collect());
        let mut envs = Vec::new();
        for name in &env_names {
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(config_error(text, name, format!("env name {name:?} must be [A-Za-z0-9_-]+")));
            }
            let spec = match raw.env.get(name) {
                Some(table) => {
                    let mut table = table.clone();
                    table.insert("name".into(), toml::Value::String(name.clone()));
                    toml::Value::Table(table)
                        .try_into::<EnvSpec>()
                        .map_err(|e| config_error(text, &format!("[env.{name}]"), format!("env {name}: {e}")))?
                }
                None => EnvSpec::preset(name).map_err(|e| config_error(text, name, e.to_string()))?,
            };
            make_env(&spec).map_err(|e| config_error(text, name, e.to_string()))?;
            envs.push(spec);
        }
        if envs.is_empty() || variants.is_empty() {
            return Err(HarnessError::Config {
                line: None,
                message: "at least one variant and one env are required".into(),
            });
        }
        let mut train = BTreeMap::new();
        for &v in &variants {
            let mut c = raw.run.preset.train_config();
            raw.learner.apply(&mut c);
            if let Some(o) = raw
                .variant
                .iter()
                .find(|(k, _)| k.parse::<AgentVariant>().ok() == Some(v))
                .map(|(_, o)| o)
            {
                o.apply(&mut c);
            }
            validate(v, &c).map_err(|m| config_error(text, "budget", m))?;
            train.insert(v, c);
        }
        let seeds = raw.run.seeds.unwrap_or(DEFAULT_SEEDS);
        if seeds == 0 {
            return Err(config_error(text, "seeds", "seeds must be positive".into()));
        }
        Ok(Self {
            preset: raw.run.preset,
            master_seed: raw.run.seed,
            seeds,
            variants,
            envs,
            train,
            smrf_test: raw.run.smrf_test,
        })
    }

    pub fn env_names(&self) -> Vec<String> {
        self.envs.iter().map(|e| e.name.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_full_matrix() {
        let c = BenchConfig::parse("").unwrap();
        assert_eq!(c.variants.len(), 5);
        assert_eq!(c.envs.len(), crate::envs::registered_names().len());
        assert_eq!(c.seeds, 5);
        let t = &c.train[&AgentVariant::NCpl];
        assert_eq!(t.total_budget, 200_000);
        assert_eq!(t.interval_budget, 50_000);
        assert_eq!(t.plan.budget, 100);
        assert_eq!(t.plan.horizon, 100);
        assert_eq!(t.fit.batch_size, 128);
        assert_eq!(t.fit.learning_rate, 2.5e-4);
        assert_eq!(t.fit.epochs, 8);
        assert_eq!(t.gamma, 0.99);
    }

    #[test]
    fn paper_preset_and_overrides() {
        let text = r#"
[run]
preset = "paper"
variants = ["N-CPL", "CPL"]
envs = ["gridnav-sparse", "maze"]

[learner]
epochs = 3

[variant.CPL]
epochs = 2
plan_budget = 50

[env.maze]
kind = "gridnav"
size = 6
reward = "dense"
"#;
        let c = BenchConfig::parse(text).unwrap();
        let n = &c.train[&AgentVariant::NCpl];
        assert_eq!(n.total_budget, 20_000_000);
        assert_eq!(n.interval_budget, 1_000_000);
        assert_eq!(n.target_update_steps, 10_000);
        assert_eq!(n.fit.epochs, 3);
        let cpl = &c.train[&AgentVariant::Cpl];
        assert_eq!((cpl.fit.epochs, cpl.plan.budget), (2, 50));
        assert_eq!(c.envs[1].size, Some(6));
        assert_eq!(c.env_names(), vec!["gridnav-sparse", "maze"]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "[run]\nseeds = 2\nenvs = [\"pong\"]\n";
        match BenchConfig::parse(text) {
            Err(HarnessError::Config { line, .. }) => assert_eq!(line, Some(3)),
            other => panic!("{other:?}"),
        }
        let text = "[run]\nseeds = 2\n\n[learner]\nlearning_rat = 1.0\n";
        match BenchConfig::parse(text) {
            Err(HarnessError::Config { line, .. }) => assert_eq!(line, Some(5)),
            other => panic!("{other:?}"),
        }
        let text = "[learner]\ninterval_budget = 10\ntotal_budget = 5\n";
        assert!(matches!(BenchConfig::parse(text), Err(HarnessError::Config { .. })));
    }
}
