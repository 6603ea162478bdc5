//! Desk-scale deterministic pixel environments and their registry.
//!
//! | name              | actions | reward structure                                  |
//! |-------------------|---------|---------------------------------------------------|
//! | `gridnav-sparse`  | 4       | +100 at the far corner, 0 elsewhere               |
//! | `gridnav-dense`   | 4       | ±1 per step of Manhattan progress, +100 at goal   |
//! | `corridor-70`     | 3       | −1 per step, −50 per missed gate charged at row 70 |
//! | `branch-k<K>`     | K       | +1 per level survived, one live action per level  |
//! | `keydoor`         | 4       | +100 at the door after collecting the key         |
//! | `random-mdp-<s>`  | 3       | random integer rewards in [−2, 2]                 |

mod branch;
mod corridor;
mod gridnav;
mod keydoor;
mod random_mdp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use branch::BranchK;
pub use corridor::Corridor;
pub use gridnav::{GridNav, GridReward};
pub use keydoor::KeyDoor;
pub use random_mdp::RandomMdp;

use crate::mdp::Environment;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("unknown environment `{0}`")]
    UnknownEnv(String),
    #[error("invalid parameters for `{name}`: {reason}")]
    InvalidSpec { name: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    Gridnav,
    Corridor,
    Branch,
    Keydoor,
    RandomMdp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardStructure {
    Dense,
    SparseGoal,
    DelayedPenalty,
    KeyDoor,
}

/// Declarative description of an environment instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    #[serde(default)]
    pub name: String,
    pub kind: EnvKind,
    #[serde(default)]
    pub reward: Option<RewardStructure>,
    /// Grid side for grid worlds, course length for corridors.
    #[serde(default)]
    pub size: Option<usize>,
    /// Action count for `branch`.
    #[serde(default)]
    pub actions: Option<usize>,
    /// Levels for `branch`.
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

pub const GRIDNAV_SIZE: usize = 10;
pub const GRIDNAV_MAX_STEPS: usize = 40;
pub const BRANCH_DEPTH: usize = 20;

impl EnvSpec {
    fn bare(name: &str, kind: EnvKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            reward: None,
            size: None,
            actions: None,
            depth: None,
            max_steps: None,
            seed: None,
        }
    }

    /// Built-in environment by registry name.
    pub fn preset(name: &str) -> Result<Self, EnvError> {
        let mut spec = match name {
            "gridnav-sparse" | "gridnav-dense" => {
                let mut s = Self::bare(name, EnvKind::Gridnav);
                s.reward = Some(if name.ends_with("dense") {
                    RewardStructure::Dense
                } else {
                    RewardStructure::SparseGoal
                });
                s.size = Some(GRIDNAV_SIZE);
                s.max_steps = Some(GRIDNAV_MAX_STEPS);
                s
            }
            "keydoor" => {
                let mut s = Self::bare(name, EnvKind::Keydoor);
                s.size = Some(GRIDNAV_SIZE);
                s.max_steps = Some(3 * GRIDNAV_MAX_STEPS);
                s
            }
            _ => {
                if let Some(len) = name.strip_prefix("corridor-") {
                    let mut s = Self::bare(name, EnvKind::Corridor);
                    s.size = Some(parse_suffix(name, len)?);
                    s
                } else if let Some(k) = name.strip_prefix("branch-k") {
                    let mut s = Self::bare(name, EnvKind::Branch);
                    s.actions = Some(parse_suffix(name, k)?);
                    s
                } else if let Some(seed) = name.strip_prefix("random-mdp-") {
                    let mut s = Self::bare(name, EnvKind::RandomMdp);
                    s.seed = Some(parse_suffix(name, seed)? as u64);
                    s
                } else {
                    return Err(EnvError::UnknownEnv(name.to_string()));
                }
            }
        };
        spec.reward = spec.reward.or(Some(spec.default_reward()));
        Ok(spec)
    }

    fn default_reward(&self) -> RewardStructure {
        match self.kind {
            EnvKind::Gridnav => RewardStructure::SparseGoal,
            EnvKind::Corridor => RewardStructure::DelayedPenalty,
            EnvKind::Branch | EnvKind::RandomMdp => RewardStructure::Dense,
            EnvKind::Keydoor => RewardStructure::KeyDoor,
        }
    }

    pub fn reward_structure(&self) -> RewardStructure {
        self.reward.unwrap_or_else(|| self.default_reward())
    }
}

fn parse_suffix(name: &str, s: &str) -> Result<usize, EnvError> {
    s.parse().map_err(|_| EnvError::UnknownEnv(name.to_string()))
}

pub fn make_env(spec: &EnvSpec) -> Result<Box<dyn Environment>, EnvError> {
    let invalid = |reason: &str| EnvError::InvalidSpec {
        name: spec.name.clone(),
        reason: reason.to_string(),
    };
    let env: Box<dyn Environment> = match spec.kind {
        EnvKind::Gridnav => {
            let size = spec.size.unwrap_or(GRIDNAV_SIZE);
            if size < 2 {
                return Err(invalid("size must be at least 2"));
            }
            let reward = match spec.reward_structure() {
                RewardStructure::Dense => GridReward::Dense,
                RewardStructure::SparseGoal => GridReward::Sparse,
                _ => return Err(invalid("gridnav reward must be dense or sparse-goal")),
            };
            Box::new(GridNav::new(&spec.name, size, reward, spec.max_steps))
        }
        EnvKind::Corridor => {
            let len = spec.size.unwrap_or(70);
            if len < 2 {
                return Err(invalid("corridor length must be at least 2"));
            }
            Box::new(Corridor::new(&spec.name, len))
        }
        EnvKind::Branch => {
            let k = spec.actions.unwrap_or(18);
            let depth = spec.depth.unwrap_or(BRANCH_DEPTH);
            if k == 0 || depth >= 90 {
                return Err(invalid("branch needs actions >= 1 and depth < 90"));
            }
            Box::new(BranchK::new(&spec.name, k, depth))
        }
        EnvKind::Keydoor => {
            let size = spec.size.unwrap_or(GRIDNAV_SIZE);
            if size < 2 {
                return Err(invalid("size must be at least 2"));
            }
            Box::new(KeyDoor::new(&spec.name, size, spec.max_steps))
        }
        EnvKind::RandomMdp => Box::new(RandomMdp::new(
            spec.seed.unwrap_or(0),
            spec.size.unwrap_or(20),
            spec.actions.unwrap_or(3),
            2,
        )),
    };
    Ok(env)
}

/// Builds a registered environment by name.
pub fn make_env_by_name(name: &str) -> Result<Box<dyn Environment>, EnvError> {
    make_env(&EnvSpec::preset(name)?)
}

/// Names of the shipped benchmark environments.
pub fn registered_names() -> Vec<&'static str> {
    vec!["gridnav-sparse", "gridnav-dense", "corridor-70", "branch-k18", "keydoor"]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{step, ActionId};

    #[test]
    fn unknown_names_are_rejected() {
        assert!(matches!(make_env_by_name("pong"), Err(EnvError::UnknownEnv(_))));
        assert!(matches!(make_env_by_name("branch-kx"), Err(EnvError::UnknownEnv(_))));
    }

    #[test]
    fn registry_builds_every_name() {
        for name in registered_names() {
            let env = make_env_by_name(name).unwrap();
            assert_eq!(env.name(), name);
        }
        assert_eq!(make_env_by_name("branch-k10").unwrap().num_actions(), 10);
    }

    #[test]
    fn gridnav_action_set() {
        let env = make_env_by_name("gridnav-sparse").unwrap();
        assert_eq!(env.applicable_actions().len(), 4);
        let env = make_env_by_name("branch-k18").unwrap();
        assert_eq!(env.applicable_actions().len(), 18);
    }

    #[test]
    fn sparse_gridnav_goal_transition() {
        let mut env = GridNav::new("g", 10, GridReward::Sparse, None);
        // Enumerate every cell and move; only entering the goal pays.
        for x in 0..10i64 {
            for y in 0..10i64 {
                let tok = crate::mdp::StateToken::new(vec![x, y]);
                for a in 0..4 {
                    let s = step(&mut env, &tok, ActionId(a)).unwrap();
                    let (nx, ny) = match a {
                        0 => (x, (y - 1).max(0)),
                        1 => (x, (y + 1).min(9)),
                        2 => ((x - 1).max(0), y),
                        _ => ((x + 1).min(9), y),
                    };
                    let at_goal_before = (x, y) == (9, 9);
                    let enters = !at_goal_before && (nx, ny) == (9, 9);
                    assert_eq!(s.reward, if enters { 100.0 } else { 0.0 });
                    assert_eq!(s.terminal, at_goal_before || enters);
                }
            }
        }
    }

    #[test]
    fn dense_gridnav_shaping() {
        let mut env = GridNav::new("g", 10, GridReward::Dense, None);
        let tok = crate::mdp::StateToken::new(vec![0, 0]);
        assert_eq!(step(&mut env, &tok, ActionId(3)).unwrap().reward, 1.0);
        assert_eq!(step(&mut env, &tok, ActionId(0)).unwrap().reward, 0.0);
        let tok = crate::mdp::StateToken::new(vec![5, 5]);
        assert_eq!(step(&mut env, &tok, ActionId(0)).unwrap().reward, -1.0);
        let tok = crate::mdp::StateToken::new(vec![8, 9]);
        assert_eq!(step(&mut env, &tok, ActionId(3)).unwrap().reward, 101.0);
    }

    #[test]
    fn corridor_penalty_is_delayed() {
        let mut env = Corridor::new("c", 70);
        env.reset();
        let mut rewards = vec![];
        while !env.is_terminal() {
            rewards.push(env.apply(ActionId(1)));
        }
        assert_eq!(rewards.len(), 70);
        assert!(rewards[..69].iter().all(|&r| r == -1.0));
        // Straight down the middle column (5) misses gates at cols 0..3, and
        // passes none of the right-hand gates at 7..10 either.
        assert_eq!(env.missed(), env.gates().len());
        assert_eq!(rewards[69], -1.0 - 50.0 * env.gates().len() as f64);
    }

    #[test]
    fn branch_dead_end_is_absorbing() {
        let mut env = BranchK::new("b", 18, 20);
        env.reset();
        let start = env.save_state();
        let good = env.correct_action(0);
        let bad = ActionId((good.0 + 1) % 18);
        let s = step(&mut env, &start, bad).unwrap();
        assert!(s.terminal);
        assert_eq!(s.reward, 0.0);
        let again = step(&mut env, &s.state, good).unwrap();
        assert_eq!((again.reward, again.terminal), (0.0, true));
        let s = step(&mut env, &start, good).unwrap();
        assert_eq!((s.reward, s.terminal), (1.0, false));
    }

    #[test]
    fn keydoor_requires_key() {
        let mut env = KeyDoor::new("k", 3, None);
        let at_door_side = crate::mdp::StateToken::new(vec![1, 2, 0]);
        let s = step(&mut env, &at_door_side, ActionId(3)).unwrap();
        assert_eq!((s.reward, s.terminal), (0.0, false));
        let with_key = crate::mdp::StateToken::new(vec![1, 2, 1]);
        let s = step(&mut env, &with_key, ActionId(3)).unwrap();
        assert_eq!((s.reward, s.terminal), (100.0, true));
    }

    #[test]
    fn spec_from_toml() {
        let spec: EnvSpec = toml::from_str("kind = \"gridnav\"\nreward = \"dense\"\nsize = 6\n").unwrap();
        let env = make_env(&spec).unwrap();
        assert_eq!(env.obs_shape(), (6, 6, 3));
        let bad: EnvSpec = toml::from_str("kind = \"gridnav\"\nreward = \"delayed-penalty\"\n").unwrap();
        assert!(matches!(make_env(&bad), Err(EnvError::InvalidSpec { .. })));
    }
}
