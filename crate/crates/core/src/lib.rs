//! Width-based lookahead planning with critical-path learning.

pub mod agent;
pub mod envs;
pub mod features;
pub mod harness;
pub mod learner;
pub mod lookahead;
pub mod mdp;
pub mod novelty;
pub mod planner;
pub mod taxonomy;

pub use agent::{evaluate, run_episode, run_training, Agent, AgentVariant, TrainRunConfig};
pub use envs::{make_env, make_env_by_name, EnvSpec};
pub use features::{ExtractorConfig, FeatureExtractor, FeatureMode, FeatureSet};
pub use learner::{Approximator, MlpApproximator, TabularApproximator, TrainingBatch};
pub use lookahead::{LookaheadTree, NodeId, ROOT};
pub use mdp::{ActionId, CriticalPath, Environment, Observation, SimulatorBudget, StateToken, TransitionRecord};
pub use novelty::{NoveltyMode, NoveltyTable};
pub use planner::{iw1_plan, PlanConfig, RiwPlanner};
pub use taxonomy::{classify_branching, classify_smrf, SmrfVerdict};
