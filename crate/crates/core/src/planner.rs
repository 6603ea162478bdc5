//! Rollout IW(1) and breadth-first IW(1).
//!
//! [`RiwPlanner`] builds the lookahead with depth-first rollouts from the
//! root, sampling actions from a base policy restricted to unsolved children.
//! A rollout ends at a terminal node, a node that failed its novelty test, or
//! the horizon; the endpoint is labelled solved and the label is propagated
//! upward. Only fresh simulator calls are charged to the budget.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, FeatureExtractor, FeatureSet};
use crate::lookahead::{LookaheadError, LookaheadTree, NodeId, ROOT};
use crate::mdp::{self, ActionId, BudgetedSimulator, Environment, MdpError, Observation, StateToken};
use crate::novelty::{ClassicTable, NoveltyMode, NoveltyTable};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Lookahead(#[from] LookaheadError),
    #[error(transparent)]
    Features(#[from] FeatureError),
}

/// Distribution over actions used to drive rollouts.
pub trait BasePolicy {
    fn probabilities(&self, obs: &Observation, num_actions: usize) -> Vec<f64>;
}

/// Uniform distribution over the action set.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPolicy;

impl BasePolicy for UniformPolicy {
    fn probabilities(&self, _obs: &Observation, num_actions: usize) -> Vec<f64> {
        vec![1.0 / num_actions as f64; num_actions]
    }
}

pub fn random_base_policy() -> UniformPolicy {
    UniformPolicy
}

impl<P: BasePolicy + ?Sized> BasePolicy for &P {
    fn probabilities(&self, obs: &Observation, num_actions: usize) -> Vec<f64> {
        (**self).probabilities(obs, num_actions)
    }
}

/// Samples an index with probability proportional to `weights[i]` among the
/// indices where `allowed[i]` holds. Falls back to uniform over the allowed
/// set when the restricted mass is zero. Returns `None` if nothing is allowed.
pub fn sample_restricted<R: Rng + ?Sized>(
    weights: &[f64],
    allowed: &[bool],
    rng: &mut R,
) -> Option<usize> {
    let candidates: Vec<usize> = (0..weights.len()).filter(|&i| allowed[i]).collect();
    if candidates.is_empty() {
        return None;
    }
    let mass: f64 = candidates.iter().map(|&i| weights[i].max(0.0)).sum();
    if !(mass > 0.0) || !mass.is_finite() {
        return Some(candidates[rng.random_range(0..candidates.len())]);
    }
    let mut x = rng.random::<f64>() * mass;
    for &i in &candidates {
        x -= weights[i].max(0.0);
        if x < 0.0 {
            return Some(i);
        }
    }
    candidates
        .iter()
        .rev()
        .copied()
        .find(|&i| weights[i] > 0.0)
}

/// When the novelty table is cleared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoveltyReset {
    /// Tables persist across the time steps of an episode.
    #[default]
    Episode,
    /// Tables are cleared before every planning call.
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanConfig {
    pub budget: u64,
    pub horizon: usize,
    pub novelty: NoveltyMode,
    pub novelty_reset: NoveltyReset,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            budget: 100,
            horizon: 100,
            novelty: NoveltyMode::Classic,
            novelty_reset: NoveltyReset::Episode,
        }
    }
}

/// One novelty decision taken while admitting a node.
#[derive(Debug, Clone)]
pub struct Admission {
    pub node: NodeId,
    pub depth: usize,
    pub features: FeatureSet,
    pub novel: bool,
    /// The root is admitted unconditionally.
    pub root: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlanStats {
    pub fresh_calls: u64,
    pub cached_replays: u64,
    pub rollouts: u64,
    pub admitted: u64,
    /// Deepest node reached by the first rollout of the call.
    pub first_rollout_depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleError {
    AllChildrenSolved,
    BudgetExhausted,
}

/// Rollout IW(1) planner. Holds the novelty table across calls.
#[derive(Debug, Clone)]
pub struct RiwPlanner {
    cfg: PlanConfig,
    extractor: FeatureExtractor,
    table: NoveltyTable,
    log: Option<Vec<Admission>>,
}

impl RiwPlanner {
    pub fn new(cfg: PlanConfig, extractor: FeatureExtractor) -> Self {
        let table = NoveltyTable::new(cfg.novelty);
        Self {
            cfg,
            extractor,
            table,
            log: None,
        }
    }

    pub fn config(&self) -> &PlanConfig {
        &self.cfg
    }

    pub fn table(&self) -> &NoveltyTable {
        &self.table
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    /// Clears the novelty table; called at the start of every episode.
    pub fn reset_tables(&mut self) {
        self.table.reset();
    }

    /// Starts recording admissions; [`take_admission_log`](Self::take_admission_log)
    /// returns and clears them.
    pub fn record_admissions(&mut self, on: bool) {
        self.log = on.then(Vec::new);
    }

    pub fn take_admission_log(&mut self) -> Vec<Admission> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn features_of(&self, tree: &LookaheadTree, id: NodeId) -> Result<FeatureSet, FeatureError> {
        let node = tree.node(id);
        let prev = node.parent.map(|p| &tree.node(p).obs);
        self.extractor.extract(&node.obs, prev)
    }

    fn admit_root(&mut self, tree: &LookaheadTree) -> Result<(), FeatureError> {
        if self.cfg.novelty_reset == NoveltyReset::Step {
            self.table.reset();
        }
        let fs = self.features_of(tree, ROOT)?;
        self.table.update(&fs, 0);
        if let Some(log) = &mut self.log {
            log.push(Admission {
                node: ROOT,
                depth: 0,
                features: fs,
                novel: true,
                root: true,
            });
        }
        Ok(())
    }

    /// Samples an action from the base policy restricted to actions whose
    /// child is absent or unsolved, then replays the cached edge or performs
    /// and admits a fresh transition.
    pub fn sample_unsolved_child<E, P, R>(
        &mut self,
        tree: &mut LookaheadTree,
        node: NodeId,
        policy: &P,
        rng: &mut R,
        sim: &mut BudgetedSimulator<'_, E>,
        stats: &mut PlanStats,
    ) -> Result<Result<(ActionId, NodeId), SampleError>, PlanError>
    where
        E: Environment + ?Sized,
        P: BasePolicy + ?Sized,
        R: Rng + ?Sized,
    {
        let n = tree.num_actions();
        let current = tree.node(node);
        let allowed: Vec<bool> = (0..n)
            .map(|a| current.child(ActionId(a)).is_none_or(|c| !tree.node(c).solved))
            .collect();
        let probs = policy.probabilities(&current.obs, n);
        let Some(a) = sample_restricted(&probs, &allowed, rng) else {
            return Ok(Err(SampleError::AllChildrenSolved));
        };
        let action = ActionId(a);
        if let Some(child) = current.child(action) {
            stats.cached_replays += 1;
            return Ok(Ok((action, child)));
        }
        let state = current.state.clone();
        let step = match sim.step(&state, action) {
            Ok(s) => s,
            Err(MdpError::BudgetExhausted { .. }) => return Ok(Err(SampleError::BudgetExhausted)),
            Err(e) => return Err(e.into()),
        };
        let child = tree.update_lookahead(node, action, step.state, step.reward, step.terminal, step.obs)?;
        let depth = tree.node(child).depth;
        let fs = self.features_of(tree, child)?;
        let novel = self.table.is_novel(&fs, depth);
        self.table.update(&fs, depth);
        tree.node_mut(child).novel = novel;
        stats.admitted += 1;
        if let Some(log) = &mut self.log {
            log.push(Admission {
                node: child,
                depth,
                features: fs,
                novel,
                root: false,
            });
        }
        Ok(Ok((action, child)))
    }

    /// Enriches `tree` with rollouts until the root is solved or the
    /// per-call budget is spent.
    pub fn riw_plan<E, P, R>(
        &mut self,
        tree: &mut LookaheadTree,
        env: &mut E,
        policy: &P,
        rng: &mut R,
    ) -> Result<PlanStats, PlanError>
    where
        E: Environment + ?Sized,
        P: BasePolicy + ?Sized,
        R: Rng + ?Sized,
    {
        let limit = self.cfg.budget;
        self.riw_plan_with_limit(tree, env, policy, rng, limit)
    }

    /// As [`riw_plan`](Self::riw_plan) with an explicit interaction limit.
    pub fn riw_plan_with_limit<E, P, R>(
        &mut self,
        tree: &mut LookaheadTree,
        env: &mut E,
        policy: &P,
        rng: &mut R,
        limit: u64,
    ) -> Result<PlanStats, PlanError>
    where
        E: Environment + ?Sized,
        P: BasePolicy + ?Sized,
        R: Rng + ?Sized,
    {
        self.admit_root(tree)?;
        let mut sim = BudgetedSimulator::new(env, limit);
        let mut stats = PlanStats::default();
        let horizon = tree.horizon().min(self.cfg.horizon);
        while !tree.has_solved_label() {
            stats.rollouts += 1;
            let mut cur = ROOT;
            let exhausted = loop {
                let node = tree.node(cur);
                if node.terminal || !node.novel || node.depth >= horizon {
                    tree.update_solved_labels(cur);
                    break false;
                }
                match self.sample_unsolved_child(tree, cur, policy, rng, &mut sim, &mut stats)? {
                    Ok((_, child)) => cur = child,
                    Err(SampleError::AllChildrenSolved) => {
                        tree.update_solved_labels(cur);
                        break false;
                    }
                    Err(SampleError::BudgetExhausted) => break true,
                }
            };
            if stats.rollouts == 1 {
                stats.first_rollout_depth = tree.node(cur).depth;
            }
            if exhausted {
                break;
            }
        }
        stats.fresh_calls = sim.budget().used();
        Ok(stats)
    }
}

/// Breadth-first IW(1) with Classic novelty from `root_state`.
///
/// Returns the observations of admitted states in admission order. `budget`
/// caps fresh simulator calls (`None` for unlimited); `horizon` caps depth.
pub fn iw1_plan<E: Environment + ?Sized>(
    env: &mut E,
    root_state: &StateToken,
    extractor: &FeatureExtractor,
    horizon: usize,
    budget: Option<u64>,
) -> Result<Vec<Observation>, PlanError> {
    let mut sim = BudgetedSimulator::new(env, budget.unwrap_or(u64::MAX));
    sim.env().restore_state(root_state)?;
    let root_obs = sim.env().observe();
    let root_terminal = sim.env().is_terminal();
    let mut table = ClassicTable::new();
    table.update(&extractor.extract(&root_obs, None)?);
    let mut admitted = vec![root_obs.clone()];
    let mut queue = VecDeque::new();
    if !root_terminal {
        queue.push_back((root_state.clone(), root_obs, 0usize));
    }
    let num_actions = sim.num_actions();
    while let Some((state, obs, depth)) = queue.pop_front() {
        if depth >= horizon {
            continue;
        }
        for a in 0..num_actions {
            let step = match sim.step(&state, ActionId(a)) {
                Ok(s) => s,
                Err(MdpError::BudgetExhausted { .. }) => return Ok(admitted),
                Err(e) => return Err(e.into()),
            };
            let fs = extractor.extract(&step.obs, Some(&obs))?;
            if !table.is_novel(&fs) {
                continue;
            }
            table.update(&fs);
            admitted.push(step.obs.clone());
            if !step.terminal {
                queue.push_back((step.state, step.obs, depth + 1));
            }
        }
    }
    Ok(admitted)
}

/// Convenience: an environment's current state as a fresh lookahead root.
pub fn root_tree<E: Environment + ?Sized>(env: &E, horizon: usize) -> LookaheadTree {
    LookaheadTree::new(
        mdp::save_state(env),
        env.observe(),
        env.is_terminal(),
        env.num_actions(),
        horizon,
    )
}
