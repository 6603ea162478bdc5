//! The N-CPL outer loop and its planning-only and novelty-free ablations.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{ExtractorConfig, FeatureExtractor};
use crate::learner::{
    build_policy_batch, build_value_batch, fit_policy, fit_value, Approximator, FitConfig, LearnError,
    MlpApproximator, ScheduleState, DEFAULT_HIDDEN,
};
use crate::lookahead::LookaheadError;
use crate::mdp::{ActionId, CriticalPath, Environment, Observation, SimulatorBudget, TransitionRecord};
use crate::novelty::NoveltyMode;
use crate::planner::{root_tree, BasePolicy, PlanConfig, PlanError, RiwPlanner, UniformPolicy};

/// Hard cap on decisions per episode.
pub const EPISODE_CAP: usize = 1200;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Lookahead(#[from] LookaheadError),
    #[error("variant {0} does not learn")]
    NotLearning(AgentVariant),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentVariant {
    #[serde(rename = "N-CPL")]
    NCpl,
    #[serde(rename = "N-CPL_D")]
    NCplD,
    #[serde(rename = "CPL")]
    Cpl,
    #[serde(rename = "RIW_C")]
    RiwC,
    #[serde(rename = "RIW_D")]
    RiwD,
}

impl AgentVariant {
    pub const ALL: [AgentVariant; 5] = [Self::NCpl, Self::NCplD, Self::Cpl, Self::RiwC, Self::RiwD];

    pub fn name(self) -> &'static str {
        match self {
            Self::NCpl => "N-CPL",
            Self::NCplD => "N-CPL_D",
            Self::Cpl => "CPL",
            Self::RiwC => "RIW_C",
            Self::RiwD => "RIW_D",
        }
    }

    pub fn novelty(self) -> NoveltyMode {
        match self {
            Self::NCpl | Self::RiwC => NoveltyMode::Classic,
            Self::NCplD | Self::RiwD => NoveltyMode::Depth,
            Self::Cpl => NoveltyMode::None,
        }
    }

    pub fn learns(self) -> bool {
        matches!(self, Self::NCpl | Self::NCplD | Self::Cpl)
    }
}

impl fmt::Display for AgentVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("unknown variant {0:?}")]
pub struct UnknownVariant(String);

impl FromStr for AgentVariant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Ok(match norm.as_str() {
            "n-cpl" | "ncpl" => Self::NCpl,
            "n-cpl-d" | "ncpl-d" => Self::NCplD,
            "cpl" => Self::Cpl,
            "riw-c" => Self::RiwC,
            "riw-d" => Self::RiwD,
            _ => return Err(UnknownVariant(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRunConfig {
    pub total_budget: u64,
    pub interval_budget: u64,
    pub plan: PlanConfig,
    pub features: ExtractorConfig,
    pub eval_episodes: usize,
    pub max_episode_steps: usize,
    pub gamma: f64,
    /// Decision steps between target-network refreshes.
    pub target_update_steps: u64,
    pub fit: FitConfig,
    pub hidden: Vec<usize>,
    /// Clip rewards to `[-1, 1]` in value targets.
    pub clip_rewards: bool,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self {
            total_budget: 20_000_000,
            interval_budget: 1_000_000,
            plan: PlanConfig::default(),
            features: ExtractorConfig::default(),
            eval_episodes: 10,
            max_episode_steps: EPISODE_CAP,
            gamma: 0.99,
            target_update_steps: 10_000,
            fit: FitConfig::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            clip_rewards: false,
        }
    }
}

impl TrainRunConfig {
    /// Budgets and the target refresh period scaled down 100×.
    pub fn desk() -> Self {
        Self {
            total_budget: 200_000,
            interval_budget: 50_000,
            target_update_steps: 100,
            ..Self::default()
        }
    }

    fn episode_cap(&self, env: &dyn Environment) -> usize {
        let cap = self.max_episode_steps.min(EPISODE_CAP);
        env.max_steps().map_or(cap, |m| m.min(cap))
    }
}

/// Learner invocations, used to check that planning-only variants never
/// touch the learner.
#[derive(Debug, Clone, Default)]
pub struct CallCounters {
    pub plan_calls: Cell<u64>,
    pub predict_policy: Cell<u64>,
    pub predict_value: Cell<u64>,
    pub fits: Cell<u64>,
    pub schedule_tests: Cell<u64>,
}

impl CallCounters {
    fn bump(c: &Cell<u64>) {
        c.set(c.get() + 1);
    }

    pub fn learner_calls(&self) -> u64 {
        self.predict_policy.get() + self.predict_value.get() + self.fits.get() + self.schedule_tests.get()
    }
}

struct CountingPolicy<'a, A> {
    approx: &'a A,
    calls: &'a Cell<u64>,
}

impl<A: Approximator> BasePolicy for CountingPolicy<'_, A> {
    fn probabilities(&self, obs: &Observation, _num_actions: usize) -> Vec<f64> {
        CallCounters::bump(self.calls);
        self.approx.predict_policy(obs)
    }
}

/// A planner plus, for learning variants, the parameters it plans with.
#[derive(Debug, Clone)]
pub struct Agent<A = MlpApproximator> {
    variant: AgentVariant,
    planner: RiwPlanner,
    approx: Option<A>,
    pub counters: CallCounters,
}

impl<A: Approximator> Agent<A> {
    /// Planning-only agent; `approx` is ignored for non-learning variants.
    pub fn new(variant: AgentVariant, plan: PlanConfig, features: ExtractorConfig, approx: Option<A>) -> Self {
        let plan = PlanConfig {
            novelty: variant.novelty(),
            ..plan
        };
        Self {
            variant,
            planner: RiwPlanner::new(plan, FeatureExtractor::new(features)),
            approx: if variant.learns() { approx } else { None },
            counters: CallCounters::default(),
        }
    }

    pub fn variant(&self) -> AgentVariant {
        self.variant
    }

    pub fn approximator(&self) -> Option<&A> {
        self.approx.as_ref()
    }

    pub fn set_approximator(&mut self, approx: A) {
        if self.variant.learns() {
            self.approx = Some(approx);
        }
    }

    pub fn planner(&self) -> &RiwPlanner {
        &self.planner
    }

    pub fn planner_mut(&mut self) -> &mut RiwPlanner {
        &mut self.planner
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub path: CriticalPath,
    pub episode_return: f64,
    /// Root actions chosen by the planner, in execution order.
    pub decisions: Vec<ActionId>,
    pub fresh_calls: u64,
    pub reached_terminal: bool,
    /// The global budget ran out before the episode finished.
    pub budget_cut: bool,
}

/// Plans and acts until a terminal state, the episode cap, or exhaustion of
/// `budget`. Executed transitions are read off the lookahead edge chosen at
/// the root, so acting costs no extra simulator calls.
pub fn run_episode<E, A>(
    agent: &mut Agent<A>,
    env: &mut E,
    cfg: &TrainRunConfig,
    rng: &mut ChaCha8Rng,
    budget: &mut SimulatorBudget,
) -> Result<Episode, AgentError>
where
    E: Environment,
    A: Approximator,
{
    env.reset();
    agent.planner.reset_tables();
    let cap = cfg.episode_cap(env);
    let mut tree = root_tree(env, agent.planner.config().horizon);
    let mut ep = Episode {
        path: CriticalPath::new(),
        episode_return: 0.0,
        decisions: Vec::new(),
        fresh_calls: 0,
        reached_terminal: tree.root().terminal,
        budget_cut: false,
    };
    let counters = &agent.counters;
    while !tree.root().terminal && ep.path.len() < cap {
        let limit = agent.planner.config().budget.min(budget.remaining());
        CallCounters::bump(&counters.plan_calls);
        let stats = match &agent.approx {
            Some(approx) => {
                let policy = CountingPolicy {
                    approx,
                    calls: &counters.predict_policy,
                };
                agent.planner.riw_plan_with_limit(&mut tree, env, &policy, rng, limit)?
            }
            None => agent
                .planner
                .riw_plan_with_limit(&mut tree, env, &UniformPolicy, rng, limit)?,
        };
        budget
            .consume(stats.fresh_calls)
            .expect("planner respects the remaining budget");
        ep.fresh_calls += stats.fresh_calls;
        if tree.root().is_leaf() {
            ep.budget_cut = true;
            break;
        }
        let action = match &agent.approx {
            Some(approx) => tree.select_root_action(
                |o| {
                    CallCounters::bump(&counters.predict_value);
                    approx.predict_value(o)
                },
                rng,
            )?,
            None => tree.select_root_action(|_| 0.0, rng)?,
        };
        let child = tree.node(tree.root().child(action).expect("selected action is expanded"));
        ep.path.push(TransitionRecord {
            obs: tree.root().obs.clone(),
            action,
            reward: child.reward_in,
            next_obs: child.obs.clone(),
            terminal: child.terminal,
        });
        ep.episode_return += child.reward_in;
        ep.decisions.push(action);
        ep.reached_terminal = child.terminal;
        tree = tree.advance_root(action)?;
    }
    Ok(ep)
}

/// Runs `n_episodes` with frozen parameters and no global budget. Episode
/// `k` uses its own stream derived from `seed`.
pub fn evaluate<E, A>(
    agent: &mut Agent<A>,
    env: &mut E,
    cfg: &TrainRunConfig,
    n_episodes: usize,
    seed: u64,
) -> Result<Vec<f64>, AgentError>
where
    E: Environment,
    A: Approximator,
{
    (0..n_episodes)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64 + 1);
            let mut budget = SimulatorBudget::unlimited();
            run_episode(agent, env, cfg, &mut rng, &mut budget).map(|e| e.episode_return)
        })
        .collect()
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalRecord {
    pub interval: usize,
    /// Cumulative fresh simulator calls at the end of the interval.
    pub sim_interactions: u64,
    pub episodes: usize,
    pub mean_return: f64,
    pub p_value: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<A> {
    pub agent: Agent<A>,
    pub log: Vec<IntervalRecord>,
    /// Incumbent parameters after every interval whose candidate was accepted.
    pub checkpoints: Vec<(usize, A)>,
    pub fresh_calls: u64,
}

fn clipped(paths: &[CriticalPath]) -> Vec<CriticalPath> {
    paths
        .iter()
        .map(|p| {
            let mut out = CriticalPath::new();
            for r in p.records() {
                out.push(TransitionRecord {
                    reward: r.reward.clamp(-1.0, 1.0),
                    ..r.clone()
                });
            }
            out
        })
        .collect()
}

fn train_candidate<A: Approximator>(
    incumbent: &A,
    target: &A,
    paths: &[CriticalPath],
    cfg: &TrainRunConfig,
    seed: u64,
) -> Result<A, LearnError> {
    let clipped_paths;
    let paths = if cfg.clip_rewards {
        clipped_paths = clipped(paths);
        &clipped_paths[..]
    } else {
        paths
    };
    let policy_batch = build_policy_batch(paths, incumbent.num_actions())?;
    let value_batch = build_value_batch(paths, |o| target.predict_value(o), cfg.gamma)?;
    let fit_cfg = FitConfig {
        seed,
        ..cfg.fit.clone()
    };
    let with_policy = fit_policy(incumbent, &policy_batch, &fit_cfg)?;
    let value_cfg = FitConfig {
        seed: seed ^ 0x5eed,
        ..fit_cfg
    };
    fit_value(&with_policy, &value_batch, &value_cfg)
}

/// Trains a learning variant with a freshly initialised network.
pub fn run_training<E: Environment>(
    variant: AgentVariant,
    env: &mut E,
    cfg: &TrainRunConfig,
    seed: u64,
) -> Result<TrainOutcome<MlpApproximator>, AgentError> {
    let init = MlpApproximator::new(env.obs_shape(), env.num_actions(), &cfg.hidden, seed);
    run_training_from(variant, env, cfg, seed, init)
}

/// Interval loop: collect episodes under the active parameters until the
/// interval budget is spent (intervals close at episode boundaries), test
/// the candidate against the incumbent's previous returns, then train a new
/// candidate from the incumbent on this interval's critical paths.
pub fn run_training_from<E, A>(
    variant: AgentVariant,
    env: &mut E,
    cfg: &TrainRunConfig,
    seed: u64,
    init: A,
) -> Result<TrainOutcome<A>, AgentError>
where
    E: Environment,
    A: Approximator,
{
    if !variant.learns() {
        return Err(AgentError::NotLearning(variant));
    }
    let mut agent = Agent::new(variant, cfg.plan.clone(), cfg.features.clone(), Some(init.clone()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut budget = SimulatorBudget::new(cfg.total_budget);
    let mut schedule = ScheduleState::new(init.clone());
    let mut target = init;
    let mut steps_since_refresh = 0u64;
    let mut log = Vec::new();
    let mut checkpoints = Vec::new();

    while !budget.exhausted() {
        let interval = schedule.interval();
        let start = budget.used();
        agent.approx = Some(schedule.active().clone());
        let mut paths = Vec::new();
        let mut returns = Vec::new();
        while budget.used() - start < cfg.interval_budget && !budget.exhausted() {
            let ep = run_episode(&mut agent, env, cfg, &mut rng, &mut budget)?;
            if ep.budget_cut {
                break;
            }
            returns.push(ep.episode_return);
            paths.push(ep.path);
        }
        if returns.is_empty() {
            break;
        }
        let tested = schedule.candidate().is_some();
        if tested {
            CallCounters::bump(&agent.counters.schedule_tests);
        }
        let mean_return = returns.iter().sum::<f64>() / returns.len() as f64;
        let episodes = returns.len();
        let decision = schedule.complete_interval(returns);
        log::debug!(
            "{variant} interval {interval}: mean {mean_return:.2}, p {:?}, accepted {}",
            decision.p_value,
            decision.accepted
        );
        log.push(IntervalRecord {
            interval,
            sim_interactions: budget.used(),
            episodes,
            mean_return,
            p_value: decision.p_value,
            accepted: decision.accepted,
        });
        if tested && decision.accepted {
            checkpoints.push((interval, schedule.incumbent().clone()));
        }
        steps_since_refresh += paths.iter().map(|p| p.len() as u64).sum::<u64>();
        if steps_since_refresh >= cfg.target_update_steps {
            target = schedule.incumbent().clone();
            steps_since_refresh = 0;
        }
        if budget.exhausted() {
            break;
        }
        CallCounters::bump(&agent.counters.fits);
        let fit_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(interval as u64);
        match train_candidate(schedule.incumbent(), &target, &paths, cfg, fit_seed) {
            Ok(candidate) => schedule.propose(candidate),
            Err(e) => log::warn!("{variant} interval {interval}: candidate dropped: {e}"),
        }
    }
    agent.approx = Some(schedule.incumbent().clone());
    Ok(TrainOutcome {
        agent,
        log,
        checkpoints,
        fresh_calls: budget.used(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_env_by_name, GridNav, GridReward};
    use crate::learner::{Head, TabularApproximator};
    use crate::mdp::replay;

    fn small_cfg() -> TrainRunConfig {
        TrainRunConfig {
            total_budget: 6_000,
            interval_budget: 1_500,
            hidden: vec![8],
            ..TrainRunConfig::desk()
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in AgentVariant::ALL {
            assert_eq!(v.name().parse::<AgentVariant>().unwrap(), v);
        }
        assert!("riw".parse::<AgentVariant>().is_err());
        assert_eq!(AgentVariant::ALL.iter().filter(|v| v.learns()).count(), 3);
    }

    #[test]
    fn episode_return_matches_replay() {
        let mut env = make_env_by_name("gridnav-dense").unwrap();
        let mut agent: Agent = Agent::new(AgentVariant::RiwC, PlanConfig::default(), ExtractorConfig::default(), None);
        let cfg = TrainRunConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ep = run_episode(&mut agent, &mut env, &cfg, &mut rng, &mut SimulatorBudget::unlimited()).unwrap();
        assert_eq!(ep.path.len(), ep.decisions.len());
        assert_eq!(ep.path.actions().collect::<Vec<_>>(), ep.decisions);
        env.reset();
        let start = env.save_state();
        let replayed: f64 = replay(&mut env, &start, &ep.decisions).unwrap().iter().map(|s| s.0).sum();
        assert_eq!(replayed, ep.episode_return);
        assert_eq!(agent.counters.learner_calls(), 0);
    }

    #[test]
    fn episode_respects_cap_and_budget() {
        let mut env = GridNav::new("g", 10, GridReward::Sparse, Some(7));
        let mut agent: Agent = Agent::new(AgentVariant::RiwC, PlanConfig::default(), ExtractorConfig::default(), None);
        let cfg = TrainRunConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ep = run_episode(&mut agent, &mut env, &cfg, &mut rng, &mut SimulatorBudget::unlimited()).unwrap();
        assert!(ep.path.len() <= 7);

        let mut budget = SimulatorBudget::new(150);
        let ep = run_episode(&mut agent, &mut env, &cfg, &mut rng, &mut budget).unwrap();
        assert!(budget.used() <= 150);
        assert_eq!(ep.fresh_calls, budget.used());
    }

    #[test]
    fn evaluate_is_deterministic() {
        let mut env = make_env_by_name("gridnav-sparse").unwrap();
        let cfg = TrainRunConfig::desk();
        let mut agent: Agent = Agent::new(AgentVariant::RiwD, cfg.plan.clone(), cfg.features.clone(), None);
        let a = evaluate(&mut agent, &mut env, &cfg, 3, 11).unwrap();
        let b = evaluate(&mut agent, &mut env, &cfg, 3, 11).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a, b);
    }

    #[test]
    fn training_stays_within_budget_and_logs_every_interval() {
        let mut env = make_env_by_name("gridnav-sparse").unwrap();
        let cfg = small_cfg();
        let out = run_training(AgentVariant::NCpl, &mut env, &cfg, 1).unwrap();
        assert!(out.fresh_calls <= cfg.total_budget);
        assert!(!out.log.is_empty());
        assert!(out.log.iter().enumerate().all(|(i, r)| r.interval == i));
        assert_eq!(out.log[0].p_value, None);
        assert!(out.log.windows(2).all(|w| w[0].sim_interactions <= w[1].sim_interactions));
        assert!(out.agent.counters.fits.get() >= 1);
    }

    #[test]
    fn planning_only_variants_cannot_train() {
        let mut env = make_env_by_name("gridnav-sparse").unwrap();
        assert!(matches!(
            run_training(AgentVariant::RiwC, &mut env, &small_cfg(), 0),
            Err(AgentError::NotLearning(AgentVariant::RiwC))
        ));
    }

    #[test]
    fn zero_learning_rate_keeps_initial_parameters() {
        let mut env = make_env_by_name("gridnav-sparse").unwrap();
        let mut cfg = small_cfg();
        cfg.fit.learning_rate = 0.0;
        let init = TabularApproximator::new(std::iter::empty(), 4);
        let out = run_training_from(AgentVariant::Cpl, &mut env, &cfg, 4, init.clone()).unwrap();
        let fin = out.agent.approximator().unwrap();
        assert_eq!(fin.params(Head::Policy), init.params(Head::Policy));
        assert_eq!(fin.params(Head::Value), init.params(Head::Value));
    }
}
