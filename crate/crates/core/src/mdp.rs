//! Deterministic black-box simulator contract.
//!
//! Planners never look inside an environment. They only save and restore
//! opaque [`StateToken`]s, apply actions, and read the pixel [`Observation`].
//! Terminal states are absorbing: every action maps them to themselves with
//! zero reward.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("simulator budget exhausted ({limit} interactions)")]
    BudgetExhausted { limit: u64 },
    #[error("invalid action {action} (environment has {num_actions} actions)")]
    InvalidAction { action: usize, num_actions: usize },
    #[error("state token does not belong to this environment: {0}")]
    BadToken(String),
}

/// Index of an action in `[0, A)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub usize);

impl ActionId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A `width × height` grid of colour indices, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Observation {
    width: usize,
    height: usize,
    palette_size: usize,
    pixels: Arc<[u8]>,
}

impl Observation {
    /// Panics if the pixel buffer does not match the dimensions or a colour is
    /// outside the palette.
    pub fn new(width: usize, height: usize, palette_size: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer size mismatch");
        assert!(
            pixels.iter().all(|&c| (c as usize) < palette_size),
            "colour outside palette"
        );
        Self {
            width,
            height,
            palette_size,
            pixels: pixels.into(),
        }
    }

    /// An all-background (colour 0) frame.
    pub fn blank(width: usize, height: usize, palette_size: usize) -> Self {
        Self::new(width, height, palette_size, vec![0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn palette_size(&self) -> usize {
        self.palette_size
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Colour at column `i`, row `j`.
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.pixels[j * self.width + i]
    }
}

/// Opaque snapshot of an environment's internal state.
///
/// Toy environments are small, so a token is a deep copy of their internals
/// packed into integers. Tokens are immutable and cheap to clone.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateToken(Arc<[i64]>);

impl StateToken {
    pub fn new(words: Vec<i64>) -> Self {
        Self(words.into())
    }

    pub fn words(&self) -> &[i64] {
        &self.0
    }
}

/// Result of applying one action to a saved state.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: StateToken,
    pub reward: f64,
    pub terminal: bool,
    pub obs: Observation,
}

/// The simulator contract every planner and learner consumes.
pub trait Environment: Send {
    fn name(&self) -> &str;

    /// Size of the (constant) minimal action set.
    fn num_actions(&self) -> usize;

    /// Return to the initial state `s0`.
    fn reset(&mut self);

    fn observe(&self) -> Observation;

    fn is_terminal(&self) -> bool;

    fn save_state(&self) -> StateToken;

    fn restore_state(&mut self, token: &StateToken) -> Result<(), MdpError>;

    /// Apply `action` to the current (non-terminal) state and return the
    /// reward. Callers go through [`step`], which enforces absorbing
    /// terminals and action validity.
    fn apply(&mut self, action: ActionId) -> f64;

    /// Intrinsic episode length cap, if the environment defines one.
    fn max_steps(&self) -> Option<usize> {
        None
    }

    fn applicable_actions(&self) -> Vec<ActionId> {
        (0..self.num_actions()).map(ActionId).collect()
    }

    /// Observation dimensions `(width, height, palette_size)`.
    fn obs_shape(&self) -> (usize, usize, usize) {
        let o = self.observe();
        (o.width(), o.height(), o.palette_size())
    }
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn num_actions(&self) -> usize {
        (**self).num_actions()
    }
    fn reset(&mut self) {
        (**self).reset()
    }
    fn observe(&self) -> Observation {
        (**self).observe()
    }
    fn is_terminal(&self) -> bool {
        (**self).is_terminal()
    }
    fn save_state(&self) -> StateToken {
        (**self).save_state()
    }
    fn restore_state(&mut self, token: &StateToken) -> Result<(), MdpError> {
        (**self).restore_state(token)
    }
    fn apply(&mut self, action: ActionId) -> f64 {
        (**self).apply(action)
    }
    fn max_steps(&self) -> Option<usize> {
        (**self).max_steps()
    }
    fn obs_shape(&self) -> (usize, usize, usize) {
        (**self).obs_shape()
    }
}

pub fn save_state<E: Environment + ?Sized>(env: &E) -> StateToken {
    env.save_state()
}

/// Deterministic transition from `state` under `action`.
///
/// Leaves the environment positioned at the successor state.
pub fn step<E: Environment + ?Sized>(
    env: &mut E,
    state: &StateToken,
    action: ActionId,
) -> Result<Step, MdpError> {
    let num_actions = env.num_actions();
    if action.0 >= num_actions {
        return Err(MdpError::InvalidAction {
            action: action.0,
            num_actions,
        });
    }
    env.restore_state(state)?;
    if env.is_terminal() {
        return Ok(Step {
            state: state.clone(),
            reward: 0.0,
            terminal: true,
            obs: env.observe(),
        });
    }
    let reward = env.apply(action);
    Ok(Step {
        state: env.save_state(),
        reward,
        terminal: env.is_terminal(),
        obs: env.observe(),
    })
}

/// Count of simulator interactions allowed and consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulatorBudget {
    limit: u64,
    used: u64,
}

impl SimulatorBudget {
    pub fn new(limit: u64) -> Self {
        Self { limit, used: 0 }
    }

    pub fn unlimited() -> Self {
        Self::new(u64::MAX)
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn remaining(&self) -> u64 {
        self.limit - self.used
    }

    pub fn exhausted(&self) -> bool {
        self.used >= self.limit
    }

    pub fn charge(&mut self) -> Result<(), MdpError> {
        if self.exhausted() {
            return Err(MdpError::BudgetExhausted { limit: self.limit });
        }
        self.used += 1;
        Ok(())
    }

    /// Charges `n` interactions at once; fails without charging if fewer
    /// than `n` remain.
    pub fn consume(&mut self, n: u64) -> Result<(), MdpError> {
        if n > self.remaining() {
            return Err(MdpError::BudgetExhausted { limit: self.limit });
        }
        self.used += n;
        Ok(())
    }
}

/// Wraps an environment so that every fresh transition is charged against a
/// [`SimulatorBudget`].
pub struct BudgetedSimulator<'a, E: Environment + ?Sized> {
    env: &'a mut E,
    budget: SimulatorBudget,
}

impl<'a, E: Environment + ?Sized> BudgetedSimulator<'a, E> {
    pub fn new(env: &'a mut E, limit: u64) -> Self {
        Self {
            env,
            budget: SimulatorBudget::new(limit),
        }
    }

    pub fn step(&mut self, state: &StateToken, action: ActionId) -> Result<Step, MdpError> {
        self.budget.charge()?;
        step(self.env, state, action)
    }

    pub fn budget(&self) -> SimulatorBudget {
        self.budget
    }

    pub fn env(&mut self) -> &mut E {
        self.env
    }

    pub fn num_actions(&self) -> usize {
        self.env.num_actions()
    }
}

/// One executed transition `(s, a, r, s', terminal)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub obs: Observation,
    pub action: ActionId,
    pub reward: f64,
    pub next_obs: Observation,
    pub terminal: bool,
}

/// The transitions actually executed at the root over one episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CriticalPath {
    records: Vec<TransitionRecord>,
}

impl CriticalPath {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics if `record` does not chain onto the previous one.
    pub fn push(&mut self, record: TransitionRecord) {
        if let Some(last) = self.records.last() {
            assert!(!last.terminal, "critical path already terminated");
            assert_eq!(last.next_obs, record.obs, "critical path does not chain");
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[TransitionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> + '_ {
        self.records.iter().map(|r| r.action)
    }

    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }
}

/// Replays `actions` from the environment's initial state, returning the
/// `(reward, terminal, observation)` trace.
pub fn replay<E: Environment + ?Sized>(
    env: &mut E,
    start: &StateToken,
    actions: &[ActionId],
) -> Result<Vec<(f64, bool, Observation)>, MdpError> {
    let mut state = start.clone();
    let mut trace = Vec::with_capacity(actions.len());
    for &a in actions {
        let s = step(env, &state, a)?;
        trace.push((s.reward, s.terminal, s.obs.clone()));
        state = s.state;
    }
    Ok(trace)
}
