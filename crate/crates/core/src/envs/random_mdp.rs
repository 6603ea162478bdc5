use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::{ActionId, Environment, MdpError, Observation, StateToken};

/// Randomly generated finite deterministic MDP with small pixel
/// observations. Useful for property tests and fuzzing planners.
#[derive(Debug, Clone)]
pub struct RandomMdp {
    name: String,
    num_actions: usize,
    next: Vec<Vec<usize>>,
    reward: Vec<Vec<f64>>,
    terminal: Vec<bool>,
    obs: Vec<Observation>,
    state: usize,
}

impl RandomMdp {
    /// `reward_range` bounds the integer rewards drawn per edge; 0 gives an
    /// all-zero-reward MDP.
    pub fn new(seed: u64, num_states: usize, num_actions: usize, reward_range: i64) -> Self {
        assert!(num_states >= 1 && num_actions >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let next = (0..num_states)
            .map(|_| (0..num_actions).map(|_| rng.random_range(0..num_states)).collect())
            .collect();
        let reward = (0..num_states)
            .map(|_| {
                (0..num_actions)
                    .map(|_| rng.random_range(-reward_range..=reward_range) as f64)
                    .collect()
            })
            .collect();
        let terminal = (0..num_states).map(|s| s != 0 && rng.random_bool(0.1)).collect();
        let obs = (0..num_states)
            .map(|_| Observation::new(3, 3, 3, (0..9).map(|_| rng.random_range(0..3)).collect()))
            .collect();
        Self {
            name: format!("random-mdp-{seed}"),
            num_actions,
            next,
            reward,
            terminal,
            obs,
            state: 0,
        }
    }

    pub fn num_states(&self) -> usize {
        self.next.len()
    }

    pub fn state(&self) -> usize {
        self.state
    }
}

impl Environment for RandomMdp {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn reset(&mut self) {
        self.state = 0;
    }

    fn observe(&self) -> Observation {
        self.obs[self.state].clone()
    }

    fn is_terminal(&self) -> bool {
        self.terminal[self.state]
    }

    fn save_state(&self) -> StateToken {
        StateToken::new(vec![self.state as i64])
    }

    fn restore_state(&mut self, token: &StateToken) -> Result<(), MdpError> {
        match token.words() {
            &[s] if (0..self.next.len() as i64).contains(&s) => {
                self.state = s as usize;
                Ok(())
            }
            other => Err(MdpError::BadToken(format!("random-mdp {other:?}"))),
        }
    }

    fn apply(&mut self, action: ActionId) -> f64 {
        let r = self.reward[self.state][action.0];
        self.state = self.next[self.state][action.0];
        r
    }
}
