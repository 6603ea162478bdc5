use crate::mdp::{ActionId, Environment, MdpError, Observation, StateToken};

pub const BACKGROUND: u8 = 0;
pub const AGENT: u8 = 1;
pub const GOAL: u8 = 2;

pub const GOAL_REWARD: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridReward {
    /// `+100` on reaching the goal, 0 elsewhere.
    Sparse,
    /// `+1` for each step that reduces the Manhattan distance to the goal,
    /// `-1` for each step that increases it, plus `+100` at the goal.
    Dense,
}

/// `size × size` grid, agent starts top-left, goal at the bottom-right
/// corner. Actions: 0 up, 1 down, 2 left, 3 right. Moving into the border
/// leaves the agent in place. Reaching the goal ends the episode.
#[derive(Debug, Clone)]
pub struct GridNav {
    name: String,
    size: usize,
    reward: GridReward,
    max_steps: Option<usize>,
    x: usize,
    y: usize,
}

impl GridNav {
    pub fn new(name: impl Into<String>, size: usize, reward: GridReward, max_steps: Option<usize>) -> Self {
        assert!(size >= 2);
        Self {
            name: name.into(),
            size,
            reward,
            max_steps,
            x: 0,
            y: 0,
        }
    }

    pub fn position(&self) -> (usize, usize) {
        (self.x, self.y)
    }

    pub fn goal(&self) -> (usize, usize) {
        (self.size - 1, self.size - 1)
    }

    fn distance(&self, x: usize, y: usize) -> i64 {
        let (gx, gy) = self.goal();
        (gx as i64 - x as i64).abs() + (gy as i64 - y as i64).abs()
    }
}

impl Environment for GridNav {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn reset(&mut self) {
        self.x = 0;
        self.y = 0;
    }

    fn observe(&self) -> Observation {
        let mut px = vec![BACKGROUND; self.size * self.size];
        let (gx, gy) = self.goal();
        px[gy * self.size + gx] = GOAL;
        px[self.y * self.size + self.x] = AGENT;
        Observation::new(self.size, self.size, 3, px)
    }

    fn is_terminal(&self) -> bool {
        (self.x, self.y) == self.goal()
    }

    fn save_state(&self) -> StateToken {
        StateToken::new(vec![self.x as i64, self.y as i64])
    }

    fn restore_state(&mut self, token: &StateToken) -> Result<(), MdpError> {
        match token.words() {
            &[x, y] if (0..self.size as i64).contains(&x) && (0..self.size as i64).contains(&y) => {
                self.x = x as usize;
                self.y = y as usize;
                Ok(())
            }
            other => Err(MdpError::BadToken(format!("gridnav {other:?}"))),
        }
    }

    fn apply(&mut self, action: ActionId) -> f64 {
        let before = self.distance(self.x, self.y);
        let last = self.size - 1;
        match action.0 {
            0 => self.y = self.y.saturating_sub(1),
            1 => self.y = (self.y + 1).min(last),
            2 => self.x = self.x.saturating_sub(1),
            _ => self.x = (self.x + 1).min(last),
        }
        let goal = if self.is_terminal() { GOAL_REWARD } else { 0.0 };
        match self.reward {
            GridReward::Sparse => goal,
            GridReward::Dense => (before - self.distance(self.x, self.y)) as f64 + goal,
        }
    }

    fn max_steps(&self) -> Option<usize> {
        self.max_steps
    }
}
