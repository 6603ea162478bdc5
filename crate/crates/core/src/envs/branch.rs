use crate::mdp::{ActionId, Environment, MdpError, Observation, StateToken};

const SIDE: usize = 10;

/// Branching-factor stressor: `K` actions, exactly one of which keeps the
/// agent alive at each depth (`+1`); every other action leads to an
/// absorbing dead end. Reaching `depth` ends the episode.
///
/// The observation lights one cell per level survived and fills the bottom
/// row when dead.
#[derive(Debug, Clone)]
pub struct BranchK {
    name: String,
    k: usize,
    depth: usize,
    level: usize,
    dead: bool,
}

impl BranchK {
    pub fn new(name: impl Into<String>, k: usize, depth: usize) -> Self {
        assert!(k >= 1);
        assert!(depth < SIDE * (SIDE - 1), "progress must fit above the bottom row");
        Self {
            name: name.into(),
            k,
            depth,
            level: 0,
            dead: false,
        }
    }

    /// The surviving action at `level`.
    pub fn correct_action(&self, level: usize) -> ActionId {
        ActionId((level * 7 + 3) % self.k)
    }

    pub fn level(&self) -> usize {
        self.level
    }
}

impl Environment for BranchK {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_actions(&self) -> usize {
        self.k
    }

    fn reset(&mut self) {
        self.level = 0;
        self.dead = false;
    }

    fn observe(&self) -> Observation {
        let mut px = vec![0u8; SIDE * SIDE];
        px[..self.level].fill(1);
        if self.dead {
            px[SIDE * (SIDE - 1)..].fill(2);
        }
        Observation::new(SIDE, SIDE, 3, px)
    }

    fn is_terminal(&self) -> bool {
        self.dead || self.level >= self.depth
    }

    fn save_state(&self) -> StateToken {
        StateToken::new(vec![self.level as i64, self.dead as i64])
    }

    fn restore_state(&mut self, token: &StateToken) -> Result<(), MdpError> {
        match token.words() {
            &[level, dead] if (0..=self.depth as i64).contains(&level) && (0..=1).contains(&dead) => {
                self.level = level as usize;
                self.dead = dead == 1;
                Ok(())
            }
            other => Err(MdpError::BadToken(format!("branch {other:?}"))),
        }
    }

    fn apply(&mut self, action: ActionId) -> f64 {
        if action == self.correct_action(self.level) {
            self.level += 1;
            1.0
        } else {
            self.dead = true;
            0.0
        }
    }
}
