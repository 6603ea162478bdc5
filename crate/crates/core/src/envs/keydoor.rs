use crate::mdp::{ActionId, Environment, MdpError, Observation, StateToken};

pub const AGENT: u8 = 1;
pub const KEY: u8 = 2;
pub const DOOR: u8 = 3;

/// Grid where the door (bottom-right) only pays `+100` once the key
/// (bottom-left) has been collected. Same action layout as `GridNav`.
#[derive(Debug, Clone)]
pub struct KeyDoor {
    name: String,
    size: usize,
    max_steps: Option<usize>,
    x: usize,
    y: usize,
    has_key: bool,
}

impl KeyDoor {
    pub fn new(name: impl Into<String>, size: usize, max_steps: Option<usize>) -> Self {
        assert!(size >= 2);
        Self {
            name: name.into(),
            size,
            max_steps,
            x: 0,
            y: 0,
            has_key: false,
        }
    }

    fn key(&self) -> (usize, usize) {
        (0, self.size - 1)
    }

    fn door(&self) -> (usize, usize) {
        (self.size - 1, self.size - 1)
    }
}

impl Environment for KeyDoor {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn reset(&mut self) {
        self.x = 0;
        self.y = 0;
        self.has_key = false;
    }

    fn observe(&self) -> Observation {
        let n = self.size;
        let mut px = vec![0u8; n * n];
        if !self.has_key {
            let (kx, ky) = self.key();
            px[ky * n + kx] = KEY;
        }
        let (dx, dy) = self.door();
        px[dy * n + dx] = DOOR;
        px[self.y * n + self.x] = AGENT;
        Observation::new(n, n, 4, px)
    }

    fn is_terminal(&self) -> bool {
        self.has_key && (self.x, self.y) == self.door()
    }

    fn save_state(&self) -> StateToken {
        StateToken::new(vec![self.x as i64, self.y as i64, self.has_key as i64])
    }

    fn restore_state(&mut self, token: &StateToken) -> Result<(), MdpError> {
        let n = self.size as i64;
        match token.words() {
            &[x, y, k] if (0..n).contains(&x) && (0..n).contains(&y) && (0..=1).contains(&k) => {
                self.x = x as usize;
                self.y = y as usize;
                self.has_key = k == 1;
                Ok(())
            }
            other => Err(MdpError::BadToken(format!("keydoor {other:?}"))),
        }
    }

    fn apply(&mut self, action: ActionId) -> f64 {
        let last = self.size - 1;
        match action.0 {
            0 => self.y = self.y.saturating_sub(1),
            1 => self.y = (self.y + 1).min(last),
            2 => self.x = self.x.saturating_sub(1),
            _ => self.x = (self.x + 1).min(last),
        }
        if (self.x, self.y) == self.key() {
            self.has_key = true;
        }
        if self.is_terminal() {
            100.0
        } else {
            0.0
        }
    }

    fn max_steps(&self) -> Option<usize> {
        self.max_steps
    }
}
