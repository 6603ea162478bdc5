use crate::mdp::{ActionId, Environment, MdpError, Observation, StateToken};

pub const SNOW: u8 = 0;
pub const SKIER: u8 = 1;
pub const FLAG: u8 = 2;

pub const WIDTH: usize = 10;
pub const VIEW_ROWS: usize = 10;
pub const GATE_SPAN: usize = 3;
pub const MISSED_GATE_PENALTY: f64 = 50.0;

/// Delayed-penalty descent. The skier moves down one row per step and
/// steers with 0 left, 1 straight, 2 right. Every step costs `-1`. Gates sit
/// every ten rows; the `-50` penalty for each missed gate is charged only
/// on the final step, when the course ends.
#[derive(Debug, Clone)]
pub struct Corridor {
    name: String,
    length: usize,
    gates: Vec<(usize, usize)>,
    row: usize,
    col: usize,
    missed: usize,
}

impl Corridor {
    pub fn new(name: impl Into<String>, length: usize) -> Self {
        assert!(length >= 2);
        // Gate at rows 10, 20, ... strictly inside the course, alternating
        // between the left and right edges.
        let gates = (1..)
            .map(|k| k * 10)
            .take_while(|&r| r < length)
            .enumerate()
            .map(|(k, r)| (r, if k % 2 == 0 { 0 } else { WIDTH - GATE_SPAN }))
            .collect();
        Self {
            name: name.into(),
            length,
            gates,
            row: 0,
            col: WIDTH / 2,
            missed: 0,
        }
    }

    pub fn gates(&self) -> &[(usize, usize)] {
        &self.gates
    }

    pub fn missed(&self) -> usize {
        self.missed
    }
}

impl Environment for Corridor {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_actions(&self) -> usize {
        3
    }

    fn reset(&mut self) {
        self.row = 0;
        self.col = WIDTH / 2;
        self.missed = 0;
    }

    fn observe(&self) -> Observation {
        let mut px = vec![SNOW; WIDTH * VIEW_ROWS];
        for &(r, left) in &self.gates {
            if (self.row..self.row + VIEW_ROWS).contains(&r) {
                let y = r - self.row;
                px[y * WIDTH + left] = FLAG;
                px[y * WIDTH + left + GATE_SPAN - 1] = FLAG;
            }
        }
        px[self.col] = SKIER;
        Observation::new(WIDTH, VIEW_ROWS, 3, px)
    }

    fn is_terminal(&self) -> bool {
        self.row >= self.length
    }

    fn save_state(&self) -> StateToken {
        StateToken::new(vec![self.row as i64, self.col as i64, self.missed as i64])
    }

    fn restore_state(&mut self, token: &StateToken) -> Result<(), MdpError> {
        match token.words() {
            &[row, col, missed]
                if (0..=self.length as i64).contains(&row) && (0..WIDTH as i64).contains(&col) && missed >= 0 =>
            {
                self.row = row as usize;
                self.col = col as usize;
                self.missed = missed as usize;
                Ok(())
            }
            other => Err(MdpError::BadToken(format!("corridor {other:?}"))),
        }
    }

    fn apply(&mut self, action: ActionId) -> f64 {
        match action.0 {
            0 => self.col = self.col.saturating_sub(1),
            1 => {}
            _ => self.col = (self.col + 1).min(WIDTH - 1),
        }
        self.row += 1;
        if let Some(&(_, left)) = self.gates.iter().find(|(r, _)| *r == self.row) {
            if !(left..left + GATE_SPAN).contains(&self.col) {
                self.missed += 1;
            }
        }
        if self.is_terminal() {
            -1.0 - MISSED_GATE_PENALTY * self.missed as f64
        } else {
            -1.0
        }
    }
}
