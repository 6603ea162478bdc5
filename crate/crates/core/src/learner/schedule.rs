//! Interval-based parameter acceptance.
//!
//! Interval `i` runs with the incumbent parameters and yields episode
//! returns `E_i` plus critical-path data. A candidate trained on that data
//! drives interval `i + 1`; its returns `E_{i+1}` are compared against the
//! incumbent's with a one-sided Welch test. The candidate is rejected (and
//! the incumbent restored) when `p < 0.1` for "incumbent better".

use super::stats::{welch_t_test, StatsError};

pub const REJECT_BELOW: f64 = 0.1;

/// The acceptance rule: reject iff `p < 0.1`.
pub fn rejects(p_value: f64) -> bool {
    p_value < REJECT_BELOW
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleDecision {
    pub accepted: bool,
    /// `None` when no candidate was under test.
    pub p_value: Option<f64>,
}

/// Tests whether `e_old` (returns under the incumbent) is significantly
/// better than `e_new` (returns under the candidate). Degenerate or too
/// small samples carry no evidence of deterioration and accept.
pub fn acceptance_test(e_old: &[f64], e_new: &[f64]) -> ScheduleDecision {
    let p = match welch_t_test(e_old, e_new) {
        Ok(p) => Some(p),
        Err(StatsError::DegenerateSamples) => Some(0.5),
        Err(StatsError::InsufficientSamples(..)) => None,
    };
    ScheduleDecision {
        accepted: !p.is_some_and(rejects),
        p_value: p,
    }
}

#[derive(Debug, Clone)]
pub struct ScheduleState<A> {
    incumbent: A,
    incumbent_returns: Vec<f64>,
    candidate: Option<A>,
    interval: usize,
}

impl<A: Clone> ScheduleState<A> {
    pub fn new(initial: A) -> Self {
        Self {
            incumbent: initial,
            incumbent_returns: Vec::new(),
            candidate: None,
            interval: 0,
        }
    }

    pub fn interval(&self) -> usize {
        self.interval
    }

    pub fn incumbent(&self) -> &A {
        &self.incumbent
    }

    pub fn incumbent_returns(&self) -> &[f64] {
        &self.incumbent_returns
    }

    pub fn candidate(&self) -> Option<&A> {
        self.candidate.as_ref()
    }

    /// Parameters used for data generation in the current interval: the
    /// candidate under test if there is one, otherwise the incumbent.
    pub fn active(&self) -> &A {
        self.candidate.as_ref().unwrap_or(&self.incumbent)
    }

    /// Installs a candidate to be evaluated in the next interval.
    pub fn propose(&mut self, candidate: A) {
        self.candidate = Some(candidate);
    }

    /// Closes the current interval with the returns collected under
    /// [`active`](Self::active).
    pub fn complete_interval(&mut self, returns: Vec<f64>) -> ScheduleDecision {
        self.interval += 1;
        match self.candidate.take() {
            Some(candidate) => {
                let (_, decision) =
                    self.update_network_parameters(candidate, &self.incumbent_returns.clone(), &returns);
                if decision.accepted {
                    self.incumbent_returns = returns;
                }
                decision
            }
            None => {
                self.incumbent_returns = returns;
                ScheduleDecision {
                    accepted: true,
                    p_value: None,
                }
            }
        }
    }

    /// Accepts `candidate` as the incumbent unless `e_old` is significantly
    /// better than `e_new`. Returns the resulting incumbent.
    pub fn update_network_parameters(
        &mut self,
        candidate: A,
        e_old: &[f64],
        e_new: &[f64],
    ) -> (&A, ScheduleDecision) {
        let decision = acceptance_test(e_old, e_new);
        if decision.accepted {
            self.incumbent = candidate;
        }
        (&self.incumbent, decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clearly_worse_candidate_is_rejected() {
        let mut s = ScheduleState::new("old");
        let (kept, d) = s.update_network_parameters("new", &[10.0, 11.0, 12.0, 13.0], &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(*kept, "old");
        assert!(!d.accepted);
        assert!(d.p_value.unwrap() < 0.1);
    }

    #[test]
    fn equal_returns_accept_at_half() {
        let mut s = ScheduleState::new("old");
        let e = [1.0, 3.0, 2.0];
        let (kept, d) = s.update_network_parameters("new", &e, &e);
        assert_eq!(*kept, "new");
        assert_eq!(d.p_value, Some(0.5));
    }

    #[test]
    fn better_candidate_is_accepted() {
        let mut s = ScheduleState::new("old");
        let (kept, _) = s.update_network_parameters("new", &[0.0, 1.0, 2.0, 3.0], &[10.0, 11.0, 12.0, 13.0]);
        assert_eq!(*kept, "new");
    }

    #[test]
    fn degenerate_accepts() {
        let d = acceptance_test(&[4.0, 4.0], &[4.0, 4.0]);
        assert!(d.accepted);
        assert_eq!(d.p_value, Some(0.5));
        assert!(acceptance_test(&[4.0], &[1.0, 2.0]).accepted);
    }

    #[test]
    fn interval_protocol() {
        let mut s = ScheduleState::new(0u32);
        let d = s.complete_interval(vec![5.0, 6.0, 7.0]);
        assert_eq!(d, ScheduleDecision { accepted: true, p_value: None });
        assert_eq!(*s.active(), 0);

        s.propose(1);
        assert_eq!(*s.active(), 1);
        let d = s.complete_interval(vec![0.0, 0.5, 1.0]);
        assert!(!d.accepted);
        assert_eq!(*s.active(), 0);
        assert_eq!(s.incumbent_returns(), &[5.0, 6.0, 7.0]);

        s.propose(2);
        let d = s.complete_interval(vec![6.0, 7.0, 8.0]);
        assert!(d.accepted);
        assert_eq!(*s.incumbent(), 2);
        assert_eq!(s.incumbent_returns(), &[6.0, 7.0, 8.0]);
        assert_eq!(s.interval(), 3);
    }
}
