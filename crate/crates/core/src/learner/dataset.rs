//! Training sets built from critical paths only.

use super::approximator::Head;
use super::LearnError;
use crate::mdp::{CriticalPath, Observation};

/// Aligned rows of inputs and targets. A policy batch fills
/// `policy_targets` (1-hot rows); a value batch fills `value_targets`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingBatch {
    pub inputs: Vec<Observation>,
    pub policy_targets: Vec<Vec<f64>>,
    pub value_targets: Vec<f64>,
    /// Per-row loss weights, 1 by default.
    pub weights: Vec<f64>,
}

pub fn one_hot(index: usize, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    v
}

impl TrainingBatch {
    pub fn policy(inputs: Vec<Observation>, targets: Vec<Vec<f64>>) -> Self {
        let n = inputs.len();
        Self {
            inputs,
            policy_targets: targets,
            value_targets: Vec::new(),
            weights: vec![1.0; n],
        }
    }

    pub fn value(inputs: Vec<Observation>, targets: Vec<f64>) -> Self {
        let n = inputs.len();
        Self {
            inputs,
            policy_targets: Vec::new(),
            value_targets: targets,
            weights: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Rows at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> TrainingBatch {
        let pick = |v: &Vec<f64>| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        TrainingBatch {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            policy_targets: if self.policy_targets.is_empty() {
                Vec::new()
            } else {
                idx.iter().map(|&i| self.policy_targets[i].clone()).collect()
            },
            value_targets: if self.value_targets.is_empty() {
                Vec::new()
            } else {
                pick(&self.value_targets)
            },
            weights: pick(&self.weights),
        }
    }

    pub fn validate(&self, head: Head, num_actions: usize) -> Result<(), LearnError> {
        if self.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        let bad = |why: &str| Err(LearnError::InvalidBatch(why.to_string()));
        if self.weights.len() != self.len() {
            return bad("weights length");
        }
        match head {
            Head::Policy => {
                if self.policy_targets.len() != self.len() {
                    return bad("policy target count");
                }
                if self.policy_targets.iter().any(|t| t.len() != num_actions) {
                    return bad("policy target width");
                }
            }
            Head::Value => {
                if self.value_targets.len() != self.len() {
                    return bad("value target count");
                }
            }
        }
        Ok(())
    }
}

/// One `(obs, 1-hot(action))` row per critical-path transition.
pub fn build_policy_batch(paths: &[CriticalPath], num_actions: usize) -> Result<TrainingBatch, LearnError> {
    let (inputs, targets): (Vec<_>, Vec<_>) = paths
        .iter()
        .flat_map(|p| p.records())
        .map(|r| (r.obs.clone(), one_hot(r.action.index(), num_actions)))
        .unzip();
    if inputs.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    Ok(TrainingBatch::policy(inputs, targets))
}

/// TD(0) targets `r + gamma * V_target(s')`, or `r` on terminal transitions.
pub fn build_value_batch<F>(paths: &[CriticalPath], mut value_target: F, gamma: f64) -> Result<TrainingBatch, LearnError>
where
    F: FnMut(&Observation) -> f64,
{
    assert!(gamma > 0.0 && gamma <= 1.0, "discount must lie in (0, 1]");
    let (inputs, targets): (Vec<_>, Vec<_>) = paths
        .iter()
        .flat_map(|p| p.records())
        .map(|r| {
            let y = if r.terminal {
                r.reward
            } else {
                r.reward + gamma * value_target(&r.next_obs)
            };
            (r.obs.clone(), y)
        })
        .unzip();
    if inputs.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    Ok(TrainingBatch::value(inputs, targets))
}
