//! Policy/value function approximators and their training losses.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::TrainingBatch;
use super::mlp::Mlp;
use super::LearnError;
use crate::mdp::Observation;
use crate::planner::BasePolicy;

pub const HUBER_DELTA: f64 = 1.0;

/// Which output head a loss or gradient refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// Softmax policy trained with categorical cross-entropy.
    Policy,
    /// Linear value trained with the Huber loss.
    Value,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-Σ t_a log softmax(z)_a` and its gradient with respect to `z`.
pub fn cross_entropy_with_logits(logits: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    let loss = target
        .iter()
        .zip(logits)
        .map(|(t, z)| if *t == 0.0 { 0.0 } else { -t * (z - log_sum) })
        .sum();
    let mass: f64 = target.iter().sum();
    let p = softmax(logits);
    let grad = p.iter().zip(target).map(|(p, t)| p * mass - t).collect();
    (loss, grad)
}

/// Huber loss of residual `y - v` and its derivative with respect to `v`.
pub fn huber(prediction: f64, target: f64, delta: f64) -> (f64, f64) {
    let r = target - prediction;
    if r.abs() <= delta {
        (0.5 * r * r, -r)
    } else {
        (delta * (r.abs() - 0.5 * delta), -delta * r.signum())
    }
}

/// Policy and value function contract used by the planner and learner.
pub trait Approximator: Clone + Send + Sync {
    fn num_actions(&self) -> usize;

    fn predict_policy(&self, obs: &Observation) -> Vec<f64>;

    fn predict_value(&self, obs: &Observation) -> f64;

    fn params(&self, head: Head) -> &[f64];

    fn params_mut(&mut self, head: Head) -> &mut [f64];

    /// Mean weighted loss over the batch and its analytic gradient.
    fn loss_and_gradient(&self, head: Head, batch: &TrainingBatch) -> (f64, Vec<f64>);
}

/// Adapter exposing an approximator's policy head as a rollout base policy.
#[derive(Debug, Clone, Copy)]
pub struct LearnedPolicy<'a, A>(pub &'a A);

impl<A: Approximator> BasePolicy for LearnedPolicy<'_, A> {
    fn probabilities(&self, obs: &Observation, _num_actions: usize) -> Vec<f64> {
        self.0.predict_policy(obs)
    }
}

pub fn gradient_of<A: Approximator>(approx: &A, head: Head, batch: &TrainingBatch) -> Vec<f64> {
    approx.loss_and_gradient(head, batch).1
}

pub fn loss_of<A: Approximator>(approx: &A, head: Head, batch: &TrainingBatch) -> f64 {
    approx.loss_and_gradient(head, batch).0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            learning_rate: 2.5e-4,
            epochs: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Full-batch loss before the first update and after the last.
    pub loss_before: f64,
    pub loss_after: f64,
    pub updates: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for k in 0..params.len() {
            let g = grad[k];
            self.m[k] = Self::BETA1 * self.m[k] + (1.0 - Self::BETA1) * g;
            self.v[k] = Self::BETA2 * self.v[k] + (1.0 - Self::BETA2) * g * g;
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            params[k] -= lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

/// Mini-batch Adam on one head. Returns the updated approximator; the input
/// is left untouched. Deterministic for a given `cfg.seed`.
pub fn fit<A: Approximator>(
    approx: &A,
    head: Head,
    batch: &TrainingBatch,
    cfg: &FitConfig,
) -> Result<(A, FitReport), LearnError> {
    batch.validate(head, approx.num_actions())?;
    let mut model = approx.clone();
    let loss_before = loss_of(&model, head, batch);
    if !loss_before.is_finite() {
        return Err(LearnError::NonFiniteLoss);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model.params(head).len());
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let size = cfg.batch_size.max(1);
    let mut updates = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(size) {
            let mini = batch.select(chunk);
            let (loss, grad) = model.loss_and_gradient(head, &mini);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(LearnError::NonFiniteLoss);
            }
            if cfg.learning_rate != 0.0 {
                adam.update(model.params_mut(head), &grad, cfg.learning_rate);
            }
            updates += 1;
        }
    }
    let loss_after = loss_of(&model, head, batch);
    if !loss_after.is_finite() {
        return Err(LearnError::NonFiniteLoss);
    }
    Ok((
        model,
        FitReport {
            loss_before,
            loss_after,
            updates,
        },
    ))
}

pub fn fit_policy<A: Approximator>(
    approx: &A,
    batch: &TrainingBatch,
    cfg: &FitConfig,
) -> Result<A, LearnError> {
    fit(approx, Head::Policy, batch, cfg).map(|(a, _)| a)
}

pub fn fit_value<A: Approximator>(
    approx: &A,
    batch: &TrainingBatch,
    cfg: &FitConfig,
) -> Result<A, LearnError> {
    fit(approx, Head::Value, batch, cfg).map(|(a, _)| a)
}

/// Indices of the active one-hot inputs: pixel `k` with colour `c` maps to
/// `k * palette + c`.
pub fn one_hot_pixels(obs: &Observation) -> Vec<usize> {
    let c = obs.palette_size();
    obs.pixels()
        .iter()
        .enumerate()
        .map(|(k, &v)| k * c + v as usize)
        .collect()
}

/// Two MLPs over one-hot pixel inputs: a softmax policy head and a linear
/// value head.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpApproximator {
    shape: (usize, usize, usize),
    num_actions: usize,
    policy: Mlp,
    value: Mlp,
}

pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

impl MlpApproximator {
    pub fn new(shape: (usize, usize, usize), num_actions: usize, hidden: &[usize], seed: u64) -> Self {
        let (w, h, c) = shape;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = |out: usize| {
            let mut s = vec![w * h * c];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        let policy = Mlp::random(sizes(num_actions), w * h, &mut rng);
        let value = Mlp::random(sizes(1), w * h, &mut rng);
        Self {
            shape,
            num_actions,
            policy,
            value,
        }
    }

    pub fn from_nets(shape: (usize, usize, usize), policy: Mlp, value: Mlp) -> Option<Self> {
        let input = shape.0 * shape.1 * shape.2;
        (policy.input_dim() == input && value.input_dim() == input && value.output_dim() == 1).then(|| Self {
            shape,
            num_actions: policy.output_dim(),
            policy,
            value,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn net(&self, head: Head) -> &Mlp {
        match head {
            Head::Policy => &self.policy,
            Head::Value => &self.value,
        }
    }

    fn check_shape(&self, obs: &Observation) {
        assert_eq!(
            (obs.width(), obs.height(), obs.palette_size()),
            self.shape,
            "observation shape does not match approximator"
        );
    }
}

impl Approximator for MlpApproximator {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn predict_policy(&self, obs: &Observation) -> Vec<f64> {
        self.check_shape(obs);
        softmax(&self.policy.output(&one_hot_pixels(obs)))
    }

    fn predict_value(&self, obs: &Observation) -> f64 {
        self.check_shape(obs);
        self.value.output(&one_hot_pixels(obs))[0]
    }

    fn params(&self, head: Head) -> &[f64] {
        self.net(head).params()
    }

    fn params_mut(&mut self, head: Head) -> &mut [f64] {
        match head {
            Head::Policy => self.policy.params_mut(),
            Head::Value => self.value.params_mut(),
        }
    }

    fn loss_and_gradient(&self, head: Head, batch: &TrainingBatch) -> (f64, Vec<f64>) {
        let net = self.net(head);
        let mut grad = vec![0.0; net.params().len()];
        let n = batch.len().max(1) as f64;
        let mut total = 0.0;
        for (k, obs) in batch.inputs.iter().enumerate() {
            let w = batch.weights[k];
            if w == 0.0 {
                continue;
            }
            let active = one_hot_pixels(obs);
            let trace = net.forward(&active);
            let (loss, mut g) = match head {
                Head::Policy => cross_entropy_with_logits(trace.output(), &batch.policy_targets[k]),
                Head::Value => {
                    let (l, d) = huber(trace.output()[0], batch.value_targets[k], HUBER_DELTA);
                    (l, vec![d])
                }
            };
            total += w * loss;
            g.iter_mut().for_each(|x| *x *= w / n);
            net.backward(&active, &trace, &g, &mut grad);
        }
        (total / n, grad)
    }
}

/// One policy logit vector and one value per known observation. Unknown
/// observations get the uniform policy and value 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularApproximator {
    index: HashMap<Observation, usize>,
    num_actions: usize,
    logits: Vec<f64>,
    values: Vec<f64>,
}

impl TabularApproximator {
    pub fn new(observations: impl IntoIterator<Item = Observation>, num_actions: usize) -> Self {
        let mut index = HashMap::new();
        for o in observations {
            let next = index.len();
            index.entry(o).or_insert(next);
        }
        let n = index.len();
        Self {
            index,
            num_actions,
            logits: vec![0.0; n * num_actions],
            values: vec![0.0; n],
        }
    }

    pub fn state_index(&self, obs: &Observation) -> Option<usize> {
        self.index.get(obs).copied()
    }
}

impl Approximator for TabularApproximator {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn predict_policy(&self, obs: &Observation) -> Vec<f64> {
        match self.state_index(obs) {
            Some(s) => softmax(&self.logits[s * self.num_actions..(s + 1) * self.num_actions]),
            None => vec![1.0 / self.num_actions as f64; self.num_actions],
        }
    }

    fn predict_value(&self, obs: &Observation) -> f64 {
        self.state_index(obs).map_or(0.0, |s| self.values[s])
    }

    fn params(&self, head: Head) -> &[f64] {
        match head {
            Head::Policy => &self.logits,
            Head::Value => &self.values,
        }
    }

    fn params_mut(&mut self, head: Head) -> &mut [f64] {
        match head {
            Head::Policy => &mut self.logits,
            Head::Value => &mut self.values,
        }
    }

    fn loss_and_gradient(&self, head: Head, batch: &TrainingBatch) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params(head).len()];
        let n = batch.len().max(1) as f64;
        let a = self.num_actions;
        let mut total = 0.0;
        for (k, obs) in batch.inputs.iter().enumerate() {
            let w = batch.weights[k];
            let s = self.state_index(obs);
            match head {
                Head::Policy => {
                    let logits = match s {
                        Some(s) => self.logits[s * a..(s + 1) * a].to_vec(),
                        None => vec![0.0; a],
                    };
                    let (l, g) = cross_entropy_with_logits(&logits, &batch.policy_targets[k]);
                    total += w * l;
                    if let Some(s) = s {
                        for j in 0..a {
                            grad[s * a + j] += w * g[j] / n;
                        }
                    }
                }
                Head::Value => {
                    let v = s.map_or(0.0, |s| self.values[s]);
                    let (l, d) = huber(v, batch.value_targets[k], HUBER_DELTA);
                    total += w * l;
                    if let Some(s) = s {
                        grad[s] += w * d / n;
                    }
                }
            }
        }
        (total / n, grad)
    }
}
