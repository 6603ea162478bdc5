//! Environment taxonomy: sparse meaningful reward feedback (SMRF) detection
//! with a one-step-lookahead RTDP probe, and branching-factor classes.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::learner::stats::{mean, std_dev, welch_t_test, welch_t_test_two_sided, StatsError};
use crate::mdp::{self, ActionId, BudgetedSimulator, Environment, MdpError, StateToken};

pub const SMRF_EPISODES: usize = 20;
pub const SMRF_EPISODE_STEPS: usize = 50;
pub const ROLLOUT_STEPS: usize = 10;
pub const SMRF_ALPHA: f64 = 0.1;
pub const HIGH_BRANCHING: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    /// Alternative: RTDP scores higher than random.
    #[default]
    OneSided,
    TwoSided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmrfVerdict {
    pub env: String,
    pub rtdp_returns: Vec<f64>,
    pub random_returns: Vec<f64>,
    pub p_value: f64,
    pub is_smrf: bool,
}

impl SmrfVerdict {
    pub const CSV_HEADER: &'static str = "env,rtdp_mean,rtdp_std,random_mean,random_std,p_value,label";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.4},{:.4},{:.4},{:.4},{:.6},{}",
            self.env,
            mean(&self.rtdp_returns),
            std_dev(&self.rtdp_returns),
            mean(&self.random_returns),
            std_dev(&self.random_returns),
            self.p_value,
            if self.is_smrf { "SMRF" } else { "non-SMRF" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchClass {
    pub env: String,
    pub action_count: usize,
    pub high_branching: bool,
}

pub fn random_rollout<E, R>(
    sim: &mut BudgetedSimulator<'_, E>,
    from: &StateToken,
    steps: usize,
    rng: &mut R,
) -> Result<f64, MdpError>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    let mut state = from.clone();
    let mut total = 0.0;
    for _ in 0..steps {
        let n = sim.num_actions();
        let s = sim.step(&state, ActionId(rng.random_range(0..n)))?;
        total += s.reward;
        state = s.state;
    }
    Ok(total)
}

/// One-step lookahead with a single 10-step random rollout estimating each
/// successor's value. Costs exactly `|A| * 11` simulator calls, which are
/// charged to `sim`; terminal successors keep absorbing for the full count.
pub fn rtdp_step<E, R>(
    sim: &mut BudgetedSimulator<'_, E>,
    state: &StateToken,
    rng: &mut R,
) -> Result<ActionId, MdpError>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    sim.env().restore_state(state)?;
    let actions = sim.env().applicable_actions();
    let mut best = Vec::new();
    let mut best_q = f64::NEG_INFINITY;
    for &a in &actions {
        let s = sim.step(state, a)?;
        let q = s.reward + random_rollout(sim, &s.state, ROLLOUT_STEPS, rng)?;
        if q > best_q {
            best_q = q;
            best.clear();
        }
        if q == best_q {
            best.push(a);
        }
    }
    Ok(*best.choose(rng).expect("at least one applicable action"))
}

#[derive(Clone, Copy)]
enum Probe {
    Rtdp,
    Random,
}

fn probe_episode<E: Environment + ?Sized>(env: &mut E, probe: Probe, rng: &mut ChaCha8Rng) -> Result<f64, MdpError> {
    env.reset();
    let mut state = env.save_state();
    let mut sim = BudgetedSimulator::new(env, u64::MAX);
    let mut total = 0.0;
    for _ in 0..SMRF_EPISODE_STEPS {
        sim.env().restore_state(&state)?;
        if sim.env().is_terminal() {
            break;
        }
        let action = match probe {
            Probe::Rtdp => rtdp_step(&mut sim, &state, rng)?,
            Probe::Random => *sim
                .env()
                .applicable_actions()
                .choose(rng)
                .expect("at least one applicable action"),
        };
        let s = mdp::step(sim.env(), &state, action)?;
        total += s.reward;
        state = s.state;
    }
    Ok(total)
}

/// 20 RTDP and 20 random-policy episodes of 50 decisions on independent
/// streams; the environment is SMRF unless RTDP is significantly better.
pub fn classify_smrf<E: Environment + ?Sized>(
    env: &mut E,
    seed: u64,
    sidedness: Sidedness,
) -> Result<SmrfVerdict, MdpError> {
    let mut run = |probe: Probe, stream_base: u64| {
        (0..SMRF_EPISODES as u64)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream_base + k);
                probe_episode(env, probe, &mut rng)
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let rtdp_returns = run(Probe::Rtdp, 1)?;
    let random_returns = run(Probe::Random, 1 + SMRF_EPISODES as u64)?;
    let p = match sidedness {
        Sidedness::OneSided => welch_t_test(&rtdp_returns, &random_returns),
        Sidedness::TwoSided => welch_t_test_two_sided(&rtdp_returns, &random_returns),
    };
    let (p_value, is_smrf) = match p {
        Ok(p) => (p, p >= SMRF_ALPHA),
        Err(StatsError::DegenerateSamples) => {
            log::warn!("{}: RTDP and random returns are identical constants", env.name());
            (0.5, true)
        }
        Err(e @ StatsError::InsufficientSamples(..)) => unreachable!("fixed sample sizes: {e}"),
    };
    Ok(SmrfVerdict {
        env: env.name().to_string(),
        rtdp_returns,
        random_returns,
        p_value,
        is_smrf,
    })
}

pub fn classify_branching<E: Environment + ?Sized>(env: &mut E) -> BranchClass {
    env.reset();
    let action_count = env.applicable_actions().len();
    BranchClass {
        env: env.name().to_string(),
        action_count,
        high_branching: action_count >= HIGH_BRANCHING,
    }
}
