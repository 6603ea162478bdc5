//! Benchmark orchestration: the variant × env × seed matrix, persisted one
//! file per trial with a manifest that makes runs resumable.

mod config;
mod report;

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use thiserror::Error;

pub use config::{BenchConfig, Preset, DEFAULT_SEEDS};
pub use report::{
    build_win_table, classify_envs, generate_report, load_results, summarize, summary_csv, EnvClass, Report,
    SummaryRow, WinTable,
};

use crate::agent::{evaluate, run_training, Agent, AgentError, AgentVariant, IntervalRecord};
use crate::envs::{make_env, EnvError, EnvSpec};
use crate::learner::checkpoint::write_checkpoint;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("no results for {variant} on {env}")]
    IncompleteMatrix { variant: AgentVariant, env: String },
    #[error("malformed results: {0}")]
    BadResults(String),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const RESULTS_HEADER: &str = "variant,env,seed,episode,return";
pub const LOG_HEADER: &str = "interval,sim_interactions,episodes,mean_return,p_value,accepted";
const MANIFEST_HEADER: &str = "variant,env,seed,trial_seed,fresh_calls,total_budget,results,training_log";

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed of one trial, a pure function of the master seed and the cell, so
/// results do not depend on scheduling order.
pub fn trial_seed(master: u64, variant: AgentVariant, env: &str, seed: usize) -> u64 {
    fnv1a(format!("{master}/{variant}/{env}/{seed}").as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub variant: AgentVariant,
    pub env: String,
    pub seed: usize,
    pub trial_seed: u64,
    pub returns: Vec<f64>,
    /// Fresh simulator calls spent in training (0 for planning-only variants).
    pub fresh_calls: u64,
    pub total_budget: u64,
    pub training_log: Option<String>,
}

impl TrialResult {
    pub fn mean(&self) -> f64 {
        self.returns.iter().sum::<f64>() / self.returns.len() as f64
    }
}

fn stem(variant: AgentVariant, env: &str, seed: usize) -> String {
    format!("{variant}.{env}.seed{seed}")
}

pub fn log_csv(log: &[IntervalRecord]) -> String {
    let mut s = format!("{LOG_HEADER}\n");
    for r in log {
        let p = r.p_value.map(|p| p.to_string()).unwrap_or_default();
        s += &format!(
            "{},{},{},{},{},{}\n",
            r.interval, r.sim_interactions, r.episodes, r.mean_return, p, r.accepted
        );
    }
    s
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn run_trial(
    cfg: &BenchConfig,
    variant: AgentVariant,
    spec: &EnvSpec,
    seed: usize,
    dir: &Path,
) -> Result<TrialResult, HarnessError> {
    let train = &cfg.train[&variant];
    let tseed = trial_seed(cfg.master_seed, variant, &spec.name, seed);
    let mut env = make_env(spec)?;
    let name = stem(variant, &spec.name, seed);
    let (returns, fresh_calls, training_log) = if variant.learns() {
        let out = run_training(variant, &mut env, train, tseed)?;
        let log_rel = format!("logs/{name}.csv");
        write(&dir.join(&log_rel), &log_csv(&out.log))?;
        for (interval, params) in &out.checkpoints {
            let path = dir.join(format!("checkpoints/{name}.interval{interval}.ckpt"));
            fs::create_dir_all(dir.join("checkpoints")).map_err(io_err(dir))?;
            let file = fs::File::create(&path).map_err(io_err(&path))?;
            write_checkpoint(&mut BufWriter::new(file), params).map_err(io_err(&path))?;
        }
        let mut agent = out.agent;
        let returns = evaluate(&mut agent, &mut env, train, train.eval_episodes, tseed ^ 0xe7a1)?;
        (returns, out.fresh_calls, Some(log_rel))
    } else {
        let mut agent: Agent = Agent::new(variant, train.plan.clone(), train.features.clone(), None);
        let returns = evaluate(&mut agent, &mut env, train, train.eval_episodes, tseed ^ 0xe7a1)?;
        (returns, 0, None)
    };
    let mut csv = format!("{RESULTS_HEADER}\n");
    for (k, r) in returns.iter().enumerate() {
        csv += &format!("{variant},{},{seed},{k},{r}\n", spec.name);
    }
    write(&dir.join(format!("trials/{name}.csv")), &csv)?;
    log::info!("{name}: mean return {}", returns.iter().sum::<f64>() / returns.len() as f64);
    Ok(TrialResult {
        variant,
        env: spec.name.clone(),
        seed,
        trial_seed: tseed,
        returns,
        fresh_calls,
        total_budget: train.total_budget,
        training_log,
    })
}

type CellKey = (AgentVariant, String, usize);

fn manifest_line(t: &TrialResult) -> String {
    format!(
        "{},{},{},{},{},{},trials/{}.csv,{}",
        t.variant,
        t.env,
        t.seed,
        t.trial_seed,
        t.fresh_calls,
        t.total_budget,
        stem(t.variant, &t.env, t.seed),
        t.training_log.as_deref().unwrap_or("")
    )
}

fn write_manifest(dir: &Path, done: &BTreeMap<CellKey, TrialResult>) -> Result<(), HarnessError> {
    let mut s = format!("{MANIFEST_HEADER}\n");
    for t in done.values() {
        s += &manifest_line(t);
        s.push('\n');
    }
    let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
    fs::write(&tmp, s).map_err(io_err(&tmp))?;
    let path = dir.join(MANIFEST_FILE);
    fs::rename(&tmp, &path).map_err(io_err(&path))
}

/// Runs every missing (variant, env, seed) cell of `config_text` into `dir`
/// with at most `workers` threads. Cells already listed in the manifest are
/// skipped. Returns all results, sorted by cell.
pub fn run_benchmark(config_text: &str, dir: &Path, workers: usize) -> Result<Vec<TrialResult>, HarnessError> {
    let cfg = BenchConfig::parse(config_text)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let cfg_path = dir.join(CONFIG_FILE);
    if let Ok(existing) = fs::read_to_string(&cfg_path) {
        if existing != config_text {
            return Err(HarnessError::Config {
                line: None,
                message: format!("{} holds a different config; use a fresh results directory", cfg_path.display()),
            });
        }
    }
    fs::write(&cfg_path, config_text).map_err(io_err(&cfg_path))?;

    let done: BTreeMap<CellKey, TrialResult> = load_results(dir)?
        .into_iter()
        .map(|t| ((t.variant, t.env.clone(), t.seed), t))
        .collect();
    let mut todo = Vec::new();
    for &v in &cfg.variants {
        for spec in &cfg.envs {
            for s in 0..cfg.seeds {
                if !done.contains_key(&(v, spec.name.clone(), s)) {
                    todo.push((v, spec, s));
                }
            }
        }
    }
    log::info!("{} trials to run, {} already complete", todo.len(), done.len());
    let done = Mutex::new(done);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    pool.install(|| {
        todo.par_iter().try_for_each(|&(v, spec, s)| {
            let result = run_trial(&cfg, v, spec, s, dir)?;
            let mut done = done.lock().expect("manifest lock");
            done.insert((v, spec.name.clone(), s), result);
            write_manifest(dir, &done)
        })
    })?;
    let done = done.into_inner().expect("manifest lock");
    write_manifest(dir, &done)?;
    Ok(done.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_seeds_differ_by_cell() {
        let a = trial_seed(0, AgentVariant::NCpl, "g", 0);
        assert_eq!(a, trial_seed(0, AgentVariant::NCpl, "g", 0));
        assert_ne!(a, trial_seed(0, AgentVariant::NCpl, "g", 1));
        assert_ne!(a, trial_seed(0, AgentVariant::RiwC, "g", 0));
        assert_ne!(a, trial_seed(1, AgentVariant::NCpl, "g", 0));
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn log_rows() {
        let log = vec![
            IntervalRecord {
                interval: 0,
                sim_interactions: 10,
                episodes: 2,
                mean_return: 1.5,
                p_value: None,
                accepted: true,
            },
            IntervalRecord {
                interval: 1,
                sim_interactions: 20,
                episodes: 3,
                mean_return: 0.0,
                p_value: Some(0.05),
                accepted: false,
            },
        ];
        assert_eq!(log_csv(&log), format!("{LOG_HEADER}\n0,10,2,1.5,,true\n1,20,3,0,0.05,false\n"));
    }
}
