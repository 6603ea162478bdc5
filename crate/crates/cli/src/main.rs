use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ncpl_core::envs::{make_env_by_name, registered_names};
use ncpl_core::harness::{generate_report, run_benchmark};
use ncpl_core::planner::{root_tree, PlanConfig, RiwPlanner, UniformPolicy};
use ncpl_core::taxonomy::{classify_branching, classify_smrf, Sidedness, SmrfVerdict};
use ncpl_core::{ExtractorConfig, FeatureExtractor, NoveltyMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "ncpl", version, about = "Width-based planning with critical-path learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the variant × env × seed matrix of a config file.
    Run {
        config: PathBuf,
        /// Results directory; an existing one is resumed.
        #[arg(short, long, default_value = "results")]
        out: PathBuf,
        #[arg(short, long, default_value_t = 1)]
        workers: usize,
    },
    /// SMRF and branching classes of environments (all registered by default).
    Classify {
        #[arg(long)]
        env: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        two_sided: bool,
    },
    /// Win tables and summaries for a results directory.
    Report { dir: PathBuf },
    /// Plan once from the initial state of an env and print the lookahead.
    DumpTree {
        env: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        budget: u64,
        #[arg(long, default_value_t = 100)]
        horizon: usize,
        #[arg(long, default_value = "classic")]
        novelty: NoveltyMode,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, workers } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let results = run_benchmark(&text, &out, workers)?;
            println!("{} trials in {}", results.len(), out.display());
        }
        Command::Classify { env, seed, two_sided } => {
            let names = if env.is_empty() {
                registered_names().into_iter().map(String::from).collect()
            } else {
                env
            };
            let sided = if two_sided { Sidedness::TwoSided } else { Sidedness::OneSided };
            println!("{},actions,high_branching", SmrfVerdict::CSV_HEADER);
            for name in names {
                let mut e = make_env_by_name(&name)?;
                let v = classify_smrf(&mut e, seed, sided)?;
                let b = classify_branching(&mut e);
                println!("{},{},{}", v.csv_row(), b.action_count, b.high_branching);
            }
        }
        Command::Report { dir } => {
            let report = generate_report(&dir)?;
            print!("{}", report.text);
        }
        Command::DumpTree {
            env,
            seed,
            budget,
            horizon,
            novelty,
        } => {
            let mut e = make_env_by_name(&env)?;
            e.reset();
            let cfg = PlanConfig {
                budget,
                horizon,
                novelty,
                ..PlanConfig::default()
            };
            let mut planner = RiwPlanner::new(cfg, FeatureExtractor::new(ExtractorConfig::default()));
            let mut tree = root_tree(&e, horizon);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let stats = planner.riw_plan(&mut tree, &mut e, &UniformPolicy, &mut rng)?;
            println!("# {env}: {} nodes, {} fresh calls, {} rollouts", tree.node_count(), stats.fresh_calls, stats.rollouts);
            print!("{}", tree.dump());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
