//! Pairwise win tables, per-cell summaries and the taxonomy join.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{io_err, BenchConfig, HarnessError, TrialResult, CONFIG_FILE, MANIFEST_FILE};
use crate::agent::AgentVariant;
use crate::envs::make_env;
use crate::learner::stats::{confidence_interval, mean, welch_t_test, StatsError};
use crate::taxonomy::{classify_branching, classify_smrf, BranchClass, SmrfVerdict};

/// Reads every trial listed in the manifest of `dir`. A missing manifest
/// yields no results; listed trials whose results file is missing are
/// skipped so that they are rerun.
pub fn load_results(dir: &Path) -> Result<Vec<TrialResult>, HarnessError> {
    let manifest = dir.join(MANIFEST_FILE);
    let text = match fs::read_to_string(&manifest) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(&manifest)(e)),
    };
    let bad = |line: usize, what: &str| HarnessError::BadResults(format!("{MANIFEST_FILE} line {line}: {what}"));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad(i + 1, "expected 8 fields"));
        }
        let variant: AgentVariant = f[0].parse().map_err(|_| bad(i + 1, "variant"))?;
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad(i + 1, "number"));
        let path = dir.join(f[6]);
        let Ok(rows) = fs::read_to_string(&path) else {
            continue;
        };
        let returns = rows
            .lines()
            .skip(1)
            .map(|r| {
                r.rsplit(',')
                    .next()
                    .and_then(|x| x.parse::<f64>().ok())
                    .ok_or_else(|| HarnessError::BadResults(format!("{}: bad row {r:?}", path.display())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if returns.is_empty() {
            continue;
        }
        out.push(TrialResult {
            variant,
            env: f[1].to_string(),
            seed: num(f[2])? as usize,
            trial_seed: num(f[3])?,
            returns,
            fresh_calls: num(f[4])?,
            total_budget: num(f[5])?,
            training_log: (!f[7].is_empty()).then(|| f[7].to_string()),
        });
    }
    Ok(out)
}

/// Per (variant, env) mean over trials of each trial's mean return.
fn cell_means(results: &[TrialResult]) -> BTreeMap<(AgentVariant, &str), f64> {
    let mut acc: BTreeMap<(AgentVariant, &str), Vec<f64>> = BTreeMap::new();
    for t in results {
        acc.entry((t.variant, t.env.as_str())).or_default().push(t.mean());
    }
    acc.into_iter().map(|(k, v)| (k, mean(&v))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WinTable {
    pub variants: Vec<AgentVariant>,
    pub envs: Vec<String>,
    /// `wins[a][b]`: envs on which variant `a` has the higher mean.
    pub wins: Vec<Vec<usize>>,
}

pub fn build_win_table(
    results: &[TrialResult],
    variants: &[AgentVariant],
    envs: &[String],
) -> Result<WinTable, HarnessError> {
    let means = cell_means(results);
    let get = |v: AgentVariant, e: &str| {
        means.get(&(v, e)).copied().ok_or_else(|| HarnessError::IncompleteMatrix {
            variant: v,
            env: e.to_string(),
        })
    };
    let n = variants.len();
    let mut wins = vec![vec![0; n]; n];
    for e in envs {
        let m = variants.iter().map(|&v| get(v, e)).collect::<Result<Vec<_>, _>>()?;
        for a in 0..n {
            for b in 0..n {
                if a != b && m[a] > m[b] {
                    wins[a][b] += 1;
                }
            }
        }
    }
    Ok(WinTable {
        variants: variants.to_vec(),
        envs: envs.to_vec(),
        wins,
    })
}

impl WinTable {
    pub fn total(&self, a: usize) -> usize {
        self.wins[a].iter().sum()
    }

    /// Share of all pairwise comparisons won by variant `a`, in percent.
    pub fn win_percent(&self, a: usize) -> f64 {
        let games = self.envs.len() * self.variants.len().saturating_sub(1);
        if games == 0 {
            0.0
        } else {
            100.0 * self.total(a) as f64 / games as f64
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("variant");
        for v in &self.variants {
            let _ = write!(s, ",{v}");
        }
        s += ",total,win_percent\n";
        for (a, v) in self.variants.iter().enumerate() {
            let _ = write!(s, "{v}");
            for b in 0..self.variants.len() {
                if a == b {
                    s += ",";
                } else {
                    let _ = write!(s, ",{}", self.wins[a][b]);
                }
            }
            let _ = writeln!(s, ",{},{:.1}", self.total(a), self.win_percent(a));
        }
        s
    }

    pub fn render(&self, title: &str) -> String {
        let mut s = format!("{title} ({} envs)\n", self.envs.len());
        if self.envs.is_empty() {
            s += "  (no environments)\n";
            return s;
        }
        let w = self.variants.iter().map(|v| v.name().len()).max().unwrap_or(4).max(5) + 2;
        let _ = write!(s, "{:w$}", "");
        for v in &self.variants {
            let _ = write!(s, "{:>w$}", v.name());
        }
        let _ = writeln!(s, "{:>w$}{:>w$}", "total", "win%");
        for (a, v) in self.variants.iter().enumerate() {
            let _ = write!(s, "{:w$}", v.name());
            for b in 0..self.variants.len() {
                if a == b {
                    let _ = write!(s, "{:>w$}", "-");
                } else {
                    let _ = write!(s, "{:>w$}", self.wins[a][b]);
                }
            }
            let _ = writeln!(s, "{:>w$}{:>w$.1}", self.total(a), self.win_percent(a));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub env: String,
    pub variant: AgentVariant,
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Highest mean, or not significantly below it (one-sided Welch p >= 0.1).
    pub best: bool,
}

/// Mean and 90% interval of the pooled evaluation returns per cell, with
/// the best-variant flags of each env.
pub fn summarize(results: &[TrialResult]) -> Vec<SummaryRow> {
    let mut pooled: BTreeMap<&str, BTreeMap<AgentVariant, Vec<f64>>> = BTreeMap::new();
    for t in results {
        pooled
            .entry(t.env.as_str())
            .or_default()
            .entry(t.variant)
            .or_default()
            .extend_from_slice(&t.returns);
    }
    let mut rows = Vec::new();
    for (env, by_variant) in pooled {
        let top = by_variant
            .iter()
            .max_by(|a, b| mean(a.1).total_cmp(&mean(b.1)))
            .map(|(v, r)| (*v, r.clone()))
            .expect("nonempty group");
        for (v, r) in by_variant {
            let best = v == top.0
                || match welch_t_test(&top.1, &r) {
                    Ok(p) => p >= 0.1,
                    Err(StatsError::DegenerateSamples) => true,
                    Err(StatsError::InsufficientSamples(..)) => mean(&r) == mean(&top.1),
                };
            let (lo, hi) = confidence_interval(&r, 0.9);
            rows.push(SummaryRow {
                env: env.to_string(),
                variant: v,
                n: r.len(),
                mean: mean(&r),
                ci_low: lo,
                ci_high: hi,
                best,
            });
        }
    }
    rows
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("env,variant,n,mean,ci90_low,ci90_high,best\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.4},{:.4},{:.4},{}",
            r.env, r.variant, r.n, r.mean, r.ci_low, r.ci_high, r.best
        );
    }
    s
}

#[derive(Debug, Clone)]
pub struct EnvClass {
    pub smrf: SmrfVerdict,
    pub branching: BranchClass,
}

pub fn classify_envs(cfg: &BenchConfig) -> Result<Vec<EnvClass>, HarnessError> {
    cfg.envs
        .iter()
        .map(|spec| {
            let mut env = make_env(spec)?;
            let smrf = classify_smrf(&mut env, cfg.master_seed, cfg.smrf_test)
                .map_err(|e| HarnessError::BadResults(format!("{}: {e}", spec.name)))?;
            let branching = classify_branching(&mut env);
            Ok(EnvClass { smrf, branching })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Report {
    pub text: String,
    pub all: WinTable,
    pub high_branching: WinTable,
    pub smrf: WinTable,
    pub summary: Vec<SummaryRow>,
    pub classes: Vec<EnvClass>,
}

/// Builds win tables over all envs, the high-branching subset and the SMRF
/// subset, plus per-cell summaries; writes them under `dir/report/`.
pub fn generate_report(dir: &Path) -> Result<Report, HarnessError> {
    let cfg_path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&cfg_path).map_err(io_err(&cfg_path))?;
    let cfg = BenchConfig::parse(&text)?;
    let results = load_results(dir)?;
    let classes = classify_envs(&cfg)?;
    let names = cfg.env_names();
    let subset = |keep: &dyn Fn(&EnvClass) -> bool| -> Vec<String> {
        names
            .iter()
            .zip(&classes)
            .filter(|(_, c)| keep(c))
            .map(|(n, _)| n.clone())
            .collect()
    };
    let all = build_win_table(&results, &cfg.variants, &names)?;
    let high_branching = build_win_table(&results, &cfg.variants, &subset(&|c| c.branching.high_branching))?;
    let smrf = build_win_table(&results, &cfg.variants, &subset(&|c| c.smrf.is_smrf))?;
    let summary = summarize(&results);

    let out = dir.join("report");
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let mut taxonomy = format!("{},actions,high_branching\n", SmrfVerdict::CSV_HEADER);
    for c in &classes {
        let _ = writeln!(
            taxonomy,
            "{},{},{}",
            c.smrf.csv_row(),
            c.branching.action_count,
            c.branching.high_branching
        );
    }
    let files = [
        ("wins_all.csv", all.to_csv()),
        ("wins_high_branching.csv", high_branching.to_csv()),
        ("wins_smrf.csv", smrf.to_csv()),
        ("summary.csv", summary_csv(&summary)),
        ("taxonomy.csv", taxonomy.clone()),
    ];
    for (name, body) in &files {
        let p = out.join(name);
        fs::write(&p, body).map_err(io_err(&p))?;
    }

    let mut report = String::new();
    report += &all.render("Wins, all environments");
    report += "\n";
    report += &high_branching.render("Wins, branching factor >= 10");
    report += "\n";
    report += &smrf.render("Wins, SMRF environments");
    report += "\nTaxonomy\n";
    report += &taxonomy;
    report += "\nSummary (mean, 90% interval, * = best)\n";
    for r in &summary {
        let _ = writeln!(
            report,
            "  {:<16} {:<8} {:>10.2} [{:.2}, {:.2}]{}",
            r.env,
            r.variant.name(),
            r.mean,
            r.ci_low,
            r.ci_high,
            if r.best { " *" } else { "" }
        );
    }
    let p = out.join("report.txt");
    fs::write(&p, &report).map_err(io_err(&p))?;
    Ok(Report {
        text: report,
        all,
        high_branching,
        smrf,
        summary,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(v: AgentVariant, env: &str, returns: Vec<f64>) -> TrialResult {
        TrialResult {
            variant: v,
            env: env.into(),
            seed: 0,
            trial_seed: 0,
            returns,
            fresh_calls: 0,
            total_budget: 0,
            training_log: None,
        }
    }

    #[test]
    fn win_counts() {
        use AgentVariant::{NCpl, RiwC};
        let results = vec![
            trial(NCpl, "a", vec![2.0]),
            trial(RiwC, "a", vec![1.0]),
            trial(NCpl, "b", vec![2.0]),
            trial(RiwC, "b", vec![1.0]),
            trial(NCpl, "c", vec![5.0]),
            trial(RiwC, "c", vec![1.0]),
            trial(NCpl, "d", vec![0.0]),
            trial(RiwC, "d", vec![1.0]),
        ];
        let envs: Vec<String> = ["a", "b", "c", "d"].map(String::from).to_vec();
        let t = build_win_table(&results, &[NCpl, RiwC], &envs).unwrap();
        assert_eq!(t.wins, vec![vec![0, 3], vec![1, 0]]);
        assert_eq!(t.win_percent(0), 75.0);
        assert!(t.to_csv().starts_with("variant,N-CPL,RIW_C,total,win_percent\nN-CPL,,3,3,75.0\n"));
        assert!(matches!(
            build_win_table(&results, &[NCpl, AgentVariant::Cpl], &envs),
            Err(HarnessError::IncompleteMatrix { .. })
        ));
    }

    #[test]
    fn summary_flags() {
        use AgentVariant::{Cpl, NCpl, RiwC};
        let results = vec![
            trial(NCpl, "a", vec![10.0, 11.0, 12.0, 13.0]),
            trial(RiwC, "a", vec![0.0, 1.0, 2.0, 3.0]),
            trial(Cpl, "a", vec![9.0, 12.0, 10.0, 14.0]),
            trial(RiwC, "b", vec![7.0; 10]),
        ];
        let rows = summarize(&results);
        let best: Vec<_> = rows.iter().filter(|r| r.env == "a" && r.best).map(|r| r.variant).collect();
        assert_eq!(best, vec![NCpl, Cpl]);
        let b = rows.iter().find(|r| r.env == "b").unwrap();
        assert_eq!((b.ci_low, b.ci_high), (7.0, 7.0));
        assert!(b.best);
    }
}
