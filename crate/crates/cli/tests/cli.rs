use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[run]
seed = 3
seeds = 2
variants = ["N-CPL", "RIW_C"]
envs = ["gridnav-dense", "tiny"]

[learner]
total_budget = 2000
interval_budget = 700
eval_episodes = 2
hidden = [16]

[env.tiny]
kind = "gridnav"
size = 4
reward = "sparse-goal"
max_steps = 12
"#;

fn ncpl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncpl")).args(args).output().unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn run_is_byte_identical_and_reportable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bench.toml");
    fs::write(&cfg, SMALL).unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (dir, workers) in [(&a, "1"), (&b, "3")] {
        let out = ncpl(&["run", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--workers", workers]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let fa = files(&a);
    assert_eq!(fa, files(&b));
    let trials = fa.iter().filter(|(n, _)| n.starts_with("trials/")).count();
    assert_eq!(trials, 2 * 2 * 2);

    let out = ncpl(&["report", a.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Wins, all environments (2 envs)"));
    assert!(a.join("report/wins_all.csv").exists());
    assert!(a.join("report/summary.csv").exists());
}

#[test]
fn resume_skips_completed_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bench.toml");
    fs::write(&cfg, SMALL).unwrap();
    let dir = tmp.path().join("r");
    let d = dir.to_str().unwrap();
    assert!(ncpl(&["run", cfg.to_str().unwrap(), "--out", d]).status.success());
    let before = files(&dir);
    let victim = dir.join("trials/RIW_C.tiny.seed1.csv");
    fs::remove_file(&victim).unwrap();
    assert!(ncpl(&["run", cfg.to_str().unwrap(), "--out", d]).status.success());
    assert_eq!(files(&dir), before);
}

#[test]
fn bad_config_exits_nonzero_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[run]\nenvs = [\"pong\"]\n").unwrap();
    let out = ncpl(&["run", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: config error at line 2"), "{err}");

    let out = ncpl(&["run", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn classify_and_dump_tree() {
    let out = ncpl(&["classify", "--env", "gridnav-dense", "--env", "branch-k18"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("gridnav-dense,") && lines[1].ends_with(",4,false"));
    assert!(lines[2].ends_with(",18,true"));

    let out = ncpl(&["dump-tree", "gridnav-sparse", "--budget", "20"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("20 fresh calls"));
    assert!(text.lines().nth(1).unwrap().starts_with("root"));

    assert!(!ncpl(&["dump-tree", "pong"]).status.success());
}
