use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use synccount::{base_plan, Prediction};
use synccount_cli::experiment::{RunKey, SamplingSummary};
use synccount_cli::{run_experiment, verify_bounds, ExperimentConfig, RunOptions, RunRecord, Summary};

const SMALL_BASE: &str = r#"
[plan]
kind = "base"
f = 1
modulus = 3

[faults]
mode = "all"

[init]
mode = "random"
count = 3

[run]
seed = 7
traces = "all"
"#;

fn synccount(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synccount"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_verb_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "base.toml", SMALL_BASE);
    let out = dir.path().join("out");
    let result = synccount(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(0), "{}", String::from_utf8_lossy(&result.stderr));
    let stdout = String::from_utf8(result.stdout).unwrap();
    assert!(stdout.contains("runs: 75"));
    assert!(stdout.contains("t_stab <= bound: pass"));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert_eq!(summary.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count(), 75);
    assert!(out.join("traces/run_000000.csv").exists());
    assert!(out.join("plan.txt").exists());
}

#[test]
fn summaries_are_byte_identical_across_reruns_and_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "base.toml", SMALL_BASE);
    let mut summaries = Vec::new();
    for (i, jobs) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let result = synccount(&["run", "--config", &config, "--out", out.to_str().unwrap(), "--jobs", jobs]);
        assert_eq!(result.status.code(), Some(0));
        summaries.push(fs::read(out.join("summary.txt")).unwrap());
    }
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn seed_flag_overrides_config() {
    let cfg = ExperimentConfig::parse(SMALL_BASE).unwrap();
    let a = run_experiment(&cfg, &RunOptions { seed: Some(1), ..Default::default() }).unwrap();
    let b = run_experiment(&cfg, &RunOptions { seed: Some(2), ..Default::default() }).unwrap();
    assert_ne!(a.render(), b.render());
}

#[test]
fn too_few_blocks_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_BASE.replace("[faults]", "[[plan.extra]]\nk = 2\nfaults = 1\n\n[faults]");
    let config = write(dir.path(), "bad.toml", &text);
    let result = synccount(&["run", "--config", &config]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("k < 3"));
}

#[test]
fn unknown_names_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    for (from, to) in [("mode = \"all\"", "mode = \"most\""), ("kind = \"base\"", "kind = \"tower\"")] {
        let config = write(dir.path(), "bad.toml", &SMALL_BASE.replace(from, to));
        assert_eq!(synccount(&["run", "--config", &config]).status.code(), Some(2));
    }
    let config = write(dir.path(), "adv.toml", &format!("{SMALL_BASE}\n[adversaries]\nkinds = [\"sybil\"]\n"));
    assert_eq!(synccount(&["run", "--config", &config]).status.code(), Some(2));
    assert_eq!(synccount(&["run", "--config", "/nonexistent.toml"]).status.code(), Some(2));
}

#[test]
fn predict_only_prints_adaptive_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "a.toml", "[plan]\nkind = \"adaptive\"\nphases = 4\nmodulus = 2\n");
    let result = synccount(&["run", "--predict-only", "--config", &config]);
    assert_eq!(result.status.code(), Some(0));
    let stdout = String::from_utf8(result.stdout).unwrap();
    assert!(stdout.starts_with("plan,param,layers,N,F,T,S\nadaptive,P=1,9,262144,256,"));
    assert!(stdout.contains("adaptive,P=4,121,"));
    let plan = synccount(&["plan", "--config", &config]);
    assert_eq!(plan.stdout, stdout.as_bytes());
}

#[test]
fn replay_reproduces_a_recorded_trace() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "base.toml", SMALL_BASE);
    let out = dir.path().join("out");
    assert_eq!(synccount(&["run", "--config", &config, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let params = out.join("traces/run_000042.toml");
    let replay_out = dir.path().join("replay");
    let result = synccount(&["replay", "--config", params.to_str().unwrap(), "--out", replay_out.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&result.stdout).contains("within_bound: true"));
    assert_eq!(
        fs::read(out.join("traces/run_000042.csv")).unwrap(),
        fs::read(replay_out.join("replay.csv")).unwrap()
    );
}

#[test]
fn stats_verb_reports_frequencies() {
    let result = synccount(&["stats", "--samples", "60", "--correct-fraction", "1", "--trials", "200"]);
    assert_eq!(result.status.code(), Some(0));
    let stdout = String::from_utf8(result.stdout).unwrap();
    assert_eq!(
        stdout,
        "event,M,trials,frequency\ntwo_thirds,60,200,1.000000\none_third,60,200,1.000000\n"
    );
    assert_eq!(synccount(&["stats", "--correct-fraction", "2"]).status.code(), Some(2));
}

#[test]
fn sampled_runs_respect_the_pull_budget() {
    let text = r#"
[plan]
kind = "base"
f = 1
modulus = 10

[[plan.extra]]
k = 3
faults = 1

[faults]
mode = "explicit"
sets = [[0], [5]]

[adversaries]
kinds = ["random"]

[init]
count = 2

[sampling]
samples = 64
level_threshold = 12
"#;
    let cfg = ExperimentConfig::parse(text).unwrap();
    let summary = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let sampling = summary.sampling.as_ref().unwrap();
    assert_eq!(sampling.budget, 4 * 64);
    assert!(summary.runs.iter().all(|r| r.max_pulls <= 256 && r.max_pulls >= 192));
    assert!(verify_bounds(&summary).iter().all(|a| a.pass), "{}", summary.render());
}

fn record(t_stab: Option<u64>, window: u64, index: usize) -> RunRecord {
    RunRecord {
        key: RunKey { placement: 0, adversary: 0, init: index, trial: 0 },
        faults: "{}".into(),
        adversary: "crash".into(),
        seed: 0,
        t_stab,
        verified_window: window,
        max_pulls: 0,
        leader_divergence: 0,
        threshold_divergence: 0,
    }
}

fn summary(runs: Vec<RunRecord>, sampling: Option<SamplingSummary>) -> Summary {
    let prediction: Prediction = base_plan(1, 3).unwrap().predict();
    Summary { prediction, modulus: 3, bound: 2304, min_window: 100, sampling, runs }
}

#[test]
fn bound_is_inclusive() {
    let s = summary(vec![record(Some(10), 500, 0), record(Some(2304), 128, 1)], None);
    assert!(verify_bounds(&s).iter().all(|a| a.pass));
    let s = summary(vec![record(Some(2305), 128, 0)], None);
    assert!(!verify_bounds(&s)[0].pass);
    let s = summary(vec![record(Some(3), 50, 0)], None);
    assert!(!verify_bounds(&s)[1].pass);
}

#[test]
fn sampling_gate_arithmetic() {
    let gate = SamplingSummary { mode: "fresh_random".into(), samples: 64, gate: 0.95, budget: 256 };
    let mut runs: Vec<RunRecord> = (0..96).map(|i| record(Some(5), 200, i)).collect();
    runs.extend((96..100).map(|i| record(None, 0, i)));
    assert!(verify_bounds(&summary(runs.clone(), Some(gate.clone())))[0].pass);
    runs.truncate(95);
    runs.extend((95..100).map(|i| record(None, 0, i)));
    runs[94] = record(None, 0, 94);
    assert!(!verify_bounds(&summary(runs, Some(gate)))[0].pass);
}
