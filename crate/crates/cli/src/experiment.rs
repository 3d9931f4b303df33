use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use synccount::schedule::{adaptive_plan, realize_with};
use synccount::seed::split_seed;
use synccount::sim::{detect_stabilization_with, enumerate_initial_states, run, Adversary, AdversaryKind, FaultSet, Trace};
use synccount::{CounterAlgorithm, Plan, Prediction, State};

use crate::config::{ConfigError, ExperimentConfig, PlanSpec, TracePolicy};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RunKey {
    pub placement: usize,
    pub adversary: usize,
    pub init: usize,
    pub trial: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub key: RunKey,
    pub faults: String,
    pub adversary: String,
    pub seed: u64,
    pub t_stab: Option<u64>,
    pub verified_window: u64,
    pub max_pulls: u64,
    pub leader_divergence: u64,
    pub threshold_divergence: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSummary {
    pub mode: String,
    pub samples: usize,
    pub gate: f64,
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub prediction: Prediction,
    pub modulus: u64,
    pub bound: u64,
    pub min_window: u64,
    pub sampling: Option<SamplingSummary>,
    pub runs: Vec<RunRecord>,
}

impl RunRecord {
    pub fn within_bound(&self, bound: u64, min_window: u64) -> bool {
        self.t_stab.is_some_and(|t| t <= bound) && self.verified_window >= min_window
    }
}

impl Summary {
    pub fn stabilized(&self) -> usize {
        self.runs
            .iter()
            .filter(|r| r.within_bound(self.bound, self.min_window))
            .count()
    }

    pub fn max_t_stab(&self) -> Option<u64> {
        self.runs.iter().filter_map(|r| r.t_stab).max()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "plan: {}", self.prediction);
        let _ = writeln!(out, "modulus: {}", self.modulus);
        let _ = writeln!(out, "bound: {}", self.bound);
        let _ = writeln!(out, "min_window: {}", self.min_window);
        let _ = writeln!(out, "runs: {}", self.runs.len());
        let _ = writeln!(out, "stabilized_within_bound: {}", self.stabilized());
        match self.max_t_stab() {
            Some(t) => {
                let _ = writeln!(out, "max_t_stab: {t}");
            }
            None => out.push_str("max_t_stab: none\n"),
        }
        let all_within = self.stabilized() == self.runs.len();
        let _ = writeln!(out, "within_bound: {all_within}");
        if let Some(s) = &self.sampling {
            let max_pulls = self.runs.iter().map(|r| r.max_pulls).max().unwrap_or(0);
            let _ = writeln!(
                out,
                "sampling: mode={} M={} gate={} budget={} max_pulls={max_pulls}",
                s.mode, s.samples, s.gate, s.budget
            );
        }
        out.push_str("placement,adversary,init,trial,faults,kind,seed,t_stab,verified_window,max_pulls,leader_divergence,threshold_divergence\n");
        for r in &self.runs {
            let t = r.t_stab.map_or("none".to_string(), |t| t.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},\"{}\",{},{},{t},{},{},{},{}",
                r.key.placement,
                r.key.adversary,
                r.key.init,
                r.key.trial,
                r.faults,
                r.adversary,
                r.seed,
                r.verified_window,
                r.max_pulls,
                r.leader_divergence,
                r.threshold_divergence
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assertion {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Bound checks on a finished matrix. Deterministic runs must all stabilise
/// within the bound and keep counting for the minimum window; sampled runs
/// must reach the stabilisation gate and stay within the pull budget.
pub fn verify_bounds(summary: &Summary) -> Vec<Assertion> {
    let total = summary.runs.len();
    let good = summary.stabilized();
    match &summary.sampling {
        None => {
            let late = summary
                .runs
                .iter()
                .filter(|r| !r.t_stab.is_some_and(|t| t <= summary.bound))
                .count();
            let short = summary
                .runs
                .iter()
                .filter(|r| r.verified_window < summary.min_window)
                .count();
            vec![
                Assertion {
                    name: "t_stab <= bound",
                    pass: late == 0,
                    detail: format!("{} of {total} runs within {}", total - late, summary.bound),
                },
                Assertion {
                    name: "counting after stabilisation",
                    pass: short == 0,
                    detail: format!("{short} runs counted for fewer than {} rounds", summary.min_window),
                },
            ]
        }
        Some(s) => {
            let rate = if total == 0 { 1.0 } else { good as f64 / total as f64 };
            let max_pulls = summary.runs.iter().map(|r| r.max_pulls).max().unwrap_or(0);
            vec![
                Assertion {
                    name: "stabilisation rate >= gate",
                    pass: rate >= s.gate,
                    detail: format!("{good} of {total} runs ({:.2}%), gate {:.2}%", 100.0 * rate, 100.0 * s.gate),
                },
                Assertion {
                    name: "pulls <= budget",
                    pass: max_pulls <= s.budget,
                    detail: format!("max {max_pulls}, budget {}", s.budget),
                },
            ]
        }
    }
}

/// Parameters that reproduce one run exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayParams {
    pub faults: Vec<usize>,
    pub adversary: String,
    /// Decimal run seed; kept as text because TOML integers are signed.
    pub seed: String,
    pub horizon: usize,
    pub init: Vec<State>,
    pub experiment: ExperimentConfig,
}

/// `(plan, param, layers, N, F, T, S)` rows; adaptive plans list every
/// phase count up to the configured one.
pub fn prediction_table(spec: &PlanSpec) -> Result<String> {
    let mut out = String::from("plan,param,layers,N,F,T,S\n");
    let mut row = |name: &str, param: String, plan: &Plan| {
        let p = plan.predict();
        let _ = writeln!(
            out,
            "{name},{param},{},{},{},{},{}",
            plan.layers.len(),
            p.nodes,
            p.faults,
            p.t_bound,
            p.state_bits
        );
    };
    match spec.kind.as_str() {
        "adaptive" if spec.extra.is_empty() => {
            let phases = spec.phases.unwrap_or(1);
            for p in 1..=phases {
                let plan = adaptive_plan(p, spec.modulus).map_err(|e| ConfigError(e.to_string()))?;
                row("adaptive", format!("P={p}"), &plan);
            }
        }
        kind => {
            let plan = spec.build()?;
            let param = match kind {
                "base" => format!("f={}", spec.f.unwrap_or(0)),
                "fixed_k" => format!("eps={}", spec.epsilon.clone().unwrap_or_default()),
                _ => format!("P={}", spec.phases.unwrap_or(0)),
            };
            row(kind, param, &plan);
        }
    }
    Ok(out)
}

fn realize_config(cfg: &ExperimentConfig, plan: &Plan) -> Result<CounterAlgorithm> {
    let nodes = u64::try_from(&plan.predict().nodes).unwrap_or(u64::MAX);
    let sampling = cfg.sampling_config(nodes)?;
    realize_with(plan, cfg.plan.node_cap(), sampling.as_ref()).map_err(|e| ConfigError(e.to_string()).into())
}

fn sampling_budget(alg: &CounterAlgorithm, samples: usize) -> u64 {
    let mut total = 0;
    let mut layer = alg.top_layer();
    while let Some(l) = layer {
        if l.is_sampled() {
            total += (l.params().k + 1) * samples as u64;
        }
        layer = l.inner().top_layer();
    }
    total
}

struct Cell {
    key: RunKey,
    faults: FaultSet,
    kind: AdversaryKind,
    init: Vec<State>,
    seed: u64,
    index: usize,
}

/// Runs the configured matrix and writes artifacts under the output
/// directory, if one is set.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Summary> {
    let master = opts.seed.unwrap_or(cfg.run.seed);
    let plan = cfg.build_plan()?;
    let alg = realize_config(cfg, &plan)?;
    let kinds = cfg.adversary_kinds()?;
    let placements = cfg.fault_sets(alg.nodes(), alg.resilience(), split_seed(master, 0))?;
    let policy = cfg.trace_policy()?;
    let horizon = cfg
        .run
        .horizon
        .unwrap_or(alg.stabilization_bound() as usize + 128);
    let trials = cfg.run.trials.max(1);

    let mut cells = Vec::new();
    for (p, faults) in placements.iter().enumerate() {
        for (a, &kind) in kinds.iter().enumerate() {
            let cell_seed = split_seed(master, 1 + (p * kinds.len() + a) as u64);
            let inits = enumerate_initial_states(&alg, cfg.init_mode(cell_seed)?)
                .map_err(|e| ConfigError(e.to_string()))?;
            for (i, init) in inits.enumerate() {
                for t in 0..trials {
                    let index = cells.len();
                    cells.push(Cell {
                        key: RunKey { placement: p, adversary: a, init: i, trial: t },
                        faults: faults.clone(),
                        kind,
                        init: init.clone(),
                        seed: split_seed(cell_seed, (i * trials + t) as u64),
                        index,
                    });
                }
            }
        }
    }

    let out_dir = opts.out.clone().or_else(|| cfg.output.dir.clone());
    if let Some(dir) = &out_dir {
        fs::create_dir_all(dir.join("traces"))
            .with_context(|| format!("creating {}", dir.display()))?;
    }
    let modulus = alg.modulus();
    let min_window = cfg.run.min_window;
    let bound = alg.stabilization_bound();

    let execute = |cell: &Cell| -> Result<RunRecord> {
        let mut adversary = Adversary::new(cell.kind, cell.seed);
        let trace = run(&alg, &cell.faults, &mut adversary, &cell.init, horizon, cell.seed)?;
        let report = detect_stabilization_with(&trace, modulus, min_window);
        let record = RunRecord {
            key: cell.key,
            faults: cell.faults.to_string(),
            adversary: cell.kind.to_string(),
            seed: cell.seed,
            t_stab: report.t_stab,
            verified_window: report.verified_window,
            max_pulls: trace.max_pulls(),
            leader_divergence: trace.leader_divergence,
            threshold_divergence: trace.threshold_divergence,
        };
        let keep = match policy {
            TracePolicy::None => false,
            TracePolicy::Failures => !record.within_bound(bound, min_window),
            TracePolicy::All => true,
        };
        if let (true, Some(dir)) = (keep, &out_dir) {
            let params = ReplayParams {
                faults: cell.faults.members().collect(),
                adversary: cell.kind.to_string(),
                seed: cell.seed.to_string(),
                horizon,
                init: cell.init.clone(),
                experiment: cfg.clone(),
            };
            write_run_artifacts(dir, cell.index, &alg, &trace, &params)?;
        }
        Ok(record)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()?;
    let mut runs = pool.install(|| cells.par_iter().map(execute).collect::<Result<Vec<_>>>())?;
    runs.sort_by_key(|r| r.key);

    let sampling = cfg.sampling.as_ref().map(|s| {
        let samples = cfg
            .sampling_config(alg.nodes() as u64)
            .ok()
            .flatten()
            .map_or(0, |c| c.samples);
        SamplingSummary {
            mode: s.mode.clone(),
            samples,
            gate: s.gate,
            budget: sampling_budget(&alg, samples),
        }
    });
    let summary = Summary {
        prediction: plan.predict(),
        modulus,
        bound,
        min_window,
        sampling,
        runs,
    };
    if let Some(dir) = &out_dir {
        fs::write(dir.join("summary.txt"), summary.render())?;
        fs::write(dir.join("plan.txt"), plan.report())?;
        fs::write(dir.join("predictions.csv"), prediction_table(&cfg.plan)?)?;
    }
    Ok(summary)
}

fn write_run_artifacts(
    dir: &Path,
    index: usize,
    alg: &CounterAlgorithm,
    trace: &Trace,
    params: &ReplayParams,
) -> Result<()> {
    let traces = dir.join("traces");
    let mut csv = Vec::new();
    trace.write_csv(alg, &mut csv)?;
    fs::write(traces.join(format!("run_{index:06}.csv")), csv)?;
    if alg.top_layer().is_some_and(|l| l.is_sampled()) {
        let mut pulls = Vec::new();
        trace.write_pulls_csv(&mut pulls)?;
        fs::write(traces.join(format!("run_{index:06}_pulls.csv")), pulls)?;
    }
    let text = toml::to_string(params).context("serialising replay parameters")?;
    fs::write(traces.join(format!("run_{index:06}.toml")), text)?;
    Ok(())
}

/// Re-executes one run from its recorded parameters.
pub fn replay(params: &ReplayParams) -> Result<(Trace, CounterAlgorithm)> {
    let cfg = &params.experiment;
    let plan = cfg.build_plan()?;
    let alg = realize_config(cfg, &plan)?;
    let faults = FaultSet::new(alg.nodes(), params.faults.iter().copied());
    let kind: AdversaryKind = params
        .adversary
        .parse()
        .map_err(|e: synccount::Error| ConfigError(e.to_string()))?;
    let seed: u64 = params
        .seed
        .parse()
        .map_err(|_| ConfigError(format!("invalid seed `{}`", params.seed)))?;
    let mut adversary = Adversary::new(kind, seed);
    let trace = run(&alg, &faults, &mut adversary, &params.init, params.horizon, seed)?;
    Ok((trace, alg))
}

pub fn load_replay(path: &Path) -> Result<ReplayParams> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| ConfigError(format!("invalid replay file: {e}")).into())
}
