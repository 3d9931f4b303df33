//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [plan]
//! kind = "base"            # base | fixed_k | adaptive
//! f = 1                    # base: target resilience
//! modulus = 3              # output modulus C of the top layer
//! # epsilon = "1/2"        # fixed_k
//! # f_target = 16          # fixed_k
//! # phases = 2             # adaptive
//! node_cap = 64
//!
//! [[plan.extra]]           # optional layers stacked on top
//! k = 3
//! faults = 3
//!
//! [faults]
//! mode = "all"             # all | explicit | random
//! # sets = [[0], [1, 2]]   # explicit
//! # count = 10            # random: number of sets
//! # size = 1              # all: largest set size, random: set size (default F)
//!
//! [adversaries]
//! kinds = ["crash", "random", "split", "mimic", "king_attack"]
//!
//! [init]
//! mode = "random"          # random | exhaustive
//! count = 100
//!
//! [run]
//! seed = 1
//! trials = 1
//! # horizon = 3000        # default: bound + 128
//! min_window = 100
//! traces = "failures"      # none | failures | all
//!
//! [sampling]               # optional
//! samples = 64
//! gamma = 1.0
//! mode = "fresh_random"
//! gate = 0.95
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use synccount::pulling::{SamplingConfig, SamplingMode};
use synccount::schedule::{adaptive_plan, fixed_k_plan, DEFAULT_NODE_CAP};
use synccount::sim::{AdversaryKind, FaultSet, InitMode, DEFAULT_ENUMERATION_CAP};
use synccount::{base_plan, Plan};

/// A configuration problem; the binary maps it to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plan: PlanSpec,
    #[serde(default)]
    pub faults: FaultSpec,
    #[serde(default)]
    pub adversaries: AdversarySpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub run: RunSpec,
    pub sampling: Option<SamplingSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub kind: String,
    pub modulus: u64,
    pub f: Option<u64>,
    pub epsilon: Option<String>,
    pub f_target: Option<u64>,
    pub phases: Option<u32>,
    pub node_cap: Option<u64>,
    #[serde(default)]
    pub extra: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub k: u64,
    pub faults: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub mode: String,
    #[serde(default)]
    pub sets: Vec<Vec<usize>>,
    pub count: Option<usize>,
    pub size: Option<usize>,
}

impl Default for FaultSpec {
    fn default() -> Self {
        Self {
            mode: "all".into(),
            sets: Vec::new(),
            count: None,
            size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub kinds: Vec<String>,
}

impl Default for AdversarySpec {
    fn default() -> Self {
        Self {
            kinds: AdversaryKind::CATALOG.iter().map(|k| k.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSpec {
    pub mode: String,
    pub count: Option<usize>,
    pub cap: Option<u64>,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            mode: "random".into(),
            count: Some(10),
            cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub trials: usize,
    pub horizon: Option<usize>,
    #[serde(default = "default_window")]
    pub min_window: u64,
    #[serde(default = "default_traces")]
    pub traces: String,
}

fn one() -> usize {
    1
}

fn default_window() -> u64 {
    100
}

fn default_traces() -> String {
    "failures".into()
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 1,
            horizon: None,
            min_window: default_window(),
            traces: default_traces(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub samples: Option<usize>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    pub eta: Option<u64>,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default)]
    pub level_threshold: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gate")]
    pub gate: f64,
}

fn default_gamma() -> f64 {
    1.0
}

fn default_kappa() -> f64 {
    1.0
}

fn default_mode() -> String {
    "fresh_random".into()
}

fn default_gate() -> f64 {
    0.95
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracePolicy {
    None,
    Failures,
    All,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(|e| config_err(format!("{e:#}")))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialise")
    }

    pub fn build_plan(&self) -> Result<Plan> {
        self.plan.build()
    }

    pub fn adversary_kinds(&self) -> Result<Vec<AdversaryKind>> {
        if self.adversaries.kinds.is_empty() {
            bail!(config_err("no adversary kinds configured"));
        }
        self.adversaries
            .kinds
            .iter()
            .map(|k| k.parse().map_err(|e: synccount::Error| config_err(e.to_string())))
            .collect()
    }

    pub fn init_mode(&self, seed: u64) -> Result<InitMode> {
        match self.init.mode.as_str() {
            "random" => Ok(InitMode::Random {
                count: self.init.count.unwrap_or(10),
                seed,
            }),
            "exhaustive" => Ok(InitMode::Exhaustive {
                cap: self.init.cap.map_or(DEFAULT_ENUMERATION_CAP, u128::from),
            }),
            other => Err(config_err(format!("unknown init mode `{other}`"))),
        }
    }

    pub fn trace_policy(&self) -> Result<TracePolicy> {
        match self.run.traces.as_str() {
            "none" => Ok(TracePolicy::None),
            "failures" => Ok(TracePolicy::Failures),
            "all" => Ok(TracePolicy::All),
            other => Err(config_err(format!("unknown trace policy `{other}`"))),
        }
    }

    /// The sampling configuration for a system of `nodes` nodes, if any.
    pub fn sampling_config(&self, nodes: u64) -> Result<Option<SamplingConfig>> {
        let Some(s) = &self.sampling else { return Ok(None) };
        let mode: SamplingMode = s.mode.parse().map_err(|e: synccount::Error| config_err(e.to_string()))?;
        let eta = s.eta.unwrap_or(nodes);
        if !(0.0..=1.0).contains(&s.gate) {
            bail!(config_err(format!("sampling gate {} is not in [0, 1]", s.gate)));
        }
        Ok(Some(SamplingConfig {
            samples: s.samples.unwrap_or_else(|| synccount::pulling::default_samples(eta)),
            gamma: s.gamma,
            kappa: s.kappa,
            eta,
            mode,
            level_threshold: s.level_threshold,
            seed: s.seed,
        }))
    }

    /// Fault sets of the matrix for a counter with `nodes` nodes and resilience `faults`.
    pub fn fault_sets(&self, nodes: usize, faults: usize, seed: u64) -> Result<Vec<FaultSet>> {
        let spec = &self.faults;
        match spec.mode.as_str() {
            "all" => Ok(FaultSet::all_up_to(nodes, spec.size.unwrap_or(faults))),
            "explicit" => {
                if spec.sets.is_empty() {
                    bail!(config_err("explicit fault mode needs `sets`"));
                }
                spec.sets
                    .iter()
                    .map(|set| {
                        if let Some(&v) = set.iter().find(|&&v| v >= nodes) {
                            bail!(config_err(format!("fault node {v} is outside 0..{nodes}")));
                        }
                        if set.len() > faults {
                            bail!(config_err(format!(
                                "fault set of size {} exceeds resilience {faults}",
                                set.len()
                            )));
                        }
                        Ok(FaultSet::new(nodes, set.iter().copied()))
                    })
                    .collect()
            }
            "random" => {
                use rand::{Rng, SeedableRng};
                let size = spec.size.unwrap_or(faults).min(nodes);
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                Ok((0..spec.count.unwrap_or(10))
                    .map(|_| {
                        let mut ids: Vec<usize> = (0..nodes).collect();
                        for i in 0..size {
                            let j = rng.random_range(i..nodes);
                            ids.swap(i, j);
                        }
                        FaultSet::new(nodes, ids[..size].iter().copied())
                    })
                    .collect())
            }
            other => Err(config_err(format!("unknown fault mode `{other}`"))),
        }
    }
}

impl PlanSpec {
    pub fn node_cap(&self) -> u64 {
        self.node_cap.unwrap_or(DEFAULT_NODE_CAP)
    }

    pub fn build(&self) -> Result<Plan> {
        let wrap = |e: synccount::Error| config_err(e.to_string());
        let need = |v: Option<u64>, name: &str| v.ok_or_else(|| config_err(format!("plan.{name} is required")));
        // Lower layers carry a placeholder modulus; stacking re-chains them.
        let top = if self.extra.is_empty() { self.modulus } else { 2 };
        let mut plan = match self.kind.as_str() {
            "base" => base_plan(need(self.f, "f")?, top).map_err(wrap)?,
            "fixed_k" => {
                let eps = self
                    .epsilon
                    .as_deref()
                    .ok_or_else(|| config_err("plan.epsilon is required"))?
                    .parse()
                    .map_err(wrap)?;
                fixed_k_plan(eps, need(self.f_target, "f_target")?, top).map_err(wrap)?
            }
            "adaptive" => {
                let phases = self.phases.ok_or_else(|| config_err("plan.phases is required"))?;
                adaptive_plan(phases, top).map_err(wrap)?
            }
            other => bail!(config_err(format!("unknown plan kind `{other}`"))),
        };
        for (i, layer) in self.extra.iter().enumerate() {
            let modulus = if i + 1 == self.extra.len() { self.modulus } else { 2 };
            plan = plan.push_layer(layer.k, layer.faults, modulus).map_err(wrap)?;
        }
        Ok(plan)
    }
}
