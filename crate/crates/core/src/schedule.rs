//! Recursion schedules: which boosting layers to stack, with exact predicted
//! node count, resilience, stabilisation bound and state width.
//!
//! Every plan starts from trivial one-node counters. Layer moduli are chained
//! bottom-up: the inner modulus of each layer is exactly `3(F+2)(2m)^k` and
//! the layer below outputs precisely that value, so only the topmost layer
//! counts modulo the requested `C`. Predictions use arbitrary-precision
//! integers because the adaptive schedules grow far beyond machine words.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::boost::{boost, validate_boost_params};
use crate::counter::{trivial_counter, CounterAlgorithm};
use crate::error::{Error, Result};
use crate::pulling::{pulled_boost, SamplingConfig};

/// Default cap on the node count of realized plans.
pub const DEFAULT_NODE_CAP: u64 = 64;

/// `⌈log₂ x⌉` for arbitrary-precision `x ≥ 1`.
pub fn ceil_log2_big(x: &BigUint) -> u64 {
    if *x <= BigUint::one() {
        0
    } else {
        (x - 1u32).bits()
    }
}

fn big(x: u64) -> BigUint {
    BigUint::from(x)
}

fn to_u64(x: &BigUint, what: &str) -> Result<u64> {
    x.to_u64()
        .ok_or_else(|| Error::Composition(format!("{what} = {x} does not fit in 64 bits")))
}

/// One application of the boosting step inside a plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanLayer {
    pub k: u64,
    pub m: u64,
    /// Inner counter node count and resilience.
    pub n: BigUint,
    pub f: BigUint,
    /// `N` and `F` after this layer.
    pub nodes: BigUint,
    pub faults: BigUint,
    /// Output modulus `C` of this layer.
    pub modulus: BigUint,
    /// Inner modulus `c = 3(F+2)(2m)^k`.
    pub inner_modulus: BigUint,
    /// Phase index for adaptive schedules.
    pub phase: Option<u32>,
}

impl PlanLayer {
    /// Stabilisation overhead `3(F+2)(2m)^k` contributed by this layer.
    pub fn overhead(&self) -> &BigUint {
        &self.inner_modulus
    }

    /// State bits this layer adds: `⌈log₂(C+1)⌉ + 1`.
    pub fn added_bits(&self) -> u64 {
        ceil_log2_big(&(&self.modulus + 1u32)) + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub nodes: BigUint,
    pub faults: BigUint,
    pub t_bound: BigUint,
    pub state_bits: u64,
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N={} F={} T={} S={}",
            self.nodes, self.faults, self.t_bound, self.state_bits
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub layers: Vec<PlanLayer>,
    /// Modulus of the trivial counters at the bottom.
    pub base_modulus: BigUint,
    /// Where integrality forced a choice (e.g. rounding `h` up).
    pub notes: Vec<String>,
}

/// Per-layer `(k, F, phase)` description used to assemble plans.
type LayerSpec = (u64, BigUint, Option<u32>);

impl Plan {
    fn from_specs(specs: &[LayerSpec], modulus: &BigUint, notes: Vec<String>) -> Result<Plan> {
        if specs.is_empty() {
            return Err(Error::Config("a plan needs at least one layer".into()));
        }
        if *modulus <= BigUint::one() {
            return Err(Error::OutputModulus(modulus.to_u64().unwrap_or(0)));
        }
        let mut layers: Vec<PlanLayer> = Vec::with_capacity(specs.len());
        let (mut n, mut f) = (BigUint::one(), BigUint::zero());
        for (k, faults, phase) in specs {
            let k = *k;
            if k < 3 {
                return Err(Error::TooFewBlocks(k as usize));
            }
            let m = k.div_ceil(2);
            let limit = (&f + 1u32) * m;
            if *faults >= limit {
                return Err(Error::ResilienceTooHigh {
                    target: faults.to_u64().unwrap_or(u64::MAX),
                    limit: limit.to_u64().unwrap_or(u64::MAX),
                });
            }
            let nodes = &n * k;
            if faults * 3u32 >= nodes {
                return Err(Error::PhaseKingResilience {
                    target: faults.to_u64().unwrap_or(u64::MAX),
                    nodes: nodes.to_u64().unwrap_or(u64::MAX),
                });
            }
            let inner_modulus = (faults + 2u32) * 3u32 * big(2 * m).pow(k as u32);
            layers.push(PlanLayer {
                k,
                m,
                n: n.clone(),
                f: f.clone(),
                nodes: nodes.clone(),
                faults: faults.clone(),
                modulus: BigUint::zero(),
                inner_modulus,
                phase: *phase,
            });
            n = nodes;
            f = faults.clone();
        }
        // Chain moduli: each layer outputs what the layer above consumes.
        for i in 0..layers.len() {
            layers[i].modulus = match layers.get(i + 1) {
                Some(above) => above.inner_modulus.clone(),
                None => modulus.clone(),
            };
        }
        let base_modulus = layers[0].inner_modulus.clone();
        Ok(Plan {
            layers,
            base_modulus,
            notes,
        })
    }

    fn specs(&self) -> Vec<LayerSpec> {
        self.layers
            .iter()
            .map(|l| (l.k, l.faults.clone(), l.phase))
            .collect()
    }

    /// Output modulus of the whole plan.
    pub fn modulus(&self) -> &BigUint {
        &self.layers.last().expect("plans are nonempty").modulus
    }

    /// Stacks one more layer with `k` blocks and resilience `faults` on top,
    /// now counting modulo `modulus`; the previous top is re-chained to
    /// output the new layer's inner modulus.
    pub fn push_layer(&self, k: u64, faults: u64, modulus: u64) -> Result<Plan> {
        let mut specs = self.specs();
        specs.push((k, big(faults), None));
        Plan::from_specs(&specs, &big(modulus), self.notes.clone())
    }

    pub fn predict(&self) -> Prediction {
        let top = self.layers.last().expect("plans are nonempty");
        let t_bound = self
            .layers
            .iter()
            .fold(BigUint::zero(), |acc, l| acc + l.overhead());
        let state_bits = ceil_log2_big(&self.base_modulus)
            + self.layers.iter().map(PlanLayer::added_bits).sum::<u64>();
        Prediction {
            nodes: top.nodes.clone(),
            faults: top.faults.clone(),
            t_bound,
            state_bits,
        }
    }

    /// Sum of layer overheads per phase, indexed by phase number (adaptive plans).
    pub fn phase_times(&self) -> Vec<(u32, BigUint)> {
        let mut out: Vec<(u32, BigUint)> = Vec::new();
        for l in &self.layers {
            let Some(p) = l.phase else { continue };
            match out.last_mut() {
                Some((q, t)) if *q == p => *t += l.overhead(),
                _ => out.push((p, l.overhead().clone())),
            }
        }
        out
    }

    /// One line per layer: `k, N, F, C, c, layer T, cumulative S`.
    pub fn report(&self) -> String {
        let mut out = String::from("layer,k,N,F,C,c,T,S\n");
        let mut bits = ceil_log2_big(&self.base_modulus);
        for (i, l) in self.layers.iter().enumerate() {
            bits += l.added_bits();
            let _ = writeln!(
                out,
                "{i},{},{},{},{},{},{},{bits}",
                l.k,
                l.nodes,
                l.faults,
                l.modulus,
                l.inner_modulus,
                l.overhead()
            );
        }
        out
    }
}

/// A single layer over trivial counters: `k = 3f+1` one-node blocks.
pub fn base_plan(f_target: u64, modulus: u64) -> Result<Plan> {
    if f_target == 0 {
        return Err(Error::Config("base plans need f >= 1".into()));
    }
    Plan::from_specs(&[(3 * f_target + 1, big(f_target), None)], &big(modulus), Vec::new())
}

/// A rational `ε ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Epsilon {
    pub num: u32,
    pub den: u32,
}

impl Epsilon {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 || num >= den {
            return Err(Error::Config(format!("epsilon {num}/{den} is not in (0, 1)")));
        }
        Ok(Self { num, den })
    }

    /// Smallest `h ≥ 2` with `ε ≥ 1/log₂ h`, i.e. `h^num ≥ 2^den`.
    pub fn min_half_blocks(self) -> u64 {
        let target = BigUint::one() << self.den as usize;
        let mut h = 2u64;
        while big(h).pow(self.num) < target {
            h += 1;
        }
        h
    }
}

impl FromStr for Epsilon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse epsilon `{s}`; expected p/q"));
        let (num, den) = s.split_once('/').ok_or_else(bad)?;
        Epsilon::new(
            num.trim().parse().map_err(|_| bad())?,
            den.trim().parse().map_err(|_| bad())?,
        )
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Base `(n, f) = (4, 1)` followed by layers of constant `k = 2h`, each
/// multiplying the resilience by `h`, until `F ≥ f_target`.
pub fn fixed_k_plan(eps: Epsilon, f_target: u64, modulus: u64) -> Result<Plan> {
    let h = eps.min_half_blocks();
    let k = 2 * h;
    let mut specs: Vec<LayerSpec> = vec![(4, big(1), None)];
    let mut f = big(1);
    let target = big(f_target);
    while f < target {
        f *= h;
        specs.push((k, f.clone(), None));
    }
    let mut notes = Vec::new();
    if f != target && f_target > 1 {
        notes.push(format!(
            "resilience rounded up from {f_target} to {f} (powers of h = {h})"
        ));
    }
    Plan::from_specs(&specs, &big(modulus), notes)
}

/// `P` phases after the `(4, 1)` base: phase `p` uses `k_p = 4·2^{P−p}`
/// blocks for `R_p = 2k_p` layers, each multiplying the resilience by `k_p/2`.
pub fn adaptive_plan(phases: u32, modulus: u64) -> Result<Plan> {
    if phases == 0 {
        return Err(Error::Config("adaptive plans need P >= 1".into()));
    }
    let mut specs: Vec<LayerSpec> = vec![(4, big(1), None)];
    let mut f = big(1);
    for p in 1..=phases {
        let k = 4u64 << (phases - p);
        for _ in 0..2 * k {
            f *= k / 2;
            specs.push((k, f.clone(), Some(p)));
        }
    }
    Plan::from_specs(&specs, &big(modulus), Vec::new())
}

/// `(k_p, R_p)` for each phase of an adaptive plan.
pub fn adaptive_phases(phases: u32) -> Vec<(u64, u64)> {
    (1..=phases)
        .map(|p| {
            let k = 4u64 << (phases - p);
            (k, 2 * k)
        })
        .collect()
}

pub fn predict(plan: &Plan) -> Prediction {
    plan.predict()
}

/// Folds the plan's layers into a counter, bottom-up.
pub fn realize(plan: &Plan) -> Result<CounterAlgorithm> {
    realize_with(plan, DEFAULT_NODE_CAP, None)
}

/// Like [`realize`], with a node cap and optional sampling on layers with
/// at least `level_threshold` nodes.
pub fn realize_with(
    plan: &Plan,
    node_cap: u64,
    sampling: Option<&SamplingConfig>,
) -> Result<CounterAlgorithm> {
    let prediction = plan.predict();
    let nodes = to_u64(&prediction.nodes, "N")?;
    if nodes > node_cap {
        return Err(Error::Composition(format!(
            "plan has {nodes} nodes, above the cap of {node_cap}"
        )));
    }
    let mut alg = trivial_counter(to_u64(&plan.base_modulus, "base modulus")?)?;
    for layer in &plan.layers {
        let params = validate_boost_params(
            to_u64(&layer.n, "n")?,
            to_u64(&layer.f, "f")?,
            layer.k,
            to_u64(&layer.faults, "F")?,
            to_u64(&layer.modulus, "C")?,
            to_u64(&layer.inner_modulus, "c")?,
        )?;
        alg = match sampling {
            Some(cfg) if params.nodes >= cfg.level_threshold => pulled_boost(&alg, params, cfg)?,
            _ => boost(&alg, params)?,
        };
    }
    if big(alg.stabilization_bound()) != prediction.t_bound
        || u64::from(alg.state_bits()) != prediction.state_bits
    {
        return Err(Error::Composition(format!(
            "realized counter (T={}, S={}) disagrees with prediction {prediction}",
            alg.stabilization_bound(),
            alg.state_bits()
        )));
    }
    Ok(alg)
}
