//! Pulling-model variant of the boosted counter.
//!
//! Instead of reading every node each round, a node pulls `M` states from
//! each block (with repetition) to evaluate the leader vote and `M` states
//! from the whole network for the phase-king thresholds, which become `⅔M`
//! and `⅓M`. In the fixed pseudo-random mode the pools are drawn once from
//! the configured seed and reused every round.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;

use crate::boost::{compose, leader_view_from_readings, majority_or_default, BoostLayer, BoostParams, Reading};
use crate::counter::{CounterAlgorithm, State, StepContext};
use crate::error::{Error, Result};
use crate::phase_king::{self, PhaseKingRegisters, Quorum, Register, TallyVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingMode {
    /// Read every node; identical to the deterministic construction.
    Broadcast,
    /// Fresh pools every round from the node's random stream.
    FreshRandom,
    /// Pools drawn once from the configuration seed.
    FixedPseudoRandom,
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "broadcast" => Ok(Self::Broadcast),
            "fresh_random" | "fresh-random" => Ok(Self::FreshRandom),
            "fixed_pseudo_random" | "fixed-pseudo-random" => Ok(Self::FixedPseudoRandom),
            other => Err(Error::Config(format!("unknown sampling mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    /// Samples per pool, `M`.
    pub samples: usize,
    /// Slack in the guard `F < N/(3+γ)`.
    pub gamma: f64,
    /// Error exponent; reported only.
    pub kappa: f64,
    /// System-wide node count `η`.
    pub eta: u64,
    pub mode: SamplingMode,
    /// Layers with fewer nodes than this read everyone instead of sampling.
    pub level_threshold: u64,
    pub seed: u64,
}

impl SamplingConfig {
    /// Defaults for a system of `eta` nodes: `M = max(16, ⌈8 ln η⌉)`.
    pub fn for_system(eta: u64) -> Self {
        Self {
            samples: default_samples(eta),
            gamma: 1.0,
            kappa: 1.0,
            eta,
            mode: SamplingMode::FreshRandom,
            level_threshold: 0,
            seed: 0,
        }
    }
}

pub fn default_samples(eta: u64) -> usize {
    let scaled = (8.0 * (eta.max(1) as f64).ln()).ceil() as usize;
    scaled.max(16)
}

/// `δ = 1 − ⅔·(3+γ)/(2+γ)`, the relative slack behind the `⅔M` test.
pub fn chernoff_delta(gamma: f64) -> f64 {
    1.0 - (2.0 / 3.0) * (3.0 + gamma) / (2.0 + gamma)
}

/// `M` independent uniform draws, with repetition, from `block`.
pub fn sample_pool<R: Rng + ?Sized>(rng: &mut R, block: Range<usize>, samples: usize) -> Vec<usize> {
    let mut pool = Vec::with_capacity(samples);
    extend_pool(rng, block, samples, &mut pool);
    pool
}

fn extend_pool<R: Rng + ?Sized>(rng: &mut R, block: Range<usize>, samples: usize, out: &mut Vec<usize>) {
    assert!(!block.is_empty(), "cannot sample from an empty block");
    out.extend((0..samples).map(|_| rng.random_range(block.clone())));
}

/// Majority over a sample multiset, defaulting to `0`.
pub fn sampled_majority(samples: &[u64]) -> u64 {
    majority_or_default(samples)
}

/// Tally of sampled `a` values together with the `⅔M` / `⅓M` quorum.
pub fn sampled_phase_tally(samples: &[Register]) -> (TallyVector, Quorum) {
    (
        TallyVector::from_values(samples.iter().copied()),
        Quorum::Sampled {
            samples: samples.len() as u64,
        },
    )
}

/// Sampling state attached to a boost layer.
#[derive(Debug)]
pub(crate) struct Sampler {
    pub(crate) active: bool,
    samples: usize,
    /// Per node: `k` block pools followed by the network pool.
    fixed_pools: Option<Vec<Vec<usize>>>,
}

impl Sampler {
    fn draw_pools<R: Rng + ?Sized>(rng: &mut R, params: &BoostParams, samples: usize, out: &mut Vec<usize>) {
        let n = params.n as usize;
        for block in 0..params.k as usize {
            extend_pool(rng, block * n..(block + 1) * n, samples, out);
        }
    }

    pub(crate) fn step(
        &self,
        layer: &BoostLayer,
        node: usize,
        received: &[State],
        own: PhaseKingRegisters,
        ctx: &mut StepContext,
    ) -> PhaseKingRegisters {
        let params = layer.params();
        let (k, n, m) = (params.k as usize, params.n as usize, self.samples);
        let nodes = params.nodes as usize;
        let modulus = params.modulus;

        let mut fresh = std::mem::take(&mut ctx.pool_buf);
        let pools: &[usize] = match &self.fixed_pools {
            Some(pools) => &pools[node],
            None => {
                fresh.clear();
                Self::draw_pools(&mut ctx.rng, params, m, &mut fresh);
                &fresh
            }
        };

        let readings: SmallVec<[Reading; 64]> = received
            .iter()
            .enumerate()
            .map(|(v, &w)| layer.reading(v, w))
            .collect();

        let mut buf: SmallVec<[u64; 128]> = SmallVec::new();
        let votes: SmallVec<[u64; 8]> = (0..k)
            .map(|i| {
                buf.clear();
                buf.extend(pools[i * m..(i + 1) * m].iter().map(|&u| readings[u].0));
                sampled_majority(&buf)
            })
            .collect();
        let leader = majority_or_default(&votes) as usize;
        // The round counter reuses the leader block's pool.
        buf.clear();
        buf.extend(pools[leader * m..(leader + 1) * m].iter().map(|&u| readings[u].1));
        let round = sampled_majority(&buf);
        ctx.pulls += (k * m) as u64;

        let exact = leader_view_from_readings(&readings, k, n);
        if exact.leader != leader as u64 || exact.round != round {
            ctx.leader_divergence += 1;
        }

        let king = (round / 3) as usize;
        let offset = (round % 3) as u8;
        let next = if offset == 2 {
            if phase_king::needs_king(own) {
                ctx.pulls += 1;
            }
            phase_king::exec_i2(own, layer.registers(received[king]).a, modulus)
        } else {
            let network: SmallVec<[usize; 128]> = match &self.fixed_pools {
                Some(pools) => pools[node][k * m..(k + 1) * m].iter().copied().collect(),
                None => (0..m).map(|_| ctx.rng.random_range(0..nodes)).collect(),
            };
            ctx.pulls += m as u64;
            let sampled: SmallVec<[Register; 128]> =
                network.iter().map(|&u| layer.registers(received[u]).a).collect();
            let (tally, quorum) = sampled_phase_tally(&sampled);
            let exact_tally = TallyVector::from_values(received.iter().map(|&w| layer.registers(w).a));
            let exact_quorum = layer.exact_quorum();
            let diverged = quorum.agrees(tally.count(own.a)) != exact_quorum.agrees(exact_tally.count(own.a))
                || (offset == 1 && tally.min_supported(quorum) != exact_tally.min_supported(exact_quorum));
            if diverged {
                ctx.threshold_divergence += 1;
            }
            phase_king::exec(offset, own, &tally, Register::Infinity, quorum, modulus)
        };
        ctx.pool_buf = fresh;
        next
    }
}

/// The boosted counter with sampled leader votes and phase-king tallies.
///
/// Stabilisation bound and state width are those of [`crate::boost::boost`].
pub fn pulled_boost(
    inner: &CounterAlgorithm,
    params: BoostParams,
    cfg: &SamplingConfig,
) -> Result<CounterAlgorithm> {
    if cfg.samples == 0 {
        return Err(Error::Config("sample count M must be at least 1".into()));
    }
    if !(cfg.gamma > 0.0) {
        return Err(Error::Config("gamma must be positive".into()));
    }
    let limit = params.nodes as f64 / (3.0 + cfg.gamma);
    if params.faults as f64 >= limit {
        return Err(Error::SamplingGuard {
            faults: params.faults,
            limit,
        });
    }
    if params.nodes > cfg.eta {
        return Err(Error::Config(format!(
            "layer has N = {} nodes but the system size is {}",
            params.nodes, cfg.eta
        )));
    }
    let active = cfg.mode != SamplingMode::Broadcast && params.nodes >= cfg.level_threshold;
    let fixed_pools = (active && cfg.mode == SamplingMode::FixedPseudoRandom).then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        (0..params.nodes as usize)
            .map(|_| {
                let mut pools = Vec::with_capacity((params.k as usize + 1) * cfg.samples);
                Sampler::draw_pools(&mut rng, &params, cfg.samples, &mut pools);
                extend_pool(&mut rng, 0..params.nodes as usize, cfg.samples, &mut pools);
                pools
            })
            .collect()
    });
    let sampler = Sampler {
        active,
        samples: cfg.samples,
        fixed_pools,
    };
    compose(inner, params, Some(sampler))
}

/// Upper bound on pulls per node per round at one sampled layer: `(k+1)·M`.
pub fn pull_budget(params: &BoostParams, cfg: &SamplingConfig) -> u64 {
    (params.k + 1) * cfg.samples as u64
}

/// Monte-Carlo frequencies of the two sampled threshold tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdStats {
    pub samples: usize,
    pub trials: u64,
    /// Frequency of `X ≥ ⅔M`.
    pub two_thirds: f64,
    /// Frequency of `X > ⅓M`.
    pub one_third: f64,
}

impl ThresholdStats {
    /// Rows of `(event, M, trials, frequency)` for the stats report.
    pub fn report(&self) -> String {
        let mut out = String::from("event,M,trials,frequency\n");
        for (event, freq) in [("two_thirds", self.two_thirds), ("one_third", self.one_third)] {
            out.push_str(&format!("{event},{},{},{freq:.6}\n", self.samples, self.trials));
        }
        out
    }
}

/// Samples `M` values per trial; each comes from a correct node with
/// probability `correct_fraction`, and a correct node holds the tracked value
/// with probability `value_fraction`. `X` counts tracked values drawn from
/// correct nodes; faulty draws never count towards it.
pub fn threshold_stats(
    samples: usize,
    correct_fraction: f64,
    value_fraction: f64,
    trials: u64,
    seed: u64,
) -> Result<ThresholdStats> {
    for (name, p) in [("correct_fraction", correct_fraction), ("value_fraction", value_fraction)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("{name} = {p} is not in [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = correct_fraction * value_fraction;
    let (mut two_thirds, mut one_third) = (0u64, 0u64);
    for _ in 0..trials {
        let x = (0..samples).filter(|_| rng.random_bool(p)).count() as u64;
        let m = samples as u64;
        if 3 * x >= 2 * m {
            two_thirds += 1;
        }
        if 3 * x > m {
            one_third += 1;
        }
    }
    let denom = trials.max(1) as f64;
    Ok(ThresholdStats {
        samples,
        trials,
        two_thirds: two_thirds as f64 / denom,
        one_third: one_third as f64 / denom,
    })
}
