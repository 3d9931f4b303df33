//! Resilience boosting: `k` blocks each run a copy of an `(n, f, c)` counter,
//! vote on a leader block, read that block's round counter, and use it to
//! drive a phase king that agrees on the new `C`-counter.
//!
//! Node `(i, j)` is the `j`th node of block `i` and has global index `i·n + j`.
//! Its state word is the inner counter's state in the low bits, followed by
//! the `a` register (`⌈log₂(C+1)⌉` bits) and the `d` bit.

use rand::Rng;
use smallvec::SmallVec;

use crate::counter::{ceil_log2, field_mask, mod_view, CounterAlgorithm, Kind, State, StepContext};
use crate::error::{Error, Result};
use crate::phase_king::{self, PhaseKingRegisters, Quorum, Register, TallyVector};
use crate::pulling::Sampler;

/// Parameters of one boosting step, validated against the construction's
/// preconditions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoostParams {
    /// Inner counter size and resilience.
    pub n: u64,
    pub f: u64,
    /// Number of blocks.
    pub k: u64,
    /// `N = k·n`.
    pub nodes: u64,
    /// `m = ⌈k/2⌉`, the number of candidate leader blocks.
    pub m: u64,
    /// Target resilience `F`.
    pub faults: u64,
    /// Output modulus `C`.
    pub modulus: u64,
    /// `τ = 3(F+2)`.
    pub tau: u64,
    /// Inner counter modulus `c`.
    pub inner_modulus: u64,
    /// `α = c / (τ(2m)^k)`.
    pub alpha: u64,
    /// `c_i = τ(2m)^{i+1}` for each block `i`.
    pub block_moduli: Vec<u64>,
}

impl BoostParams {
    /// `c_{k−1} = τ(2m)^k`, the stabilisation overhead of the layer.
    pub fn overhead(&self) -> u64 {
        *self.block_moduli.last().expect("k >= 3")
    }

    /// `(2m)^i`: rounds a block-`i` pointer stays on one value, divided by `τ`.
    fn pointer_divisor(&self, block: usize) -> u64 {
        (2 * self.m).pow(block as u32)
    }
}

/// `3(F+2)(2m)^k`, or `None` on overflow.
pub fn required_inner_modulus(k: u64, faults: u64) -> Option<u64> {
    let m = k.div_ceil(2);
    let base = (2 * m).checked_pow(u32::try_from(k).ok()?)?;
    base.checked_mul(3)?.checked_mul(faults.checked_add(2)?)
}

pub fn validate_boost_params(
    n: u64,
    f: u64,
    k: u64,
    faults: u64,
    modulus: u64,
    inner_modulus: u64,
) -> Result<BoostParams> {
    if k < 3 {
        return Err(Error::TooFewBlocks(k as usize));
    }
    let m = k.div_ceil(2);
    let limit = (f + 1) * m;
    if faults >= limit {
        return Err(Error::ResilienceTooHigh {
            target: faults,
            limit,
        });
    }
    if modulus <= 1 {
        return Err(Error::OutputModulus(modulus));
    }
    if 2 * f >= n && n > 0 {
        return Err(Error::InnerResilience { n, f });
    }
    let nodes = k * n;
    if 3 * faults >= nodes {
        return Err(Error::PhaseKingResilience { target: faults, nodes });
    }
    let required = required_inner_modulus(k, faults)
        .ok_or_else(|| Error::Composition(format!("3(F+2)(2m)^k overflows for k={k}, F={faults}")))?;
    if inner_modulus == 0 || inner_modulus % required != 0 {
        return Err(Error::InnerModulus {
            inner: inner_modulus,
            required,
        });
    }
    let tau = 3 * (faults + 2);
    let block_moduli = (1..=k as u32).map(|e| tau * (2 * m).pow(e)).collect();
    Ok(BoostParams {
        n,
        f,
        k,
        nodes,
        m,
        faults,
        modulus,
        tau,
        inner_modulus,
        alpha: inner_modulus / required,
        block_moduli,
    })
}

/// Reads a block counter value `v ∈ [c_i]` as `(r, y)` with `v = y·τ + r`.
pub fn decode_counter(value: u64, block_modulus: u64, tau: u64) -> Result<(u64, u64)> {
    if value >= block_modulus {
        return Err(Error::Domain {
            value,
            bound: block_modulus,
        });
    }
    Ok((value % tau, value / tau))
}

/// The leader block a block-`i` counter with high part `y` points to.
pub fn block_pointer(y: u64, block: u32, m: u64) -> u64 {
    (y / (2 * m).pow(block)) % m
}

/// The value occurring in more than half of `values`, if any.
pub fn majority(values: &[u64]) -> Option<u64> {
    // Boyer-Moore vote followed by a verification pass.
    let mut candidate = 0;
    let mut weight = 0usize;
    for &v in values {
        if weight == 0 {
            candidate = v;
            weight = 1;
        } else if v == candidate {
            weight += 1;
        } else {
            weight -= 1;
        }
    }
    let count = values.iter().filter(|&&v| v == candidate).count();
    (2 * count > values.len()).then_some(candidate)
}

/// [`majority`] defaulting to `0` when no value has a strict majority.
pub fn majority_or_default(values: &[u64]) -> u64 {
    majority(values).unwrap_or(0)
}

/// A node's reading of the leader election in one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeaderView {
    /// `b̂[i]`: majority pointer of block `i`.
    pub votes: SmallVec<[u64; 8]>,
    /// `B`: the elected leader block.
    pub leader: u64,
    /// `R`: the leader block's majority round counter.
    pub round: u64,
}

/// Per-sender `(b, r)` pointer and round-counter readings.
pub type Reading = (u64, u64);

/// Computes the leader view from per-sender readings laid out block by block
/// (`k` blocks of `n` readings each).
pub fn leader_view_from_readings(readings: &[Reading], k: usize, n: usize) -> LeaderView {
    let mut buf: SmallVec<[u64; 64]> = SmallVec::with_capacity(n);
    let votes: SmallVec<[u64; 8]> = (0..k)
        .map(|i| {
            buf.clear();
            buf.extend(readings[i * n..(i + 1) * n].iter().map(|&(b, _)| b));
            majority_or_default(&buf)
        })
        .collect();
    let leader = majority_or_default(&votes);
    let leader_block = leader as usize;
    buf.clear();
    buf.extend(
        readings[leader_block * n..(leader_block + 1) * n]
            .iter()
            .map(|&(_, r)| r),
    );
    let round = majority_or_default(&buf);
    LeaderView {
        votes,
        leader,
        round,
    }
}

/// One boosting layer: the inner counter, its per-block modulus views, and
/// the field layout of the phase-king registers.
#[derive(Debug)]
pub struct BoostLayer {
    inner: CounterAlgorithm,
    params: BoostParams,
    blocks: Vec<CounterAlgorithm>,
    divisors: Vec<u64>,
    a_shift: u32,
    a_bits: u32,
    d_shift: u32,
    pub(crate) sampler: Option<Sampler>,
}

impl BoostLayer {
    pub(crate) fn new(
        inner: &CounterAlgorithm,
        params: BoostParams,
        sampler: Option<Sampler>,
    ) -> Result<Self> {
        if inner.nodes() as u64 != params.n
            || inner.resilience() as u64 != params.f
            || inner.modulus() != params.inner_modulus
        {
            return Err(Error::Composition(format!(
                "inner counter is ({}, {}, {}) but parameters expect ({}, {}, {})",
                inner.nodes(),
                inner.resilience(),
                inner.modulus(),
                params.n,
                params.f,
                params.inner_modulus
            )));
        }
        let blocks = params
            .block_moduli
            .iter()
            .map(|&c| mod_view(inner, c))
            .collect::<Result<Vec<_>>>()?;
        let divisors = (0..params.k as usize)
            .map(|i| params.pointer_divisor(i))
            .collect();
        let a_shift = inner.state_bits();
        let a_bits = ceil_log2(params.modulus + 1);
        Ok(Self {
            inner: inner.clone(),
            params,
            blocks,
            divisors,
            a_shift,
            a_bits,
            d_shift: a_shift + a_bits,
            sampler,
        })
    }

    pub fn params(&self) -> &BoostParams {
        &self.params
    }

    pub fn inner(&self) -> &CounterAlgorithm {
        &self.inner
    }

    pub fn is_sampled(&self) -> bool {
        self.sampler.as_ref().is_some_and(|s| s.active)
    }

    pub(crate) fn state_bits(&self) -> u32 {
        self.d_shift + 1
    }

    /// Low bits of `word` holding the inner counter's state.
    pub fn inner_state(&self, word: State) -> State {
        word & field_mask(self.a_shift)
    }

    pub fn registers(&self, word: State) -> PhaseKingRegisters {
        let field = (word >> self.a_shift) & field_mask(self.a_bits);
        PhaseKingRegisters::new(
            Register::decode(field, self.params.modulus),
            (word >> self.d_shift) & 1 == 1,
        )
    }

    /// Replaces the phase-king registers of `word`.
    pub fn with_registers(&self, word: State, regs: PhaseKingRegisters) -> State {
        self.inner_state(word)
            | regs.a.encode(self.params.modulus) << self.a_shift
            | (regs.d as u64) << self.d_shift
    }

    /// `(b, r)` as announced by the sender with global index `sender`.
    pub fn reading(&self, sender: usize, word: State) -> Reading {
        let n = self.params.n as usize;
        let (block, pos) = (sender / n, sender % n);
        let out = self.blocks[block].output(pos, word);
        let tau = self.params.tau;
        let (r, y) = (out % tau, out / tau);
        ((y / self.divisors[block]) % self.params.m, r)
    }

    /// The leader view computed from a full received vector.
    pub fn leader_view(&self, received: &[State]) -> LeaderView {
        let readings: SmallVec<[Reading; 64]> = received
            .iter()
            .enumerate()
            .map(|(v, &w)| self.reading(v, w))
            .collect();
        leader_view_from_readings(&readings, self.params.k as usize, self.params.n as usize)
    }

    pub(crate) fn exact_quorum(&self) -> Quorum {
        Quorum::Exact {
            nodes: self.params.nodes,
            faults: self.params.faults,
        }
    }

    pub(crate) fn transition(
        &self,
        node: usize,
        received: &[State],
        ctx: &mut StepContext,
    ) -> State {
        let n = self.params.n as usize;
        let block = node / n;
        let inner_next = self
            .inner
            .transition(node % n, &received[block * n..(block + 1) * n], ctx);
        let own = self.registers(received[node]);
        let regs = match &self.sampler {
            Some(sampler) if sampler.active => sampler.step(self, node, received, own, ctx),
            _ => self.broadcast_step(received, own),
        };
        self.with_registers(inner_next, regs)
    }

    fn broadcast_step(&self, received: &[State], own: PhaseKingRegisters) -> PhaseKingRegisters {
        let view = self.leader_view(received);
        let king = (view.round / 3) as usize;
        let offset = (view.round % 3) as u8;
        let modulus = self.params.modulus;
        if offset == 2 {
            return phase_king::exec_i2(own, self.registers(received[king]).a, modulus);
        }
        let tally = TallyVector::from_values(received.iter().map(|&w| self.registers(w).a));
        phase_king::exec(
            offset,
            own,
            &tally,
            Register::Infinity,
            self.exact_quorum(),
            modulus,
        )
    }

    pub(crate) fn output(&self, word: State) -> u64 {
        match self.registers(word).a {
            Register::Value(v) => v,
            Register::Infinity => 0,
        }
    }

    pub(crate) fn is_valid(&self, word: State) -> bool {
        let field = (word >> self.a_shift) & field_mask(self.a_bits);
        field <= self.params.modulus && self.inner.is_valid(self.inner_state(word))
    }

    fn register_states(&self) -> u128 {
        2 * (self.params.modulus as u128 + 1)
    }

    pub(crate) fn domain_size(&self) -> u128 {
        self.inner.domain_size().saturating_mul(self.register_states())
    }

    pub(crate) fn rank(&self, word: State) -> u128 {
        let inner_size = self.inner.domain_size();
        let field = ((word >> self.a_shift) & field_mask(self.a_bits)) as u128;
        let d = ((word >> self.d_shift) & 1) as u128;
        let regs = field + (self.params.modulus as u128 + 1) * d;
        self.inner.rank(self.inner_state(word)) + inner_size * regs
    }

    pub(crate) fn unrank(&self, rank: u128) -> State {
        let inner_size = self.inner.domain_size();
        let inner = self.inner.unrank(rank % inner_size);
        let regs = rank / inner_size;
        let width = self.params.modulus as u128 + 1;
        let (field, d) = ((regs % width) as u64, (regs / width) as u64);
        inner | field << self.a_shift | d << self.d_shift
    }

    pub(crate) fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        let inner = self.inner.random_state(rng);
        let field = rng.random_range(0..=self.params.modulus);
        let d = rng.random_bool(0.5) as u64;
        inner | field << self.a_shift | d << self.d_shift
    }

    pub(crate) fn max_state(&self) -> State {
        self.inner.max_state() | self.params.modulus << self.a_shift | 1 << self.d_shift
    }

    pub(crate) fn shift_counters(&self, word: State, offset: u64) -> State {
        let inner = self.inner.shift_counters(self.inner_state(word), offset);
        let regs = self.registers(word);
        let a = match regs.a {
            Register::Value(v) => Register::Value((v + offset) % self.params.modulus),
            Register::Infinity => Register::Infinity,
        };
        self.with_registers(inner, PhaseKingRegisters::new(a, regs.d))
    }
}

pub(crate) fn compose(
    inner: &CounterAlgorithm,
    params: BoostParams,
    sampler: Option<Sampler>,
) -> Result<CounterAlgorithm> {
    let layer = BoostLayer::new(inner, params, sampler)?;
    let bits = layer.state_bits();
    if bits > 64 {
        return Err(Error::Composition(format!(
            "state needs {bits} bits; at most 64 are supported"
        )));
    }
    let t_bound = inner
        .stabilization_bound()
        .checked_add(layer.params.overhead())
        .ok_or_else(|| Error::Composition("stabilisation bound overflows".into()))?;
    let p = &layer.params;
    Ok(CounterAlgorithm::from_parts(
        p.nodes as usize,
        p.faults as usize,
        p.modulus,
        bits,
        t_bound,
        Kind::Boost(Box::new(layer)),
    ))
}

/// Builds the boosted `(N, F, C)` counter from `inner ∈ 𝒜(n, f, c)`.
pub fn boost(inner: &CounterAlgorithm, params: BoostParams) -> Result<CounterAlgorithm> {
    compose(inner, params, None)
}
