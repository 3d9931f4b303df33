//! The synchronous counter abstraction and its two primitive instances.
//!
//! A counter is a triple of a finite state domain, a per-node transition on
//! the vector of states received in a round, and an output map into `[c]`.
//! States are bit-packed into a [`State`] word: every layer of a composed
//! counter owns a fixed field of the word, so the encoded width is exactly
//! the sum of the per-layer field widths.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::boost::BoostLayer;
use crate::error::{Error, Result};

/// A bit-packed node state.
pub type State = u64;

/// Number of bits needed to store values in `[0, count)`, i.e. `⌈log₂ count⌉`.
pub fn ceil_log2(count: u64) -> u32 {
    if count <= 1 {
        0
    } else {
        64 - (count - 1).leading_zeros()
    }
}

pub(crate) fn field_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// A node index, optionally carrying its `(block, position)` coordinates
/// inside a boosted counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId {
    pub index: usize,
    pub block: Option<(usize, usize)>,
}

impl NodeId {
    pub fn flat(index: usize) -> Self {
        Self { index, block: None }
    }

    pub fn in_block(block: usize, position: usize, block_size: usize) -> Self {
        Self {
            index: block * block_size + position,
            block: Some((block, position)),
        }
    }

    pub fn from_index(index: usize, block_size: usize) -> Self {
        Self::in_block(index / block_size, index % block_size, block_size)
    }
}

/// Per-node, per-run mutable context threaded through transitions.
///
/// Deterministic counters ignore it; sampled counters draw their pools from
/// `rng` and account pulls and sampling divergences here.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub round: u64,
    pub(crate) rng: ChaCha8Rng,
    /// Pulls issued by sampled layers in the current round.
    pub pulls: u64,
    /// Rounds in which a sampled leader view differed from the broadcast one.
    pub leader_divergence: u64,
    /// Sampled phase-king threshold tests that disagreed with the exact test.
    pub threshold_divergence: u64,
    pub(crate) pool_buf: Vec<usize>,
}

impl StepContext {
    pub fn new(seed: u64) -> Self {
        Self {
            round: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pulls: 0,
            leader_divergence: 0,
            threshold_divergence: 0,
            pool_buf: Vec::new(),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

impl Default for StepContext {
    fn default() -> Self {
        Self::new(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Meta {
    nodes: usize,
    resilience: usize,
    modulus: u64,
    state_bits: u32,
    t_bound: u64,
}

#[derive(Debug)]
pub(crate) enum Kind {
    Trivial,
    ModView { base: CounterAlgorithm },
    Boost(Box<BoostLayer>),
}

/// A synchronous `c`-counter on `n` nodes tolerating `f` Byzantine faults.
///
/// Cheap to clone; composed counters share their inner algorithms.
#[derive(Clone)]
pub struct CounterAlgorithm(Arc<Inner>);

struct Inner {
    meta: Meta,
    kind: Kind,
}

impl fmt::Debug for CounterAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.0.kind {
            Kind::Trivial => "trivial",
            Kind::ModView { .. } => "mod-view",
            Kind::Boost(layer) if layer.is_sampled() => "pulled-boost",
            Kind::Boost(_) => "boost",
        };
        f.debug_struct("CounterAlgorithm")
            .field("kind", &kind)
            .field("n", &self.nodes())
            .field("f", &self.resilience())
            .field("c", &self.modulus())
            .field("state_bits", &self.state_bits())
            .field("t_bound", &self.stabilization_bound())
            .finish()
    }
}

/// The single-node, zero-resilience counter that increments mod `c`.
pub fn trivial_counter(c: u64) -> Result<CounterAlgorithm> {
    if c < 2 {
        return Err(Error::InvalidModulus(c));
    }
    Ok(CounterAlgorithm::from_parts(
        1,
        0,
        c,
        ceil_log2(c),
        0,
        Kind::Trivial,
    ))
}

/// The same counter with outputs reduced modulo a divisor `view` of its modulus.
pub fn mod_view(base: &CounterAlgorithm, view: u64) -> Result<CounterAlgorithm> {
    if view < 2 {
        return Err(Error::InvalidModulus(view));
    }
    if base.modulus() % view != 0 {
        return Err(Error::NotADivisor {
            view,
            modulus: base.modulus(),
        });
    }
    // Views of views collapse onto the underlying counter.
    let root = match &base.0.kind {
        Kind::ModView { base: root } => root.clone(),
        _ => base.clone(),
    };
    Ok(CounterAlgorithm::from_parts(
        base.nodes(),
        base.resilience(),
        view,
        base.state_bits(),
        base.stabilization_bound(),
        Kind::ModView { base: root },
    ))
}

impl CounterAlgorithm {
    pub(crate) fn from_parts(
        nodes: usize,
        resilience: usize,
        modulus: u64,
        state_bits: u32,
        t_bound: u64,
        kind: Kind,
    ) -> Self {
        Self(Arc::new(Inner {
            meta: Meta {
                nodes,
                resilience,
                modulus,
                state_bits,
                t_bound,
            },
            kind,
        }))
    }

    pub fn nodes(&self) -> usize {
        self.0.meta.nodes
    }

    pub fn resilience(&self) -> usize {
        self.0.meta.resilience
    }

    pub fn modulus(&self) -> u64 {
        self.0.meta.modulus
    }

    /// Encoded width of one node's state in bits.
    pub fn state_bits(&self) -> u32 {
        self.0.meta.state_bits
    }

    /// Certified number of rounds within which every execution stabilises.
    pub fn stabilization_bound(&self) -> u64 {
        self.0.meta.t_bound
    }

    /// The outermost boost layer, if this counter is a boosted one.
    pub fn top_layer(&self) -> Option<&BoostLayer> {
        match &self.0.kind {
            Kind::Boost(layer) => Some(layer),
            Kind::ModView { base } => base.top_layer(),
            Kind::Trivial => None,
        }
    }

    /// Next state of `node` after receiving `received` (one word per node,
    /// the node's own state included).
    pub fn transition(&self, node: usize, received: &[State], ctx: &mut StepContext) -> State {
        match &self.0.kind {
            Kind::Trivial => {
                let value = received[node] & field_mask(self.state_bits());
                (value + 1) % self.modulus()
            }
            Kind::ModView { base } => base.transition(node, received, ctx),
            Kind::Boost(layer) => layer.transition(node, received, ctx),
        }
    }

    /// Output value in `[c]` of `node` holding `state`.
    pub fn output(&self, node: usize, state: State) -> u64 {
        match &self.0.kind {
            Kind::Trivial => (state & field_mask(self.state_bits())) % self.modulus(),
            Kind::ModView { base } => base.output(node, state) % self.modulus(),
            Kind::Boost(layer) => layer.output(state),
        }
    }

    /// Whether `word` decodes to a state of the declared domain.
    pub fn is_valid(&self, word: State) -> bool {
        if self.state_bits() < 64 && word >> self.state_bits() != 0 {
            return false;
        }
        match &self.0.kind {
            Kind::Trivial => word < self.modulus(),
            Kind::ModView { base } => base.is_valid(word),
            Kind::Boost(layer) => layer.is_valid(word),
        }
    }

    /// Maps undecodable words to the all-zero state.
    pub fn canonicalize(&self, word: State) -> State {
        if self.is_valid(word) {
            word
        } else {
            0
        }
    }

    /// Number of valid states `|X|`.
    pub fn domain_size(&self) -> u128 {
        match &self.0.kind {
            Kind::Trivial => self.modulus() as u128,
            Kind::ModView { base } => base.domain_size(),
            Kind::Boost(layer) => layer.domain_size(),
        }
    }

    /// Integer rank of a valid state in `[0, |X|)`.
    pub fn rank(&self, word: State) -> u128 {
        match &self.0.kind {
            Kind::Trivial => word as u128,
            Kind::ModView { base } => base.rank(word),
            Kind::Boost(layer) => layer.rank(word),
        }
    }

    /// Inverse of [`rank`](Self::rank).
    pub fn unrank(&self, rank: u128) -> State {
        match &self.0.kind {
            Kind::Trivial => rank as u64,
            Kind::ModView { base } => base.unrank(rank),
            Kind::Boost(layer) => layer.unrank(rank),
        }
    }

    /// A uniformly random valid state.
    pub fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        match &self.0.kind {
            Kind::Trivial => rng.random_range(0..self.modulus()),
            Kind::ModView { base } => base.random_state(rng),
            Kind::Boost(layer) => layer.random_state(rng),
        }
    }

    /// The state with every field at its largest legal value.
    pub fn max_state(&self) -> State {
        match &self.0.kind {
            Kind::Trivial => self.modulus() - 1,
            Kind::ModView { base } => base.max_state(),
            Kind::Boost(layer) => layer.max_state(),
        }
    }

    /// Adds `offset` to every counter field of `word` (base counter and all
    /// finite phase-king registers), leaving reset registers untouched.
    pub fn shift_counters(&self, word: State, offset: u64) -> State {
        match &self.0.kind {
            Kind::Trivial => ((word & field_mask(self.state_bits())) + offset) % self.modulus(),
            Kind::ModView { base } => base.shift_counters(word, offset),
            Kind::Boost(layer) => layer.shift_counters(word, offset),
        }
    }
}

/// Bit length of the largest encoded state, measured from an actual word.
pub fn measured_state_bits(alg: &CounterAlgorithm) -> u32 {
    64 - alg.max_state().leading_zeros()
}
