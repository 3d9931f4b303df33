//! Self-stabilising phase king: the three instruction sets executed for each
//! king index, the `inc` operator, and the received-value tally.
//!
//! Registers hold `a ∈ [C] ∪ {∞}` and `d ∈ {0, 1}`. The value `C` itself
//! only appears transiently inside the third instruction set, between
//! adopting `min{C, a[ℓ]}` and incrementing.

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Contents of the `a` register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Register {
    Value(u64),
    /// The reset state; orders above every numeric value.
    Infinity,
}

impl Register {
    pub fn is_infinite(self) -> bool {
        matches!(self, Register::Infinity)
    }

    /// Field encoding: numeric values as themselves, `∞` as `C`.
    pub fn encode(self, modulus: u64) -> u64 {
        match self {
            Register::Value(v) => v,
            Register::Infinity => modulus,
        }
    }

    /// Inverse of [`encode`](Self::encode); field values `≥ C` read as `∞`.
    pub fn decode(field: u64, modulus: u64) -> Self {
        if field >= modulus {
            Register::Infinity
        } else {
            Register::Value(field)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhaseKingRegisters {
    pub a: Register,
    pub d: bool,
}

impl PhaseKingRegisters {
    pub fn new(a: Register, d: bool) -> Self {
        Self { a, d }
    }

    /// Bits needed to store the registers for modulus `C`: `⌈log₂(C+1)⌉ + 1`.
    pub fn bits(modulus: u64) -> u32 {
        crate::counter::ceil_log2(modulus + 1) + 1
    }
}

/// `inc a`: no action on `∞`, otherwise `a + 1 mod C`.
pub fn inc(a: Register, modulus: u64) -> Register {
    match a {
        Register::Infinity => Register::Infinity,
        Register::Value(v) => Register::Value((v + 1) % modulus),
    }
}

/// Splits a round counter `R ∈ [τ]` into the king index `ℓ` and the offset
/// selecting `I_{3ℓ}`, `I_{3ℓ+1}` or `I_{3ℓ+2}`.
pub fn instruction_index(round_counter: u64, tau: u64) -> Result<(u64, u8)> {
    if round_counter >= tau {
        return Err(Error::Domain {
            value: round_counter,
            bound: tau,
        });
    }
    Ok((round_counter / 3, (round_counter % 3) as u8))
}

/// Counts of each received `a` value. Sparse: only values that occur are kept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TallyVector {
    counts: SmallVec<[(Register, u32); 16]>,
    total: u32,
}

impl TallyVector {
    pub fn from_values<I: IntoIterator<Item = Register>>(values: I) -> Self {
        let mut sorted: SmallVec<[Register; 64]> = values.into_iter().collect();
        sorted.sort_unstable();
        let mut counts: SmallVec<[(Register, u32); 16]> = SmallVec::new();
        for v in &sorted {
            match counts.last_mut() {
                Some((last, n)) if last == v => *n += 1,
                _ => counts.push((*v, 1)),
            }
        }
        Self {
            counts,
            total: sorted.len() as u32,
        }
    }

    /// `z_j`: number of received values equal to `value`.
    pub fn count(&self, value: Register) -> u32 {
        self.counts
            .iter()
            .find(|(v, _)| *v == value)
            .map_or(0, |(_, n)| *n)
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    /// `min{ j ∈ [C] : support(z_j) }`, or `∞` if no numeric value qualifies.
    pub fn min_supported(&self, quorum: Quorum) -> Register {
        self.counts
            .iter()
            .find(|(v, n)| !v.is_infinite() && quorum.supports(*n))
            .map_or(Register::Infinity, |(v, _)| *v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Register, u32)> + '_ {
        self.counts.iter().copied()
    }
}

/// The two threshold tests of the phase king.
///
/// With full broadcast the tests are `z ≥ N − F` and `z > F`; with `M`
/// sampled values they become `z ≥ ⅔M` and `z > ⅓M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quorum {
    Exact { nodes: u64, faults: u64 },
    Sampled { samples: u64 },
}

impl Quorum {
    pub fn agrees(self, count: u32) -> bool {
        let z = count as u64;
        match self {
            Quorum::Exact { nodes, faults } => z + faults >= nodes,
            Quorum::Sampled { samples } => 3 * z >= 2 * samples,
        }
    }

    pub fn supports(self, count: u32) -> bool {
        let z = count as u64;
        match self {
            Quorum::Exact { faults, .. } => z > faults,
            Quorum::Sampled { samples } => 3 * z > samples,
        }
    }
}

/// `I_{3ℓ}`: reset unless at least `N − F` nodes sent our value, then `inc`.
pub fn exec_i0(
    regs: PhaseKingRegisters,
    tally: &TallyVector,
    quorum: Quorum,
    modulus: u64,
) -> PhaseKingRegisters {
    let mut a = regs.a;
    if !quorum.agrees(tally.count(a)) {
        a = Register::Infinity;
    }
    PhaseKingRegisters::new(inc(a, modulus), regs.d)
}

/// `I_{3ℓ+1}`: set `d` from the agreement test, take the smallest value with
/// more than `F` supporters (`∞` if none), then `inc`.
pub fn exec_i1(
    regs: PhaseKingRegisters,
    tally: &TallyVector,
    quorum: Quorum,
    modulus: u64,
) -> PhaseKingRegisters {
    let d = quorum.agrees(tally.count(regs.a));
    let a = tally.min_supported(quorum);
    PhaseKingRegisters::new(inc(a, modulus), d)
}

/// `I_{3ℓ+2}`: nodes without a confirmed value adopt `min{C, a[ℓ]}` from the
/// king; everyone sets `d = 1` and increments.
pub fn exec_i2(regs: PhaseKingRegisters, king: Register, modulus: u64) -> PhaseKingRegisters {
    let mut a = regs.a;
    if a.is_infinite() || !regs.d {
        a = Register::Value(king.encode(modulus).min(modulus));
    }
    PhaseKingRegisters::new(inc(a, modulus), true)
}

/// Whether executing `I_{3ℓ+2}` at this node would read the king's register.
pub fn needs_king(regs: PhaseKingRegisters) -> bool {
    regs.a.is_infinite() || !regs.d
}

/// Executes the instruction set selected by `offset` (`R mod 3`).
pub fn exec(
    offset: u8,
    regs: PhaseKingRegisters,
    tally: &TallyVector,
    king: Register,
    quorum: Quorum,
    modulus: u64,
) -> PhaseKingRegisters {
    match offset {
        0 => exec_i0(regs, tally, quorum, modulus),
        1 => exec_i1(regs, tally, quorum, modulus),
        _ => exec_i2(regs, king, modulus),
    }
}
