//! Byzantine adversary catalog.
//!
//! The adversary sees every node's current state before messages are
//! assembled and may answer each recipient differently.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::counter::{CounterAlgorithm, State};
use crate::error::{Error, Result};
use crate::phase_king::{PhaseKingRegisters, Register};
use crate::sim::FaultSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdversaryKind {
    /// Always the all-zero state.
    Crash,
    /// A fresh uniform valid state per recipient per round.
    Random,
    /// One state to the lower half of recipients, a shifted copy to the upper half.
    Split,
    /// A correct node's state with every counter shifted by `offset`.
    Mimic { offset: u64 },
    /// Recipient-dependent `a` values whenever the current king is faulty.
    KingAttack,
}

impl AdversaryKind {
    pub const CATALOG: [AdversaryKind; 5] = [
        AdversaryKind::Crash,
        AdversaryKind::Random,
        AdversaryKind::Split,
        AdversaryKind::Mimic { offset: 1 },
        AdversaryKind::KingAttack,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AdversaryKind::Crash => "crash",
            AdversaryKind::Random => "random",
            AdversaryKind::Split => "split",
            AdversaryKind::Mimic { .. } => "mimic",
            AdversaryKind::KingAttack => "king_attack",
        }
    }
}

impl std::str::FromStr for AdversaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crash" => Ok(Self::Crash),
            "random" => Ok(Self::Random),
            "split" => Ok(Self::Split),
            "mimic" => Ok(Self::Mimic { offset: 1 }),
            "king_attack" | "king-attack" => Ok(Self::KingAttack),
            other => match other.strip_prefix("mimic:") {
                Some(offset) => offset
                    .parse()
                    .map(|offset| Self::Mimic { offset })
                    .map_err(|_| Error::UnknownAdversary(other.to_string())),
                None => Err(Error::UnknownAdversary(other.to_string())),
            },
        }
    }
}

impl std::fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AdversaryKind::Mimic { offset } if *offset != 1 => write!(f, "mimic:{offset}"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adversary {
    kind: AdversaryKind,
    seed: u64,
    rng: ChaCha8Rng,
    /// First correct node; the template for forged states.
    anchor: Option<usize>,
    /// Per-round alternate state for the upper half of recipients.
    split_high: State,
    /// Whether the current round's king is faulty (king attack only).
    king_faulty: bool,
}

pub fn make_adversary(kind: &str, seed: u64) -> Result<Adversary> {
    Ok(Adversary::new(kind.parse()?, seed))
}

impl Adversary {
    pub fn new(kind: AdversaryKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            anchor: None,
            split_high: 0,
            king_faulty: false,
        }
    }

    pub fn kind(&self) -> AdversaryKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Called once per round before any message of that round is requested.
    pub fn begin_round(
        &mut self,
        alg: &CounterAlgorithm,
        _round: u64,
        states: &[State],
        faults: &FaultSet,
    ) {
        self.anchor = (0..states.len()).find(|&v| !faults.contains(v));
        let Some(anchor) = self.anchor else { return };
        match self.kind {
            AdversaryKind::Split => {
                self.split_high = alg.shift_counters(states[anchor], 1);
            }
            AdversaryKind::KingAttack => {
                self.king_faulty = alg.top_layer().is_some_and(|layer| {
                    let view = layer.leader_view(states);
                    faults.contains((view.round / 3) as usize)
                });
            }
            _ => {}
        }
    }

    /// The state the faulty `sender` reports to `recipient` this round.
    pub fn message(
        &mut self,
        alg: &CounterAlgorithm,
        _round: u64,
        states: &[State],
        faults: &FaultSet,
        recipient: usize,
        sender: usize,
    ) -> State {
        let Some(anchor) = self.anchor else {
            return alg.random_state(&mut self.rng);
        };
        match self.kind {
            AdversaryKind::Crash => 0,
            AdversaryKind::Random => alg.random_state(&mut self.rng),
            AdversaryKind::Split => {
                if 2 * recipient < states.len() {
                    states[anchor]
                } else {
                    self.split_high
                }
            }
            AdversaryKind::Mimic { offset } => alg.shift_counters(states[anchor], offset),
            AdversaryKind::KingAttack => {
                let Some(layer) = alg.top_layer().filter(|_| self.king_faulty) else {
                    return alg.random_state(&mut self.rng);
                };
                // Look like a correct block-mate so block readings stay intact.
                let n = layer.params().n as usize;
                let block = sender / n;
                let template = (block * n..(block + 1) * n)
                    .find(|&v| !faults.contains(v))
                    .unwrap_or(anchor);
                let modulus = layer.params().modulus;
                let base = match layer.registers(states[anchor]).a {
                    Register::Value(v) => v,
                    Register::Infinity => 0,
                };
                let forged = Register::Value((base + recipient as u64) % modulus);
                layer.with_registers(states[template], PhaseKingRegisters::new(forged, true))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::{boost, validate_boost_params};
    use crate::counter::trivial_counter;

    fn base_counter() -> CounterAlgorithm {
        let inner = trivial_counter(2304).unwrap();
        boost(&inner, validate_boost_params(1, 0, 4, 1, 3, 2304).unwrap()).unwrap()
    }

    #[test]
    fn parses_catalog_names() {
        for kind in AdversaryKind::CATALOG {
            assert_eq!(kind.name().parse::<AdversaryKind>().unwrap(), kind);
        }
        assert_eq!(
            "mimic:5".parse::<AdversaryKind>().unwrap(),
            AdversaryKind::Mimic { offset: 5 }
        );
        assert!(matches!(
            make_adversary("sybil", 0),
            Err(Error::UnknownAdversary(_))
        ));
    }

    #[test]
    fn crash_is_constant() {
        let alg = base_counter();
        let faults = FaultSet::new(4, [3]);
        let mut adv = make_adversary("crash", 1).unwrap();
        let states = [5, 6, 7, 8];
        for round in 0..5 {
            adv.begin_round(&alg, round, &states, &faults);
            for r in 0..3 {
                assert_eq!(adv.message(&alg, round, &states, &faults, r, 3), 0);
            }
        }
    }

    #[test]
    fn split_sends_two_distinct_states() {
        let alg = base_counter();
        let faults = FaultSet::new(4, [3]);
        let mut adv = make_adversary("split", 1).unwrap();
        let states = [5, 6, 7, 8];
        adv.begin_round(&alg, 0, &states, &faults);
        let low = adv.message(&alg, 0, &states, &faults, 0, 3);
        let high = adv.message(&alg, 0, &states, &faults, 2, 3);
        assert_ne!(low, high);
    }

    #[test]
    fn random_messages_are_valid_and_seeded() {
        let alg = base_counter();
        let faults = FaultSet::new(4, [0]);
        let states = [0, 1, 2, 3];
        let mut a = make_adversary("random", 42).unwrap();
        let mut b = make_adversary("random", 42).unwrap();
        a.begin_round(&alg, 0, &states, &faults);
        b.begin_round(&alg, 0, &states, &faults);
        for r in 1..4 {
            let x = a.message(&alg, 0, &states, &faults, r, 0);
            assert!(alg.is_valid(x));
            assert_eq!(x, b.message(&alg, 0, &states, &faults, r, 0));
        }
    }
}
