//! Self-stabilising synchronous counters that tolerate Byzantine faults.
//!
//! Counters are built bottom-up: trivial one-node counters are combined into
//! blocks, and each boosting layer runs a phase-king agreement driven by the
//! block counters to obtain a counter with more nodes and higher resilience.
//! [`schedule`] chooses which layers to stack, [`sim`] executes counters
//! against adversaries, and [`pulling`] swaps broadcast for random sampling.

pub mod boost;
pub mod counter;
pub mod error;
pub mod phase_king;
pub mod pulling;
pub mod schedule;
pub mod seed;
pub mod sim;

pub use boost::{boost, validate_boost_params, BoostLayer, BoostParams};
pub use counter::{
    measured_state_bits, mod_view, trivial_counter, CounterAlgorithm, NodeId, State, StepContext,
};
pub use error::{Error, Result};
pub use phase_king::{PhaseKingRegisters, Register};
pub use pulling::{pulled_boost, SamplingConfig, SamplingMode};
pub use schedule::{adaptive_plan, base_plan, fixed_k_plan, realize, Epsilon, Plan, Prediction};
pub use sim::{
    detect_stabilization, enumerate_initial_states, make_adversary, run, Adversary,
    AdversaryKind, FaultSet, InitMode, StabilizationReport, Trace,
};
