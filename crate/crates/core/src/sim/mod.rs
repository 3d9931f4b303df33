//! Lockstep synchronous simulator.
//!
//! Every round each correct node receives one state per node (its own
//! included): the true state of correct senders and an adversary-chosen
//! state for faulty senders, possibly different per recipient. All correct
//! nodes then update simultaneously.

mod adversary;
mod detect;
mod init;

use std::io::{self, Write};

pub use adversary::{make_adversary, Adversary, AdversaryKind};
pub use detect::{detect_stabilization, detect_stabilization_with, StabilizationReport};
pub use init::{enumerate_initial_states, InitMode, DEFAULT_ENUMERATION_CAP};

use crate::counter::{CounterAlgorithm, State, StepContext};
use crate::error::{Error, Result};
use crate::seed::split_seed;

/// The set of faulty node ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FaultSet {
    mask: Vec<bool>,
}

impl FaultSet {
    pub fn new<I: IntoIterator<Item = usize>>(nodes: usize, faulty: I) -> Self {
        let mut mask = vec![false; nodes];
        for v in faulty {
            mask[v] = true;
        }
        Self { mask }
    }

    pub fn none(nodes: usize) -> Self {
        Self::new(nodes, [])
    }

    pub fn contains(&self, node: usize) -> bool {
        self.mask.get(node).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&f| f).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nodes(&self) -> usize {
        self.mask.len()
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &f)| f).map(|(v, _)| v)
    }

    pub fn correct(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &f)| !f).map(|(v, _)| v)
    }

    /// Every fault set of size at most `max`, smallest first.
    pub fn all_up_to(nodes: usize, max: usize) -> Vec<FaultSet> {
        let mut out = Vec::new();
        for size in 0..=max.min(nodes) {
            let mut combo: Vec<usize> = (0..size).collect();
            loop {
                out.push(FaultSet::new(nodes, combo.iter().copied()));
                // Next combination in lexicographic order.
                let Some(i) = (0..size).rev().find(|&i| combo[i] < nodes - size + i) else {
                    break;
                };
                combo[i] += 1;
                for j in i + 1..size {
                    combo[j] = combo[j - 1] + 1;
                }
            }
        }
        out
    }
}

impl std::fmt::Display for FaultSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let ids: Vec<String> = self.members().map(|v| v.to_string()).collect();
        write!(f, "{{{}}}", ids.join(","))
    }
}

/// A finite execution prefix: configurations `e_0 .. e_{rounds-1}`.
#[derive(Debug, Clone)]
pub struct Trace {
    nodes: usize,
    faults: FaultSet,
    states: Vec<State>,
    outputs: Vec<u64>,
    digests: Vec<u64>,
    pulls: Vec<u64>,
    bound: u64,
    pub leader_divergence: u64,
    pub threshold_divergence: u64,
}

impl Trace {
    /// Builds a trace directly from output rows, for analysing externally
    /// produced executions. States are recorded as zero.
    pub fn from_outputs(faults: FaultSet, rows: &[Vec<u64>]) -> Self {
        let nodes = faults.nodes();
        let outputs: Vec<u64> = rows
            .iter()
            .flat_map(|row| {
                assert_eq!(row.len(), nodes, "row width must match node count");
                row.iter().copied()
            })
            .collect();
        Self {
            nodes,
            states: vec![0; outputs.len()],
            outputs,
            digests: vec![0; rows.len()],
            pulls: Vec::new(),
            faults,
            bound: 0,
            leader_divergence: 0,
            threshold_divergence: 0,
        }
    }

    pub fn rounds(&self) -> usize {
        if self.nodes == 0 {
            0
        } else {
            self.outputs.len() / self.nodes
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn faults(&self) -> &FaultSet {
        &self.faults
    }

    /// Declared stabilisation bound of the traced algorithm.
    pub fn bound(&self) -> u64 {
        self.bound
    }

    /// Projected configuration of round `t`: `None` (`*`) for faulty nodes.
    pub fn configuration(&self, round: usize) -> Vec<Option<State>> {
        (0..self.nodes)
            .map(|v| self.state(round, v))
            .collect()
    }

    pub fn state(&self, round: usize, node: usize) -> Option<State> {
        (!self.faults.contains(node)).then(|| self.states[round * self.nodes + node])
    }

    pub fn output(&self, round: usize, node: usize) -> Option<u64> {
        (!self.faults.contains(node)).then(|| self.outputs[round * self.nodes + node])
    }

    /// Hash of all adversary messages delivered during round `t`.
    pub fn digest(&self, round: usize) -> u64 {
        self.digests[round]
    }

    /// Pulls issued by `node` in the transition out of round `t`, if recorded.
    pub fn pulls(&self, round: usize, node: usize) -> Option<u64> {
        self.pulls.get(round * self.nodes + node).copied()
    }

    pub fn max_pulls(&self) -> u64 {
        (0..self.pulls.len())
            .filter(|i| !self.faults.contains(i % self.nodes.max(1)))
            .map(|i| self.pulls[i])
            .max()
            .unwrap_or(0)
    }

    pub(crate) fn correct_outputs(&self, round: usize) -> impl Iterator<Item = u64> + '_ {
        let row = &self.outputs[round * self.nodes..(round + 1) * self.nodes];
        row.iter()
            .enumerate()
            .filter(|(v, _)| !self.faults.contains(*v))
            .map(|(_, &o)| o)
    }

    /// CSV with columns `round,node,output,state_rank,is_faulty`; faulty
    /// nodes show `*` for output and rank.
    pub fn write_csv<W: Write>(&self, alg: &CounterAlgorithm, mut out: W) -> io::Result<()> {
        writeln!(out, "round,node,output,state_rank,is_faulty")?;
        for t in 0..self.rounds() {
            for v in 0..self.nodes {
                match self.state(t, v) {
                    Some(s) => writeln!(
                        out,
                        "{t},{v},{},{},false",
                        self.outputs[t * self.nodes + v],
                        alg.rank(s)
                    )?,
                    None => writeln!(out, "{t},{v},*,*,true")?,
                }
            }
        }
        Ok(())
    }

    /// CSV with columns `round,node,pulls` for correct nodes.
    pub fn write_pulls_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "round,node,pulls")?;
        for (i, p) in self.pulls.iter().enumerate() {
            let (t, v) = (i / self.nodes, i % self.nodes);
            if !self.faults.contains(v) {
                writeln!(out, "{t},{v},{p}")?;
            }
        }
        Ok(())
    }
}

fn mix_digest(acc: u64, msg: State) -> u64 {
    (acc.rotate_left(7) ^ msg).wrapping_mul(0x100_0000_01B3)
}

/// Executes `alg` for `horizon` configurations (`horizon − 1` rounds).
pub fn run(
    alg: &CounterAlgorithm,
    faults: &FaultSet,
    adversary: &mut Adversary,
    init: &[State],
    horizon: usize,
    seed: u64,
) -> Result<Trace> {
    let n = alg.nodes();
    if init.len() != n || faults.nodes() != n {
        return Err(Error::Config(format!(
            "algorithm has {n} nodes but {} initial states and {} fault slots were given",
            init.len(),
            faults.nodes()
        )));
    }
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if let Some(v) = (0..n).find(|&v| !alg.is_valid(init[v])) {
        return Err(Error::Config(format!(
            "initial state {:#x} of node {v} is not a valid state",
            init[v]
        )));
    }

    let correct: Vec<usize> = faults.correct().collect();
    let faulty: Vec<usize> = faults.members().collect();
    let mut contexts: Vec<StepContext> = (0..n)
        .map(|v| StepContext::new(split_seed(seed, v as u64)))
        .collect();

    let mut trace = Trace {
        nodes: n,
        faults: faults.clone(),
        states: Vec::with_capacity(horizon * n),
        outputs: Vec::with_capacity(horizon * n),
        digests: Vec::with_capacity(horizon),
        pulls: Vec::new(),
        bound: alg.stabilization_bound(),
        leader_divergence: 0,
        threshold_divergence: 0,
    };
    let sampled = alg.top_layer().is_some_and(|_| has_sampling(alg));
    if sampled {
        trace.pulls.reserve(horizon.saturating_sub(1) * n);
    }

    let mut states = init.to_vec();
    let mut next = states.clone();
    let mut received = vec![0; n];
    for round in 0..horizon {
        for v in 0..n {
            let s = if faults.contains(v) { 0 } else { states[v] };
            trace.states.push(s);
            trace.outputs.push(if faults.contains(v) { 0 } else { alg.output(v, s) });
        }
        if round + 1 == horizon {
            trace.digests.push(0);
            break;
        }
        let t = round as u64;
        adversary.begin_round(alg, t, &states, faults);
        let mut digest = 0;
        for &v in &correct {
            received.copy_from_slice(&states);
            for &u in &faulty {
                let msg = alg.canonicalize(adversary.message(alg, t, &states, faults, v, u));
                digest = mix_digest(digest, msg);
                received[u] = msg;
            }
            let ctx = &mut contexts[v];
            ctx.round = t;
            ctx.pulls = 0;
            next[v] = alg.transition(v, &received, ctx);
        }
        trace.digests.push(digest);
        if sampled {
            trace.pulls.extend((0..n).map(|v| contexts[v].pulls));
        }
        for &v in &correct {
            states[v] = next[v];
        }
    }
    trace.leader_divergence = contexts.iter().map(|c| c.leader_divergence).sum();
    trace.threshold_divergence = contexts.iter().map(|c| c.threshold_divergence).sum();
    Ok(trace)
}

fn has_sampling(alg: &CounterAlgorithm) -> bool {
    let mut cur = alg.top_layer();
    while let Some(layer) = cur {
        if layer.sampler.is_some() {
            return true;
        }
        cur = layer.inner().top_layer();
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::trivial_counter;

    #[test]
    fn trivial_run_outputs() {
        let alg = trivial_counter(3).unwrap();
        let mut adv = make_adversary("crash", 0).unwrap();
        let trace = run(&alg, &FaultSet::none(1), &mut adv, &[2], 4, 0).unwrap();
        let outs: Vec<u64> = (0..4).map(|t| trace.output(t, 0).unwrap()).collect();
        assert_eq!(outs, vec![2, 0, 1, 2]);
    }

    #[test]
    fn rejects_bad_configuration() {
        let alg = trivial_counter(3).unwrap();
        let mut adv = make_adversary("crash", 0).unwrap();
        assert!(run(&alg, &FaultSet::none(1), &mut adv, &[0, 1], 4, 0).is_err());
        assert!(run(&alg, &FaultSet::none(1), &mut adv, &[0], 0, 0).is_err());
        assert!(run(&alg, &FaultSet::none(1), &mut adv, &[3], 2, 0).is_err());
    }

    #[test]
    fn fault_set_enumeration() {
        let sets = FaultSet::all_up_to(4, 1);
        assert_eq!(sets.len(), 5);
        assert!(sets[0].is_empty());
        assert_eq!(FaultSet::all_up_to(12, 3).len(), 1 + 12 + 66 + 220);
        assert_eq!(FaultSet::new(5, [1, 3]).to_string(), "{1,3}");
    }

    #[test]
    fn csv_masks_faulty_nodes() {
        let trace = Trace::from_outputs(FaultSet::new(2, [1]), &[vec![0, 9], vec![1, 9]]);
        let alg = trivial_counter(3).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&alg, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("0,1,*,*,true"));
        assert!(text.contains("1,0,1,0,false"));
        assert_eq!(trace.configuration(0), vec![Some(0), None]);
    }
}
