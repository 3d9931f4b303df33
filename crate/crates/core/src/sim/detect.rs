use std::fmt;

use crate::sim::Trace;

/// Outcome of scanning a trace for the earliest round from which all correct
/// nodes agree and increment modulo `c` until the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StabilizationReport {
    pub stabilized: bool,
    /// Earliest round of the correct suffix; `None` if even the last round
    /// has disagreeing outputs.
    pub t_stab: Option<u64>,
    /// Rounds of correct counting observed from `t_stab` to the horizon.
    pub verified_window: u64,
    pub bound: u64,
    pub within_bound: bool,
}

impl fmt::Display for StabilizationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "stabilized: {}", self.stabilized)?;
        match self.t_stab {
            Some(t) => writeln!(f, "t_stab: {t}")?,
            None => writeln!(f, "t_stab: none")?,
        }
        writeln!(f, "verified_window: {}", self.verified_window)?;
        writeln!(f, "bound: {}", self.bound)?;
        writeln!(f, "within_bound: {}", self.within_bound)
    }
}

/// [`detect_stabilization_with`] using a minimum window of `2c` rounds.
pub fn detect_stabilization(trace: &Trace, c: u64) -> StabilizationReport {
    detect_stabilization_with(trace, c, 2 * c)
}

pub fn detect_stabilization_with(trace: &Trace, c: u64, min_window: u64) -> StabilizationReport {
    let rounds = trace.rounds();
    let agreed = |t: usize| -> Option<u64> {
        let mut outs = trace.correct_outputs(t);
        let first = outs.next();
        match first {
            // No correct nodes: any output sequence is vacuously correct.
            None => Some(t as u64 % c),
            Some(x) => outs.all(|o| o == x).then_some(x),
        }
    };

    let mut t_stab = None;
    if rounds > 0 {
        if let Some(mut value) = agreed(rounds - 1) {
            let mut t = rounds - 1;
            while t > 0 {
                match agreed(t - 1) {
                    Some(prev) if (prev + 1) % c == value => {
                        value = prev;
                        t -= 1;
                    }
                    _ => break,
                }
            }
            t_stab = Some(t as u64);
        }
    }
    let verified_window = t_stab.map_or(0, |t| rounds as u64 - t);
    let stabilized = t_stab.is_some() && verified_window >= min_window;
    let bound = trace.bound();
    StabilizationReport {
        stabilized,
        t_stab,
        verified_window,
        bound,
        within_bound: stabilized && t_stab.is_some_and(|t| t <= bound),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::FaultSet;

    #[test]
    fn counting_from_round_zero() {
        let rows: Vec<Vec<u64>> = (0..10).map(|t| vec![t % 3]).collect();
        let r = detect_stabilization(&Trace::from_outputs(FaultSet::none(1), &rows), 3);
        assert!(r.stabilized);
        assert_eq!(r.t_stab, Some(0));
        assert_eq!(r.verified_window, 10);
    }

    #[test]
    fn frozen_agreement_is_not_counting() {
        let rows: Vec<Vec<u64>> = (0..10).map(|_| vec![1, 1]).collect();
        let r = detect_stabilization(&Trace::from_outputs(FaultSet::none(2), &rows), 3);
        assert!(!r.stabilized);
        assert_eq!(r.t_stab, Some(9));
    }

    #[test]
    fn introduction_style_execution() {
        // Four nodes, node 2 faulty, counting mod 3 from round 5.
        let cols = [
            [2, 2, 0, 2, 0, 0, 1, 2, 0, 1, 2],
            [0, 2, 0, 1, 0, 0, 1, 2, 0, 1, 2],
            [9; 11],
            [0, 0, 2, 0, 2, 0, 1, 2, 0, 1, 2],
        ];
        let rows: Vec<Vec<u64>> = (0..11).map(|t| cols.iter().map(|c| c[t]).collect()).collect();
        let r = detect_stabilization_with(&Trace::from_outputs(FaultSet::new(4, [2]), &rows), 3, 6);
        assert!(r.stabilized);
        assert_eq!(r.t_stab, Some(5));
    }

    #[test]
    fn disagreement_at_horizon() {
        let rows = vec![vec![0, 0], vec![1, 2]];
        let r = detect_stabilization(&Trace::from_outputs(FaultSet::none(2), &rows), 3);
        assert_eq!(r.t_stab, None);
        assert!(!r.stabilized && !r.within_bound);
    }
}
