use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::counter::{CounterAlgorithm, State};
use crate::error::{Error, Result};

/// Largest joint state space enumerated exhaustively by default.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Exhaustive { cap: u128 },
    Random { count: usize, seed: u64 },
}

/// Stream of joint initial states (one valid state per node).
pub fn enumerate_initial_states(
    alg: &CounterAlgorithm,
    mode: InitMode,
) -> Result<Box<dyn Iterator<Item = Vec<State>> + Send>> {
    let n = alg.nodes();
    match mode {
        InitMode::Exhaustive { cap } => {
            let per_node = alg.domain_size();
            let size = (0..n).try_fold(1u128, |acc, _| acc.checked_mul(per_node));
            let size = match size {
                Some(s) if s <= cap => s,
                other => {
                    return Err(Error::EnumerationCap {
                        size: other.unwrap_or(u128::MAX),
                        cap,
                    })
                }
            };
            let alg = alg.clone();
            Ok(Box::new((0..size).map(move |mut joint| {
                (0..n)
                    .map(|_| {
                        let digit = joint % per_node;
                        joint /= per_node;
                        alg.unrank(digit)
                    })
                    .collect()
            })))
        }
        InitMode::Random { count, seed } => {
            let alg = alg.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(Box::new((0..count).map(move |_| {
                (0..n).map(|_| alg.random_state(&mut rng)).collect()
            })))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::{boost, validate_boost_params};
    use crate::counter::trivial_counter;

    #[test]
    fn exhaustive_trivial() {
        let alg = trivial_counter(3).unwrap();
        let all: Vec<_> = enumerate_initial_states(&alg, InitMode::Exhaustive { cap: 10 })
            .unwrap()
            .collect();
        assert_eq!(all, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn boosted_space_exceeds_cap() {
        let inner = trivial_counter(2304).unwrap();
        let alg = boost(&inner, validate_boost_params(1, 0, 4, 1, 3, 2304).unwrap()).unwrap();
        assert!(matches!(
            enumerate_initial_states(&alg, InitMode::Exhaustive { cap: DEFAULT_ENUMERATION_CAP }),
            Err(Error::EnumerationCap { .. })
        ));
        let mode = InitMode::Random { count: 500, seed: 3 };
        let a: Vec<_> = enumerate_initial_states(&alg, mode).unwrap().collect();
        let b: Vec<_> = enumerate_initial_states(&alg, mode).unwrap().collect();
        assert_eq!(a.len(), 500);
        assert_eq!(a, b);
        assert!(a.iter().flatten().all(|&s| alg.is_valid(s)));
    }
}
