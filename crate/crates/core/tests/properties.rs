use proptest::prelude::*;

use synccount::boost::{majority, majority_or_default};
use synccount::phase_king::{exec, PhaseKingRegisters, Quorum, Register, TallyVector};
use synccount::pulling::{pulled_boost, SamplingConfig, SamplingMode};
use synccount::sim::{run, Adversary, AdversaryKind, FaultSet};
use synccount::{base_plan, boost, mod_view, realize, trivial_counter, validate_boost_params, CounterAlgorithm, StepContext};

fn base_counter() -> CounterAlgorithm {
    realize(&base_plan(1, 3).unwrap()).unwrap()
}

fn register(modulus: u64) -> impl Strategy<Value = Register> {
    prop_oneof![
        (0..modulus).prop_map(Register::Value),
        Just(Register::Infinity),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nested_views_match_direct_views(a in 2u64..8, b in 2u64..8, c in 1u64..6, state in any::<u64>()) {
        let base = trivial_counter(a * b * c).unwrap();
        let state = state % (a * b * c);
        let outer = mod_view(&base, a * b).unwrap();
        let nested = mod_view(&outer, a).unwrap();
        let direct = mod_view(&base, a).unwrap();
        prop_assert_eq!(nested.output(0, state), direct.output(0, state));
        prop_assert_eq!(nested.output(0, state), state % a);
    }

    #[test]
    fn rank_unrank_round_trip(seed in any::<u64>()) {
        let alg = base_counter();
        let rank = u128::from(seed) % alg.domain_size();
        let word = alg.unrank(rank);
        prop_assert!(alg.is_valid(word));
        prop_assert_eq!(alg.rank(word), rank);
        prop_assert!(word <= alg.max_state());
    }

    #[test]
    fn agreement_persists_against_any_minority(
        faults in 1u64..4,
        x in 0u64..5,
        offset in 0u8..3,
        forged in prop::collection::vec(register(5), 3),
        king_forged in register(5),
    ) {
        let nodes = 3 * faults + 1;
        let modulus = 5;
        let quorum = Quorum::Exact { nodes, faults };
        let regs = PhaseKingRegisters::new(Register::Value(x), true);
        let values = (0..nodes).map(|v| {
            if v < faults { forged[v as usize % forged.len()] } else { Register::Value(x) }
        });
        let tally = TallyVector::from_values(values);
        let next = exec(offset, regs, &tally, king_forged, quorum, modulus);
        prop_assert_eq!(next, PhaseKingRegisters::new(Register::Value((x + 1) % modulus), true));
    }

    #[test]
    fn tally_counts_sum_to_total(values in prop::collection::vec(register(4), 0..40)) {
        let tally = TallyVector::from_values(values.iter().copied());
        prop_assert_eq!(tally.total() as usize, values.len());
        prop_assert_eq!(tally.iter().map(|(_, n)| n as usize).sum::<usize>(), values.len());
        for v in &values {
            prop_assert_eq!(tally.count(*v) as usize, values.iter().filter(|w| *w == v).count());
        }
    }

    #[test]
    fn majority_is_strict(values in prop::collection::vec(0u64..3, 1..30)) {
        let found = majority(&values);
        let best = (0..3).max_by_key(|v| values.iter().filter(|w| *w == v).count()).unwrap();
        let count = values.iter().filter(|w| **w == best).count();
        prop_assert_eq!(found, (2 * count > values.len()).then_some(best));
        prop_assert_eq!(majority_or_default(&values), found.unwrap_or(0));
    }

    #[test]
    fn sampled_thresholds_are_monotone(samples in 1u64..200, z in 0u32..200) {
        let q = Quorum::Sampled { samples };
        if q.agrees(z) {
            prop_assert!(q.agrees(z + 1));
            prop_assert!(q.supports(z) || samples == 0);
        }
        if q.supports(z) {
            prop_assert!(q.supports(z + 1));
        }
    }

    #[test]
    fn transitions_keep_states_valid(seed in any::<u64>(), node in 0usize..4) {
        let alg = base_counter();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let received: Vec<u64> = (0..4).map(|_| alg.random_state(&mut rng)).collect();
        let mut ctx = StepContext::new(seed);
        let next = alg.transition(node, &received, &mut ctx);
        prop_assert!(alg.is_valid(next));
        prop_assert!(alg.output(node, next) < alg.modulus());
    }

    #[test]
    fn runs_are_deterministic(seed in any::<u64>(), faulty in 0usize..4, kind in 0usize..5) {
        let alg = base_counter();
        let faults = FaultSet::new(4, [faulty]);
        let kind = AdversaryKind::CATALOG[kind];
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let init: Vec<u64> = (0..4).map(|_| alg.random_state(&mut rng)).collect();
        let a = run(&alg, &faults, &mut Adversary::new(kind, seed), &init, 200, seed).unwrap();
        let b = run(&alg, &faults, &mut Adversary::new(kind, seed), &init, 200, seed).unwrap();
        for t in 0..200 {
            prop_assert_eq!(a.configuration(t), b.configuration(t));
            prop_assert_eq!(a.digest(t), b.digest(t));
        }
    }

    #[test]
    fn broadcast_mode_equals_deterministic_boost(seed in any::<u64>(), kind in 0usize..5) {
        let inner = trivial_counter(2304).unwrap();
        let params = validate_boost_params(1, 0, 4, 1, 3, 2304).unwrap();
        let plain = boost(&inner, params.clone()).unwrap();
        let cfg = SamplingConfig { mode: SamplingMode::Broadcast, gamma: 0.5, ..SamplingConfig::for_system(4) };
        let pulled = pulled_boost(&inner, params, &cfg).unwrap();
        let faults = FaultSet::new(4, [2]);
        let kind = AdversaryKind::CATALOG[kind];
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let init: Vec<u64> = (0..4).map(|_| plain.random_state(&mut rng)).collect();
        let a = run(&plain, &faults, &mut Adversary::new(kind, seed), &init, 150, seed).unwrap();
        let b = run(&pulled, &faults, &mut Adversary::new(kind, seed), &init, 150, seed).unwrap();
        for t in 0..150 {
            prop_assert_eq!(a.configuration(t), b.configuration(t));
        }
    }
}
