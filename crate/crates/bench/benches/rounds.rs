use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use synccount::pulling::{pulled_boost, SamplingConfig, SamplingMode};
use synccount::schedule::adaptive_plan;
use synccount::sim::{run, Adversary, AdversaryKind, FaultSet};
use synccount::{base_plan, realize, validate_boost_params, CounterAlgorithm, StepContext};

fn two_level() -> CounterAlgorithm {
    realize(&base_plan(1, 960).unwrap().push_layer(3, 3, 10).unwrap()).unwrap()
}

fn sampled_two_level() -> CounterAlgorithm {
    let inner = realize(&base_plan(1, 576).unwrap()).unwrap();
    let params = validate_boost_params(4, 1, 3, 1, 10, 576).unwrap();
    let cfg = SamplingConfig {
        samples: 64,
        mode: SamplingMode::FreshRandom,
        ..SamplingConfig::for_system(12)
    };
    pulled_boost(&inner, params, &cfg).unwrap()
}

fn bench_transition(c: &mut Criterion) {
    let mut group = c.benchmark_group("transition");
    for (name, alg) in [
        ("base_n4", realize(&base_plan(1, 3).unwrap()).unwrap()),
        ("two_level_n12", two_level()),
        ("sampled_n12", sampled_two_level()),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let received: Vec<u64> = (0..alg.nodes()).map(|_| alg.random_state(&mut rng)).collect();
        let mut ctx = StepContext::new(7);
        group.bench_function(name, |b| {
            b.iter(|| alg.transition(black_box(1), black_box(&received), &mut ctx))
        });
    }
    group.finish();
}

fn bench_run(c: &mut Criterion) {
    let alg = two_level();
    let faults = FaultSet::new(12, [0, 4, 8]);
    let init = vec![0; 12];
    c.bench_function("run_two_level_1000_rounds", |b| {
        b.iter_batched(
            || Adversary::new(AdversaryKind::KingAttack, 3),
            |mut adv| run(&alg, &faults, &mut adv, &init, 1000, 3).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_predict(c: &mut Criterion) {
    c.bench_function("predict_adaptive_p4", |b| {
        b.iter(|| adaptive_plan(black_box(4), 2).unwrap().predict())
    });
}

criterion_group!(benches, bench_transition, bench_run, bench_predict);
criterion_main!(benches);
