use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use atdm_core::adversary::{build_mqs, solve_mqs, synthetic_knowns, LmOptions, TauStart, WReading};

fn attacks(c: &mut Criterion) {
    let mut group = c.benchmark_group("attack");
    group.sample_size(10);
    for t in [1, 6, 24] {
        let inst = build_mqs(&synthetic_knowns(6, 3, t, 2, WReading::PerQuantity, [7; 32])).unwrap();
        let x0 = inst.attack_start(TauStart::Aggregate, 1.0, [9; 32]).unwrap();
        group.bench_with_input(BenchmarkId::new("lm", t), &(inst, x0), |b, (inst, x0)| {
            b.iter(|| solve_mqs(inst, x0, &LmOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, attacks);
criterion_main!(benches);
