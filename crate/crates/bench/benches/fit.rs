use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use atdm_core::estimator::{bcd_fit, FitOptions};
use atdm_core::model::{build_design, generate_synthetic, SyntheticConfig};
use atdm_core::protocol::{run_protocol, ProtocolConfig};

fn fits(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    for zones in [7, 16] {
        let (ds, _) = generate_synthetic(&SyntheticConfig::new(zones, 1440, 2, 2024)).unwrap();
        let design = build_design(&ds, 48).unwrap();
        group.bench_with_input(BenchmarkId::new("plain", zones), &design, |b, d| {
            b.iter(|| bcd_fit(d, &FitOptions::default()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("private", zones), &ds, |b, d| {
            b.iter(|| run_protocol(d, &ProtocolConfig::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, fits);
criterion_main!(benches);
