use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use sigma2_core::divisor::{classify, classify_exact, ConformalDivisor};
use sigma2_core::field::RadialField;
use sigma2_core::levelset::{analytic_table, BinSpec};
use sigma2_core::radial::RadialSolution;

fn radial(c: &mut Criterion) {
    c.bench_function("football/build", |b| b.iter(|| RadialSolution::football(black_box(-0.5)).unwrap()));

    let field = RadialField::new(Arc::new(RadialSolution::football(-0.5).unwrap()));
    c.bench_function("analytic_table/200", |b| {
        b.iter(|| analytic_table(black_box(&field), BinSpec::default()).unwrap())
    });

    let d = ConformalDivisor::new(vec![-0.5, -0.5, -0.1]).unwrap();
    c.bench_function("classify/float", |b| b.iter(|| classify(black_box(&d), 1e-12).unwrap()));
    c.bench_function("classify/exact", |b| b.iter(|| classify_exact(black_box(&d))));
}

criterion_group!(benches, radial);
criterion_main!(benches);
