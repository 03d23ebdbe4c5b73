use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use sigma2_core::field::PerturbedBubble;
use sigma2_core::levelset::{coarea_table, verify_identities, BinSpec, CoareaOptions, GridSpec, Tolerances};

fn coarea(c: &mut Criterion) {
    let mut group = c.benchmark_group("coarea_table");
    group.sample_size(10);
    let field = PerturbedBubble::random_supersolution(0);
    for n in [24usize, 32] {
        let grid = GridSpec {
            radius: 5.0,
            resolution: n,
        };
        group.bench_function(format!("N={n}"), |b| {
            b.iter(|| coarea_table(black_box(&field), grid, BinSpec::default(), CoareaOptions::default()).unwrap())
        });
    }
    group.finish();

    let grid = GridSpec {
        radius: 5.0,
        resolution: 32,
    };
    let table = coarea_table(&field, grid, BinSpec::default(), CoareaOptions::default()).unwrap();
    c.bench_function("verify_identities/grid", |b| {
        b.iter(|| verify_identities(black_box(&table), Tolerances::grid()))
    });
}

criterion_group!(benches, coarea);
criterion_main!(benches);
