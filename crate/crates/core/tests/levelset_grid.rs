use std::sync::Arc;

use sigma2_core::field::{CorruptedHessian, PerturbedBubble, RadialField};
use sigma2_core::levelset::{
    analytic_rows, analytic_table, coarea_table, column_errors, verify_identities, BinSpec, CheckId, CoareaOptions,
    GridSpec, Tolerances,
};
use sigma2_core::radial::RadialSolution;

const CENTER: [f64; 4] = [0.137, -0.071, 0.043, 0.011];

fn radial(beta: f64) -> RadialField {
    let sol = if beta == 0.0 {
        RadialSolution::sphere()
    } else {
        RadialSolution::football(beta).unwrap()
    };
    RadialField::new(Arc::new(sol))
}

#[test]
fn analytic_tables_satisfy_every_identity() {
    for beta in [0.0, -0.1, -0.3, -0.5, -0.7, -0.9] {
        let table = analytic_table(&radial(beta), BinSpec::default()).unwrap();
        let report = verify_identities(&table, Tolerances::analytic());
        assert!(report.sharp);
        for c in &report.checks {
            assert!(c.applicable && c.pass, "beta {beta}: {:?} worst {:e}", c.id, c.worst);
        }
        let mass = 0.25 * (beta * (2.0 + beta)).powi(2);
        assert!(table.rows.iter().all(|r| (r.m - mass).abs() <= 1e-8));
        assert!(table.rows.iter().all(|r| r.c <= 4.0 / 3.0));
    }
}

#[test]
fn grid_columns_converge_for_the_sphere() {
    let field = PerturbedBubble {
        center: CENTER,
        ..PerturbedBubble::sphere()
    };
    let exact = RadialField::new(Arc::new(RadialSolution::sphere())).with_center(CENTER);
    let bins = BinSpec::Range {
        t_min: -1.6,
        t_max: -0.1,
        count: 40,
    };
    let errors: Vec<[f64; 6]> = [32, 48, 64]
        .iter()
        .map(|&n| {
            let table = coarea_table(&field, GridSpec { radius: 4.0, resolution: n }, bins, CoareaOptions::default()).unwrap();
            column_errors(&table, &analytic_rows(&exact, &table.levels())).as_array()
        })
        .collect();
    let ln = |x: f64| x.ln();
    for col in 0..6 {
        let order = (ln(errors[0][col]) - ln(errors[2][col])) / (ln(64.0) - ln(32.0));
        assert!(order >= 0.8, "column {col}: errors {:?}", errors.iter().map(|e| e[col]).collect::<Vec<_>>());
    }
}

#[test]
fn perturbed_supersolutions_pass_on_the_grid() {
    let grid = GridSpec {
        radius: 5.0,
        resolution: 32,
    };
    for seed in 0..20 {
        let field = PerturbedBubble::random_supersolution(seed);
        let table = coarea_table(&field, grid, BinSpec::default(), CoareaOptions::default()).unwrap();
        let report = verify_identities(&table, Tolerances::grid());
        assert!(report.checked_levels > 50, "seed {seed}: {} levels", report.checked_levels);
        for id in [CheckId::KeyInequality, CheckId::ChainEndpoint, CheckId::CapacitySlope, CheckId::VolumeBound] {
            let c = report.check(id);
            assert!(c.applicable && c.pass, "seed {seed}: {id:?} worst {:e}", c.worst);
        }
        assert!(report.pass(), "seed {seed}");
    }
}

#[test]
fn corrupted_hessian_breaks_key_equality() {
    let field = CorruptedHessian {
        inner: PerturbedBubble::sphere(),
        offset: 0.25,
    };
    let grid = GridSpec {
        radius: 5.0,
        resolution: 32,
    };
    let table = coarea_table(&field, grid, BinSpec::default(), CoareaOptions::default()).unwrap();
    let report = verify_identities(&table, Tolerances::grid());
    let key = report.check(CheckId::KeyEquality);
    assert!(key.applicable && !key.pass, "worst {:e}", key.worst);
    // Volume quantities do not see the Hessian.
    assert!(report.check(CheckId::VolumeBound).pass);
    assert!(report.check(CheckId::VolumeMonotone).pass);
}

#[test]
fn grid_tables_do_not_depend_on_thread_count() {
    let field = PerturbedBubble::random_supersolution(3);
    let grid = GridSpec {
        radius: 4.0,
        resolution: 20,
    };
    let build = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| coarea_table(&field, grid, BinSpec::Auto { count: 60 }, CoareaOptions::default()).unwrap())
    };
    let one = build(1);
    let three = build(3);
    assert_eq!(one.rows.len(), three.rows.len());
    for (a, b) in one.rows.iter().zip(&three.rows) {
        for (x, y) in [(a.a, b.a), (a.b, b.b), (a.c, b.c), (a.d, b.d), (a.m, b.m), (a.e, b.e), (a.dc_da, b.dc_da)] {
            assert_eq!(x.to_bits(), y.to_bits(), "t {}", a.t);
        }
    }
}
