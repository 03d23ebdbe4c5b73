use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigma2_core::divisor::ConformalDivisor;
use sigma2_core::radial::{integrate_cylinder, radial_levelsets, RadialReductionOracle, RadialSolution};

const FAMILY: [f64; 9] = [-0.1, -0.2, -0.3, -0.4, -0.5, -0.6, -0.7, -0.8, -0.9];

#[test]
fn level_mass_is_constant() {
    let start = Instant::now();
    let football = RadialSolution::football(-0.5).unwrap();
    for row in radial_levelsets(&football) {
        assert!((row.m - 9.0 / 64.0).abs() <= 1e-8, "t {} M {}", row.t, row.m);
    }
    for row in radial_levelsets(&RadialSolution::sphere()) {
        assert!(row.m.abs() <= 1e-9, "t {} M {}", row.t, row.m);
    }
    for beta in FAMILY {
        let sol = RadialSolution::football(beta).unwrap();
        let mass = 0.25 * (beta * (2.0 + beta)).powi(2);
        assert!(radial_levelsets(&sol).iter().all(|r| (r.m - mass).abs() <= 1e-8));
    }
    assert!(start.elapsed().as_secs_f64() < 1.0, "{:?}", start.elapsed());
}

#[test]
fn volume_matches_divisor_formula() {
    let start = Instant::now();
    for beta in FAMILY {
        let sol = RadialSolution::football(beta).unwrap();
        let closed = 2.0 / 3.0 * (2.0 - (beta.powi(3) + 3.0 * beta * beta));
        let divisor = ConformalDivisor::new(vec![beta, beta]).unwrap().normalized_total_volume();
        assert!((sol.volume() - closed).abs() <= 1e-9, "beta {beta}: {} vs {closed}", sol.volume());
        assert!((sol.volume() - divisor).abs() <= 1e-9);
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn capacity_is_first_integral_and_below_ceiling() {
    assert!((RadialSolution::sphere().capacity() - 0.25).abs() <= 1e-8);
    assert!((RadialSolution::football(-0.5).unwrap().capacity() - 7.0 / 64.0).abs() <= 1e-8);
    for beta in FAMILY {
        let sol = RadialSolution::football(beta).unwrap();
        let a = 1.0 + beta;
        assert!((sol.capacity() - a * a * (2.0 - a * a) / 4.0).abs() <= 1e-8);
        assert!(sol.capacity() < 0.25);
        assert!(radial_levelsets(&sol).iter().all(|r| r.c <= 4.0 / 3.0 && r.c <= sol.capacity() + 1e-12));
    }
}

#[test]
fn slope_identity_is_sharp_on_radial_profiles() {
    for beta in [0.0, -0.25, -0.5, -0.75] {
        let sol = if beta == 0.0 {
            RadialSolution::sphere()
        } else {
            RadialSolution::football(beta).unwrap()
        };
        let rows = radial_levelsets(&sol);
        let n = rows.len();
        for r in &rows[n / 20..n - n / 20] {
            assert!((r.dc_da - (r.z + 1.0)).abs() <= 1e-6, "beta {beta} t {}", r.t);
        }
    }
}

#[test]
fn monotone_columns_across_family() {
    for beta in FAMILY {
        let sol = RadialSolution::football(beta).unwrap();
        let mut rows = radial_levelsets(&sol);
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
        for w in rows.windows(2) {
            assert!(w[1].a < w[0].a, "beta {beta}: A not decreasing at t {}", w[1].t);
            assert!(w[1].z > w[0].z, "beta {beta}: z not increasing at t {}", w[1].t);
            assert!(w[1].dm >= -1e-6);
        }
    }
}

#[test]
fn cylinder_integration_conserves_first_integral() {
    for beta in [-0.2, -0.5, -0.8] {
        let a: f64 = 1.0 + beta;
        let w0 = 0.25 * (a * a * (2.0 - a * a)).ln();
        for end in [8.0, -8.0] {
            let traj = integrate_cylinder(w0, 0.0, end, 2e-3).unwrap();
            assert!(traj.first_integral_drift() <= 1e-8, "beta {beta} end {end}");
        }
    }
}

/// Largest residual of the finite-difference equation over `radii` at step `h`.
fn worst_residual(sol: &RadialSolution, radii: &[f64], h: f64) -> f64 {
    radii
        .iter()
        .map(|&r| {
            let o = RadialReductionOracle::new(|s| sol.radial_derivatives(s).0, r, h);
            (o.residual() / (4.0 * o.u).exp()).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn finite_difference_sigma2_converges_at_second_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let radii: Vec<f64> = (0..100).map(|_| rng.random_range(0.3..3.0)).collect();
    for beta in [0.0, -0.3, -0.5, -0.8] {
        let sol = if beta == 0.0 {
            RadialSolution::sphere()
        } else {
            RadialSolution::football(beta).unwrap()
        };
        let e: Vec<f64> = [1e-2, 5e-3, 2.5e-3].iter().map(|&h| worst_residual(&sol, &radii, h)).collect();
        for pair in e.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(order >= 1.9, "beta {beta}: errors {e:?}, order {order}");
        }
    }
}
