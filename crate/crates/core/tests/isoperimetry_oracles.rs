use std::sync::Arc;

use sigma2_core::field::RadialField;
use sigma2_core::isoperimetry::{
    fraenkel_asymmetry, random_star_set, AsymmetryOptions, SphereRule, StarShapedSet,
};
use sigma2_core::radial::RadialSolution;

fn rule() -> Arc<SphereRule> {
    Arc::new(SphereRule::hopf(24, 48))
}

fn opts(samples: usize) -> AsymmetryOptions {
    AsymmetryOptions {
        samples,
        ..AsymmetryOptions::default()
    }
}

/// Asymmetry of an origin-symmetric set against the centered ball of equal
/// volume: `(1/4) int |rho^4 - r^4| / |B_r|`.
fn centered_asymmetry(rho: impl Fn(&[f64; 4]) -> f64) -> f64 {
    let fine = SphereRule::hopf(160, 320);
    let volume = fine.integrate(|x| rho(x).powi(4) / 4.0);
    let r4 = volume / fine.integrate(|_| 0.25);
    fine.integrate(|x| (rho(x).powi(4) - r4).abs() / 4.0) / volume
}

#[test]
fn ellipsoid_asymmetry_matches_quadrature_oracle() {
    for eps in [0.1, 0.2] {
        let axes = [1.0, 1.0, 1.0, 1.0 + eps];
        let rho = |x: &[f64; 4]| 1.0 / (0..4).map(|i| (x[i] / axes[i]).powi(2)).sum::<f64>().sqrt();
        let oracle = centered_asymmetry(rho);
        let set = StarShapedSet::ellipsoid(rule(), axes).unwrap();
        let rep = fraenkel_asymmetry(&set, opts(1 << 18)).unwrap();
        assert!(rep.alpha <= oracle + 2e-3, "eps {eps}: {} vs {oracle}", rep.alpha);
        assert!((rep.alpha - oracle).abs() <= 0.03 * oracle, "eps {eps}: {} vs {oracle}", rep.alpha);
    }
}

#[test]
fn translated_ball_has_no_asymmetry() {
    let set = StarShapedSet::translated_ball(rule(), [0.2, -0.1, 0.05, 0.3], 1.0).unwrap();
    let rep = fraenkel_asymmetry(&set, opts(1 << 16)).unwrap();
    assert!(rep.alpha <= 1e-3 && rep.deficit.abs() <= 1e-3, "{rep:?}");
}

#[test]
fn perimeter_matches_refined_rule() {
    let axes = [1.0, 1.1, 0.95, 1.2];
    let coarse = StarShapedSet::ellipsoid(rule(), axes).unwrap();
    let fine = StarShapedSet::ellipsoid(Arc::new(SphereRule::refined(24, 48, 10)), axes).unwrap();
    assert!((coarse.perimeter() / fine.perimeter() - 1.0).abs() <= 1e-6);
    assert!((coarse.volume() / fine.volume() - 1.0).abs() <= 1e-8);
    // Exact volume of an ellipsoid: product of axes times |B_1| = pi^2/2.
    let exact = axes.iter().product::<f64>() * std::f64::consts::PI.powi(2) / 2.0;
    assert!((fine.volume() / exact - 1.0).abs() <= 1e-10);
}

#[test]
fn asymmetry_and_deficit_are_scale_invariant() {
    let set = random_star_set(rule(), 5, 0.15).unwrap();
    let a = fraenkel_asymmetry(&set, opts(1 << 16)).unwrap();
    let b = fraenkel_asymmetry(&set.scaled(0.5), opts(1 << 16)).unwrap();
    assert!((a.alpha - b.alpha).abs() <= 1e-9 * a.alpha.max(1.0));
    assert!((a.deficit - b.deficit).abs() <= 1e-12);
    assert!((b.volume.powi(3) * b.alpha.powi(2) * 4096.0 / (a.volume.powi(3) * a.alpha.powi(2)) - 1.0).abs() <= 1e-9);
}

#[test]
fn random_family_respects_isoperimetric_inequality() {
    let rule = rule();
    for seed in 0..50 {
        let set = random_star_set(rule.clone(), seed, 0.15).unwrap();
        assert!(set.deficit() >= -1e-3, "seed {seed}: {}", set.deficit());
    }
}

#[test]
fn football_level_sets_are_round() {
    let field = Arc::new(RadialField::new(Arc::new(RadialSolution::football(-0.5).unwrap())));
    let set = StarShapedSet::from_level_set(rule(), field, -1.0, [0.0; 4], 10.0).unwrap();
    // Field evaluations are costly, so the sample count stays small.
    let rep = fraenkel_asymmetry(&set, opts(1 << 12)).unwrap();
    assert!(rep.alpha <= 1e-2 && rep.deficit.abs() <= 1e-6, "{rep:?}");
}
