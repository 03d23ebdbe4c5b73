use proptest::prelude::*;
use sigma2_core::divisor::{classify, classify_exact, ConformalDivisor, Criticality};

/// Gap written out directly from the cone energies.
fn gap_oracle(betas: &[f64], j: usize) -> f64 {
    let energy = |b: f64| 0.375 * (b * (b + 2.0)).powi(2);
    let others: Vec<f64> = betas.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &b)| b).collect();
    let cubes: f64 = others.iter().map(|b| b.powi(3)).sum();
    let bt = cubes.signum() * cubes.abs().powf(1.0 / 3.0);
    let squares: f64 = others.iter().map(|b| b * b).sum();
    energy(betas[j]) - energy(bt) - (bt + 1.5) * (squares - bt * bt)
}

#[test]
fn classification_table() {
    let crit = ConformalDivisor::new(vec![-0.5, -0.5]).unwrap();
    assert_eq!(classify(&crit, 1e-12).unwrap().class, Criticality::Critical);
    assert_eq!(classify_exact(&crit).class, Criticality::Critical);

    let sup = ConformalDivisor::new(vec![-0.5, -0.9]).unwrap();
    let r = classify(&sup, 1e-12).unwrap();
    assert_eq!(r.class, Criticality::Supercritical);
    assert!((r.gaps[1] - 0.15660).abs() <= 1e-9, "{}", r.gaps[1]);
    assert!((r.gaps[1] - gap_oracle(&[-0.5, -0.9], 1)).abs() <= 1e-15);
    assert_eq!(classify_exact(&sup).class, Criticality::Supercritical);

    let sub = ConformalDivisor::new(vec![-0.5, -0.5, -0.1]).unwrap();
    let r = classify(&sub, 1e-12).unwrap();
    assert_eq!(r.class, Criticality::Subcritical);
    assert!((r.gaps[0] - -0.0094).abs() <= 1e-4, "{}", r.gaps[0]);
    assert!((r.gaps[0] - -0.009404586433628495).abs() <= 1e-14);
    assert_eq!(classify_exact(&sub).class, Criticality::Subcritical);
}

#[test]
fn two_point_divisors_with_unequal_parameters_are_supercritical() {
    let n = 50;
    let grid: Vec<f64> = (0..n).map(|i| -0.99 + 0.98 * i as f64 / (n - 1) as f64).collect();
    for &b1 in &grid {
        for &b2 in &grid {
            if b1 == b2 {
                continue;
            }
            let d = ConformalDivisor::new(vec![b1, b2]).unwrap();
            let r = classify(&d, 1e-12).unwrap();
            let positive = r.gaps.iter().filter(|&&g| g > 0.0).count();
            assert_eq!(positive, 1, "({b1}, {b2}): {:?}", r.gaps);
            assert_eq!(r.class, Criticality::Supercritical);
            assert_eq!(classify_exact(&d).class, Criticality::Supercritical);
        }
    }
}

#[test]
fn exact_and_float_gaps_agree_on_decimal_grid() {
    for a in 1..20 {
        for b in 1..20 {
            for c in [0, 3, 7] {
                let mut betas = vec![-(a as f64) / 20.0, -(b as f64) / 20.0];
                if c > 0 {
                    betas.push(-(c as f64) / 10.0);
                }
                let d = ConformalDivisor::new(betas.clone()).unwrap();
                let float = d.gaps();
                let exact = classify_exact(&d).gaps;
                for (j, (x, y)) in float.iter().zip(&exact).enumerate() {
                    assert!((x - y).abs() <= 1e-12, "{betas:?} j={j}: {x} vs {y}");
                    assert!((x - gap_oracle(&betas, j)).abs() <= 1e-12);
                }
            }
        }
    }
}

fn betas(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.99f64..0.0, 1..=max_len)
}

proptest! {
    #[test]
    fn classification_ignores_order(mut b in betas(5), seed in any::<u64>()) {
        let before = classify(&ConformalDivisor::new(b.clone()).unwrap(), 1e-12).unwrap();
        let n = b.len();
        // Deterministic shuffle from the seed.
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            b.swap(i, (s >> 33) as usize % (i + 1));
        }
        let after = classify(&ConformalDivisor::new(b).unwrap(), 1e-12).unwrap();
        prop_assert_eq!(before.class, after.class);
        let mut g0 = before.gaps.clone();
        let mut g1 = after.gaps.clone();
        g0.sort_by(f64::total_cmp);
        g1.sort_by(f64::total_cmp);
        for (x, y) in g0.iter().zip(&g1) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn volume_decreases_with_each_parameter(b in betas(4), k in 0usize..4, h in 1e-4f64..1e-2) {
        let k = k % b.len();
        prop_assume!(b[k] - h > -1.0);
        let v0 = ConformalDivisor::new(b.clone()).unwrap().normalized_total_volume();
        let mut lower = b.clone();
        lower[k] -= h;
        let v1 = ConformalDivisor::new(lower).unwrap().normalized_total_volume();
        prop_assert!(v1 < v0, "{} !< {}", v1, v0);
    }

    #[test]
    fn float_gaps_match_oracle(b in betas(6)) {
        let d = ConformalDivisor::new(b.clone()).unwrap();
        for (j, g) in d.gaps().into_iter().enumerate() {
            prop_assert!((g - gap_oracle(&b, j)).abs() <= 1e-12);
        }
    }
}
