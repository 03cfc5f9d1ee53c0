use kantorovich::couplings::{
    reflect, truncate_kappa, Branch, CoupledStep, Coupler, CouplingRule, EulerCoupler, MixedParams,
};
use kantorovich::error::Error;
use kantorovich::model::{Drift, DriftConstants, EulerModel, Kappa};
use kantorovich::montecarlo::{estimate_coupling_stats, map_steps};
use kantorovich::noise::NoiseSpec;
use kantorovich::rng::Streams;
use kantorovich::stats::Estimate;

fn linear(h: f64, g: f64, kappa: Kappa) -> EulerModel {
    let constants = DriftConstants { lipschitz: 1.0, dissipativity: 1.0, radius: 1.0 };
    EulerModel::new(Drift::Linear { m: 1.0 }, constants, h, g, kappa, 1.0, 1).unwrap()
}

fn coupler(model: EulerModel, rule: CouplingRule) -> EulerCoupler {
    EulerCoupler::new(model, NoiseSpec::gaussian(1).unwrap(), rule).unwrap()
}

fn steps(c: &EulerCoupler, x: f64, y: f64, n: usize, seed: u64) -> Vec<CoupledStep> {
    map_steps(c, &[x], &[y], n, &Streams::new(seed), 0, |s| s.clone()).unwrap()
}

#[test]
fn truncation_examples() {
    assert_eq!(truncate_kappa(&[0.3, 0.4], 1.0), vec![0.3, 0.4]);
    let t = truncate_kappa(&[3.0, 0.0], 1.0);
    assert!((t[0] - 1.0).abs() < 1e-15 && t[1] == 0.0);
    assert_eq!(truncate_kappa(&[1e6, -4.0], f64::INFINITY), vec![1e6, -4.0]);
}

#[test]
fn reflection_examples() {
    assert_eq!(reflect(&[1.0, 0.0], &[0.0, 0.0], &[1.0, 0.0]), vec![-1.0, 0.0]);
    let (x_hat, y_hat) = ([0.3, -1.2, 2.0], [1.1, 0.4, -0.5]);
    let z = [0.7, -0.2, 1.9];
    let back = reflect(&x_hat, &y_hat, &reflect(&x_hat, &y_hat, &z));
    back.iter().zip(&z).for_each(|(a, b)| assert!((a - b).abs() < 1e-14));
    let norm = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    assert!((norm(&reflect(&x_hat, &y_hat, &z)) - norm(&z)).abs() < 1e-14);
    let g = 0.7;
    let toward: Vec<f64> = y_hat.iter().zip(&x_hat).map(|(a, b)| a - b).collect();
    let away: Vec<f64> = toward.iter().map(|v| -v).collect();
    let lhs = reflect(&x_hat, &y_hat, &truncate_kappa(&toward, 1.5).iter().map(|v| v / g).collect::<Vec<_>>());
    let rhs: Vec<f64> = truncate_kappa(&away, 1.5).iter().map(|v| v / g).collect();
    lhs.iter().zip(&rhs).for_each(|(a, b)| assert!((a - b).abs() < 1e-14));
}

#[test]
fn equal_starts_stay_together() {
    let model = linear(0.1, 1.0, Kappa::Finite(1.0));
    for rule in
        [CouplingRule::RefinedBasic, CouplingRule::Reflection, CouplingRule::Mixed(MixedParams::new(2.0, 3.0).unwrap())]
    {
        for s in steps(&coupler(model.clone(), rule), 0.4, 0.4, 2000, 1) {
            assert!(s.coalesced);
            assert_eq!(s.x, s.y);
        }
    }
}

#[test]
fn refined_basic_support_is_three_points() {
    // r̂ = (1 − h)|x − y| = 0.5 and κ = 1
    let c = coupler(linear(0.1, 1.0, Kappa::Finite(1.0)), CouplingRule::RefinedBasic);
    let mut seen = [false; 3];
    for s in steps(&c, 0.0, 5.0 / 9.0, 50_000, 2) {
        assert!((s.r_hat - 0.5).abs() < 1e-12);
        let slot = [0.0, 1.0, 0.5].iter().position(|&v| (s.r_after - v).abs() < 1e-12);
        let slot = slot.unwrap_or_else(|| panic!("r_after = {} outside the support", s.r_after));
        seen[slot] = true;
        assert_eq!(s.coalesced, slot == 0);
        if s.coalesced {
            assert_eq!(s.x, s.y);
        }
    }
    assert_eq!(seen, [true; 3]);
}

#[test]
fn refined_basic_support_with_truncation() {
    // r̂ = 2 > κ = 0.5: moves by ±κ only
    let c = coupler(linear(0.2, 1.0, Kappa::Finite(0.5)), CouplingRule::RefinedBasic);
    for s in steps(&c, 1.0, -1.5, 20_000, 3) {
        let r_hat = s.r_hat;
        let k = r_hat.min(0.5);
        assert!([r_hat - k, r_hat, r_hat + k].iter().any(|v| (s.r_after - v).abs() < 1e-12));
        assert!(!s.coalesced);
    }
}

#[test]
fn reflection_preserves_the_mean_distance() {
    let c = coupler(linear(0.1, 1.0, Kappa::Finite(1.0)), CouplingRule::Reflection);
    let after: Vec<f64> = steps(&c, 0.0, 0.5, 1_000_000, 4).iter().map(|s| s.r_after).collect();
    let est = Estimate::from_samples(&after);
    let r_hat = 0.45;
    assert!((est.mean - r_hat).abs() <= 4.0 * est.se, "{} vs {r_hat} (se {})", est.mean, est.se);
}

#[test]
fn reflection_coalesces_at_least_with_overlap_probability() {
    let (g, kappa) = (0.8, 1.0);
    let c = coupler(linear(0.1, g, Kappa::Finite(kappa)), CouplingRule::Reflection);
    let j = NoiseSpec::gaussian(1).unwrap().overlap_j(kappa / g).unwrap();
    for (x, y) in [(0.0, 0.3), (0.0, 1.0), (-0.5, 0.6)] {
        let est = estimate_coupling_stats(&c, &[x], &[y], &[], 100_000, &Streams::new(5)).unwrap();
        assert!(est.pi_hat.mean + 3.0 * est.pi_hat.se >= j, "({x}, {y}): {} < {j}", est.pi_hat.mean);
    }
}

#[test]
fn mixed_is_synchronous_beyond_the_switch() {
    let c = coupler(linear(0.1, 1.0, Kappa::Finite(1.0)), CouplingRule::Mixed(MixedParams::new(1.0, 2.0).unwrap()));
    for s in steps(&c, 0.0, 1.5, 5000, 6) {
        assert_eq!(s.branch, Branch::Synchronous);
        assert!((s.r_after - s.r_hat).abs() < 1e-12);
    }
}

#[test]
fn mixed_jump_bound_holds_on_every_step() {
    let drift = Drift::LinearTanh { a: 1.0, s: 2.0 };
    let constants = drift.constants(1, Some(0.5), None).unwrap();
    let model = EulerModel::new(drift, constants, 0.1, 0.5, Kappa::Finite(0.5), 1.0, 1).unwrap();
    let params = MixedParams::new(constants.radius, 3.0).unwrap();
    let l = params.jump_bound(&model);
    let c = coupler(model, CouplingRule::Mixed(params));
    for (x, y) in [(0.0, 0.2), (-1.0, 1.0), (3.0, -4.0), (0.0, 8.0), (0.0, 12.0)] {
        for s in steps(&c, x, y, 200_000, 7) {
            assert!(s.r_after <= s.r_before + l, "{} > {} + {l}", s.r_after, s.r_before);
        }
    }
}

#[test]
fn mixed_with_huge_caps_matches_reflection() {
    let model = linear(0.1, 1.0, Kappa::Finite(1.0));
    let mixed = coupler(model.clone(), CouplingRule::Mixed(MixedParams::new(1e9, 1e9).unwrap()));
    let reflection = coupler(model, CouplingRule::Reflection);
    let streams = Streams::new(8);
    let a = estimate_coupling_stats(&mixed, &[0.0], &[0.8], &[0.5], 100_000, &streams).unwrap();
    let b = estimate_coupling_stats(&reflection, &[0.0], &[0.8], &[0.5], 100_000, &streams).unwrap();
    for (u, v) in [(a.pi_hat, b.pi_hat), (a.beta_hat, b.beta_hat), (a.alpha_hat[0].estimate, b.alpha_hat[0].estimate)] {
        assert!((u.mean - v.mean).abs() <= 3.0 * (u.se * u.se + v.se * v.se).sqrt());
    }
}

#[test]
fn linear_drift_mean_change() {
    let c = coupler(linear(0.1, 1.0, Kappa::Finite(1.0)), CouplingRule::RefinedBasic);
    let est = estimate_coupling_stats(&c, &[0.0], &[1.0], &[], 100_000, &Streams::new(9)).unwrap();
    assert!((est.beta_hat.mean + 0.1).abs() <= 3.0 * est.beta_hat.se);
}

#[test]
fn reflection_needs_radial_monotone_noise() {
    let model = linear(0.1, 1.0, Kappa::Finite(1.0));
    let noise = NoiseSpec::nonisotropic(0.5, 1).unwrap();
    let err = EulerCoupler::new(model, noise, CouplingRule::Reflection).unwrap_err();
    assert_eq!(err, Error::ConditionC4Violated);
}

#[test]
fn dimension_mismatch_is_reported() {
    let c = coupler(linear(0.1, 1.0, Kappa::Unbounded), CouplingRule::RefinedBasic);
    let mut rng = Streams::new(1).rng(0, 0);
    assert!(matches!(c.step(&[0.0, 1.0], &[0.0, 1.0], &mut rng), Err(Error::DimensionMismatch { .. })));
}
