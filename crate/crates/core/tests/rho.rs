use kantorovich::rates::{AssumptionA, AssumptionB, CouplingStatsProfile, LyapunovData};
use kantorovich::rho::{
    build_tv_distance, build_w1_distance, build_weighted_tv_distance, build_wp_distance, check_shape, ConcavityProfile,
    LyapunovFn, RhoSpec, SHAPE_POINTS,
};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

fn tv_assumption() -> AssumptionA {
    let profile = CouplingStatsProfile::new(|_| 1.0, |r| if r <= 1.0 { 0.01 * r } else { -0.1 * r }, |_, _| 0.0);
    AssumptionA::new(1.0, 1.0, 0.1, profile).unwrap()
}

fn b_assumption(r1: f64, l0: f64) -> AssumptionB {
    b_assumption_with_drift(r1, l0, 0.1)
}

fn b_assumption_with_drift(r1: f64, l0: f64, c0: f64) -> AssumptionB {
    let profile = CouplingStatsProfile::new(|_| 0.0, move |r| -c0 * r, |r, _| 0.2 * r);
    AssumptionB::new(profile, ConcavityProfile::identity(), l0, r1, c0).unwrap()
}

fn weighted_tv() -> RhoSpec {
    let profile = CouplingStatsProfile::new(|_| 1.0, |r| -0.1 * r, |_, _| 1.0);
    let q = AssumptionA::without_far_field(0.5, 1.0, profile).unwrap();
    let lyap =
        LyapunovData { v: LyapunovFn::power(2.0).unwrap(), lambda: 0.5, c0: 1.0, k: 1.0, r1: 1.0, notes: Vec::new() };
    build_weighted_tv_distance(&q, &lyap).unwrap()
}

#[test]
fn simplified_tv_jump() {
    let rho = build_tv_distance(&tv_assumption(), true).unwrap();
    assert!(close(rho.jump(), 1.0273575888234288, 1e-14));
    assert_eq!(rho.c(), 1.0);
}

#[test]
fn tv_cancels_at_r1_and_jumps_off_the_diagonal() {
    let rho = RhoSpec::Tv { a: 1.0, c: 1.0, r1: 1.0, simplified: false };
    assert!((rho.radial(1.0) - 1.0).abs() < 1e-15);
    assert!((rho.eval(&[0.0, 0.0], &[0.6, 0.8]).unwrap() - 2.0).abs() < 1e-15);
    assert_eq!(rho.eval(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
}

#[test]
fn tv_comparability_sandwich() {
    let rho = build_tv_distance(&tv_assumption(), false).unwrap();
    let (lo, hi) = rho.comparability_bounds();
    assert!(close(lo * hi, 1.0, 1e-12));
    for i in 1..=1000 {
        let r = i as f64 * 0.05;
        let indicator_plus_r = 1.0 + r;
        let value = rho.eval(&[0.0], &[r]).unwrap();
        assert!(lo * indicator_plus_r <= value * (1.0 + 1e-12) && value <= hi * indicator_plus_r * (1.0 + 1e-12));
    }
}

#[test]
fn weighted_tv_constants() {
    let rho = weighted_tv();
    let RhoSpec::WeightedTv { big_a, c, epsilon, r1, simplified, .. } = rho else { panic!("kind") };
    assert!(!simplified);
    assert!(close(big_a, 32.0, 1e-14));
    assert!(close(c, 33.0, 1e-14));
    assert!(close(epsilon, c * c * (-c * r1).exp() / 8.0, 1e-14));
}

#[test]
fn weighted_tv_epsilon_reference() {
    // c = 1, r1 = 1, inf α = 0.1, C0 = 1
    let epsilon: f64 = (-1.0f64).exp() * 0.1 / 8.0;
    assert!(close(epsilon, 0.0045984930146430, 1e-13));
}

#[test]
fn weighted_tv_vanishes_on_the_diagonal() {
    let rho = weighted_tv();
    assert_eq!(rho.eval(&[7.0], &[7.0]).unwrap(), 0.0);
    assert!(rho.eval(&[0.0], &[1e-9]).unwrap() > 0.0);
}

#[test]
fn w1_head_and_origin() {
    let rho = build_w1_distance(&b_assumption(1.0, 0.5)).unwrap();
    assert_eq!(rho.c(), 1.0);
    assert_eq!(rho.radial(0.0), 0.0);
    assert!(close(rho.radial(1.0), 1.0 - (-1.0f64).exp(), 1e-12));
    let end = 1.5;
    let (below, above) = (rho.jet(end - 1e-12), rho.jet(end + 1e-12));
    assert!((below.value - above.value).abs() < 1e-9);
    assert!((below.d1 - above.d1).abs() < 1e-9);
    assert!((below.d2 - above.d2).abs() < 1e-9);
}

#[test]
fn wp_tail_coefficient_and_inflection() {
    let rho = build_wp_distance(&b_assumption(1.5, 0.5), 3.0, 0.0, Some(10.0)).unwrap();
    let RhoSpec::Wp { big_a, k, .. } = &rho else { panic!("kind") };
    assert_eq!(*k, 10.0);
    let expected = (1.0 / 6.0) * (1.0 / 20.0) * (-(2.0f64 + 20.0)).exp();
    assert!(close(*big_a, expected, 1e-12));
    assert_eq!(rho.radial(0.0), 0.0);
    assert!(rho.jet(22.0).d2.abs() < 1e-9);
    assert_eq!(rho.inflection(), Some(22.0));
}

#[test]
fn shape_suite_passes_for_every_kind() {
    let q = tv_assumption();
    let specs = [
        build_tv_distance(&q, true).unwrap(),
        build_tv_distance(&q, false).unwrap(),
        weighted_tv(),
        build_w1_distance(&b_assumption(1.0, 0.5)).unwrap(),
        build_wp_distance(&b_assumption(1.5, 0.5), 3.0, 0.0, Some(10.0)).unwrap(),
        build_wp_distance(&b_assumption_with_drift(3.0, 0.5, 1.0), 2.5, 0.5, None).unwrap(),
    ];
    for spec in &specs {
        let report = check_shape(spec, SHAPE_POINTS);
        assert!(report.passed(), "{:?}: {report:?}", spec.kind());
    }
}
