use std::sync::Arc;

use rand::Rng;

use super::*;
use crate::model::{Drift, DriftConstants, EulerModel, Kappa};
use crate::noise::{NoiseSpec, RadialDensity};
use crate::rho::{build_w1_distance, LyapunovFn};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

fn flat_profile(pi: f64, c0: f64, r1: f64) -> CouplingStatsProfile {
    CouplingStatsProfile::new(move |_| pi, move |r| if r <= r1 { 0.01 * r } else { -c0 * r }, |_, _| 0.0)
}

// Laplace law with scale 1/(2 log 2): J at distance 1 is e^{-1/(2s)} = 1/2
fn laplace_noise() -> NoiseSpec {
    let scale = 0.5 / std::f64::consts::LN_2;
    let density = RadialDensity {
        density: Arc::new(move |r| (-r / scale).exp() / (2.0 * scale)),
        sampler: Arc::new(move |rng, out| {
            let u: f64 = rng.random_range(-0.5..0.5);
            out[0] = -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        }),
        monotone: true,
        first_moment: true,
    };
    NoiseSpec::radial(density, 1).unwrap()
}

#[test]
fn simplified_tv_constants() {
    let q = AssumptionA::new(1.0, 1.0, 0.1, flat_profile(0.5, 0.1, 1.0)).unwrap();
    let rho = RhoSpec::Tv { a: 9.0, c: 1.0, r1: 1.0, simplified: true };
    let cert = c_star_tv(&q, &rho).unwrap();
    assert!(close(cert.constant("c1").unwrap(), 0.217016412349966, 1e-12));
    assert!(close(cert.constant("c3").unwrap(), 0.00354826117779275, 1e-12));
    assert_eq!(cert.c_star, cert.constant("c3").unwrap());
    assert_eq!(cert.theorem, "tv");
}

#[test]
fn vanishing_overlap_violates_a1() {
    let err = AssumptionA::new(1.0, 1.0, 0.1, flat_profile(0.0, 0.1, 1.0)).unwrap_err();
    assert_eq!(err.to_string(), "assumption A violated: a1");
}

fn lyapunov_at(r1: f64) -> LyapunovData {
    LyapunovData { v: LyapunovFn::power(2.0).unwrap(), lambda: 0.5, c0: 1.0, k: 1.0, r1, notes: Vec::new() }
}

#[test]
fn weighted_tv_first_and_fourth_constants() {
    // c e^{-c r1} = 0.32 makes c3 = λ c e^{-c r1}/(16 C0) = 0.01
    let r1 = 1.1394342831883648;
    let q = AssumptionA::without_far_field(r1, r1, flat_profile(0.4, 0.0, f64::INFINITY)).unwrap();
    let rho = RhoSpec::WeightedTv {
        a: 3.0,
        c: 1.0,
        epsilon: 0.005,
        r1,
        big_a: 0.0,
        simplified: true,
        lyapunov: LyapunovFn::power(2.0).unwrap(),
    };
    let cert = c_star_weighted_tv(&q, &lyapunov_at(r1), &rho).unwrap();
    assert!(close(cert.constant("c1").unwrap(), 0.15, 1e-12));
    assert!(close(cert.constant("c3").unwrap(), 0.01, 1e-12));
    assert!(close(cert.constant("c4").unwrap(), 0.01, 1e-12));
    assert_eq!(cert.c_star, cert.constant("c4").unwrap());
}

#[test]
fn weighted_tv_rejects_lambda_outside_unit_interval() {
    let q = AssumptionA::without_far_field(1.0, 1.0, flat_profile(0.4, 0.0, f64::INFINITY)).unwrap();
    let mut lyap = lyapunov_at(1.0);
    let rho = RhoSpec::WeightedTv {
        a: 3.0,
        c: 1.0,
        epsilon: 0.005,
        r1: 1.0,
        big_a: 0.0,
        simplified: true,
        lyapunov: lyap.v.clone(),
    };
    lyap.lambda = 1.5;
    assert_eq!(c_star_weighted_tv(&q, &lyap, &rho).unwrap_err(), Error::LambdaOutOfRange);
}

fn w1_assumption(c0: f64) -> AssumptionB {
    let profile = CouplingStatsProfile::new(|_| 0.0, |r| -0.1 * r, |r, _| 0.2 * r);
    AssumptionB::new(profile, ConcavityProfile::identity(), 0.5, 0.5, c0).unwrap()
}

#[test]
fn w1_constants_for_identity_profile() {
    let q = w1_assumption(0.1);
    let rho = build_w1_distance(&q).unwrap();
    assert_eq!(rho.c(), 1.0);
    let cert = c_star_w1(&q, &rho).unwrap();
    assert!(close(cert.constant("c1").unwrap(), 0.0735758882342885, 1e-9));
    assert!(close(cert.constant("c2").unwrap(), 0.0183939720585721, 1e-9));
}

#[test]
fn w1_without_far_contraction_is_not_contractive() {
    let q = w1_assumption(0.0);
    let rho = build_w1_distance(&q).unwrap();
    assert!(matches!(c_star_w1(&q, &rho), Err(Error::NotContractive(_))));
}

fn linear_model(h: f64, g: f64, kappa: Kappa) -> EulerModel {
    let constants = DriftConstants { lipschitz: 1.0, dissipativity: 1.0, radius: 2.0 };
    EulerModel::new(Drift::Linear { m: 1.0 }, constants, h, g, kappa, 1.0, 1).unwrap()
}

#[test]
fn finite_truncation_constants_per_coupling() {
    let model = linear_model(0.01, 0.1, Kappa::Finite(0.1));
    let noise = laplace_noise();
    for (kind, c, a) in [(CouplingKind::RefinedBasic, 257.0, 3.056), (CouplingKind::Reflection, 129.0, 1.516)] {
        let cert = certify_euler(&model, &noise, kind, EulerPath::Tv).unwrap();
        assert!(close(cert.rho.c(), c, 1e-9), "{kind:?}: c = {}", cert.rho.c());
        assert!(close(cert.rho.jump(), a, 1e-9), "{kind:?}: a = {}", cert.rho.jump());
    }
}

#[test]
fn finite_truncation_requires_small_step_ratio() {
    let model = linear_model(0.01, 0.01, Kappa::Finite(0.01));
    let err = certify_euler(&model, &laplace_noise(), CouplingKind::RefinedBasic, EulerPath::Tv).unwrap_err();
    assert_eq!(err, Error::StepSizeTooLarge("h/g <= kappa0/(2 L R)"));
}

#[test]
fn quadratic_lyapunov_constants() {
    let model = linear_model(0.1, 0.1f64.sqrt(), Kappa::Unbounded);
    let noise = NoiseSpec::gaussian(1).unwrap();
    let drift = DriftBound { m1: 1.0, m2: 1.0, threshold: 1.0 };
    let lyap = lyapunov_drift_certificate(&model, &noise, 2.0, drift).unwrap();
    assert!(close(lyap.lambda, 0.18, 1e-12));
    assert!(close(lyap.c0, 0.32, 1e-12));
}

#[test]
fn stable_noise_lacks_high_moments() {
    let model = linear_model(0.1, 0.1, Kappa::Unbounded);
    let noise = NoiseSpec::stable(1.5, 1).unwrap();
    let drift = DriftBound { m1: 1.0, m2: 1.0, threshold: 1.0 };
    assert_eq!(lyapunov_drift_certificate(&model, &noise, 1.8, drift).unwrap_err(), Error::MomentUnavailable);
}

#[test]
fn certificate_refuses_failed_flags() {
    let q = AssumptionA::new(1.0, 1.0, 0.1, flat_profile(0.5, 0.1, 1.0)).unwrap();
    let rho = RhoSpec::Tv { a: 1.0, c: 1.0, r1: 1.0, simplified: true };
    // a = 1 is below 2(1 + e^{-1}) sup β/π + 1
    assert!(matches!(c_star_tv(&q, &rho), Err(Error::CertificateRefused(_))));
}
