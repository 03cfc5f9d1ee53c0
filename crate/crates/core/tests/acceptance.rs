//! The eight acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use kantorovich::couplings::{Coupler, CouplingRule, EulerCoupler, MixedParams};
use kantorovich::model::{Drift, EulerModel, Kappa};
use kantorovich::montecarlo::{contraction_audit, estimate_coupling_stats, map_steps, verify_marginals, AuditReport};
use kantorovich::noise::NoiseSpec;
use kantorovich::rates::{
    certify_euler, noise_rate_comparison, AssumptionA, AssumptionB, ComparisonSetup, CouplingKind,
    CouplingStatsProfile, EulerPath, LyapunovData,
};
use kantorovich::rho::{
    build_tv_distance, build_w1_distance, build_weighted_tv_distance, build_wp_distance, check_shape, ConcavityProfile,
    LyapunovFn, RhoSpec, SHAPE_POINTS,
};
use kantorovich::rng::Streams;

use common::{lattice_cases, mixed_rule, oracle_vs_mc};

type Check = Result<String, String>;

fn tanh_drift() -> Drift {
    Drift::LinearTanh { a: 1.0, s: 2.0 }
}

/// `b(x) = −x + 2 tanh x` with `L = 1`, `K = ½`, `𝓡 = 8`.
fn tanh_model(h: f64, g: f64, kappa: Kappa) -> EulerModel {
    let constants = tanh_drift().constants(1, Some(0.5), None).unwrap();
    EulerModel::new(tanh_drift(), constants, h, g, kappa, 1.0, 1).unwrap()
}

fn marginal_correctness() -> Check {
    let pairs = [(0.0, 0.3), (0.0, 1.0), (-1.0, 1.5), (2.0, -3.0), (0.5, 0.5)];
    let rules = [
        CouplingRule::RefinedBasic,
        CouplingRule::Reflection,
        CouplingRule::Mixed(MixedParams::new(4.0, 1.5).unwrap()),
    ];
    let streams = Streams::new(1);
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for noise in [NoiseSpec::gaussian(1).unwrap(), NoiseSpec::cauchy(1).unwrap()] {
        for rule in rules {
            let c = EulerCoupler::new(tanh_model(0.1, 1.0, Kappa::Finite(1.0)), noise.clone(), rule).unwrap();
            for (x, y) in pairs {
                let report = verify_marginals(&c, &[x], &[y], 100_000, &streams).map_err(|e| e.to_string())?;
                worst = worst.min(report.p_x.min(report.p_y));
                if !report.passed {
                    failures.push(format!("{} {} ({x}, {y})", noise.key(), rule.kind().label()));
                }
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("30 KS tests, smallest p = {worst:.4}"))
    } else {
        Err(format!("rejected: {}", failures.join(", ")))
    }
}

fn mean_preservation() -> Check {
    let pairs = [
        (0.0, 0.1),
        (0.0, 0.5),
        (0.0, 1.0),
        (-1.0, 1.0),
        (0.3, 2.3),
        (-4.0, 1.0),
        (2.0, 7.0),
        (0.0, -10.0),
        (5.0, -5.0),
        (1.0, 1.05),
    ];
    let streams = Streams::new(2);
    let model = tanh_model(0.1, 1.0, Kappa::Finite(1.0));
    let mut worst: f64 = 0.0;
    for rule in [CouplingRule::RefinedBasic, CouplingRule::Reflection] {
        let c = EulerCoupler::new(model.clone(), NoiseSpec::gaussian(1).unwrap(), rule).unwrap();
        for (x, y) in pairs {
            let est = estimate_coupling_stats(&c, &[x], &[y], &[], 100_000, &streams).map_err(|e| e.to_string())?;
            let r_hat = (model.drift_step(&[x])[0] - model.drift_step(&[y])[0]).abs();
            let gap = (est.beta_hat.mean - (r_hat - (x - y).abs())).abs();
            let ratio = gap / (3.0 * est.beta_hat.se);
            if ratio > 1.0 {
                return Err(format!("{} ({x}, {y}): gap {gap:e} > 3 SE", rule.kind().label()));
            }
            worst = worst.max(ratio);
        }
    }
    Ok(format!("20 pairs, largest gap {worst:.2} x 3 SE"))
}

fn audit_points() -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..20).map(|i| 0.01 * 2000f64.powf(i as f64 / 19.0)).map(|r| (vec![r / 2.0], vec![-r / 2.0])).collect()
}

/// The Gaussian and Cauchy audits of the tanh drift.
fn contraction_audits() -> Vec<(&'static str, AuditReport)> {
    let instances = [
        ("gaussian", tanh_model(0.01, 3.0, Kappa::Finite(3.0)), NoiseSpec::gaussian(1).unwrap()),
        ("cauchy", tanh_model(0.01, 0.3, Kappa::Unbounded), NoiseSpec::cauchy(1).unwrap()),
    ];
    instances
        .into_iter()
        .map(|(name, model, noise)| {
            let cert = certify_euler(&model, &noise, CouplingKind::RefinedBasic, EulerPath::Tv).unwrap();
            let c = EulerCoupler::new(model, noise, CouplingRule::RefinedBasic).unwrap();
            let report = contraction_audit(&c, &cert.rho, &cert, &audit_points(), 100_000, &Streams::new(7)).unwrap();
            (name, report)
        })
        .collect()
}

fn certified_contraction(audits: &[(&str, AuditReport)]) -> Check {
    let summary: Vec<String> =
        audits.iter().map(|(name, r)| format!("{name}: c* = {:.3e}, pass rate {}", r.c_star, r.pass_rate)).collect();
    if audits.iter().all(|(_, r)| r.passed) {
        Ok(summary.join("; "))
    } else {
        Err(summary.join("; "))
    }
}

fn oracle_equivalence() -> Check {
    let streams = Streams::new(2024);
    let mut compared = 0;
    for rule in [CouplingRule::RefinedBasic, CouplingRule::Reflection, mixed_rule()] {
        for case in lattice_cases(rule) {
            for (stat, gap, bound) in oracle_vs_mc(&case, 100_000, &streams) {
                if gap > bound + 1e-12 {
                    return Err(format!("{} {} {stat}: gap {gap:e} > {bound:e}", rule.kind().label(), case.name));
                }
                compared += 1;
            }
        }
    }
    // refined basic: R ∈ {r̂ − r̂∧κ, r̂, r̂ + r̂∧κ}, once below and once above κ = 1
    for (x, y) in [(0.0, 0.5), (0.0, 3.0)] {
        support_reproduced(x, y, &streams)?;
    }
    Ok(format!("{compared} oracle statistics within 3 SE; three-point support reproduced"))
}

fn support_reproduced(x: f64, y: f64, streams: &Streams) -> Result<(), String> {
    let model = tanh_model(0.1, 1.0, Kappa::Finite(1.0));
    let r_hat = (model.drift_step(&[x])[0] - model.drift_step(&[y])[0]).abs();
    let c = EulerCoupler::new(model, NoiseSpec::gaussian(1).unwrap(), CouplingRule::RefinedBasic).unwrap();
    let k = r_hat.min(1.0);
    let support = [r_hat - k, r_hat, r_hat + k];
    let mut seen = [false; 3];
    let slots = map_steps(&c, &[x], &[y], 50_000, streams, 0, |s| {
        support.iter().position(|&v| s.r_after == v || (s.r_after - v).abs() <= 1e-12 * r_hat)
    })
    .map_err(|e| e.to_string())?;
    for slot in slots {
        seen[slot.ok_or("a step left the three-point support")?] = true;
    }
    if seen != [true; 3] {
        return Err(format!("support points reached from ({x}, {y}): {seen:?}"));
    }
    Ok(())
}

fn shape_suite() -> Check {
    let profile = CouplingStatsProfile::new(|_| 1.0, |r| if r <= 1.0 { 0.01 * r } else { -0.1 * r }, |_, _| 0.0);
    let q = AssumptionA::new(1.0, 1.0, 0.1, profile).unwrap();
    let b = |r1: f64, c0: f64| {
        let profile = CouplingStatsProfile::new(|_| 0.0, move |r| -c0 * r, |r, _| 0.2 * r);
        AssumptionB::new(profile, ConcavityProfile::identity(), 0.5, r1, c0).unwrap()
    };
    let weighted = {
        let profile = CouplingStatsProfile::new(|_| 1.0, |r| -0.1 * r, |_, _| 1.0);
        let q = AssumptionA::without_far_field(0.5, 1.0, profile).unwrap();
        let lyap = LyapunovData {
            v: LyapunovFn::power(2.0).unwrap(),
            lambda: 0.5,
            c0: 1.0,
            k: 1.0,
            r1: 1.0,
            notes: Vec::new(),
        };
        build_weighted_tv_distance(&q, &lyap).unwrap()
    };
    let specs: Vec<RhoSpec> = vec![
        build_tv_distance(&q, true).unwrap(),
        build_tv_distance(&q, false).unwrap(),
        weighted,
        build_w1_distance(&b(1.0, 0.1)).unwrap(),
        build_wp_distance(&b(1.5, 0.1), 3.0, 0.0, Some(10.0)).unwrap(),
        build_wp_distance(&b(3.0, 1.0), 2.5, 0.5, None).unwrap(),
    ];
    let mut inflection = None;
    for spec in &specs {
        let report = check_shape(spec, SHAPE_POINTS);
        if !report.passed() {
            return Err(format!("{:?}: {report:?}", spec.kind()));
        }
        if let Some(v) = report.inflection_residual {
            inflection = Some(inflection.map_or(v, |w: f64| w.max(v)));
        }
    }
    match inflection {
        Some(v) => Ok(format!("{} distances on {SHAPE_POINTS}-point grids, inflection residual {v:.1e}", specs.len())),
        None => Err("no inflection residual reported for the Lp distances".into()),
    }
}

fn jump_bound() -> Check {
    let model = tanh_model(0.1, 0.5, Kappa::Finite(0.5));
    let params = MixedParams::new(model.radius(), 3.0).unwrap();
    let l = params.jump_bound(&model);
    let c = EulerCoupler::new(model, NoiseSpec::gaussian(1).unwrap(), CouplingRule::Mixed(params)).unwrap();
    let mut rng = Streams::new(6).rng(0, 0);
    let (mut x, mut y) = (vec![0.0], vec![12.0]);
    let (mut violations, mut restarts) = (0, 0);
    for i in 0..1_000_000u32 {
        let s = c.step(&x, &y, &mut rng).map_err(|e| e.to_string())?;
        if s.r_after > s.r_before + l {
            violations += 1;
        }
        (x, y) = (s.x, s.y);
        if s.coalesced {
            // spread the pair again so every step exercises a non-trivial coupling
            y[0] = x[0] + [0.3, 2.0, 6.0, 12.0][i as usize % 4];
            restarts += 1;
        }
    }
    if violations == 0 {
        Ok(format!("10^6 steps, l = {l:.3}, {restarts} re-spreads after coalescence"))
    } else {
        Err(format!("{violations} violations of l = {l}"))
    }
}

fn noise_comparison() -> Check {
    let radii: Vec<f64> = (0..10).map(|i| 5.0 * 10f64.powf(i as f64 / 9.0)).collect();
    let setup =
        |sigma| ComparisonSetup { lipschitz: 0.1, dissipativity: 0.1, sigma, coupling: CouplingKind::RefinedBasic };
    let stable: Vec<NoiseSpec> = [1.2, 1.5, 1.8].iter().map(|&a| NoiseSpec::stable(a, 1).unwrap()).collect();
    let heavy = noise_rate_comparison(&setup(0.5), &stable, &radii, &[1.0]).map_err(|e| e.to_string())?;
    let gaussian = NoiseSpec::gaussian(1).unwrap();
    let light = noise_rate_comparison(&setup(1.0), std::slice::from_ref(&gaussian), &radii, &[1.0])
        .map_err(|e| e.to_string())?;
    let mut slopes = Vec::new();
    for noise in &stable {
        let (alpha, slope) = (noise.alpha().unwrap(), heavy.slope(&noise.key()).unwrap());
        if (slope + alpha).abs() > 0.15 {
            return Err(format!("α = {alpha}: slope {slope:.3}"));
        }
        slopes.push(format!("{slope:.3}"));
    }
    let c1_gauss = light.row(&gaussian.key(), 50.0).unwrap().c1;
    let c1_heavy = stable.iter().map(|n| heavy.row(&n.key(), 50.0).unwrap().c1).fold(f64::INFINITY, f64::min);
    if c1_gauss * 1e3 > c1_heavy {
        return Err(format!("Gaussian c1(50) = {c1_gauss:e} vs smallest stable {c1_heavy:e}"));
    }
    Ok(format!("slopes {}; c1(50): Gaussian {c1_gauss:.1e}, smallest stable {c1_heavy:.1e}", slopes.join(", ")))
}

fn determinism() -> (Vec<(&'static str, AuditReport)>, Check) {
    let in_pool = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let audits = pool.install(contraction_audits);
        let bytes: Vec<String> = audits.iter().map(|(_, r)| serde_json::to_string(r).unwrap() + &r.to_csv()).collect();
        (audits, bytes)
    };
    let (audits, four) = in_pool(4);
    let (_, one) = in_pool(1);
    let check = if four == one {
        Ok(format!("1 and 4 worker reports identical ({} bytes)", four.iter().map(String::len).sum::<usize>()))
    } else {
        Err("reports differ between 1 and 4 workers".into())
    };
    (audits, check)
}

fn report(index: usize, name: &str, limit: Option<Duration>, elapsed: Duration, check: Check) -> bool {
    let (mut passed, mut detail) = match check {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if let Some(limit) = limit.filter(|&l| elapsed > l) {
        passed = false;
        detail = format!("{detail}; exceeded {limit:?}");
    }
    println!("{} criterion {index} {name} [{:.1?}]: {detail}", if passed { "PASS" } else { "FAIL" }, elapsed);
    passed
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let mut results = Vec::new();
    let (check, t) = timed(marginal_correctness);
    results.push(report(1, "marginal correctness", secs(60), t, check));
    let (check, t) = timed(mean_preservation);
    results.push(report(2, "mean preservation", secs(30), t, check));
    // criterion 3 runs inside the two pools of criterion 8; the timing covers both runs
    let ((audits, det), t) = timed(determinism);
    results.push(report(3, "certified contraction", secs(240), t, certified_contraction(&audits)));
    let (check, t) = timed(oracle_equivalence);
    results.push(report(4, "discrete oracle", secs(60), t, check));
    let (check, t) = timed(shape_suite);
    results.push(report(5, "distance shapes", secs(10), t, check));
    let (check, t) = timed(jump_bound);
    results.push(report(6, "mixed jump bound", secs(60), t, check));
    let (check, t) = timed(noise_comparison);
    results.push(report(7, "noise comparison", secs(10), t, check));
    results.push(report(8, "determinism", None, t, det));
    let failed = results.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
