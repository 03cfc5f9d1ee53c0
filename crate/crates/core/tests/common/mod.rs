#![allow(dead_code)]

use kantorovich::couplings::{CouplingRule, MixedParams};
use kantorovich::model::{Drift, DriftConstants, EulerModel, Kappa};
use kantorovich::montecarlo::{estimate_coupling_stats, map_steps, oracle_exact, OracleInstance};
use kantorovich::noise::{LatticePmf, NoiseSpec};
use kantorovich::rho::RhoSpec;
use kantorovich::rng::Streams;
use kantorovich::stats::Estimate;

pub const L_VALUES: [f64; 2] = [0.05, 0.5];

/// A lattice instance with one state pair; `b(x) = −x` and `h = 1/2`, so `r̂ = |x − y|/2`.
pub struct LatticeCase {
    pub name: &'static str,
    pub inst: OracleInstance,
    pub x: f64,
    pub y: f64,
}

pub fn halving_model(kappa: Kappa) -> EulerModel {
    let constants = DriftConstants { lipschitz: 1.0, dissipativity: 1.0, radius: 1.0 };
    EulerModel::new(Drift::Linear { m: 1.0 }, constants, 0.5, 1.0, kappa, 1.0, 1).unwrap()
}

pub fn mixed_rule() -> CouplingRule {
    CouplingRule::Mixed(MixedParams::new(1.0, 1.0).unwrap())
}

pub fn lattice_cases(rule: CouplingRule) -> Vec<LatticeCase> {
    let delta = 0.05;
    let gaussian = LatticePmf::discretize(&NoiseSpec::gaussian(1).unwrap(), delta).unwrap();
    let geometric = LatticePmf::symmetric(delta, &(0..200).map(|i| 0.9f64.powi(i)).collect::<Vec<_>>()).unwrap();
    let three = LatticePmf::symmetric(delta, &[0.4, 0.2, 0.1]).unwrap();
    vec![
        LatticeCase {
            name: "discretized gaussian",
            inst: OracleInstance::new(gaussian, halving_model(Kappa::Finite(1.0)), rule).unwrap(),
            x: 0.0,
            y: 0.4,
        },
        LatticeCase {
            name: "geometric",
            inst: OracleInstance::new(geometric, halving_model(Kappa::Unbounded), rule).unwrap(),
            x: -0.3,
            y: 0.5,
        },
        LatticeCase {
            name: "five atoms, truncated",
            inst: OracleInstance::new(three, halving_model(Kappa::Finite(0.05)), rule).unwrap(),
            x: 0.0,
            y: 0.2,
        },
    ]
}

pub fn audit_rho() -> RhoSpec {
    RhoSpec::Tv { a: 1.5, c: 1.0, r1: 1.0, simplified: true }
}

/// `(statistic, |MC − exact|, 3 SE)` for π, β, each α_l and E[ρ].
pub fn oracle_vs_mc(case: &LatticeCase, n: usize, streams: &Streams) -> Vec<(String, f64, f64)> {
    let rho = audit_rho();
    let exact = oracle_exact(&case.inst, case.x, case.y, &rho, &L_VALUES).unwrap();
    let (x, y) = ([case.x], [case.y]);
    let mc = estimate_coupling_stats(&case.inst.coupler, &x, &y, &L_VALUES, n, streams).unwrap();
    let rhos: Vec<f64> =
        map_steps(&case.inst.coupler, &x, &y, n, streams, 77, |s| rho.eval(&s.x, &s.y).unwrap()).unwrap();
    let e_rho = Estimate::from_samples(&rhos);
    let mut rows = vec![
        ("pi".to_string(), (mc.pi_hat.mean - exact.pi).abs(), 3.0 * mc.pi_hat.se),
        ("beta".to_string(), (mc.beta_hat.mean - exact.beta).abs(), 3.0 * mc.beta_hat.se),
        ("E_rho".to_string(), (e_rho.mean - exact.e_rho).abs(), 3.0 * e_rho.se),
    ];
    for (m, (l, a)) in mc.alpha_hat.iter().zip(&exact.alpha) {
        rows.push((format!("alpha_{l}"), (m.estimate.mean - a).abs(), 3.0 * m.estimate.se));
    }
    rows
}
