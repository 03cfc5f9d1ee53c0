//! Monte Carlo audit of a certified rate: `Ê[ρ(X, Y)] + 3 SE ≤ (1 − c*) ρ(x, y)`.

use kantorovich::couplings::{CouplingRule, EulerCoupler};
use kantorovich::model::{Drift, EulerModel, Kappa};
use kantorovich::montecarlo::contraction_audit;
use kantorovich::noise::NoiseSpec;
use kantorovich::rates::{certify_euler, CouplingKind, EulerPath};
use kantorovich::rng::Streams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let drift = Drift::LinearTanh { a: 1.0, s: 2.0 };
    let constants = drift.constants(1, Some(0.5), None)?;
    // Cauchy noise without truncation: the simplified distance
    let model = EulerModel::new(drift, constants, 0.01, 0.3, Kappa::Unbounded, 1.0, 1)?;
    let noise = NoiseSpec::cauchy(1)?;
    let cert = certify_euler(&model, &noise, CouplingKind::RefinedBasic, EulerPath::Tv)?;
    let coupler = EulerCoupler::new(model, noise, CouplingRule::RefinedBasic)?;

    let points: Vec<(Vec<f64>, Vec<f64>)> =
        [0.01, 0.1, 1.0, 5.0, 20.0].iter().map(|&r| (vec![r / 2.0], vec![-r / 2.0])).collect();
    let report = contraction_audit(&coupler, &cert.rho, &cert, &points, 50_000, &Streams::new(7))?;
    print!("{}", report.to_csv());
    println!("c* = {:e}, pass rate {}", report.c_star, report.pass_rate);
    Ok(())
}
