//! Weighted total variation: a quadratic Lyapunov function lets the rate hold without far-field contraction.

use kantorovich::model::{Drift, DriftConstants, EulerModel, Kappa};
use kantorovich::noise::NoiseSpec;
use kantorovich::rates::{certify_weighted_tv_euler, lyapunov_drift_certificate, CouplingKind, DriftBound};
use kantorovich::rho::RhoSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let constants = DriftConstants { lipschitz: 1.0, dissipativity: 1.0, radius: 1.0 };
    let model = EulerModel::new(Drift::Linear { m: 1.0 }, constants, 0.1, 0.3, Kappa::Unbounded, 1.0, 1)?;
    let noise = NoiseSpec::gaussian(1)?;
    // ⟨x, b(x)⟩ = −|x|² ≤ M1 − M2 |x|²
    let drift = DriftBound { m1: 1.0, m2: 1.0, threshold: 1.0 };

    let lyap = lyapunov_drift_certificate(&model, &noise, 2.0, drift)?;
    println!("V = |x|^2: lambda = {:.4}, C0 = {:.4}, r1 = {:.4}", lyap.lambda, lyap.c0, lyap.r1);
    let cert = certify_weighted_tv_euler(&model, &noise, CouplingKind::RefinedBasic, 2.0, drift)?;
    println!("c* = {:e}", cert.c_star);
    for c in &cert.regime_constants {
        println!("  {} = {:e}", c.label, c.value);
    }
    // off the diagonal ρ = a + (1 − e^{−c r}) + ε (V(x) + V(y)); the jump a dwarfs the rest
    if let RhoSpec::WeightedTv { a, c, epsilon, .. } = &cert.rho {
        println!("a = {a:e}, c = {c:.4}, eps = {epsilon:e}");
    }
    let a = cert.rho.jump();
    for x in [0.1, 1.0, 5.0, 1e20] {
        println!("rho(0, {x:e}) - a = {:.6e}", cert.rho.eval(&[0.0], &[x])? - a);
    }
    Ok(())
}
