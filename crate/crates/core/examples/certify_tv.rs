//! Total variation certificate for `b(x) = −x + 2 tanh x` with truncated Gaussian noise.

use kantorovich::model::{Drift, EulerModel, Kappa};
use kantorovich::noise::NoiseSpec;
use kantorovich::rates::{certify_euler, CouplingKind, EulerPath};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let drift = Drift::LinearTanh { a: 1.0, s: 2.0 };
    let constants = drift.constants(1, Some(0.5), None)?;
    println!("L = {}, K = {}, R = {}", constants.lipschitz, constants.dissipativity, constants.radius);

    let model = EulerModel::new(drift, constants, 0.01, 3.0, Kappa::Finite(3.0), 1.0, 1)?;
    let noise = NoiseSpec::gaussian(1)?;
    for kind in [CouplingKind::RefinedBasic, CouplingKind::Reflection] {
        let cert = certify_euler(&model, &noise, kind, EulerPath::Tv)?;
        println!("\n{}: c* = {:e}", kind.label(), cert.c_star);
        for c in cert.regime_constants.iter().chain(&cert.regime_boundaries) {
            println!("  {:>4} = {:e}", c.label, c.value);
        }
        println!("  jump a = {:.6}, {} conditions checked", cert.rho.jump(), cert.checked.len());
    }
    Ok(())
}
