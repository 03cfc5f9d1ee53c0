//! KS checks that every coupling leaves both marginals equal to the Euler transition.

use kantorovich::couplings::{CouplingRule, EulerCoupler, MixedParams};
use kantorovich::model::{Drift, EulerModel, Kappa};
use kantorovich::montecarlo::verify_marginals;
use kantorovich::noise::NoiseSpec;
use kantorovich::rng::Streams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let drift = Drift::LinearTanh { a: 1.0, s: 2.0 };
    let constants = drift.constants(1, Some(0.5), None)?;
    let model = EulerModel::new(drift, constants, 0.1, 1.0, Kappa::Finite(1.0), 1.0, 1)?;
    let rules =
        [CouplingRule::RefinedBasic, CouplingRule::Reflection, CouplingRule::Mixed(MixedParams::new(4.0, 1.5)?)];
    let streams = Streams::new(1);

    for noise in [NoiseSpec::gaussian(1)?, NoiseSpec::stable(1.5, 1)?] {
        for rule in rules {
            let coupler = EulerCoupler::new(model.clone(), noise.clone(), rule)?;
            let r = verify_marginals(&coupler, &[0.0], &[1.0], 20_000, &streams)?;
            println!(
                "{:<11} {:<14} D_x = {:.4} (p {:.3})  D_y = {:.4} (p {:.3})  {}",
                noise.key(),
                rule.kind().label(),
                r.ks_x,
                r.p_x,
                r.ks_y,
                r.p_y,
                if r.passed { "ok" } else { "REJECTED" }
            );
        }
    }
    Ok(())
}
