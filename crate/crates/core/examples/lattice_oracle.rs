//! Exact coupling statistics on a lattice noise, next to their Monte Carlo estimates.

use kantorovich::couplings::CouplingRule;
use kantorovich::model::{Drift, DriftConstants, EulerModel, Kappa};
use kantorovich::montecarlo::{estimate_coupling_stats, oracle_exact, OracleInstance};
use kantorovich::noise::NoiseSpec;
use kantorovich::rho::RhoSpec;
use kantorovich::rng::Streams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let constants = DriftConstants { lipschitz: 1.0, dissipativity: 1.0, radius: 1.0 };
    let model = EulerModel::new(Drift::Linear { m: 1.0 }, constants, 0.5, 1.0, Kappa::Finite(1.0), 1.0, 1)?;
    let rho = RhoSpec::Tv { a: 1.5, c: 1.0, r1: 1.0, simplified: true };
    let (x, y, l) = (0.0, 0.4, 0.5);

    for rule in [CouplingRule::RefinedBasic, CouplingRule::Reflection] {
        let inst = OracleInstance::discretized(&NoiseSpec::gaussian(1)?, 0.05, model.clone(), rule)?;
        let exact = oracle_exact(&inst, x, y, &rho, &[l])?;
        let mc = estimate_coupling_stats(&inst.coupler, &[x], &[y], &[l], 200_000, &Streams::new(5))?;
        println!("{} ({} terms)", rule.kind().label(), exact.terms);
        println!("  pi    exact {:.6}  mc {:.6} ± {:.6}", exact.pi, mc.pi_hat.mean, mc.pi_hat.se);
        println!("  beta  exact {:.6}  mc {:.6} ± {:.6}", exact.beta, mc.beta_hat.mean, mc.beta_hat.se);
        let alpha = &mc.alpha_hat[0].estimate;
        println!("  alpha exact {:.6}  mc {:.6} ± {:.6}", exact.alpha[0].1, alpha.mean, alpha.se);
    }
    Ok(())
}
