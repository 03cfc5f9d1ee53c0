//! Concave distances for W1 and Lp: an Euler W1 certificate, then an Lp distance with its inflection.

use kantorovich::model::{Drift, DriftConstants, EulerModel, Kappa};
use kantorovich::noise::NoiseSpec;
use kantorovich::rates::{c_star_wp, certify_euler, AssumptionB, CouplingKind, CouplingStatsProfile, EulerPath};
use kantorovich::rho::{build_wp_distance, check_shape, ConcavityProfile, SHAPE_POINTS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let constants = DriftConstants { lipschitz: 1.0, dissipativity: 1.0, radius: 1.0 };
    // the second-moment lemma wants κ ≤ εg/4 and a tiny hLR relative to gκ
    let model = EulerModel::new(Drift::Linear { m: 1.0 }, constants, 1e-6, 0.1, Kappa::Finite(0.005), 1.0, 1)?;
    let w1 = certify_euler(&model, &NoiseSpec::gaussian(1)?, CouplingKind::Reflection, EulerPath::W1)?;
    println!("W1: c* = {:e}, c = {:.4}, r1 = {:.4}", w1.c_star, w1.rho.c(), w1.rho.r1());

    // envelopes of a chain that contracts at rate 1 and has jumps of size at most l
    let profile = CouplingStatsProfile::new(|_| 0.0, |r| if r <= 1.0 { 0.05 * r } else { -r }, |r, _| 0.2 * r);
    let q = AssumptionB::new(profile, ConcavityProfile::identity(), 0.4, 3.0, 1.0)?;
    for p in [2.5, 3.0, 4.0] {
        let rho = build_wp_distance(&q, p, 0.5, None)?;
        let cert = c_star_wp(&q, &rho, 0.5)?;
        let shape = check_shape(&rho, SHAPE_POINTS);
        println!(
            "L^{p}: c* = {:e}, inflection at {:.3}, f'' there {:.1e}, shape checks {}",
            cert.c_star,
            rho.inflection().unwrap_or(f64::NAN),
            shape.inflection_residual.unwrap_or(f64::NAN),
            if shape.passed() { "pass" } else { "fail" }
        );
    }
    Ok(())
}
