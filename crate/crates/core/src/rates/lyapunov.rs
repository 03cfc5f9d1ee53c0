//! Lyapunov drift `∫V dp ≤ (1−λ)V + C0` for `V = |x|^θ` under a one-sided drift bound.

use std::sync::Arc;

use rand::Rng;

use super::euler::{unbounded_assumption, UnboundedInputs};
use super::{c_star_weighted_tv, CheckedCondition, CouplingKind, LyapunovData, RateCertificate};
use crate::error::{Error, Result};
use crate::model::EulerModel;
use crate::noise::{norm, NoiseFamily, NoiseSpec};
use crate::rho::{build_weighted_tv_distance, LyapunovFn};
use crate::rng::{domain, Streams};
use crate::stats::Estimate;

/// Samples per state in the Monte Carlo validation of the drift inequality.
pub const VALIDATION_SAMPLES: usize = 100_000;
/// States `|x|` at which the drift inequality is validated.
pub const VALIDATION_STATES: [f64; 3] = [0.0, 1.0, 10.0];
const VALIDATION_SEED: u64 = 0x6c79_6170;

/// Inputs of the Lyapunov drift bound: `⟨x, b(x)⟩ ≤ M1 − M2|x|²` and the radius threshold `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftBound {
    pub m1: f64,
    pub m2: f64,
    pub threshold: f64,
}

fn is_centered(noise: &NoiseSpec) -> bool {
    !matches!(noise.family(), NoiseFamily::NonIsotropic { .. })
}

fn sample_one_sided_bound(model: &EulerModel, m1: f64, m2: f64) -> Result<()> {
    let streams = Streams::new(VALIDATION_SEED);
    let mut rng = streams.rng(domain("c2-star", &[]), 0);
    let mut b = vec![0.0; model.dim];
    for _ in 0..crate::model::VERIFY_PAIRS {
        let radius = 10f64.powf(rng.random_range(-2.0..3.0));
        let mut x: Vec<f64> = (0..model.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = norm(&x).max(f64::MIN_POSITIVE);
        x.iter_mut().for_each(|v| *v *= radius / n);
        model.drift.eval(&x, &mut b);
        let inner: f64 = x.iter().zip(&b).map(|(a, c)| a * c).sum();
        let bound = m1 - m2 * radius * radius;
        if inner > bound + 1e-9 * (1.0 + radius * radius) {
            return Err(Error::InvalidModel(format!("<x, b(x)> <= M1 - M2|x|^2 fails at |x| = {radius:e}")));
        }
    }
    Ok(())
}

/// `(λ, C0)` for `V = |x|^θ`, validated by Monte Carlo at [`VALIDATION_STATES`].
pub fn lyapunov_drift_certificate(
    model: &EulerModel,
    noise: &NoiseSpec,
    theta: f64,
    drift: DriftBound,
) -> Result<LyapunovData> {
    let DriftBound { m1, m2, threshold } = drift;
    if !(theta > 0.0 && theta <= 2.0) {
        return Err(Error::InvalidProfile("Lyapunov exponent must lie in (0, 2]"));
    }
    if !(m1 > 0.0 && m2 > 0.0) {
        return Err(Error::InvalidModel("M1 and M2 must be positive".into()));
    }
    if noise.dim() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, got: noise.dim() });
    }
    sample_one_sided_bound(model, m1, m2)?;
    let (h, g) = (model.h, model.g);
    let b0 = model.drift_at_origin();
    let l0 = 2.0 * model.lipschitz().powi(2).max(b0 * b0);
    if !(h < 2.0 * m2 / l0) {
        return Err(Error::StepSizeTooLarge("h < 2 M2/L0"));
    }
    let contraction = 1.0 - 2.0 * h * m2 + h * h * l0;
    let moment = noise.abs_moment(theta)?;
    let mut notes = vec![format!("L0 = {l0:e}, E|xi|^theta = {moment:e}")];
    let (lambda, c0) = if theta == 2.0 && is_centered(noise) {
        (1.0 - contraction, h * h * l0 + 2.0 * h * m1 + g * g * moment)
    } else {
        let half_moment = noise.abs_moment(theta / 2.0)?;
        let q = contraction.powf(theta / 2.0);
        let cross =
            ((2.0 * g).powf(theta / 2.0) + (2.0 * h * g).powf(theta / 2.0) * l0.powf(theta / 4.0)) * half_moment;
        let constant = (2.0 * h * m1).powf(theta / 2.0)
            + g.powf(theta) * moment
            + (h * h * l0).powf(theta / 2.0)
            + (2.0 * h * g).powf(theta / 2.0) * b0.powf(theta / 2.0) * half_moment;
        notes.push("the cross term B|x|^(theta/2) is absorbed by B u <= (1-q)/2 u^2 + B^2/(2(1-q))".into());
        ((1.0 - q) / 2.0, constant + cross * cross / (2.0 * (1.0 - q)))
    };
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::LambdaOutOfRange);
    }
    let v = LyapunovFn::power(theta)?;
    for (i, &state) in VALIDATION_STATES.iter().enumerate() {
        let est = drift_expectation(model, noise, theta, state, i as u64);
        let bound = (1.0 - lambda) * state.powf(theta) + c0;
        if est.mean - 3.0 * est.se > bound {
            return Err(Error::NotContractive(format!(
                "Lyapunov drift fails at |x| = {state}: {:e} +- {:e} > {bound:e}",
                est.mean, est.se
            )));
        }
        notes.push(format!("drift check |x| = {state}: E V = {:e} (se {:e}) <= {bound:e}", est.mean, est.se));
    }
    let hl = h * model.lipschitz();
    let beta: crate::rho::RadialFn = Arc::new(move |r| hl * r);
    let mut data = LyapunovData::new(v, lambda, c0, threshold, &beta)?;
    data.notes = notes;
    Ok(data)
}

fn drift_expectation(model: &EulerModel, noise: &NoiseSpec, theta: f64, state: f64, index: u64) -> Estimate {
    let mut x = vec![0.0; model.dim];
    x[0] = state;
    let mean = model.drift_step(&x);
    let streams = Streams::new(VALIDATION_SEED);
    let draws = noise.sample(VALIDATION_SAMPLES, &streams, domain("lyapunov-check", &[index]));
    let values: Vec<f64> = draws
        .iter()
        .map(|z| {
            let moved: Vec<f64> = mean.iter().zip(z).map(|(m, zi)| m + model.g * zi).collect();
            norm(&moved).powf(theta)
        })
        .collect();
    Estimate::from_samples(&values)
}

/// Weighted total variation certificate for an unbounded-truncation Euler model.
pub fn certify_weighted_tv_euler(
    model: &EulerModel,
    noise: &NoiseSpec,
    kind: CouplingKind,
    theta: f64,
    drift: DriftBound,
) -> Result<RateCertificate> {
    if kind == CouplingKind::Mixed {
        return Err(Error::InvalidModel("the weighted TV path needs the refined basic or reflection coupling".into()));
    }
    if model.kappa != crate::model::Kappa::Unbounded {
        return Err(Error::KappaOutOfRange);
    }
    let lyap = lyapunov_drift_certificate(model, noise, theta, drift)?;
    let (q, overlap) = unbounded_assumption(
        UnboundedInputs { lipschitz: model.lipschitz(), h: model.h, g: model.g, radius: f64::INFINITY },
        lyap.r1,
        None,
        noise,
        kind,
    )?;
    let rho = build_weighted_tv_distance(&q, &lyap)?;
    let cert = c_star_weighted_tv(&q, &lyap, &rho)?;
    let checked =
        vec![CheckedCondition::new("h < 2 M2/L0", true, format!("lambda = {:e}, C0 = {:e}", lyap.lambda, lyap.c0))];
    Ok(cert.with_conditions(checked)?.with_notes([
        format!("coupling: {}", kind.label()),
        format!("noise: {}", noise.key()),
        format!("J((1+hL) r1/g) = {overlap:e} with r1 = {:e} from the Lyapunov radius", lyap.r1),
    ]))
}
