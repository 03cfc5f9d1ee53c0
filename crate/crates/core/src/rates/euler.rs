//! Envelope quantities of the Euler chain `x ↦ x + h b(x) + g ξ` under each coupling.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    c_star_tv, c_star_w1, AssumptionA, AssumptionB, CheckedCondition, CouplingStatsProfile, EnvelopeBounds,
    RateCertificate,
};
use crate::error::{Error, Result};
use crate::model::{EulerModel, Kappa};
use crate::noise::NoiseSpec;
use crate::rho::{build_tv_distance, build_w1_distance, ConcavityProfile};

/// The coupling driving the chain pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingKind {
    RefinedBasic,
    Reflection,
    Mixed,
}

impl CouplingKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::RefinedBasic => "refined-basic",
            Self::Reflection => "reflection",
            Self::Mixed => "mixed",
        }
    }
}

/// Which distance the certificate contracts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EulerPath {
    /// Total variation; finite `κ` uses `r0 = κ/(1+hL)`, unbounded `κ` the simplified form.
    Tv,
    /// W₁ through the second-moment lemma.
    W1,
    /// Lᵖ through the mixed coupling.
    Lp { p: f64 },
}

/// Constants `(ε, γ, c*)` of the second-moment lemma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaConstants {
    pub epsilon: f64,
    pub gamma: f64,
    pub c_lemma: f64,
    /// Resulting `c` of the W₁ distance.
    pub c: f64,
    /// `c γ g`, which must not exceed `log 2`.
    pub budget: f64,
}

/// Assumption inputs derived from an Euler model, with the checks that justified them.
#[derive(Debug, Clone)]
pub struct EulerQuantities {
    pub a: Option<AssumptionA>,
    pub b: Option<AssumptionB>,
    pub lemma: Option<LemmaConstants>,
    pub overlap: f64,
    pub checked: Vec<CheckedCondition>,
    pub notes: Vec<String>,
}

fn require(checked: &mut Vec<CheckedCondition>, name: &'static str, holds: bool, detail: String) -> Result<()> {
    checked.push(CheckedCondition::new(name, holds, detail));
    if holds {
        Ok(())
    } else {
        Err(Error::StepSizeTooLarge(name))
    }
}

fn check_coupling_noise(noise: &NoiseSpec, kind: CouplingKind) -> Result<()> {
    if kind != CouplingKind::RefinedBasic && !(noise.is_monotone_radial() && noise.has_first_moment()) {
        return Err(Error::ConditionC4Violated);
    }
    if noise.dim() == 0 {
        return Err(Error::InvalidNoise("dimension must be positive".into()));
    }
    Ok(())
}

fn step_checks(model: &EulerModel, checked: &mut Vec<CheckedCondition>) -> Result<()> {
    let (l, k, h) = (model.lipschitz(), model.dissipativity(), model.h);
    let bound = if l > 0.0 { 2.0 * k / (l * l) } else { f64::INFINITY };
    require(checked, "h < 2K/L^2", h < bound, format!("h = {h:e}, 2K/L^2 = {bound:e}"))
}

fn far_beta(model: &EulerModel) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
    let (hl, c0, radius) = (model.h * model.lipschitz(), model.far_contraction(), model.radius());
    move |r| if r <= radius { hl * r } else { -c0 * r }
}

/// Maps the model and noise to assumption (A) or (B) for the chosen coupling and path.
pub fn euler_assumption_quantities(
    model: &EulerModel,
    noise: &NoiseSpec,
    kind: CouplingKind,
    path: EulerPath,
) -> Result<EulerQuantities> {
    if noise.dim() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, got: noise.dim() });
    }
    check_coupling_noise(noise, kind)?;
    match path {
        EulerPath::Tv if kind == CouplingKind::Mixed => {
            Err(Error::InvalidModel("the TV path needs the refined basic or reflection coupling".into()))
        }
        EulerPath::Tv => match model.kappa {
            Kappa::Finite(kappa) => tv_finite(model, noise, kind, kappa),
            Kappa::Unbounded => tv_unbounded(model, noise, kind),
        },
        EulerPath::W1 if kind != CouplingKind::Reflection => {
            Err(Error::InvalidModel("the W1 path needs the reflection coupling".into()))
        }
        EulerPath::W1 => w1_path(model, noise),
        EulerPath::Lp { p } => lp_path(model, noise, kind, p),
    }
}

fn tv_finite(model: &EulerModel, noise: &NoiseSpec, kind: CouplingKind, kappa: f64) -> Result<EulerQuantities> {
    let (l, h, g, kappa0, radius) = (model.lipschitz(), model.h, model.g, model.kappa0, model.radius());
    let mut checked = Vec::new();
    step_checks(model, &mut checked)?;
    let inv_l = if l > 0.0 { 1.0 / l } else { f64::INFINITY };
    require(&mut checked, "h < 1/L", h < inv_l, format!("h = {h:e}"))?;
    let ratio = if l * radius > 0.0 { kappa0 / (2.0 * l * radius) } else { f64::INFINITY };
    require(&mut checked, "h/g <= kappa0/(2 L R)", h / g <= ratio, format!("h/g = {:e}, bound {ratio:e}", h / g))?;
    if (kappa - g * kappa0).abs() > 1e-12 * g * kappa0 {
        return Err(Error::KappaOutOfRange);
    }
    checked.push(CheckedCondition::new("kappa = g kappa0", true, format!("{kappa:e}")));

    let overlap = noise.overlap_j(kappa0)?;
    let r0 = kappa / (1.0 + h * l);
    let mut notes = Vec::new();
    let r1 = if radius >= r0 {
        radius
    } else {
        notes.push(format!("dissipativity radius {radius:e} is below r0 = {r0:e}; r1 is raised to r0"));
        r0
    };
    let (pi_level, alpha_level) = match kind {
        CouplingKind::RefinedBasic => (overlap / 2.0, (r0 * r0 / 4.0).min(kappa * kappa / 16.0) * overlap),
        _ => (overlap, (r0 * r0 / 2.0).min(kappa * kappa / 8.0) * overlap),
    };
    let profile = CouplingStatsProfile::new(
        move |r| if r <= r0 { pi_level } else { 0.0 },
        far_beta(model),
        move |_, _| alpha_level,
    );
    let q = AssumptionA::new(r0, r1, model.far_contraction(), profile)?;
    let hl = h * l;
    let (pi_factor, alpha_factor) = match kind {
        CouplingKind::RefinedBasic => (2.0, 16.0),
        _ => (1.0, 8.0),
    };
    let bounds = EnvelopeBounds {
        sup_beta_over_pi: pi_factor * hl * kappa / overlap,
        sup_beta_over_alpha: q
            .bounds
            .sup_beta_over_alpha
            .map(|_| alpha_factor * hl * radius / (kappa * kappa * overlap)),
        ..q.bounds
    };
    let q = q.with_bounds(bounds, "closed-form Euler bounds with kappa = g kappa0")?;
    if kind == CouplingKind::Reflection {
        notes.push("the reflection rate reuses the total variation proof constants with reflection envelopes".into());
    }
    Ok(EulerQuantities { a: Some(q), b: None, lemma: None, overlap, checked, notes })
}

fn tv_unbounded(model: &EulerModel, noise: &NoiseSpec, kind: CouplingKind) -> Result<EulerQuantities> {
    let mut checked = Vec::new();
    step_checks(model, &mut checked)?;
    let mut notes = vec!["unbounded truncation: simplified form with r0 = r1 = R and c = 1".to_string()];
    let r1 = if model.radius() > 0.0 {
        model.radius()
    } else {
        notes.push("dissipativity holds at every distance; r1 is set to 1".into());
        1.0
    };
    let (q, overlap) = unbounded_assumption(
        UnboundedInputs { lipschitz: model.lipschitz(), h: model.h, g: model.g, radius: model.radius() },
        r1,
        Some(model.far_contraction()),
        noise,
        kind,
    )?;
    notes.push(format!("pi uses J at (1+hL) r/g, which covers the drifted gap; J((1+hL) r1/g) = {overlap:e}"));
    Ok(EulerQuantities { a: Some(q), b: None, lemma: None, overlap, checked, notes })
}

/// Scalars of the unbounded-truncation envelopes.
#[derive(Debug, Clone, Copy)]
pub(crate) struct UnboundedInputs {
    pub lipschitz: f64,
    pub h: f64,
    pub g: f64,
    /// Dissipativity radius; `β̄` switches to `−c0 r` beyond it.
    pub radius: f64,
}

/// Simplified assumption (A) at `r0 = r1` for `κ = ∞`, with the overlap `J((1+hL) r1/g)`.
pub(crate) fn unbounded_assumption(
    inputs: UnboundedInputs,
    r1: f64,
    c0: Option<f64>,
    noise: &NoiseSpec,
    kind: CouplingKind,
) -> Result<(AssumptionA, f64)> {
    let UnboundedInputs { lipschitz: l, h, g, radius } = inputs;
    let shift = (1.0 + h * l) / g;
    let overlap = noise.overlap_j(shift * r1)?;
    let weight = if kind == CouplingKind::RefinedBasic { 0.5 } else { 1.0 };
    let noise_for_pi = Arc::new(noise.clone());
    let hl = h * l;
    let far = c0.unwrap_or(0.0);
    let profile = CouplingStatsProfile::new(
        move |r| weight * noise_for_pi.overlap_j(shift * r).unwrap_or(0.0),
        move |r| if r <= radius || far == 0.0 { hl * r } else { -far * r },
        |_, _| 0.0,
    );
    let pi_floor = weight * overlap;
    let bounds = EnvelopeBounds {
        inf_pi: pi_floor,
        inf_alpha: None,
        sup_beta_head: hl * r1,
        sup_beta: hl * r1,
        sup_beta_over_pi: hl * r1 / pi_floor,
        sup_beta_over_alpha: None,
    };
    Ok((AssumptionA::from_monotone_bounds(r1, c0, profile, bounds)?, overlap))
}

/// Scans `ε ∈ {2⁻², …, 2⁻¹⁰}` for the second-moment lemma and the W₁ budget.
pub fn lemma_constants(model: &EulerModel, noise: &NoiseSpec) -> Result<LemmaConstants> {
    let (l, h, g, radius) = (model.lipschitz(), model.h, model.g, model.radius());
    let Kappa::Finite(kappa) = model.kappa else {
        return Err(Error::KappaOutOfRange);
    };
    let mut step_seen = false;
    let mut kappa_seen = false;
    let mut best_budget = f64::INFINITY;
    for power in 2..=10 {
        let epsilon = 2f64.powi(-power);
        if h / g > epsilon / (2.0 * l * radius) {
            continue;
        }
        step_seen = true;
        if kappa > epsilon * g / 4.0 {
            continue;
        }
        kappa_seen = true;
        let m_eps = noise.marginal_density(epsilon)?;
        let mut gamma = 4.0;
        while m_eps - noise.marginal_density(gamma / 2.0 - epsilon / 4.0)? < m_eps / 2.0 {
            gamma *= 2.0;
            if gamma > 2f64.powi(40) {
                return Err(Error::DensityUnavailable);
            }
        }
        let c_lemma = epsilon * epsilon * m_eps / 4.0;
        let c = 2.0 * h * l * radius / (c_lemma * g * (radius / 2.0).min(kappa)) + 1.0;
        let budget = c * gamma * g;
        if budget <= std::f64::consts::LN_2 {
            return Ok(LemmaConstants { epsilon, gamma, c_lemma, c, budget });
        }
        best_budget = best_budget.min(budget);
    }
    if !step_seen {
        Err(Error::StepSizeTooLarge("h/g <= eps/(2 L R)"))
    } else if !kappa_seen {
        Err(Error::KappaOutOfRange)
    } else {
        Err(Error::B2Violated { budget: best_budget })
    }
}

fn w1_path(model: &EulerModel, noise: &NoiseSpec) -> Result<EulerQuantities> {
    let (l, h, g, radius) = (model.lipschitz(), model.h, model.g, model.radius());
    if !(radius > 0.0) {
        return Err(Error::InvalidModel("the W1 path needs a positive dissipativity radius".into()));
    }
    let mut checked = Vec::new();
    step_checks(model, &mut checked)?;
    let half = if l > 0.0 { 1.0 / (2.0 * l) } else { f64::INFINITY };
    require(&mut checked, "h < 1/(2L)", h < half, format!("h = {h:e}"))?;
    let lemma = lemma_constants(model, noise)?;
    let kappa = model.kappa.value();
    checked.push(CheckedCondition::new("h/g <= eps/(2 L R)", true, format!("eps = {:e}", lemma.epsilon)));
    checked.push(CheckedCondition::new("kappa <= eps g/4", true, format!("kappa = {kappa:e}")));
    let l0 = lemma.gamma * g;
    let level = lemma.c_lemma * g;
    let profile = CouplingStatsProfile::new(
        |_| 0.0,
        far_beta(model),
        move |r, lt| if lt >= l0 * (1.0 - 1e-12) { level * (r / 2.0).min(kappa) } else { 0.0 },
    );
    let q = AssumptionB::new(profile, ConcavityProfile::identity(), l0, radius, model.far_contraction())?;
    let notes = vec![format!(
        "second-moment lemma: eps = {:e}, gamma = {:e}, c* = {:e}",
        lemma.epsilon, lemma.gamma, lemma.c_lemma
    )];
    Ok(EulerQuantities { a: None, b: Some(q), lemma: Some(lemma), overlap: f64::NAN, checked, notes })
}

fn lp_path(model: &EulerModel, noise: &NoiseSpec, kind: CouplingKind, p: f64) -> Result<EulerQuantities> {
    if kind != CouplingKind::Mixed {
        return Err(Error::InvalidModel("the Lp path needs the mixed coupling".into()));
    }
    if !(p > 2.0) {
        return Err(Error::InvalidProfile("p must exceed 2"));
    }
    let mut quantities = w1_path(model, noise)?;
    let (l, h, g, radius) = (model.lipschitz(), model.h, model.g, model.radius());
    let gamma = quantities.lemma.map_or(f64::NAN, |m| m.gamma);
    let l_prime = (1.0 + h * l) * radius / g + gamma / 2.0 + 1.0;
    let jump = h * l * radius + model.kappa.value().max(2.0 * g * l_prime);
    if radius < jump + 1.0 {
        return Err(Error::R1TooSmall { r1: radius, l: jump });
    }
    quantities.notes.push(format!("mixed coupling jump bound l = {jump:e}"));
    Ok(quantities)
}

/// Builds the distance and certificate for an Euler model end to end.
pub fn certify_euler(
    model: &EulerModel,
    noise: &NoiseSpec,
    kind: CouplingKind,
    path: EulerPath,
) -> Result<RateCertificate> {
    let quantities = euler_assumption_quantities(model, noise, kind, path)?;
    let cert = match path {
        EulerPath::Tv => {
            let q = quantities.a.as_ref().expect("TV path yields assumption A");
            let rho = build_tv_distance(q, q.is_simplified())?;
            c_star_tv(q, &rho)?
        }
        EulerPath::W1 => {
            let q = quantities.b.as_ref().expect("W1 path yields assumption B");
            let rho = build_w1_distance(q)?;
            c_star_w1(q, &rho)?
        }
        EulerPath::Lp { .. } => {
            return Err(Error::InvalidModel("the Lp path has no Euler certificate".into()));
        }
    };
    let mut notes = vec![format!("coupling: {}", kind.label()), format!("noise: {}", noise.key())];
    notes.extend(quantities.notes);
    Ok(cert.with_conditions(quantities.checked)?.with_notes(notes))
}
