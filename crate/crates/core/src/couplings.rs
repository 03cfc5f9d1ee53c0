//! One-step joint samplers for the Euler chain: refined basic, reflection and mixed couplings.
//!
//! Every coupler draws `z ∼ μ` for `X = x̂ + g z` and decides the branch of `Y`
//! by thinning with density ratios, so only pointwise densities are needed.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EulerModel, Kappa};
use crate::noise::{norm, NoiseSpec};
use crate::rates::CouplingKind;

/// Which component measure produced `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `Y = ŷ + g z + (x̂ − ŷ)_κ`, which lands on `X` when `r̂ ≤ κ`.
    CoalesceMove,
    /// `Y = ŷ + g z + (ŷ − x̂)_κ`.
    AntiMove,
    /// `Y = ŷ + g R(z)`.
    Reflected,
    /// `Y = ŷ + g z`.
    Synchronous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledStep {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub branch: Branch,
    pub coalesced: bool,
    pub r_before: f64,
    pub r_hat: f64,
    pub r_after: f64,
}

/// `(x)_κ = (1 ∧ κ/|x|) x`; `κ = ∞` is the identity.
pub fn truncate_kappa(x: &[f64], kappa: f64) -> Vec<f64> {
    let n = norm(x);
    if n <= kappa || n == 0.0 {
        return x.to_vec();
    }
    let scale = kappa / n;
    x.iter().map(|v| v * scale).collect()
}

/// Householder reflection of `z` across the hyperplane orthogonal to `x̂ − ŷ`.
pub fn reflect(x_hat: &[f64], y_hat: &[f64], z: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = x_hat.iter().zip(y_hat).map(|(a, b)| a - b).collect();
    let e2: f64 = e.iter().map(|v| v * v).sum();
    if e2 == 0.0 {
        return z.to_vec();
    }
    let k = 2.0 * z.iter().zip(&e).map(|(a, b)| a * b).sum::<f64>() / e2;
    z.iter().zip(&e).map(|(zi, ei)| zi - k * ei).collect()
}

/// Switching radius `s` and jump cap `l'` of the mixed coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedParams {
    pub switch_radius: f64,
    pub jump_cap: f64,
}

impl MixedParams {
    pub fn new(switch_radius: f64, jump_cap: f64) -> Result<Self> {
        if !(switch_radius > 0.0 && jump_cap > 0.0) {
            return Err(Error::InvalidModel("mixed coupling needs s > 0 and l' > 0".into()));
        }
        Ok(Self { switch_radius, jump_cap })
    }

    /// `s = 𝓡` and the smallest `l' = (1+hL)𝓡/g + γ/2 + 1` allowed by the Lᵖ argument.
    pub fn for_lp(model: &EulerModel, gamma: f64) -> Result<Self> {
        let r = model.radius();
        Self::new(r, (1.0 + model.h * model.lipschitz()) * r / model.g + gamma / 2.0 + 1.0)
    }

    /// `l = hLs + κ ∨ 2g l'`, so that `|X − Y| ≤ |x − y| + l`.
    pub fn jump_bound(&self, model: &EulerModel) -> f64 {
        model.h * model.lipschitz() * self.switch_radius + model.kappa.value().max(2.0 * model.g * self.jump_cap)
    }
}

/// The coupling rule applied by an [`EulerCoupler`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingRule {
    RefinedBasic,
    Reflection,
    Mixed(MixedParams),
}

impl CouplingRule {
    pub fn kind(&self) -> CouplingKind {
        match self {
            Self::RefinedBasic => CouplingKind::RefinedBasic,
            Self::Reflection => CouplingKind::Reflection,
            Self::Mixed(_) => CouplingKind::Mixed,
        }
    }
}

/// A one-step Markov coupling of the Euler chain.
pub trait Coupler: Sync {
    fn model(&self) -> &EulerModel;
    fn noise(&self) -> &NoiseSpec;
    fn step(&self, x: &[f64], y: &[f64], rng: &mut dyn RngCore) -> Result<CoupledStep>;
}

/// The couplings of the Euler chain driven by its own model and noise.
#[derive(Debug, Clone)]
pub struct EulerCoupler {
    model: EulerModel,
    noise: NoiseSpec,
    rule: CouplingRule,
}

impl EulerCoupler {
    /// Rejects reflection-type rules for noises without condition (c4).
    pub fn new(model: EulerModel, noise: NoiseSpec, rule: CouplingRule) -> Result<Self> {
        if noise.dim() != model.dim {
            return Err(Error::DimensionMismatch { expected: model.dim, got: noise.dim() });
        }
        if rule != CouplingRule::RefinedBasic && !reflection_allowed(&noise) {
            return Err(Error::ConditionC4Violated);
        }
        Ok(Self { model, noise, rule })
    }

    pub fn rule(&self) -> CouplingRule {
        self.rule
    }
}

impl Coupler for EulerCoupler {
    fn model(&self) -> &EulerModel {
        &self.model
    }

    fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    fn step(&self, x: &[f64], y: &[f64], rng: &mut dyn RngCore) -> Result<CoupledStep> {
        match self.rule {
            CouplingRule::RefinedBasic => step_refined_basic(x, y, &self.model, &self.noise, rng),
            CouplingRule::Reflection => step_reflection(x, y, &self.model, &self.noise, rng),
            CouplingRule::Mixed(params) => step_mixed(x, y, &self.model, &self.noise, params, rng),
        }
    }
}

fn reflection_allowed(noise: &NoiseSpec) -> bool {
    noise.is_monotone_radial()
}

/// Drifted points, their gap and the truncated shift `v⁻ = g⁻¹(ŷ − x̂)_κ`.
struct Setup {
    x_hat: Vec<f64>,
    y_hat: Vec<f64>,
    r_before: f64,
    r_hat: f64,
    shift: Vec<f64>,
}

impl Setup {
    fn new(x: &[f64], y: &[f64], model: &EulerModel) -> Result<Self> {
        if x.len() != model.dim || y.len() != model.dim {
            return Err(Error::DimensionMismatch { expected: model.dim, got: x.len().min(y.len()) });
        }
        let (x_hat, y_hat) = (model.drift_step(x), model.drift_step(y));
        let gap: Vec<f64> = y_hat.iter().zip(&x_hat).map(|(a, b)| a - b).collect();
        let shift = truncate_kappa(&gap, model.kappa.value()).into_iter().map(|v| v / model.g).collect();
        let r_before = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        Ok(Self { r_before, r_hat: norm(&gap), x_hat, y_hat, shift })
    }

    fn coalesces(&self, model: &EulerModel) -> bool {
        match model.kappa {
            Kappa::Unbounded => true,
            Kappa::Finite(k) => self.r_hat <= k,
        }
    }

    /// `X = x̂ + g z` and `Y = ŷ + g w`, with `Y := X` on exact coalescence.
    fn finish(&self, model: &EulerModel, z: &[f64], w: &[f64], branch: Branch) -> CoupledStep {
        let g = model.g;
        let x: Vec<f64> = self.x_hat.iter().zip(z).map(|(a, b)| a + g * b).collect();
        let coalesced = self.r_hat == 0.0 || (branch == Branch::CoalesceMove && self.coalesces(model));
        let y = if coalesced { x.clone() } else { self.y_hat.iter().zip(w).map(|(a, b)| a + g * b).collect() };
        let r_after = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        CoupledStep { x, y, branch, coalesced, r_before: self.r_before, r_hat: self.r_hat, r_after }
    }
}

fn draw(noise: &NoiseSpec, rng: &mut dyn RngCore) -> Vec<f64> {
    let mut z = vec![0.0; noise.dim()];
    noise.sample_into(rng, &mut z);
    z
}

fn offset(z: &[f64], v: &[f64], sign: f64) -> Vec<f64> {
    z.iter().zip(v).map(|(a, b)| a + sign * b).collect()
}

/// Every branch `Y` can take given the drawn increment `z`, with its conditional probability.
pub fn coupled_outcomes(
    x: &[f64],
    y: &[f64],
    model: &EulerModel,
    noise: &NoiseSpec,
    rule: CouplingRule,
    z: &[f64],
) -> Result<Vec<(f64, CoupledStep)>> {
    if rule != CouplingRule::RefinedBasic && !reflection_allowed(noise) {
        return Err(Error::ConditionC4Violated);
    }
    let s = Setup::new(x, y, model)?;
    if s.r_hat == 0.0 {
        return Ok(vec![(1.0, s.finish(model, z, z, Branch::Synchronous))]);
    }
    let toward = noise.accept_ratio(z, &s.shift)?;
    let toward_step = s.finish(model, z, &offset(z, &s.shift, -1.0), Branch::CoalesceMove);
    Ok(match rule {
        CouplingRule::RefinedBasic => {
            let away: Vec<f64> = s.shift.iter().map(|v| -v).collect();
            let (p1, p2) = (0.5 * toward, 0.5 * noise.accept_ratio(z, &away)?);
            vec![
                (p1, toward_step),
                (p2, s.finish(model, z, &offset(z, &s.shift, 1.0), Branch::AntiMove)),
                (1.0 - p1 - p2, s.finish(model, z, z, Branch::Synchronous)),
            ]
        }
        CouplingRule::Mixed(params) if !(s.r_before <= params.switch_radius && norm(z) <= params.jump_cap) => {
            vec![(1.0, s.finish(model, z, z, Branch::Synchronous))]
        }
        CouplingRule::Mixed(params) => {
            // reflection coupling of μ restricted to the ball |z| ≤ l', which is again radial
            let toward = if norm(&offset(z, &s.shift, -1.0)) <= params.jump_cap { toward } else { 0.0 };
            vec![
                (toward, toward_step),
                (1.0 - toward, s.finish(model, z, &reflect(&s.x_hat, &s.y_hat, z), Branch::Reflected)),
            ]
        }
        CouplingRule::Reflection => vec![
            (toward, toward_step),
            (1.0 - toward, s.finish(model, z, &reflect(&s.x_hat, &s.y_hat, z), Branch::Reflected)),
        ],
    })
}

fn sample_step(
    x: &[f64],
    y: &[f64],
    model: &EulerModel,
    noise: &NoiseSpec,
    rule: CouplingRule,
    rng: &mut dyn RngCore,
) -> Result<CoupledStep> {
    let z = draw(noise, rng);
    let mut outcomes = coupled_outcomes(x, y, model, noise, rule, &z)?;
    if outcomes.len() > 1 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, (p, _)) in outcomes.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(outcomes.swap_remove(i).1);
            }
        }
    }
    let last = outcomes.iter().rposition(|(p, _)| *p > 0.0).unwrap_or(outcomes.len() - 1);
    Ok(outcomes.swap_remove(last).1)
}

/// Refined basic coupling: half-mass moves towards and away from `x̂`, else synchronous.
pub fn step_refined_basic(
    x: &[f64],
    y: &[f64],
    model: &EulerModel,
    noise: &NoiseSpec,
    rng: &mut dyn RngCore,
) -> Result<CoupledStep> {
    sample_step(x, y, model, noise, CouplingRule::RefinedBasic, rng)
}

/// Reflection coupling: full-mass move towards `x̂`, else the mirrored increment.
pub fn step_reflection(
    x: &[f64],
    y: &[f64],
    model: &EulerModel,
    noise: &NoiseSpec,
    rng: &mut dyn RngCore,
) -> Result<CoupledStep> {
    sample_step(x, y, model, noise, CouplingRule::Reflection, rng)
}

/// Reflection coupling for `|x − y| ≤ s` and increments within `l'`; synchronous otherwise.
pub fn step_mixed(
    x: &[f64],
    y: &[f64],
    model: &EulerModel,
    noise: &NoiseSpec,
    params: MixedParams,
    rng: &mut dyn RngCore,
) -> Result<CoupledStep> {
    sample_step(x, y, model, noise, CouplingRule::Mixed(params), rng)
}
