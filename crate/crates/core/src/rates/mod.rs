//! Assumption envelopes, contraction certificates and their Euler-scheme inputs.

mod compare;
mod euler;
mod lyapunov;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{half_open_grid, log_space};
use crate::rho::{ConcavityProfile, LyapunovFn, RadialFn, RhoSpec};

pub use compare::{noise_rate_comparison, ComparisonRow, ComparisonSetup, ComparisonTable, FittedSlope, CSV_HEADER};
pub use euler::{
    certify_euler, euler_assumption_quantities, lemma_constants, CouplingKind, EulerPath, EulerQuantities,
    LemmaConstants,
};
pub use lyapunov::{
    certify_weighted_tv_euler, lyapunov_drift_certificate, DriftBound, VALIDATION_SAMPLES, VALIDATION_STATES,
};

/// Points per envelope grid and per Lᵖ regime.
pub const GRID_POINTS: usize = 4096;
/// Multiple of `r1` up to which the far-field drift bound is sampled.
pub const FAR_FIELD_SPAN: f64 = 1e3;
/// Upper end of the search domain for the Lyapunov radius.
pub const R1_SEARCH_CAP: f64 = 1e6;

pub type PairFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Radial envelopes `π̲(r)`, `β̄(r)` and `α̲_l(r)` of a Markov coupling.
#[derive(Clone)]
pub struct CouplingStatsProfile {
    pub pi_lower: RadialFn,
    pub beta_upper: RadialFn,
    pub alpha_lower: PairFn,
}

impl fmt::Debug for CouplingStatsProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CouplingStatsProfile")
    }
}

impl CouplingStatsProfile {
    pub fn new(
        pi_lower: impl Fn(f64) -> f64 + Send + Sync + 'static,
        beta_upper: impl Fn(f64) -> f64 + Send + Sync + 'static,
        alpha_lower: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { pi_lower: Arc::new(pi_lower), beta_upper: Arc::new(beta_upper), alpha_lower: Arc::new(alpha_lower) }
    }

    pub fn pi(&self, r: f64) -> f64 {
        (self.pi_lower)(r)
    }

    pub fn beta(&self, r: f64) -> f64 {
        (self.beta_upper)(r)
    }

    /// `α̲_l(r)`; `l = 0` is the untruncated-below envelope `α̲` of assumption (A).
    pub fn alpha(&self, r: f64, l: f64) -> f64 {
        (self.alpha_lower)(r, l)
    }
}

/// Infima and suprema of the envelopes over the regimes of assumption (A).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeBounds {
    /// `inf π̲` over `(0, r0]`.
    pub inf_pi: f64,
    /// `inf α̲` over `(r0, r1]`; absent when `r0 = r1`.
    pub inf_alpha: Option<f64>,
    /// `sup β̄₊` over `(0, r0]`.
    pub sup_beta_head: f64,
    /// `sup β̄₊` over `(0, r1]`.
    pub sup_beta: f64,
    /// `sup β̄₊/π̲` over `(0, r0]`.
    pub sup_beta_over_pi: f64,
    /// `sup β̄₊/α̲` over `(r0, r1]`; absent when `r0 = r1`.
    pub sup_beta_over_alpha: Option<f64>,
}

impl EnvelopeBounds {
    /// Grid values of every bound.
    pub fn from_grid(r0: f64, r1: f64, profile: &CouplingStatsProfile) -> Self {
        Self::from_grid_sized(r0, r1, profile, GRID_POINTS)
    }

    fn from_grid_sized(r0: f64, r1: f64, profile: &CouplingStatsProfile, points: usize) -> Self {
        let head = half_open_grid(0.0, r0, points);
        let inf_pi = head.iter().map(|&r| profile.pi(r)).fold(f64::INFINITY, f64::min);
        let sup_beta_head = head.iter().map(|&r| profile.beta(r).max(0.0)).fold(0.0, f64::max);
        let sup_beta_over_pi = head.iter().map(|&r| profile.beta(r).max(0.0) / profile.pi(r)).fold(0.0, f64::max);
        let (inf_alpha, sup_beta_over_alpha, sup_beta_mid) = if r1 > r0 {
            let mid = half_open_grid(r0, r1, points);
            let inf = mid.iter().map(|&r| profile.alpha(r, 0.0)).fold(f64::INFINITY, f64::min);
            let ratio = mid.iter().map(|&r| profile.beta(r).max(0.0) / profile.alpha(r, 0.0)).fold(0.0, f64::max);
            let sup = mid.iter().map(|&r| profile.beta(r).max(0.0)).fold(0.0, f64::max);
            (Some(inf), Some(ratio), sup)
        } else {
            (None, None, 0.0)
        };
        Self {
            inf_pi,
            inf_alpha,
            sup_beta_head,
            sup_beta: sup_beta_head.max(sup_beta_mid),
            sup_beta_over_pi,
            sup_beta_over_alpha,
        }
    }

    /// True when every bound of `self` is at least as pessimistic as `grid`.
    fn dominates(&self, grid: &Self) -> bool {
        let slack = 1e-12;
        let below = |mine: Option<f64>, theirs: Option<f64>| match (mine, theirs) {
            (Some(m), Some(t)) => m <= t * (1.0 + slack) + f64::MIN_POSITIVE,
            (None, None) => true,
            _ => false,
        };
        let above = |mine: Option<f64>, theirs: Option<f64>| below(theirs, mine);
        below(Some(self.inf_pi), Some(grid.inf_pi))
            && below(self.inf_alpha, grid.inf_alpha)
            && above(Some(self.sup_beta_head), Some(grid.sup_beta_head))
            && above(Some(self.sup_beta), Some(grid.sup_beta))
            && above(Some(self.sup_beta_over_pi), Some(grid.sup_beta_over_pi))
            && above(self.sup_beta_over_alpha, grid.sup_beta_over_alpha)
    }
}

/// Assumption (A): coalescence near the diagonal, a positive second moment
/// in the middle regime, and linear contraction of the drift beyond `r1`.
#[derive(Debug, Clone)]
pub struct AssumptionA {
    pub r0: f64,
    pub r1: f64,
    /// Far-field rate; absent when a Lyapunov condition replaces (a3).
    pub c0: Option<f64>,
    pub profile: CouplingStatsProfile,
    pub bounds: EnvelopeBounds,
    pub bounds_source: String,
}

impl AssumptionA {
    /// Checks (a1)–(a3) on sampled grids.
    pub fn new(r0: f64, r1: f64, c0: f64, profile: CouplingStatsProfile) -> Result<Self> {
        Self::without_far_field(r0, r1, profile)?.check_far_field(c0)
    }

    /// Checks (a1) and (a2) only, for use with a Lyapunov condition.
    pub fn without_far_field(r0: f64, r1: f64, profile: CouplingStatsProfile) -> Result<Self> {
        if !(r0 > 0.0 && r1.is_finite() && r0 <= r1) {
            return Err(Error::AssumptionA("need 0 < r0 <= r1 < infinity"));
        }
        let bounds = EnvelopeBounds::from_grid(r0, r1, &profile);
        let pi_in_range = half_open_grid(0.0, r0, GRID_POINTS).iter().all(|&r| profile.pi(r) <= 1.0);
        if !(bounds.inf_pi > 0.0 && pi_in_range) {
            return Err(Error::AssumptionA("a1"));
        }
        if bounds.inf_alpha.is_some_and(|a| !(a > 0.0)) || !bounds.sup_beta.is_finite() {
            return Err(Error::AssumptionA("a2"));
        }
        if bounds.sup_beta_over_alpha.is_some_and(|v| !v.is_finite()) {
            return Err(Error::AssumptionA("a2"));
        }
        Ok(Self { r0, r1, c0: None, profile, bounds, bounds_source: "grid".into() })
    }

    /// Simplified form `r0 = r1` with closed-form bounds for a non-increasing
    /// `π̲` and non-decreasing `β̄` on `(0, r1]`; the bounds are spot-checked on a
    /// coarse grid rather than recomputed.
    pub fn from_monotone_bounds(
        r1: f64,
        c0: Option<f64>,
        profile: CouplingStatsProfile,
        bounds: EnvelopeBounds,
    ) -> Result<Self> {
        if !(r1 > 0.0 && r1.is_finite()) {
            return Err(Error::AssumptionA("need 0 < r0 <= r1 < infinity"));
        }
        if !(bounds.inf_pi > 0.0 && bounds.inf_pi <= 1.0) {
            return Err(Error::AssumptionA("a1"));
        }
        if !(bounds.sup_beta.is_finite() && bounds.sup_beta_over_pi.is_finite()) {
            return Err(Error::AssumptionA("a2"));
        }
        let coarse = EnvelopeBounds::from_grid_sized(r1, r1, &profile, 32);
        if !bounds.dominates(&coarse) {
            return Err(Error::AssumptionA("supplied bounds are sharper than the envelope grid"));
        }
        let q = Self { r0: r1, r1, c0: None, profile, bounds, bounds_source: "closed form, spot-checked".into() };
        match c0 {
            Some(c0) => q.check_far_field(c0),
            None => Ok(q),
        }
    }

    fn check_far_field(mut self, c0: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::AssumptionA("a3"));
        }
        let far = log_space(self.r1 * (1.0 + 1e-12), self.r1.max(1.0) * FAR_FIELD_SPAN, GRID_POINTS);
        if far.iter().any(|&r| !(self.profile.beta(r) <= -c0 * r * (1.0 - 1e-12))) {
            return Err(Error::AssumptionA("a3"));
        }
        self.c0 = Some(c0);
        Ok(self)
    }

    /// Replaces the grid bounds by closed-form ones, which must be at least as pessimistic.
    pub fn with_bounds(mut self, bounds: EnvelopeBounds, source: impl Into<String>) -> Result<Self> {
        if !bounds.dominates(&self.bounds) {
            return Err(Error::AssumptionA("supplied bounds are sharper than the envelope grid"));
        }
        self.bounds = bounds;
        self.bounds_source = source.into();
        Ok(self)
    }

    pub fn is_simplified(&self) -> bool {
        self.r0 == self.r1
    }
}

/// Grid quantities entering assumption (B).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsB {
    /// `inf α̲_{l0}(r)/r` over `(0, r1]`.
    pub inf_alpha_over_r: f64,
    /// `sup 2β̄₊/(Ψ'(r+l0) α̲_{l0}(r))` over `(0, r1]`.
    pub sup_drift_ratio: f64,
}

/// Assumption (B) for the W₁ and Lᵖ distances.
#[derive(Debug, Clone)]
pub struct AssumptionB {
    pub profile: CouplingStatsProfile,
    pub psi: ConcavityProfile,
    pub l0: f64,
    pub r1: f64,
    pub c0: f64,
    pub bounds: BoundsB,
}

impl AssumptionB {
    /// Checks (b1) and the far-field bound `β̄(r) ≤ −c0 r` for `c0 ≥ 0`.
    ///
    /// The (b2) budget depends on `c` and is checked by the distance builders.
    pub fn new(profile: CouplingStatsProfile, psi: ConcavityProfile, l0: f64, r1: f64, c0: f64) -> Result<Self> {
        if !(l0 > 0.0 && r1 > 0.0 && l0.is_finite() && r1.is_finite()) {
            return Err(Error::AssumptionB("need l0 > 0 and r1 > 0"));
        }
        psi.validate(4.0 * (r1 + l0))?;
        let grid = half_open_grid(0.0, r1, GRID_POINTS);
        let inf_alpha_over_r = grid.iter().map(|&r| profile.alpha(r, l0) / r).fold(f64::INFINITY, f64::min);
        if !(inf_alpha_over_r > 0.0) {
            return Err(Error::AssumptionB("b1"));
        }
        let sup_drift_ratio = grid
            .iter()
            .map(|&r| 2.0 * profile.beta(r).max(0.0) / (psi.psi_prime(r + l0) * profile.alpha(r, l0)))
            .fold(0.0, f64::max);
        if !sup_drift_ratio.is_finite() {
            return Err(Error::AssumptionB("b2"));
        }
        if !(c0 >= 0.0 && c0.is_finite()) {
            return Err(Error::AssumptionB("b3"));
        }
        let far = log_space(r1 * (1.0 + 1e-12), r1.max(1.0) * FAR_FIELD_SPAN, GRID_POINTS);
        if far.iter().any(|&r| !(profile.beta(r) <= -c0 * r * (1.0 - 1e-12))) {
            return Err(Error::AssumptionB("b3"));
        }
        Ok(Self { profile, psi, l0, r1, c0, bounds: BoundsB { inf_alpha_over_r, sup_drift_ratio } })
    }
}

/// Lyapunov condition (a3*) with the radius `r1` it induces.
#[derive(Debug, Clone)]
pub struct LyapunovData {
    pub v: LyapunovFn,
    pub lambda: f64,
    /// Additive constant `C0`.
    pub c0: f64,
    /// Threshold `K` of the radius definition.
    pub k: f64,
    pub r1: f64,
    pub notes: Vec<String>,
}

impl LyapunovData {
    /// Computes `r1 = sup{ r : β̄(r)/W(r) ≥ K or W(r) ≤ 4C0/λ }` with
    /// `W(r) = inf_{|x−y|=r} V(x)+V(y)`, by a log grid on `(0, 10⁶]` and bisection.
    pub fn new(v: LyapunovFn, lambda: f64, c0: f64, k: f64, beta_upper: &RadialFn) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::LambdaOutOfRange);
        }
        if !(c0 > 0.0 && k > 0.0 && c0.is_finite() && k.is_finite()) {
            return Err(Error::InvalidProfile("C0 and K must be positive"));
        }
        let level = 4.0 * c0 / lambda;
        let inside = |r: f64| {
            let w = v.pair_floor(r);
            beta_upper(r) >= k * w || w <= level
        };
        let grid = log_space(1e-9, R1_SEARCH_CAP, 8192);
        if inside(R1_SEARCH_CAP) {
            return Err(Error::R1Unbounded);
        }
        let last = grid.iter().rposition(|&r| inside(r)).ok_or(Error::R1SearchFailed)?;
        let (mut lo, mut hi) = (grid[last], grid[last + 1]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if inside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        if !hi.is_finite() {
            return Err(Error::R1SearchFailed);
        }
        Ok(Self { v, lambda, c0, k, r1: hi, notes: Vec::new() })
    }
}

/// A named constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labeled {
    pub label: String,
    pub value: f64,
}

impl Labeled {
    pub fn new(label: impl Into<String>, value: f64) -> Self {
        Self { label: label.into(), value }
    }
}

/// A validity condition and whether it was verified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckedCondition {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

impl CheckedCondition {
    pub fn new(name: impl Into<String>, holds: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), holds, detail: detail.into() }
    }
}

/// A contraction rate `c*` with everything needed to audit it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateCertificate {
    pub theorem: String,
    pub c_star: f64,
    pub regime_constants: Vec<Labeled>,
    /// Intermediate constants that feed the regime constants.
    pub auxiliary: Vec<Labeled>,
    pub regime_boundaries: Vec<Labeled>,
    pub rho: RhoSpec,
    pub checked: Vec<CheckedCondition>,
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl RateCertificate {
    /// Assembles a certificate, refusing any failed flag and any regime constant outside `(0, 1)`.
    pub fn issue(
        theorem: impl Into<String>,
        regime_constants: Vec<Labeled>,
        auxiliary: Vec<Labeled>,
        regime_boundaries: Vec<Labeled>,
        rho: RhoSpec,
        checked: Vec<CheckedCondition>,
        notes: Vec<String>,
    ) -> Result<Self> {
        if let Some(bad) = regime_constants.iter().find(|c| !(c.value > 0.0 && c.value < 1.0)) {
            return Err(Error::NotContractive(format!("{} = {:e}", bad.label, bad.value)));
        }
        let cert = Self {
            theorem: theorem.into(),
            c_star: regime_constants.iter().map(|c| c.value).fold(f64::INFINITY, f64::min),
            regime_constants,
            auxiliary,
            regime_boundaries,
            rho,
            checked: Vec::new(),
            notes,
            config_hash: None,
        };
        cert.with_conditions(checked)
    }

    /// Appends further verified conditions, refusing on the first failure.
    pub fn with_conditions(mut self, checked: Vec<CheckedCondition>) -> Result<Self> {
        if let Some(bad) = checked.iter().find(|c| !c.holds) {
            return Err(Error::CertificateRefused(format!("{} ({})", bad.name, bad.detail)));
        }
        self.checked.extend(checked);
        Ok(self)
    }

    pub fn with_notes(mut self, notes: impl IntoIterator<Item = String>) -> Self {
        self.notes.extend(notes);
        self
    }

    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = Some(hash.into());
        self
    }

    pub fn constant(&self, label: &str) -> Option<f64> {
        self.regime_constants.iter().chain(&self.auxiliary).find(|c| c.label == label).map(|c| c.value)
    }
}

fn at_least(name: &str, value: f64, bound: f64) -> CheckedCondition {
    CheckedCondition::new(name, value >= bound * (1.0 - 1e-12), format!("{value:e} >= {bound:e}"))
}

fn same(name: &str, a: f64, b: f64) -> CheckedCondition {
    CheckedCondition::new(name, (a - b).abs() <= 1e-12 * a.abs().max(b.abs()), format!("{a:e} = {b:e}"))
}

/// `c0 / (1 + (1+a) e^{c r1}/(c r1))`, evaluated without overflow.
fn far_constant(c0: f64, a: f64, c: f64, r1: f64) -> f64 {
    let damp = c * r1 * (-c * r1).exp();
    c0 * damp / (damp + 1.0 + a)
}

/// Certificate for the total variation distance.
pub fn c_star_tv(q: &AssumptionA, rho: &RhoSpec) -> Result<RateCertificate> {
    let RhoSpec::Tv { a, c, r1, simplified } = *rho else {
        return Err(Error::CertificateRefused("distance kind must be TV".into()));
    };
    let b = &q.bounds;
    let c0 = q.c0.ok_or(Error::AssumptionA("a3"))?;
    let tail = (-c * r1).exp();
    let mut constants = Vec::new();
    let mut checked = vec![
        CheckedCondition::new("a1: inf pi > 0 on (0, r0]", b.inf_pi > 0.0, format!("{:e}", b.inf_pi)),
        CheckedCondition::new("a2: sup beta finite on (0, r1]", b.sup_beta.is_finite(), format!("{:e}", b.sup_beta)),
        CheckedCondition::new("a3: beta <= -c0 r beyond r1", c0 > 0.0, format!("c0 = {c0:e}")),
        same("distance built for this r1", r1, q.r1),
    ];
    if simplified {
        checked.push(CheckedCondition::new("simplified mode has r0 = r1", q.is_simplified(), ""));
        checked.push(same("c = 1 in simplified mode", c, 1.0));
        checked.push(at_least("a bound", a, 2.0 * (1.0 + (-r1).exp()) * b.sup_beta_over_pi + 1.0));
        constants.push(Labeled::new("c1", a * b.inf_pi / (2.0 * (a + 1.0 + r1 * (-r1).exp()))));
    } else {
        let inf_alpha = b.inf_alpha.unwrap_or(f64::INFINITY);
        checked.push(at_least("c bound", c, 4.0 * b.sup_beta_over_alpha.unwrap_or(0.0) + 1.0));
        checked.push(at_least("a bound", a, 2.0 * c * (1.0 + tail) * b.sup_beta_over_pi + 1.0));
        constants.push(Labeled::new("c1", a * b.inf_pi / (2.0 * (a + 1.0 + c * q.r0 * tail))));
        if !q.is_simplified() {
            checked.push(CheckedCondition::new(
                "a2: inf alpha > 0 on (r0, r1]",
                inf_alpha > 0.0,
                format!("{inf_alpha:e}"),
            ));
            constants.push(Labeled::new("c2", c * c * tail * inf_alpha / (2.0 * (a + 1.0 + c * r1 * tail))));
        }
    }
    constants.push(Labeled::new("c3", far_constant(c0, a, c, r1)));
    let boundaries = vec![Labeled::new("r0", q.r0), Labeled::new("r1", q.r1)];
    let notes = vec![format!("envelope bounds: {}", q.bounds_source)];
    RateCertificate::issue("tv", constants, Vec::new(), boundaries, rho.clone(), checked, notes)
}

/// Certificate for the weighted total variation distance.
pub fn c_star_weighted_tv(q: &AssumptionA, lyap: &LyapunovData, rho: &RhoSpec) -> Result<RateCertificate> {
    let RhoSpec::WeightedTv { a, c, epsilon, r1, simplified, .. } = *rho else {
        return Err(Error::CertificateRefused("distance kind must be WeightedTV".into()));
    };
    if !(lyap.lambda > 0.0 && lyap.lambda < 1.0) {
        return Err(Error::LambdaOutOfRange);
    }
    let b = &q.bounds;
    let (lambda, big_c0) = (lyap.lambda, lyap.c0);
    let tail = (-c * r1).exp();
    let c1 = (a * b.inf_pi / (2.0 * (a + 1.0))).min(lambda);
    let c3 = if simplified {
        lambda * c * tail / (16.0 * big_c0)
    } else {
        let inf_alpha = b.inf_alpha.ok_or(Error::AssumptionA("a2"))?;
        lambda * c * tail * inf_alpha * (2.0 * b.sup_beta_over_alpha.unwrap_or(0.0) + 1.0) / (16.0 * big_c0)
    };
    let c4 = (2.0 * big_c0 * c3 / (lambda * (a + 1.0))).min(c3 / (2.0 * epsilon));
    let mut constants = vec![Labeled::new("c1", c1)];
    if !simplified {
        let inf_alpha = b.inf_alpha.unwrap_or(f64::INFINITY);
        constants.push(Labeled::new("c2", (c * c * tail * inf_alpha / (4.0 * (a + 1.0))).min(lambda)));
    }
    constants.push(Labeled::new("c4", c4));
    let checked = vec![
        CheckedCondition::new("a1: inf pi > 0 on (0, r0]", b.inf_pi > 0.0, format!("{:e}", b.inf_pi)),
        CheckedCondition::new("a2: sup beta finite on (0, r1]", b.sup_beta.is_finite(), format!("{:e}", b.sup_beta)),
        CheckedCondition::new("a3*: lambda in (0, 1)", true, format!("{lambda}")),
        same("r1 is the Lyapunov radius", r1, lyap.r1),
        same("distance built for this r1", r1, q.r1),
        CheckedCondition::new("simplified mode matches r0 = r1", simplified == q.is_simplified(), ""),
    ];
    let boundaries = vec![Labeled::new("r0", q.r0), Labeled::new("r1", r1)];
    let mut notes = vec![format!("envelope bounds: {}", q.bounds_source)];
    notes.extend(lyap.notes.iter().cloned());
    RateCertificate::issue(
        "weighted-tv",
        constants,
        vec![Labeled::new("c3", c3)],
        boundaries,
        rho.clone(),
        checked,
        notes,
    )
}

fn w1_first_constant(q: &AssumptionB, c: f64) -> f64 {
    let end = q.r1 + q.l0;
    q.psi.psi_prime(end) * (-c * q.psi.psi(end)).exp() * q.bounds.inf_alpha_over_r
}

fn b_conditions(q: &AssumptionB, rho: &RhoSpec) -> Vec<CheckedCondition> {
    let c = rho.c();
    let budget = c * q.psi.psi(q.l0);
    vec![
        CheckedCondition::new(
            "b1: inf alpha_l0(r)/r > 0",
            q.bounds.inf_alpha_over_r > 0.0,
            format!("{:e}", q.bounds.inf_alpha_over_r),
        ),
        CheckedCondition::new("b2: c psi(l0) <= log 2", budget <= std::f64::consts::LN_2, format!("{budget:e}")),
        CheckedCondition::new("b3: beta <= -c0 r beyond r1", q.c0 > 0.0, format!("c0 = {:e}", q.c0)),
        at_least("c bound", c, q.bounds.sup_drift_ratio + 1.0),
        same("distance built for this r1", rho.r1(), q.r1),
    ]
}

/// Certificate for the W₁-type distance.
pub fn c_star_w1(q: &AssumptionB, rho: &RhoSpec) -> Result<RateCertificate> {
    let RhoSpec::W1 { c, r1, l0, .. } = rho else {
        return Err(Error::CertificateRefused("distance kind must be W1".into()));
    };
    let end = r1 + l0;
    let decay = (-c * q.psi.psi(end)).exp();
    let c1 = w1_first_constant(q, *c);
    let c2 = q.c0 / 2.0 * decay / (rho.radial(end) / end).max(1.0);
    let constants = vec![Labeled::new("c1", c1), Labeled::new("c2", c2)];
    let boundaries = vec![Labeled::new("r1", *r1), Labeled::new("r1+l0", end)];
    let notes = vec![
        "c2 uses exp(-c psi(r1+l0)), the derivative of f3 at the splice; the proof writes exp(-c(r1+l0)), which agrees only for the identity profile".to_string(),
    ];
    RateCertificate::issue("w1", constants, Vec::new(), boundaries, rho.clone(), b_conditions(q, rho), notes)
}

/// Certificate for the Lᵖ-type distance with jump bound `l`.
pub fn c_star_wp(q: &AssumptionB, rho: &RhoSpec, l: f64) -> Result<RateCertificate> {
    c_star_wp_on_grid(q, rho, l, GRID_POINTS)
}

/// [`c_star_wp`] with `points` grid points per regime.
pub fn c_star_wp_on_grid(q: &AssumptionB, rho: &RhoSpec, l: f64, points: usize) -> Result<RateCertificate> {
    let RhoSpec::Wp { c, r1, l0, p, k, .. } = *rho else {
        return Err(Error::CertificateRefused("distance kind must be Wp".into()));
    };
    if r1 < l + 1.0 {
        return Err(Error::R1TooSmall { r1, l });
    }
    let end = r1 + l0;
    let floor = crate::rho::wp_k_floor(c, q.c0, end, p, l);
    if k < floor * (1.0 - 1e-12) {
        return Err(Error::KBelowFloor { k, floor });
    }
    let c0 = q.c0;
    let slope = |r: f64| rho.jet(r).d1;
    let inflection = (k + 1.0) * end;
    let flat = slope(inflection);
    let far_start = 4.0 * k * end;

    let regime = |lo: f64, hi: f64, ratio: &dyn Fn(f64) -> f64| -> Option<f64> {
        (hi > lo).then(|| {
            half_open_grid(lo, hi, points)
                .into_iter()
                .map(ratio)
                .filter(|v| v.is_finite())
                .fold(f64::INFINITY, f64::min)
        })
    };
    let c2 = regime(r1, inflection - l, &|r| c0 * slope(r) * r / rho.radial(r));
    let c3 = regime(inflection - l, far_start, &|r| c0 / 2.0 * flat * r / rho.radial(r));
    let limit = p * 2f64.powf(1.0 - p) * c0 / 4.0;
    let c4 =
        regime(far_start, far_start * 1e4, &|r| c0 / 4.0 * slope(r / 2.0) * r / rho.radial(r)).map(|v| v.min(limit));

    let side_three = half_open_grid((inflection - l).max(r1), far_start, points)
        .into_iter()
        .all(|r| c0 / 2.0 * flat * r >= l * (slope(r).max(slope(r + l)) - flat) * (1.0 - 1e-12));
    let side_four = half_open_grid(far_start, far_start * 1e4, points).into_iter().all(|r| {
        let lhs = c0 / 4.0 * slope(r / 2.0) * r;
        let rhs = l * (slope(r + l) - 0.5 * slope(r / 2.0));
        !lhs.is_finite() || lhs >= rhs * (1.0 - 1e-12)
    });

    let mut constants = vec![Labeled::new("c1", w1_first_constant(q, c))];
    for (label, value) in [("c2", c2), ("c3", c3), ("c4", c4)] {
        if let Some(v) = value {
            constants.push(Labeled::new(label, v));
        }
    }
    let mut checked = b_conditions(q, rho);
    checked.extend([
        at_least("r1 >= l + 1", r1, l + 1.0),
        at_least("k floor", k, floor),
        CheckedCondition::new("jump-regime inequality on grid", side_three, "(k+1)(r1+l0) - l < r <= 4k(r1+l0)"),
        CheckedCondition::new("far-regime inequality on grid", side_four, "r > 4k(r1+l0)"),
    ]);
    let boundaries = vec![
        Labeled::new("r1", r1),
        Labeled::new("r1+l0", end),
        Labeled::new("(k+1)(r1+l0)-l", inflection - l),
        Labeled::new("4k(r1+l0)", far_start),
    ];
    let notes = vec![
        format!("c2, c3, c4 are grid infima over {points} log-spaced points per regime of the proof's drift ratios"),
        format!("c4 includes its limit p 2^(1-p) c0/4 = {limit:e}"),
    ];
    RateCertificate::issue("wp", constants, vec![Labeled::new("l", l)], boundaries, rho.clone(), checked, notes)
}

#[cfg(test)]
mod tests;
