//! Distance-like functions `ρ(x, y) = F(|x − y|)` plus indicator and Lyapunov terms.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::norm;
use crate::quad::{gauss_legendre, log_space, simpson, ABS_TOL, MAX_DEPTH};
use crate::rates::{AssumptionA, AssumptionB, LyapunovData};

/// Knots of the cached head integral `∫₀^r e^{−cΨ(s)} ds`.
pub const HEAD_KNOTS: usize = 1 << 12;
/// Points in the shape and comparability grids.
pub const SHAPE_POINTS: usize = 10_000;
/// Range searched for the comparability constant.
pub const ENVELOPE_RANGE: (f64, f64) = (1e-6, 1e3);
/// Largest tolerated change of a cached knot when the head is recomputed finer.
pub const REFINEMENT_TOL: f64 = 1e-9;

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The concave profile `Ψ` of the W₁ and Lᵖ distances.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr", into = "ProfileRepr")]
pub enum ConcavityProfile {
    Linear { slope: f64 },
    Custom { label: String, psi: RadialFn, psi_prime: RadialFn, psi_double_prime: RadialFn },
}

impl fmt::Debug for ConcavityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear { slope } => write!(f, "Linear {{ slope: {slope} }}"),
            Self::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl Default for ConcavityProfile {
    fn default() -> Self {
        Self::identity()
    }
}

impl ConcavityProfile {
    pub fn identity() -> Self {
        Self::Linear { slope: 1.0 }
    }

    pub fn linear(slope: f64) -> Result<Self> {
        if slope > 0.0 && slope.is_finite() {
            Ok(Self::Linear { slope })
        } else {
            Err(Error::InvalidProfile("psi' must be positive"))
        }
    }

    /// A user profile, checked on a grid of `(0, r_max]`.
    pub fn custom(
        label: impl Into<String>,
        psi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        psi_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        psi_double_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        r_max: f64,
    ) -> Result<Self> {
        let profile = Self::Custom {
            label: label.into(),
            psi: Arc::new(psi),
            psi_prime: Arc::new(psi_prime),
            psi_double_prime: Arc::new(psi_double_prime),
        };
        profile.validate(r_max)?;
        Ok(profile)
    }

    pub fn psi(&self, r: f64) -> f64 {
        match self {
            Self::Linear { slope } => slope * r,
            Self::Custom { psi, .. } => psi(r),
        }
    }

    pub fn psi_prime(&self, r: f64) -> f64 {
        match self {
            Self::Linear { slope } => *slope,
            Self::Custom { psi_prime, .. } => psi_prime(r),
        }
    }

    pub fn psi_double_prime(&self, r: f64) -> f64 {
        match self {
            Self::Linear { .. } => 0.0,
            Self::Custom { psi_double_prime, .. } => psi_double_prime(r),
        }
    }

    /// `Ψ(0) = 0`, `Ψ' > 0`, `Ψ'' ≤ 0` and `Ψ''` non-increasing on a grid of `(0, r_max]`.
    pub fn validate(&self, r_max: f64) -> Result<()> {
        if self.psi(0.0).abs() > 1e-12 {
            return Err(Error::InvalidProfile("psi(0) must vanish"));
        }
        let grid = log_space(r_max * 1e-6, r_max, SHAPE_POINTS);
        let mut previous = f64::INFINITY;
        for &r in &grid {
            let (v, d1, d2) = (self.psi(r), self.psi_prime(r), self.psi_double_prime(r));
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidProfile("psi must be finite and nonnegative"));
            }
            if !(d1 > 0.0 && d1.is_finite()) {
                return Err(Error::InvalidProfile("psi' must be positive"));
            }
            if !(d2 <= 0.0) {
                return Err(Error::InvalidProfile("psi'' must be nonpositive"));
            }
            if d2 > previous + 1e-12 * previous.abs().max(1.0) {
                return Err(Error::InvalidProfile("psi'' must be non-increasing"));
            }
            previous = d2;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ProfileRepr {
    Linear { slope: f64 },
    Custom { label: String },
}

impl From<ConcavityProfile> for ProfileRepr {
    fn from(p: ConcavityProfile) -> Self {
        match p {
            ConcavityProfile::Linear { slope } => Self::Linear { slope },
            ConcavityProfile::Custom { label, .. } => Self::Custom { label },
        }
    }
}

impl TryFrom<ProfileRepr> for ConcavityProfile {
    type Error = String;

    fn try_from(r: ProfileRepr) -> Result<Self, String> {
        match r {
            ProfileRepr::Linear { slope } => Ok(Self::Linear { slope }),
            ProfileRepr::Custom { label } => Err(format!("custom profile `{label}` cannot be restored from JSON")),
        }
    }
}

/// Lyapunov function `V` of the weighted total variation distance.
///
/// Custom functions must be radial and non-decreasing in `|x|`; `radial` is
/// their profile and drives the pair infimum used for `r1`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "LyapunovRepr", into = "LyapunovRepr")]
pub enum LyapunovFn {
    Power { theta: f64 },
    Custom { label: String, v: PointFn, radial: RadialFn },
}

impl fmt::Debug for LyapunovFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Power { theta } => write!(f, "Power {{ theta: {theta} }}"),
            Self::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl LyapunovFn {
    pub fn power(theta: f64) -> Result<Self> {
        if theta > 0.0 && theta <= 2.0 {
            Ok(Self::Power { theta })
        } else {
            Err(Error::InvalidProfile("Lyapunov exponent must lie in (0, 2]"))
        }
    }

    pub fn custom(
        label: impl Into<String>,
        v: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        radial: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::Custom { label: label.into(), v: Arc::new(v), radial: Arc::new(radial) }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Power { theta } => norm(x).powf(*theta),
            Self::Custom { v, .. } => v(x),
        }
    }

    /// `inf_{|x−y| = r} V(x) + V(y)`.
    pub fn pair_floor(&self, r: f64) -> f64 {
        match self {
            Self::Power { theta } if *theta >= 1.0 => 2.0 * (r / 2.0).powf(*theta),
            Self::Power { theta } => r.powf(*theta),
            Self::Custom { radial, .. } => (0..=256)
                .map(|i| {
                    let t = r / 2.0 * i as f64 / 256.0;
                    radial(t) + radial(r - t)
                })
                .fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LyapunovRepr {
    Power { theta: f64 },
    Custom { label: String },
}

impl From<LyapunovFn> for LyapunovRepr {
    fn from(v: LyapunovFn) -> Self {
        match v {
            LyapunovFn::Power { theta } => Self::Power { theta },
            LyapunovFn::Custom { label, .. } => Self::Custom { label },
        }
    }
}

impl TryFrom<LyapunovRepr> for LyapunovFn {
    type Error = String;

    fn try_from(r: LyapunovRepr) -> Result<Self, String> {
        match r {
            LyapunovRepr::Power { theta } => Ok(Self::Power { theta }),
            LyapunovRepr::Custom { label } => {
                Err(format!("custom Lyapunov function `{label}` cannot be restored from JSON"))
            }
        }
    }
}

/// Cumulative values of `∫₀^r e^{−cΨ(s)} ds` at uniform knots of `[0, end]`.
///
/// Between knots the value is completed by a Gauss–Legendre segment, which
/// keeps finite differences of the head accurate to rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadCache {
    pub end: f64,
    pub knots: Vec<f64>,
}

impl HeadCache {
    pub fn build(profile: &ConcavityProfile, c: f64, end: f64) -> Result<Self> {
        Self::build_with(profile, c, end, 1, ABS_TOL)
    }

    fn build_with(profile: &ConcavityProfile, c: f64, end: f64, panels: usize, tol: f64) -> Result<Self> {
        let step = end / (HEAD_KNOTS - 1) as f64;
        let integrand = |s: f64| (-c * profile.psi(s)).exp();
        let per_segment = tol / HEAD_KNOTS as f64;
        let mut knots = Vec::with_capacity(HEAD_KNOTS);
        let mut total = 0.0;
        knots.push(0.0);
        for i in 1..HEAD_KNOTS {
            let lo = step * (i - 1) as f64;
            let hi = if i == HEAD_KNOTS - 1 { end } else { step * i as f64 };
            total += simpson(integrand, lo, hi, per_segment, MAX_DEPTH, panels)?;
            knots.push(total);
        }
        Ok(Self { end, knots })
    }

    /// Largest knot change when every segment is recomputed with twice the
    /// panels and half the tolerance.
    pub fn refinement_gap(&self, profile: &ConcavityProfile, c: f64) -> Result<f64> {
        let finer = Self::build_with(profile, c, self.end, 2, ABS_TOL / 2.0)?;
        Ok(self.knots.iter().zip(&finer.knots).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    fn eval(&self, profile: &ConcavityProfile, c: f64, r: f64) -> f64 {
        let step = self.end / (HEAD_KNOTS - 1) as f64;
        let i = ((r / step).floor() as usize).min(HEAD_KNOTS - 1);
        let base = step * i as f64;
        if r == base {
            return self.knots[i];
        }
        self.knots[i] + gauss_legendre(|s| (-c * profile.psi(s)).exp(), base, r)
    }

    pub fn total(&self) -> f64 {
        self.knots[HEAD_KNOTS - 1]
    }
}

/// The kind of a distance-like function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RhoKind {
    #[serde(rename = "TV")]
    Tv,
    #[serde(rename = "WeightedTV")]
    WeightedTv,
    W1,
    Wp,
}

/// A fully resolved distance-like function.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RhoSpec {
    #[serde(rename = "TV")]
    Tv {
        a: f64,
        c: f64,
        r1: f64,
        simplified: bool,
    },
    #[serde(rename = "WeightedTV")]
    WeightedTv {
        a: f64,
        c: f64,
        epsilon: f64,
        r1: f64,
        #[serde(rename = "A")]
        big_a: f64,
        simplified: bool,
        lyapunov: LyapunovFn,
    },
    W1 {
        c: f64,
        r1: f64,
        l0: f64,
        profile: ConcavityProfile,
        quadrature_cache: HeadCache,
    },
    Wp {
        c: f64,
        r1: f64,
        l0: f64,
        p: f64,
        k: f64,
        #[serde(rename = "A")]
        big_a: f64,
        profile: ConcavityProfile,
        quadrature_cache: HeadCache,
    },
}

/// `f` and its first three derivatives at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

pub fn build_tv_distance(q: &AssumptionA, simplified: bool) -> Result<RhoSpec> {
    let b = &q.bounds;
    if simplified {
        if q.r0 != q.r1 {
            return Err(Error::AssumptionA("simplified mode needs r0 = r1"));
        }
        let a = 2.0 * (1.0 + (-q.r1).exp()) * b.sup_beta_over_pi + 1.0;
        return Ok(RhoSpec::Tv { a, c: 1.0, r1: q.r1, simplified: true });
    }
    let c = 4.0 * b.sup_beta_over_alpha.unwrap_or(0.0) + 1.0;
    let a = 2.0 * c * (1.0 + (-c * q.r1).exp()) * b.sup_beta_over_pi + 1.0;
    Ok(RhoSpec::Tv { a, c, r1: q.r1, simplified: false })
}

pub fn build_weighted_tv_distance(q: &AssumptionA, lyap: &LyapunovData) -> Result<RhoSpec> {
    if !(lyap.lambda > 0.0 && lyap.lambda < 1.0) {
        return Err(Error::LambdaOutOfRange);
    }
    if (q.r1 - lyap.r1).abs() > 1e-12 * lyap.r1 {
        return Err(Error::AssumptionA("r1 must be the Lyapunov radius"));
    }
    let b = &q.bounds;
    let (r1, c0, k, lambda) = (lyap.r1, lyap.c0, lyap.k, lyap.lambda);
    let simplified = q.r0 == q.r1;
    let (big_a, c, epsilon) = if simplified {
        let big_a = 16.0 * k * c0 / lambda;
        let c = big_a + 1.0;
        (big_a, c, c * c * (-c * r1).exp() / (8.0 * c0))
    } else {
        let inf_alpha = b.inf_alpha.ok_or(Error::AssumptionA("a2"))?;
        let big_a = 16.0 * k * c0 / (lambda * inf_alpha);
        let c = 2.0 * b.sup_beta_over_alpha.unwrap_or(0.0) + big_a + 1.0;
        (big_a, c, c * c * (-c * r1).exp() * inf_alpha / (8.0 * c0))
    };
    let a = 2.0 * (c * b.sup_beta_head + 2.0 * epsilon * c0) / b.inf_pi;
    Ok(RhoSpec::WeightedTv { a, c, epsilon, r1, big_a, simplified, lyapunov: lyap.v.clone() })
}

pub fn build_w1_distance(q: &AssumptionB) -> Result<RhoSpec> {
    let c = q.bounds.sup_drift_ratio + 1.0;
    let budget = c * q.psi.psi(q.l0);
    if budget > std::f64::consts::LN_2 {
        return Err(Error::B2Violated { budget });
    }
    let end = q.r1 + q.l0;
    let quadrature_cache = HeadCache::build(&q.psi, c, end)?;
    Ok(RhoSpec::W1 { c, r1: q.r1, l0: q.l0, profile: q.psi.clone(), quadrature_cache })
}

/// Smallest admissible `k` for the Lᵖ distance.
pub fn wp_k_floor(c: f64, c0: f64, end: f64, p: f64, l: f64) -> f64 {
    1.0 + (2.0 * l * (c * l).exp() / (c0 * end)).max(4f64.powf(p) * l / (c0 * end))
}

/// Builds the Lᵖ distance with `k` at its floor unless a larger one is given.
pub fn build_wp_distance(q: &AssumptionB, p: f64, l: f64, k: Option<f64>) -> Result<RhoSpec> {
    if !(p > 2.0 && p.is_finite()) {
        return Err(Error::InvalidProfile("p must exceed 2"));
    }
    if !(l >= 0.0 && l.is_finite()) {
        return Err(Error::InvalidProfile("jump bound l must be nonnegative"));
    }
    if q.r1 < l + 1.0 {
        return Err(Error::R1TooSmall { r1: q.r1, l });
    }
    if q.c0 <= 0.0 {
        return Err(Error::NotContractive("c0 must be positive".into()));
    }
    let c = q.bounds.sup_drift_ratio + 1.0;
    let budget = c * q.psi.psi(q.l0);
    if budget > std::f64::consts::LN_2 {
        return Err(Error::B2Violated { budget });
    }
    let end = q.r1 + q.l0;
    if (q.psi.psi_prime(end) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProfile("Lp distance needs psi'(r1 + l0) = 1"));
    }
    let floor = wp_k_floor(c, q.c0, end, p, l);
    let k = match k {
        Some(k) if k < floor => return Err(Error::KBelowFloor { k, floor }),
        Some(k) => k,
        None => floor,
    };
    let big_a = (k * end).powf(2.0 - p) * c * (-c * (q.psi.psi(end) + k * end)).exp() / (p * (p - 1.0));
    if !(big_a > 0.0 && big_a.is_finite()) {
        return Err(Error::NotContractive(format!("tail coefficient A = {big_a} is not representable")));
    }
    let quadrature_cache = HeadCache::build(&q.psi, c, end)?;
    Ok(RhoSpec::Wp { c, r1: q.r1, l0: q.l0, p, k, big_a, profile: q.psi.clone(), quadrature_cache })
}

fn head_jet(profile: &ConcavityProfile, cache: &HeadCache, c: f64, r: f64) -> Jet {
    let e = (-c * profile.psi(r)).exp();
    let (d1, d2) = (profile.psi_prime(r), profile.psi_double_prime(r));
    Jet { value: cache.eval(profile, c, r), d1: e, d2: -c * d1 * e, d3: (c * c * d1 * d1 - c * d2) * e }
}

impl RhoSpec {
    pub fn kind(&self) -> RhoKind {
        match self {
            Self::Tv { .. } => RhoKind::Tv,
            Self::WeightedTv { .. } => RhoKind::WeightedTv,
            Self::W1 { .. } => RhoKind::W1,
            Self::Wp { .. } => RhoKind::Wp,
        }
    }

    pub fn c(&self) -> f64 {
        match self {
            Self::Tv { c, .. } | Self::WeightedTv { c, .. } | Self::W1 { c, .. } | Self::Wp { c, .. } => *c,
        }
    }

    pub fn r1(&self) -> f64 {
        match self {
            Self::Tv { r1, .. } | Self::WeightedTv { r1, .. } | Self::W1 { r1, .. } | Self::Wp { r1, .. } => *r1,
        }
    }

    /// Weight of the off-diagonal indicator.
    pub fn jump(&self) -> f64 {
        match self {
            Self::Tv { a, .. } | Self::WeightedTv { a, .. } => *a,
            _ => 0.0,
        }
    }

    /// Splice point `r1 + l0` of the concave head, if any.
    pub fn splice(&self) -> Option<f64> {
        match self {
            Self::W1 { r1, l0, .. } | Self::Wp { r1, l0, .. } => Some(r1 + l0),
            _ => None,
        }
    }

    /// Inflection point `(k+1)(r1+l0)` of the Lᵖ distance.
    pub fn inflection(&self) -> Option<f64> {
        match self {
            Self::Wp { r1, l0, k, .. } => Some((k + 1.0) * (r1 + l0)),
            _ => None,
        }
    }

    /// The radial part `F` and its derivatives at `r ≥ 0`.
    pub fn jet(&self, r: f64) -> Jet {
        match self {
            Self::Tv { c, r1, .. } => {
                let (e, tail) = ((-c * r).exp(), (-c * r1).exp());
                Jet {
                    value: -(-c * r).exp_m1() + c * tail * r,
                    d1: c * e + c * tail,
                    d2: -c * c * e,
                    d3: c * c * c * e,
                }
            }
            Self::WeightedTv { c, .. } => {
                let e = (-c * r).exp();
                Jet { value: -(-c * r).exp_m1(), d1: c * e, d2: -c * c * e, d3: c * c * c * e }
            }
            Self::W1 { c, r1, l0, profile, quadrature_cache } => {
                let end = r1 + l0;
                if r <= end {
                    return head_jet(profile, quadrature_cache, *c, r);
                }
                let at = head_jet(profile, quadrature_cache, *c, end);
                let q = 2.0 * at.d2 / at.d1;
                let t = r - end;
                let grow = (q * t).exp();
                Jet {
                    value: at.value + at.d1 / 2.0 * (t + (q * t).exp_m1() / q),
                    d1: at.d1 / 2.0 * (1.0 + grow),
                    d2: at.d1 / 2.0 * q * grow,
                    d3: at.d1 / 2.0 * q * q * grow,
                }
            }
            Self::Wp { c, r1, l0, p, big_a, profile, quadrature_cache, .. } => {
                let end = r1 + l0;
                if r <= end {
                    return head_jet(profile, quadrature_cache, *c, r);
                }
                let at = quadrature_cache.total();
                let e = (-c * profile.psi(end)).exp();
                let t = r - end;
                let decay = (-c * t).exp();
                Jet {
                    value: at + big_a * t.powf(*p) - e / c * (-c * t).exp_m1(),
                    d1: p * big_a * t.powf(p - 1.0) + e * decay,
                    d2: p * (p - 1.0) * big_a * t.powf(p - 2.0) - c * e * decay,
                    d3: p * (p - 1.0) * (p - 2.0) * big_a * t.powf(p - 3.0) + c * c * e * decay,
                }
            }
        }
    }

    pub fn radial(&self, r: f64) -> f64 {
        self.jet(r).value
    }

    /// `ρ(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        if x == y {
            return Ok(0.0);
        }
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let r = norm(&diff);
        if !(r >= 0.0) {
            return Err(Error::NegativeDistance);
        }
        let mut value = self.jump() + self.radial(r);
        if let Self::WeightedTv { epsilon, lyapunov, .. } = self {
            let (vx, vy) = (lyapunov.eval(x), lyapunov.eval(y));
            if !(vx >= 0.0 && vy >= 0.0) {
                return Err(Error::InvalidProfile("Lyapunov function returned NaN or a negative value"));
            }
            value += epsilon * (vx + vy);
        }
        Ok(value)
    }

    /// `c̄ ≥ 1` with `c̄⁻¹·s(r) ≤ ρ ≤ c̄·s(r)` for the kind's scale `s`.
    ///
    /// Radial kinds are searched on a log grid of [`ENVELOPE_RANGE`] together
    /// with the limits at both ends; the weighted kind has a closed form.
    pub fn comparability_constant(&self) -> f64 {
        if let Self::WeightedTv { a, epsilon, .. } = self {
            return (a + 1.0).max(*epsilon).max(1.0 / a.min(*epsilon));
        }
        let (limit_zero, limit_inf) = match self {
            Self::Tv { a, c, r1, .. } => (*a, c * (-c * r1).exp()),
            Self::W1 { .. } => {
                let end = self.splice().unwrap_or(0.0);
                (1.0, self.jet(end).d1 / 2.0)
            }
            Self::Wp { big_a, .. } => (1.0, *big_a),
            Self::WeightedTv { .. } => unreachable!(),
        };
        let (lo, hi) = ENVELOPE_RANGE;
        log_space(lo, hi, SHAPE_POINTS)
            .into_iter()
            .map(|r| self.sandwich_ratio(r))
            .chain([limit_zero, limit_inf])
            .map(|q| q.max(1.0 / q))
            .fold(1.0, f64::max)
    }

    /// `(c̄⁻¹, c̄)`.
    pub fn comparability_bounds(&self) -> (f64, f64) {
        let bar = self.comparability_constant();
        (1.0 / bar, bar)
    }

    /// `ρ / s` at radius `r` for the radial kinds.
    pub fn sandwich_ratio(&self, r: f64) -> f64 {
        let f = self.radial(r);
        match self {
            Self::Tv { a, .. } | Self::WeightedTv { a, .. } => (a + f) / (1.0 + r),
            Self::W1 { .. } => f / r,
            Self::Wp { p, .. } => f / r.max(r.powf(*p)),
        }
    }

    /// Largest knot change of the head cache under refinement; zero for kinds without one.
    pub fn refinement_gap(&self) -> Result<f64> {
        match self {
            Self::W1 { c, profile, quadrature_cache, .. } | Self::Wp { c, profile, quadrature_cache, .. } => {
                quadrature_cache.refinement_gap(profile, *c)
            }
            _ => Ok(0.0),
        }
    }

    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string(self)
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Outcome of the derivative sign and comparability checks.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ShapeReport {
    pub points: usize,
    pub sign_failures: Vec<String>,
    pub difference_failures: Vec<String>,
    pub comparability_failures: Vec<String>,
    pub comparability_constant: f64,
    pub inflection_residual: Option<f64>,
}

impl ShapeReport {
    pub fn passed(&self) -> bool {
        self.sign_failures.is_empty()
            && self.difference_failures.is_empty()
            && self.comparability_failures.is_empty()
            && self.inflection_residual.is_none_or(|v| v <= 1e-9)
    }
}

const DIFF_RTOL: f64 = 1e-4;

fn difference_ok(fd: f64, analytic: f64, g_lo: f64, g_hi: f64, step: f64) -> bool {
    // subnormal values carry no relative precision
    let roundoff = 16.0 * f64::EPSILON * g_lo.abs().max(g_hi.abs()) / step + f64::MIN_POSITIVE;
    (fd - analytic).abs() <= DIFF_RTOL * analytic.abs() + roundoff
}

/// Checks the kind's derivative pattern and sandwich on `points` log-spaced radii.
///
/// Analytic derivatives carry the sign checks; central differences of the
/// value and of the analytic lower derivatives confirm them.
pub fn check_shape(spec: &RhoSpec, points: usize) -> ShapeReport {
    let (lo, hi) = ENVELOPE_RANGE;
    let hi = spec.inflection().map_or(hi, |x| hi.max(4.0 * x));
    let grid = log_space(lo, hi, points);
    let bar = spec.comparability_constant();
    let mut report = ShapeReport { points, comparability_constant: bar, ..ShapeReport::default() };
    let kinks: Vec<f64> = spec.splice().into_iter().collect();
    let underflow = |r: f64| {
        let exponent = match spec {
            RhoSpec::Tv { c, .. } | RhoSpec::WeightedTv { c, .. } => -c * r,
            RhoSpec::W1 { c, profile, .. } | RhoSpec::Wp { c, profile, .. } => -c * profile.psi(r),
        };
        exponent.exp() == 0.0
    };
    let mut previous_d2 = f64::NEG_INFINITY;
    for &r in &grid {
        let jet = spec.jet(r);
        let strict_concave = match spec {
            RhoSpec::Tv { .. } | RhoSpec::WeightedTv { .. } => true,
            RhoSpec::W1 { .. } => false,
            RhoSpec::Wp { .. } => r < spec.inflection().unwrap_or(f64::INFINITY),
        };
        let mut sign = |ok: bool, what: &str| {
            if !ok {
                report.sign_failures.push(format!("{what} at r = {r:e}"));
            }
        };
        sign(jet.d1 > 0.0 || underflow(r), "f' <= 0");
        match spec {
            RhoSpec::W1 { .. } => sign(jet.d2 <= 0.0, "f'' > 0"),
            _ if strict_concave => sign(jet.d2 < 0.0 || underflow(r), "f'' >= 0"),
            _ => sign(jet.d2 >= 0.0, "f'' < 0 past the inflection"),
        }
        match spec {
            RhoSpec::Tv { .. } | RhoSpec::WeightedTv { .. } => sign(jet.d3 > 0.0 || underflow(r), "f''' <= 0"),
            _ => sign(jet.d3 >= 0.0, "f''' < 0"),
        }
        sign(jet.d2 >= previous_d2, "f'' decreasing");
        previous_d2 = jet.d2;

        let step = 1e-6 * r.max(1.0);
        let straddles = kinks.iter().any(|k| (r - k).abs() <= step);
        if !straddles {
            let (below, above) = (spec.jet((r - step).max(0.0)), spec.jet(r + step));
            let width = r + step - (r - step).max(0.0);
            let checks = [
                ("f'", (above.value - below.value) / width, jet.d1, below.value, above.value),
                ("f''", (above.d1 - below.d1) / width, jet.d2, below.d1, above.d1),
                ("f'''", (above.d2 - below.d2) / width, jet.d3, below.d2, above.d2),
            ];
            for (what, fd, analytic, g_lo, g_hi) in checks {
                if !difference_ok(fd, analytic, g_lo, g_hi, width / 2.0) {
                    report
                        .difference_failures
                        .push(format!("{what}: difference {fd:e} vs analytic {analytic:e} at r = {r:e}"));
                }
            }
        }

        if r <= ENVELOPE_RANGE.1 && !matches!(spec, RhoSpec::WeightedTv { .. }) {
            let q = spec.sandwich_ratio(r);
            if q > bar * (1.0 + 1e-12) || q < (1.0 - 1e-12) / bar {
                report
                    .comparability_failures
                    .push(format!("ratio {q:e} outside [{:e}, {bar:e}] at r = {r:e}", 1.0 / bar));
            }
        }
    }
    if let Some(x) = spec.inflection() {
        report.inflection_residual = Some(spec.jet(x).d2.abs());
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w1_identity(c: f64, end: f64) -> RhoSpec {
        let profile = ConcavityProfile::identity();
        let quadrature_cache = HeadCache::build(&profile, c, end).unwrap();
        RhoSpec::W1 { c, r1: end, l0: 0.0, profile, quadrature_cache }
    }

    #[test]
    fn tv_value_at_r1_cancels() {
        let spec = RhoSpec::Tv { a: 1.0, c: 1.0, r1: 1.0, simplified: false };
        assert!((spec.radial(1.0) - 1.0).abs() < 1e-15);
        assert!((spec.eval(&[0.0], &[1.0]).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(spec.eval(&[0.3], &[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn w1_head_matches_closed_form() {
        let spec = w1_identity(1.0, 2.0);
        assert!((spec.radial(1.0) - 0.632_120_558_828_557_7).abs() < 1e-12);
        assert_eq!(spec.radial(0.0), 0.0);
        assert!(spec.refinement_gap().unwrap() < REFINEMENT_TOL);
    }

    #[test]
    fn w1_tail_pastes_smoothly() {
        let spec = w1_identity(1.5, 3.0);
        let end = 3.0;
        let (below, above) = (spec.jet(end - 1e-12), spec.jet(end + 1e-12));
        assert!((below.value - above.value).abs() < 1e-9);
        assert!((below.d1 - above.d1).abs() < 1e-9);
        assert!((below.d2 - above.d2).abs() < 1e-9);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let spec = w1_identity(1.0 / 3.0, 2.5);
        let back = RhoSpec::from_json(&spec.to_json().unwrap()).unwrap();
        match (&spec, &back) {
            (RhoSpec::W1 { c, quadrature_cache, .. }, RhoSpec::W1 { c: c2, quadrature_cache: q2, .. }) => {
                assert_eq!(c.to_bits(), c2.to_bits());
                assert_eq!(quadrature_cache, q2);
            }
            _ => panic!("kind changed"),
        }
    }

    #[test]
    fn custom_profile_rejects_convex_psi() {
        let r = ConcavityProfile::custom("convex", |r| r * r + r, |r| 2.0 * r + 1.0, |_| 2.0, 10.0);
        assert!(matches!(r, Err(Error::InvalidProfile(_))));
    }
}
