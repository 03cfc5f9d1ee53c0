//! Noise laws: sampling, densities and the overlap functionals `μ ∧ (δ_v ∗ μ)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::{Rng, RngCore};
use rand_distr::{Beta, Distribution, StandardNormal};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::quad::{integrate, simpson};
use crate::rng::{domain, Streams, BLOCK};
use crate::stable::{self, DensityTable};
use crate::stats::Estimate;

/// Lattice spacing of discretized noises used by the exact oracle.
pub const LATTICE_DELTA: f64 = 0.05;
/// Upper quantile at which lattice noises are cut.
pub const LATTICE_QUANTILE: f64 = 1.0 - 1e-6;
/// Samples used for Monte Carlo overlap and tail estimates.
pub const MC_SAMPLES: usize = 200_000;
/// Largest tolerated relative standard error of a Monte Carlo overlap.
pub const MAX_RELATIVE_SE: f64 = 0.05;

/// A symmetric probability mass function on `δℤ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePmf {
    delta: f64,
    half: usize,
    pmf: Vec<f64>,
    cumulative: Vec<f64>,
}

impl LatticePmf {
    /// Builds from the masses at `0, δ, 2δ, …`; mirrored and renormalized.
    pub fn symmetric(delta: f64, nonneg_masses: &[f64]) -> Result<Self> {
        if !(delta > 0.0) || nonneg_masses.is_empty() || nonneg_masses.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidNoise("lattice masses must be nonnegative".into()));
        }
        let half = nonneg_masses.len() - 1;
        let mut pmf: Vec<f64> = nonneg_masses.iter().rev().chain(&nonneg_masses[1..]).copied().collect();
        let total: f64 = crate::stats::pairwise_sum(&pmf);
        pmf.iter_mut().for_each(|p| *p /= total);
        let cumulative = pmf
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(Self { delta, half, pmf, cumulative })
    }

    /// Cell masses of a one-dimensional law, cut at its `1 − 10⁻⁶` quantile.
    pub fn discretize(noise: &NoiseSpec, delta: f64) -> Result<Self> {
        if noise.dim != 1 {
            return Err(Error::InvalidNoise("lattice discretization needs d = 1".into()));
        }
        let cut = noise.upper_quantile(LATTICE_QUANTILE)?;
        let k = (cut / delta).ceil() as usize;
        let masses = (0..=k)
            .map(|i| {
                let hi = noise.cdf_1d((i as f64 + 0.5) * delta)?;
                let lo = if i == 0 { 0.5 } else { noise.cdf_1d((i as f64 - 0.5) * delta)? };
                Ok(if i == 0 { 2.0 * (hi - lo) } else { hi - lo })
            })
            .collect::<Result<Vec<f64>>>()?;
        Self::symmetric(delta, &masses)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.pmf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pmf.is_empty()
    }

    /// `(point, mass)` pairs in increasing order.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.pmf.iter().enumerate().map(|(i, &p)| (self.point(i), p))
    }

    fn point(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64) * self.delta
    }

    /// Mass at `z`, zero off the lattice.
    pub fn mass(&self, z: f64) -> f64 {
        let k = (z / self.delta).round();
        if (z - k * self.delta).abs() > 1e-9 * self.delta {
            return 0.0;
        }
        let idx = k + self.half as f64;
        if idx < 0.0 || idx >= self.pmf.len() as f64 {
            0.0
        } else {
            self.pmf[idx as usize]
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.pmf.len() - 1);
        self.point(i)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.atoms().filter(|(z, _)| *z <= x + 1e-12).map(|(_, p)| p).sum()
    }
}

type SamplerFn = dyn Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync;

/// Radial density `m(|z|)` with a user sampler, in any dimension.
#[derive(Clone)]
pub struct RadialDensity {
    pub density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub sampler: Arc<SamplerFn>,
    /// `m` non-increasing on `(0, ∞)`.
    pub monotone: bool,
    /// `∫ |z| m(|z|) dz < ∞`.
    pub first_moment: bool,
}

impl fmt::Debug for RadialDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialDensity")
            .field("monotone", &self.monotone)
            .field("first_moment", &self.first_moment)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum NoiseFamily {
    Gaussian,
    Stable {
        alpha: f64,
    },
    Cauchy,
    /// `μ(dz) ∝ 1{0 < z₁ ≤ 1} (1 + |z|)^{-(d+α)} dz`.
    NonIsotropic {
        alpha: f64,
        normalizer: f64,
    },
    Radial(RadialDensity),
    Lattice(Arc<LatticePmf>),
}

/// A noise law `μ` on `ℝ^d`.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    family: NoiseFamily,
    dim: usize,
    table: OnceLock<Arc<DensityTable>>,
}

impl NoiseSpec {
    fn build(family: NoiseFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidNoise("dimension must be positive".into()));
        }
        Ok(Self { family, dim, table: OnceLock::new() })
    }

    pub fn gaussian(dim: usize) -> Result<Self> {
        Self::build(NoiseFamily::Gaussian, dim)
    }

    pub fn cauchy(dim: usize) -> Result<Self> {
        Self::build(NoiseFamily::Cauchy, dim)
    }

    pub fn stable(alpha: f64, dim: usize) -> Result<Self> {
        stable::check_alpha(alpha)?;
        if alpha == 1.0 {
            return Self::cauchy(dim);
        }
        Self::build(NoiseFamily::Stable { alpha }, dim)
    }

    pub fn nonisotropic(alpha: f64, dim: usize) -> Result<Self> {
        stable::check_alpha(alpha)?;
        let normalizer = nonisotropic_normalizer(alpha, dim)?;
        Self::build(NoiseFamily::NonIsotropic { alpha, normalizer }, dim)
    }

    pub fn radial(density: RadialDensity, dim: usize) -> Result<Self> {
        Self::build(NoiseFamily::Radial(density), dim)
    }

    pub fn lattice(pmf: LatticePmf) -> Result<Self> {
        Self::build(NoiseFamily::Lattice(Arc::new(pmf)), 1)
    }

    /// Parses `gaussian`, `cauchy`, `stable:α` or `example-nonisotropic:α`.
    pub fn from_key(key: &str, dim: usize) -> Result<Self> {
        let (name, arg) = match key.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (key, None),
        };
        let alpha = || -> Result<f64> {
            arg.ok_or_else(|| Error::InvalidNoise(format!("`{key}` needs an index")))?
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidNoise(format!("cannot parse index in `{key}`")))
        };
        match (name.trim(), arg) {
            ("gaussian", None) => Self::gaussian(dim),
            ("cauchy", None) => Self::cauchy(dim),
            ("stable", Some(_)) => Self::stable(alpha()?, dim),
            ("example-nonisotropic", Some(_)) => Self::nonisotropic(alpha()?, dim),
            _ => Err(Error::InvalidNoise(format!("unknown noise key `{key}`"))),
        }
    }

    pub fn key(&self) -> String {
        match &self.family {
            NoiseFamily::Gaussian => "gaussian".into(),
            NoiseFamily::Cauchy => "cauchy".into(),
            NoiseFamily::Stable { alpha } => format!("stable:{alpha}"),
            NoiseFamily::NonIsotropic { alpha, .. } => format!("example-nonisotropic:{alpha}"),
            NoiseFamily::Radial(_) => "radial".into(),
            NoiseFamily::Lattice(p) => format!("lattice:{}", p.delta),
        }
    }

    pub fn family(&self) -> &NoiseFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stability index of the family (2 for Gaussian), when meaningful.
    pub fn alpha(&self) -> Option<f64> {
        match &self.family {
            NoiseFamily::Gaussian => Some(2.0),
            NoiseFamily::Cauchy => Some(1.0),
            NoiseFamily::Stable { alpha } | NoiseFamily::NonIsotropic { alpha, .. } => Some(*alpha),
            _ => None,
        }
    }

    /// The Euler-scheme scale `h^{1/α}` (`h^{1/2}` when no index applies).
    pub fn natural_scale(&self, h: f64) -> f64 {
        match self.alpha() {
            Some(a) if !matches!(self.family, NoiseFamily::NonIsotropic { .. }) => h.powf(1.0 / a),
            _ => h.sqrt(),
        }
    }

    /// Condition (c4): radial with non-increasing profile.
    pub fn is_monotone_radial(&self) -> bool {
        match &self.family {
            NoiseFamily::Gaussian | NoiseFamily::Cauchy | NoiseFamily::Stable { .. } => true,
            NoiseFamily::Radial(r) => r.monotone,
            NoiseFamily::NonIsotropic { .. } => false,
            NoiseFamily::Lattice(p) => {
                let c = p.half;
                (c..p.pmf.len() - 1).all(|i| p.pmf[i + 1] <= p.pmf[i])
            }
        }
    }

    pub fn has_first_moment(&self) -> bool {
        match &self.family {
            NoiseFamily::Gaussian | NoiseFamily::Lattice(_) => true,
            NoiseFamily::Cauchy => false,
            NoiseFamily::Stable { alpha } | NoiseFamily::NonIsotropic { alpha, .. } => *alpha > 1.0,
            NoiseFamily::Radial(r) => r.first_moment,
        }
    }

    /// One draw from `μ` written into `out` (length `d`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        match &self.family {
            NoiseFamily::Gaussian => out.iter_mut().for_each(|v| *v = StandardNormal.sample(rng)),
            NoiseFamily::Cauchy => {
                let w: f64 = StandardNormal.sample(rng);
                let w = w.abs().max(f64::MIN_POSITIVE);
                out.iter_mut().for_each(|v| {
                    let g: f64 = StandardNormal.sample(rng);
                    *v = g / w;
                });
            }
            NoiseFamily::Stable { alpha } => stable::sample_isotropic(*alpha, out, rng),
            NoiseFamily::NonIsotropic { alpha, .. } => sample_nonisotropic(*alpha, out, rng),
            NoiseFamily::Radial(r) => {
                let mut dynrng = DynRng(rng);
                (r.sampler)(&mut dynrng, out)
            }
            NoiseFamily::Lattice(p) => out[0] = p.sample(rng),
        }
    }

    /// `count` draws from stream `(domain, ·)`, deterministic in the seed.
    pub fn sample(&self, count: usize, streams: &Streams, stream: u64) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        for block in 0..count.div_ceil(BLOCK) {
            let mut rng = streams.rng(stream, block as u64);
            for _ in 0..BLOCK.min(count - block * BLOCK) {
                let mut z = vec![0.0; self.dim];
                self.sample_into(&mut rng, &mut z);
                out.push(z);
            }
        }
        out
    }

    fn stable_table(&self, alpha: f64) -> Result<&DensityTable> {
        if let Some(t) = self.table.get() {
            return Ok(t);
        }
        let built = stable::density_table(alpha)?;
        let _ = self.table.set(built);
        Ok(self.table.get().expect("table just set"))
    }

    /// Log density at `z`; `-∞` outside the support.
    pub fn log_density(&self, z: &[f64]) -> Result<f64> {
        let d = self.dim as f64;
        let r2: f64 = z.iter().map(|v| v * v).sum();
        Ok(match &self.family {
            NoiseFamily::Gaussian => -0.5 * r2 - 0.5 * d * (2.0 * PI).ln(),
            NoiseFamily::Cauchy => ln_gamma((d + 1.0) / 2.0) - (d + 1.0) / 2.0 * PI.ln() - (d + 1.0) / 2.0 * r2.ln_1p(),
            NoiseFamily::Stable { alpha } => {
                if self.dim > 1 {
                    return Err(Error::DensityUnavailable);
                }
                self.stable_table(*alpha)?.eval(z[0]).ln()
            }
            NoiseFamily::NonIsotropic { alpha, normalizer } => {
                if z[0] > 0.0 && z[0] <= 1.0 {
                    -(d + alpha) * r2.sqrt().ln_1p() - normalizer.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            NoiseFamily::Radial(r) => (r.density)(r2.sqrt()).ln(),
            NoiseFamily::Lattice(p) => p.mass(z[0]).ln(),
        })
    }

    /// Density (or lattice mass) at `z`.
    pub fn density(&self, z: &[f64]) -> Result<f64> {
        Ok(self.log_density(z)?.exp())
    }

    /// Radial profile `m(r)` of a radial family.
    pub fn radial_density(&self, r: f64) -> Result<f64> {
        if matches!(self.family, NoiseFamily::NonIsotropic { .. }) {
            return Err(Error::DensityUnavailable);
        }
        let mut z = vec![0.0; self.dim];
        z[0] = r;
        self.density(&z)
    }

    /// Density of one coordinate of a radial family, as used by the one-dimensional reductions.
    pub fn marginal_density(&self, r: f64) -> Result<f64> {
        match &self.family {
            NoiseFamily::Gaussian => Ok((-0.5 * r * r).exp() / (2.0 * PI).sqrt()),
            NoiseFamily::Cauchy => Ok(1.0 / (PI * (1.0 + r * r))),
            NoiseFamily::Stable { alpha } => stable::density(*alpha, r),
            _ if self.dim == 1 => self.density(&[r]),
            _ => Err(Error::DensityUnavailable),
        }
    }

    /// `min(1, m(z − v)/m(z))`, zero when `m(z) = 0`.
    pub fn accept_ratio(&self, z: &[f64], v: &[f64]) -> Result<f64> {
        let lz = self.log_density(z)?;
        if lz == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        let shifted: Vec<f64> = z.iter().zip(v).map(|(a, b)| a - b).collect();
        let ls = self.log_density(&shifted)?;
        Ok((ls - lz).exp().min(1.0))
    }

    /// Distribution function of the first coordinate.
    pub fn cdf_1d(&self, x: f64) -> Result<f64> {
        match &self.family {
            NoiseFamily::Gaussian => Ok(0.5 * erfc(-x / std::f64::consts::SQRT_2)),
            NoiseFamily::Cauchy => Ok(0.5 + x.atan() / PI),
            NoiseFamily::Stable { alpha } => Ok(1.0 - stable::tail_table(*alpha)?.eval(x)),
            NoiseFamily::NonIsotropic { alpha, .. } if self.dim == 1 => {
                let x = x.clamp(0.0, 1.0);
                Ok((1.0 - (1.0 + x).powf(-alpha)) / (1.0 - 2f64.powf(-alpha)))
            }
            NoiseFamily::Lattice(p) => Ok(p.cdf(x)),
            NoiseFamily::Radial(_) if self.dim == 1 => {
                let upper = self.tail_1d(x.abs())?;
                Ok(if x >= 0.0 { 1.0 - upper } else { upper })
            }
            _ => Err(Error::DensityUnavailable),
        }
    }

    /// `P(ξ₁ > t)` for `t ≥ 0` and a symmetric one-dimensional marginal.
    fn tail_1d(&self, t: f64) -> Result<f64> {
        match &self.family {
            NoiseFamily::Gaussian => Ok(0.5 * erfc(t / std::f64::consts::SQRT_2)),
            NoiseFamily::Cauchy => Ok(if t == 0.0 { 0.5 } else { (1.0 / t).atan() / PI }),
            NoiseFamily::Stable { alpha } => stable::tail(*alpha, t),
            NoiseFamily::Radial(r) if self.dim == 1 => {
                let m = |u: f64| (r.density)(u.abs());
                upper_integral(m, t)
            }
            NoiseFamily::Lattice(p) => Ok(p.atoms().filter(|(z, _)| *z > t).map(|(_, q)| q).sum()),
            _ => Err(Error::DensityUnavailable),
        }
    }

    fn upper_quantile(&self, q: f64) -> Result<f64> {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while self.cdf_1d(hi)? < q {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::InstanceTooLarge);
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf_1d(mid)? < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// `μ(|z| ≥ t)`.
    pub fn radial_tail(&self, t: f64) -> Result<f64> {
        let d = self.dim as f64;
        match &self.family {
            NoiseFamily::Gaussian => Ok(gamma_ur(d / 2.0, t * t / 2.0)),
            NoiseFamily::Cauchy => Ok(if t == 0.0 { 1.0 } else { beta_reg(0.5, d / 2.0, 1.0 / (1.0 + t * t)) }),
            _ if self.dim == 1 && !matches!(self.family, NoiseFamily::NonIsotropic { .. }) => {
                Ok(2.0 * self.tail_1d(t)?)
            }
            _ => {
                let tag = domain("radial-tail", &[t.to_bits()]);
                let est = self.mc_mean(tag, |z| if norm(z) >= t { 1.0 } else { 0.0 })?;
                check_relative_se(&est)?;
                Ok(est.mean)
            }
        }
    }

    /// `(μ ∧ (δ_v ∗ μ))(ℝ^d)`; in `d > 1` radial families return the
    /// certified lower bound `(1/d) μ(|z| ≥ √d |v| / 2)`.
    pub fn overlap_mass(&self, v: &[f64]) -> Result<f64> {
        let s = norm(v);
        if s == 0.0 {
            return Ok(1.0);
        }
        match &self.family {
            NoiseFamily::Lattice(p) => {
                let total: f64 = p.atoms().map(|(z, q)| q.min(p.mass(z - v[0]))).sum();
                Ok(total.min(1.0))
            }
            NoiseFamily::NonIsotropic { alpha, normalizer } if self.dim == 1 => {
                // the density decreases on its support (0, 1], so the overlap is its mass on (|v|, 1]
                if s >= 1.0 {
                    return Ok(0.0);
                }
                Ok(((1.0 + s).powf(-alpha) - 2f64.powf(-alpha)) / (alpha * normalizer))
            }
            NoiseFamily::NonIsotropic { .. } => Ok(self.overlap_mass_mc(v)?.mean),
            _ if self.dim == 1 => Ok((2.0 * self.tail_1d(s / 2.0)?).min(1.0)),
            _ => Ok(self.radial_tail((self.dim as f64).sqrt() * s / 2.0)? / self.dim as f64),
        }
    }

    /// Monte Carlo estimate of `E[min(1, m(ξ − v)/m(ξ))]` with its standard error.
    pub fn overlap_mass_mc(&self, v: &[f64]) -> Result<Estimate> {
        let bits: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
        let tag = domain("overlap-mc", &bits);
        let mut failure = None;
        let est = self.mc_mean(tag, |z| match self.accept_ratio(z, v) {
            Ok(r) => r,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        check_relative_se(&est)?;
        Ok(est)
    }

    fn mc_mean<F: FnMut(&[f64]) -> f64>(&self, tag: u64, mut f: F) -> Result<Estimate> {
        let streams = Streams::new(0x6b61_6e74);
        let mut values = Vec::with_capacity(MC_SAMPLES);
        let mut z = vec![0.0; self.dim];
        for block in 0..MC_SAMPLES.div_ceil(BLOCK) {
            let mut rng = streams.rng(tag, block as u64);
            for _ in 0..BLOCK.min(MC_SAMPLES - block * BLOCK) {
                self.sample_into(&mut rng, &mut z);
                values.push(f(&z));
            }
        }
        Ok(Estimate::from_samples(&values))
    }

    /// `J_κ = inf_{|v| ≤ κ} overlap_mass(v)`.
    pub fn overlap_j(&self, kappa: f64) -> Result<f64> {
        if !(kappa >= 0.0) {
            return Err(Error::KappaOutOfRange);
        }
        if kappa == 0.0 {
            return Ok(1.0);
        }
        match &self.family {
            NoiseFamily::Lattice(p) => {
                let kmax = (kappa / p.delta + 1e-9).floor() as i64;
                let mut best = 1.0_f64;
                for k in 1..=kmax {
                    best = best.min(self.overlap_mass(&[k as f64 * p.delta])?);
                }
                Ok(best)
            }
            NoiseFamily::NonIsotropic { .. } => {
                let mut best = 1.0_f64;
                for axis in 0..self.dim {
                    for sign in [1.0, -1.0] {
                        let mut v = vec![0.0; self.dim];
                        v[axis] = sign * kappa;
                        best = best.min(self.overlap_mass(&v)?);
                    }
                }
                Ok(best)
            }
            NoiseFamily::Radial(r) if !r.monotone => Err(Error::ConditionC4Violated),
            _ => {
                let mut v = vec![0.0; self.dim];
                v[0] = kappa;
                self.overlap_mass(&v)
            }
        }
    }

    /// `E|ξ|^θ`.
    pub fn abs_moment(&self, theta: f64) -> Result<f64> {
        let d = self.dim as f64;
        match &self.family {
            NoiseFamily::Gaussian => {
                Ok((theta / 2.0 * 2f64.ln() + ln_gamma((d + theta) / 2.0) - ln_gamma(d / 2.0)).exp())
            }
            NoiseFamily::Cauchy => stable::abs_moment(1.0, theta, self.dim),
            NoiseFamily::Stable { alpha } => stable::abs_moment(*alpha, theta, self.dim),
            NoiseFamily::Lattice(p) => Ok(p.atoms().map(|(z, q)| z.abs().powf(theta) * q).sum()),
            NoiseFamily::NonIsotropic { alpha, normalizer } if self.dim == 1 => {
                if theta >= *alpha {
                    return Err(Error::MomentUnavailable);
                }
                integrate(|z| z.powf(theta) * (1.0 + z).powf(-1.0 - alpha) / normalizer, 0.0, 1.0)
            }
            NoiseFamily::Radial(r) if self.dim == 1 => {
                upper_integral(|u| 2.0 * u.abs().powf(theta) * (r.density)(u.abs()), 0.0)
            }
            _ => Err(Error::MomentUnavailable),
        }
    }

    /// Largest `c` with `J_κ ≥ c((1+κ)^{-α} − 2^{-α})` over a grid of `κ ∈ (0, 1)`.
    pub fn nonisotropic_constant(&self) -> Result<f64> {
        let NoiseFamily::NonIsotropic { alpha, .. } = &self.family else {
            return Err(Error::InvalidNoise("not the non-isotropic example".into()));
        };
        let knots = if self.dim == 1 { 64 } else { 8 };
        let mut best = f64::INFINITY;
        for i in 1..knots {
            let kappa = i as f64 / knots as f64;
            let shape = (1.0 + kappa).powf(-alpha) - 2f64.powf(-alpha);
            best = best.min(self.overlap_j(kappa)? / shape);
        }
        Ok(best)
    }
}

fn check_relative_se(est: &Estimate) -> Result<()> {
    if est.mean <= 0.0 || est.se / est.mean > MAX_RELATIVE_SE {
        Err(Error::VarianceTooHigh)
    } else {
        Ok(())
    }
}

/// `∫_t^∞ f`, with `u ↦ 1/u` on the far part so heavy tails stay accurate.
fn upper_integral<F: Fn(f64) -> f64>(f: F, t: f64) -> Result<f64> {
    let pivot = t.max(1.0);
    let near = if t < pivot { integrate(&f, t, pivot)? } else { 0.0 };
    let far = simpson(
        |s: f64| if s <= 0.0 { 0.0 } else { f(1.0 / s) / (s * s) },
        0.0,
        1.0 / pivot,
        crate::quad::ABS_TOL,
        crate::quad::MAX_DEPTH,
        16,
    )?;
    Ok(near + far)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn nonisotropic_normalizer(alpha: f64, dim: usize) -> Result<f64> {
    let d = dim as f64;
    if dim == 1 {
        return Ok((1.0 - 2f64.powf(-alpha)) / alpha);
    }
    let sphere = 2.0 * PI.powf((d - 1.0) / 2.0) / ln_gamma((d - 1.0) / 2.0).exp();
    let radial =
        |z1: f64, rho: f64| sphere * rho.powf(d - 2.0) * (1.0 + (z1 * z1 + rho * rho).sqrt()).powf(-(d + alpha));
    // ρ = w^{-3/(1+α)} turns the ρ^{-2-α} decay of the far part into a smooth w² start
    let p = 3.0 / (1.0 + alpha);
    let inner = |z1: f64| -> Result<f64> {
        let near = simpson(|rho| radial(z1, rho), 0.0, 1.0, 1e-12, 40, 16)?;
        let far = simpson(
            |w: f64| if w <= 0.0 { 0.0 } else { radial(z1, w.powf(-p)) * p * w.powf(-p - 1.0) },
            0.0,
            1.0,
            1e-12,
            40,
            16,
        )?;
        Ok(near + far)
    };
    let failure = std::cell::RefCell::new(None);
    let total = simpson(
        |z1| {
            inner(z1).unwrap_or_else(|e| {
                failure.borrow_mut().get_or_insert(e);
                0.0
            })
        },
        0.0,
        1.0,
        1e-10,
        40,
        8,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => total,
    }
}

fn sample_nonisotropic<R: Rng + ?Sized>(alpha: f64, out: &mut [f64], rng: &mut R) {
    let d = out.len();
    let radius = Beta::new(d as f64, alpha).expect("valid beta parameters");
    loop {
        let u: f64 = radius.sample(rng);
        let rho = u / (1.0 - u);
        let mut len = 0.0;
        for v in out.iter_mut() {
            *v = StandardNormal.sample(rng);
            len += *v * *v;
        }
        let scale = rho / len.sqrt();
        out.iter_mut().for_each(|v| *v *= scale);
        if out[0] > 0.0 && out[0] <= 1.0 {
            return;
        }
    }
}

struct DynRng<'a, R: ?Sized>(&'a mut R);

impl<R: Rng + ?Sized> RngCore for DynRng<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_round_trip() {
        for key in ["gaussian", "cauchy", "stable:1.5", "example-nonisotropic:0.5"] {
            assert_eq!(NoiseSpec::from_key(key, 1).unwrap().key(), key);
        }
        assert_eq!(NoiseSpec::from_key("stable:2.5", 1).unwrap_err(), Error::AlphaOutOfRange);
        assert!(NoiseSpec::from_key("laplace", 1).is_err());
    }

    #[test]
    fn lattice_pmf_is_normalized_and_symmetric() {
        let p = LatticePmf::discretize(&NoiseSpec::gaussian(1).unwrap(), LATTICE_DELTA).unwrap();
        let total: f64 = p.atoms().map(|(_, q)| q).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(p.mass(0.35), p.mass(-0.35));
        assert_eq!(p.mass(0.351), 0.0);
    }
}
