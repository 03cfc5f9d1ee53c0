//! Euler-scheme models `x ↦ x + h b(x) + g ξ` and their drift catalogue.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{domain, Streams};

/// Pairs drawn when verifying drift constants.
pub const VERIFY_PAIRS: usize = 10_000;
const VERIFY_SEED: u64 = 0x64_7269_6674;

type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

#[derive(Clone)]
pub enum Drift {
    /// `b(x) = -m x`.
    Linear { m: f64 },
    /// `b(x) = -a x + s tanh(x)` componentwise.
    LinearTanh { a: f64, s: f64 },
    /// `b(x) = -a x + s x e^{-|x|²/2}`.
    LinearBump { a: f64, s: f64 },
    /// A user closure; its constants must be supplied.
    Custom(Arc<DriftFn>),
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear { m } => write!(f, "linear(m={m})"),
            Self::LinearTanh { a, s } => write!(f, "linear+tanh(a={a}, s={s})"),
            Self::LinearBump { a, s } => write!(f, "linear+bump(a={a}, s={s})"),
            Self::Custom(_) => f.write_str("custom"),
        }
    }
}

/// `(L, K, 𝓡)` of conditions (c1) and (c2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftConstants {
    pub lipschitz: f64,
    pub dissipativity: f64,
    pub radius: f64,
}

impl Drift {
    pub fn custom<F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static>(f: F) -> Self {
        Self::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Linear { m } => x.iter().zip(out.iter_mut()).for_each(|(xi, o)| *o = -m * xi),
            Self::LinearTanh { a, s } => x.iter().zip(out.iter_mut()).for_each(|(xi, o)| *o = -a * xi + s * xi.tanh()),
            Self::LinearBump { a, s } => {
                let bump = (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp();
                x.iter().zip(out.iter_mut()).for_each(|(xi, o)| *o = (-a + s * bump) * xi)
            }
            Self::Custom(f) => f(x, out),
        }
    }

    /// Catalogue constants for dimension `d`, given the dissipativity constant `k`
    /// to aim for (`None` picks `a/2`). Linear drifts dissipate at every distance,
    /// so their radius is whatever the caller passes.
    pub fn constants(&self, dim: usize, k: Option<f64>, radius: Option<f64>) -> Result<DriftConstants> {
        let root_d = (dim as f64).sqrt();
        let (lipschitz, a, half_excess) = match self {
            Self::Linear { m } => {
                if !(*m > 0.0) {
                    return Err(Error::InvalidModel("linear drift needs m > 0".into()));
                }
                let r = radius.ok_or_else(|| Error::InvalidModel("linear drift needs a radius".into()))?;
                return Ok(DriftConstants { lipschitz: *m, dissipativity: k.unwrap_or(*m).min(*m), radius: r });
            }
            Self::LinearTanh { a, s } => ((*a).max((s - a).abs()), *a, s.abs() * root_d),
            Self::LinearBump { a, s } => (a + s.abs(), *a, s.abs() * (-0.5f64).exp()),
            Self::Custom(_) => return Err(Error::InvalidModel("custom drifts need explicit constants".into())),
        };
        if !(a > 0.0) {
            return Err(Error::InvalidModel("drift needs a > 0".into()));
        }
        let k = k.unwrap_or(a / 2.0);
        if !(k > 0.0 && k < a) {
            return Err(Error::InvalidModel(format!("dissipativity constant must lie in (0, {a})")));
        }
        // ⟨Δ, b(x)-b(y)⟩ ≤ -a|Δ|² + 2·half_excess·|Δ|, which is ≤ -K|Δ|² once |Δ| ≥ 2·half_excess/(a-K)
        let r = 2.0 * half_excess / (a - k);
        Ok(DriftConstants { lipschitz, dissipativity: k, radius: radius.map_or(r, |user| user.max(r)) })
    }
}

/// Largest sampled violations of (c1) and (c2), as ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftCheck {
    pub max_lipschitz_ratio: f64,
    pub max_dissipativity_ratio: f64,
}

/// Samples `VERIFY_PAIRS` pairs across several scales and records the worst
/// `|b(x)-b(y)|/|x-y|` and `⟨Δ, b(x)-b(y)⟩/|Δ|²` (the latter only for `|Δ| ≥ 𝓡`).
pub fn sample_drift_ratios(drift: &Drift, dim: usize, radius: f64) -> DriftCheck {
    let streams = Streams::new(VERIFY_SEED);
    let mut rng = streams.rng(domain("drift-check", &[dim as u64]), 0);
    let (mut lip, mut diss) = (0.0_f64, f64::NEG_INFINITY);
    let mut x = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let mut bx = vec![0.0; dim];
    let mut by = vec![0.0; dim];
    let scale = radius.max(1.0);
    for i in 0..VERIFY_PAIRS {
        let spread = scale * 4f64.powi((i % 5) as i32 - 2);
        for v in x.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = spread * z;
        }
        let sep = if i % 2 == 0 {
            radius * (1.0 + 3.0 * rng.random::<f64>())
        } else {
            scale * 10f64.powf(-4.0 + 5.0 * rng.random::<f64>())
        };
        let mut dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|v| *v /= n);
        y.iter_mut().zip(&x).zip(&dir).for_each(|((yi, xi), di)| *yi = xi + sep * di);
        drift.eval(&x, &mut bx);
        drift.eval(&y, &mut by);
        let (mut db2, mut inner, mut d2) = (0.0, 0.0, 0.0);
        for j in 0..dim {
            let dx = x[j] - y[j];
            let db = bx[j] - by[j];
            db2 += db * db;
            inner += dx * db;
            d2 += dx * dx;
        }
        if d2 > 0.0 {
            lip = lip.max((db2 / d2).sqrt());
            if d2.sqrt() >= radius {
                diss = diss.max(inner / d2);
            }
        }
    }
    DriftCheck { max_lipschitz_ratio: lip, max_dissipativity_ratio: diss }
}

/// Truncation radius `κ`; `Unbounded` skips truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Kappa {
    Finite(f64),
    Unbounded,
}

impl Kappa {
    pub fn value(self) -> f64 {
        match self {
            Self::Finite(k) => k,
            Self::Unbounded => f64::INFINITY,
        }
    }

    pub fn from_value(k: f64) -> Result<Self> {
        if k == f64::INFINITY {
            Ok(Self::Unbounded)
        } else if k > 0.0 && k.is_finite() {
            Ok(Self::Finite(k))
        } else {
            Err(Error::KappaOutOfRange)
        }
    }
}

/// The chain `x ↦ x + h b(x) + g ξ` with its drift constants.
#[derive(Debug, Clone)]
pub struct EulerModel {
    pub drift: Drift,
    pub constants: DriftConstants,
    pub check: DriftCheck,
    pub h: f64,
    pub g: f64,
    pub kappa: Kappa,
    pub kappa0: f64,
    pub dim: usize,
}

impl EulerModel {
    /// Builds the model and verifies (c1), (c2) and `K ≤ L` on sampled pairs.
    pub fn new(
        drift: Drift,
        constants: DriftConstants,
        h: f64,
        g: f64,
        kappa: Kappa,
        kappa0: f64,
        dim: usize,
    ) -> Result<Self> {
        let DriftConstants { lipschitz: l, dissipativity: k, radius } = constants;
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidModel("step size must be positive".into()));
        }
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidModel("noise scale must be positive".into()));
        }
        if !(l >= 0.0 && k > 0.0 && radius >= 0.0 && l.is_finite() && radius.is_finite()) {
            return Err(Error::InvalidModel("drift constants must be finite with K > 0".into()));
        }
        if k > l {
            return Err(Error::InvalidModel(format!("K = {k} exceeds L = {l}")));
        }
        if !(kappa0 > 0.0 && kappa0.is_finite()) {
            return Err(Error::KappaOutOfRange);
        }
        let check = sample_drift_ratios(&drift, dim, radius);
        let slack = 1e-9;
        if check.max_lipschitz_ratio > l * (1.0 + slack) + slack {
            return Err(Error::InvalidModel(format!(
                "sampled Lipschitz ratio {} exceeds L = {l}",
                check.max_lipschitz_ratio
            )));
        }
        if check.max_dissipativity_ratio > -k * (1.0 - slack) + slack {
            return Err(Error::InvalidModel(format!(
                "sampled dissipativity ratio {} exceeds -K = {}",
                check.max_dissipativity_ratio, -k
            )));
        }
        Ok(Self { drift, constants, check, h, g, kappa, kappa0, dim })
    }

    pub fn lipschitz(&self) -> f64 {
        self.constants.lipschitz
    }

    pub fn dissipativity(&self) -> f64 {
        self.constants.dissipativity
    }

    pub fn radius(&self) -> f64 {
        self.constants.radius
    }

    /// `x̂ = x + h b(x)`.
    pub fn drift_step(&self, x: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; x.len()];
        self.drift.eval(x, &mut b);
        x.iter().zip(&b).map(|(xi, bi)| xi + self.h * bi).collect()
    }

    /// `|b(0)|`.
    pub fn drift_at_origin(&self) -> f64 {
        let mut b = vec![0.0; self.dim];
        self.drift.eval(&vec![0.0; self.dim], &mut b);
        b.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Contraction rate of the drift beyond `𝓡`: `c₀ = (K - hL²/2) h`.
    pub fn far_contraction(&self) -> f64 {
        let (l, k) = (self.lipschitz(), self.dissipativity());
        (k - self.h * l * l / 2.0) * self.h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_drift_constants() {
        let c = Drift::LinearTanh { a: 1.0, s: 2.0 }.constants(1, Some(0.5), None).unwrap();
        assert_eq!(c, DriftConstants { lipschitz: 1.0, dissipativity: 0.5, radius: 8.0 });
    }

    #[test]
    fn understated_lipschitz_is_rejected() {
        let drift = Drift::LinearTanh { a: 1.0, s: 2.0 };
        let bad = DriftConstants { lipschitz: 0.8, dissipativity: 0.5, radius: 8.0 };
        assert!(EulerModel::new(drift, bad, 0.01, 1.0, Kappa::Unbounded, 1.0, 1).is_err());
    }

    #[test]
    fn understated_radius_is_rejected() {
        let drift = Drift::LinearTanh { a: 1.0, s: 2.0 };
        let bad = DriftConstants { lipschitz: 1.0, dissipativity: 0.5, radius: 1.0 };
        assert!(EulerModel::new(drift, bad, 0.01, 1.0, Kappa::Unbounded, 1.0, 1).is_err());
    }

    #[test]
    fn bump_constants_pass_sampling() {
        for dim in [1, 3] {
            let drift = Drift::LinearBump { a: 1.0, s: 1.5 };
            let c = drift.constants(dim, None, None).unwrap();
            EulerModel::new(drift, c, 0.1, 0.3, Kappa::Unbounded, 1.0, dim).unwrap();
        }
    }
}
