//! Symmetric α-stable laws with characteristic function `exp(-|t|^α)`.
//!
//! Densities and tails come from Zolotarev's single-integral representation,
//! split at the peak of the integrand. Coupling steps read a cached table.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, simpson, MonotoneCubic};

/// Knots of the cached density table.
pub const TABLE_KNOTS: usize = 1 << 12;
/// Largest argument served by the table; the asymptotic series takes over beyond.
pub const TABLE_XMAX: f64 = 200.0;
/// Below this argument the tail integral is replaced by a trapezoid in the density.
const SMALL_X: f64 = 1e-3;

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange)
    }
}

fn ln_v(alpha: f64, theta: f64) -> f64 {
    let e = alpha / (alpha - 1.0);
    e * (theta.cos().ln() - (alpha * theta).sin().ln()) + ((alpha - 1.0) * theta).cos().ln() - theta.cos().ln()
}

/// Splits `(0, π/2)` where `x^{α/(α-1)} V(θ) = 1`.
fn peak(alpha: f64, ln_scale: f64) -> f64 {
    let f = |t: f64| ln_scale + ln_v(alpha, t);
    let (mut lo, mut hi) = (1e-12, FRAC_PI_2 - 1e-12);
    let (flo, fhi) = (f(lo), f(hi));
    if flo.signum() == fhi.signum() {
        return if flo.abs() < fhi.abs() { lo } else { hi };
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn split_integral<F: Fn(f64) -> f64>(integrand: F, split: f64, tol: f64) -> Result<f64> {
    Ok(simpson(&integrand, 0.0, split, tol, 50, 16)? + simpson(&integrand, split, FRAC_PI_2, tol, 50, 16)?)
}

/// Density at `x` computed pointwise.
pub fn density(alpha: f64, x: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let x = x.abs();
    if alpha == 1.0 {
        return Ok(1.0 / (PI * (1.0 + x * x)));
    }
    if x == 0.0 {
        return Ok(gamma(1.0 + 1.0 / alpha) / PI);
    }
    if x > TABLE_XMAX {
        return Ok(series_density(alpha, x));
    }
    let ln_scale = alpha / (alpha - 1.0) * x.ln();
    let split = peak(alpha, ln_scale);
    let integral = split_integral(
        |t| {
            if t <= 0.0 || t >= FRAC_PI_2 {
                return 0.0;
            }
            let lg = ln_scale + ln_v(alpha, t);
            if lg > 700.0 {
                0.0
            } else {
                let g = lg.exp();
                g * (-g).exp()
            }
        },
        split,
        1e-13,
    )?;
    Ok(alpha / (PI * (alpha - 1.0).abs() * x) * integral)
}

/// Upper tail `P(Z > x)` for `x ≥ 0`.
pub fn tail(alpha: f64, x: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if x < 0.0 {
        return Ok(1.0 - tail(alpha, -x)?);
    }
    if alpha == 1.0 {
        return Ok(if x == 0.0 { 0.5 } else { (1.0 / x).atan() / PI });
    }
    if x < SMALL_X {
        // trapezoid on [0, x]; the density is flat to second order at the origin
        return Ok(0.5 - 0.5 * x * (density(alpha, 0.0)? + density(alpha, x)?));
    }
    if x > 1e6 {
        return Ok(series_tail(alpha, x));
    }
    let ln_scale = alpha / (alpha - 1.0) * x.ln();
    let split = peak(alpha, ln_scale);
    let integral = split_integral(
        |t| {
            if t <= 0.0 || t >= FRAC_PI_2 {
                return if (alpha > 1.0) == (t <= 0.0) { 0.0 } else { 1.0 };
            }
            let lg = ln_scale + ln_v(alpha, t);
            if lg > 700.0 {
                0.0
            } else {
                (-lg.exp()).exp()
            }
        },
        split,
        1e-16,
    )?;
    Ok(if alpha > 1.0 { integral / PI } else { 0.5 - integral / PI })
}

fn series_density(alpha: f64, x: f64) -> f64 {
    (1..=6)
        .map(|k| {
            let kf = k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (ln_gamma(alpha * kf + 1.0) - ln_gamma(kf + 1.0)).exp()
                * (kf * PI * alpha / 2.0).sin()
                * x.powf(-alpha * kf - 1.0)
        })
        .sum::<f64>()
        / PI
}

fn series_tail(alpha: f64, x: f64) -> f64 {
    (1..=6)
        .map(|k| {
            let kf = k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (ln_gamma(alpha * kf) - ln_gamma(kf + 1.0)).exp()
                * (kf * PI * alpha / 2.0).sin()
                * x.powf(-alpha * kf)
        })
        .sum::<f64>()
        / PI
}

/// Density knots on an `asinh`-spaced grid over `[0, TABLE_XMAX]`.
#[derive(Debug)]
pub struct DensityTable {
    alpha: f64,
    table: MonotoneCubic,
}

impl DensityTable {
    fn build(alpha: f64) -> Result<Self> {
        let umax = TABLE_XMAX.asinh();
        let xs: Vec<f64> = (0..TABLE_KNOTS).map(|i| (umax * i as f64 / (TABLE_KNOTS - 1) as f64).sinh()).collect();
        let ys = xs.par_iter().map(|&x| density(alpha, x)).collect::<Result<Vec<_>>>()?;
        let us: Vec<f64> = xs.iter().map(|x| x.asinh()).collect();
        Ok(Self { alpha, table: MonotoneCubic::new(us, ys) })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        if x > TABLE_XMAX {
            series_density(self.alpha, x)
        } else {
            self.table.eval(x.asinh()).max(0.0)
        }
    }
}

/// Shared table for `alpha`, built on first use.
pub fn density_table(alpha: f64) -> Result<Arc<DensityTable>> {
    check_alpha(alpha)?;
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<DensityTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("stable cache poisoned").get(&alpha.to_bits()) {
        return Ok(Arc::clone(t));
    }
    let built = Arc::new(DensityTable::build(alpha)?);
    cache.lock().expect("stable cache poisoned").entry(alpha.to_bits()).or_insert_with(|| Arc::clone(&built));
    Ok(built)
}

/// Upper-tail knots on the same grid as [`DensityTable`].
#[derive(Debug)]
pub struct TailTable {
    alpha: f64,
    table: MonotoneCubic,
}

impl TailTable {
    // integrates the density table downward from the series tail at TABLE_XMAX
    fn build(alpha: f64) -> Result<Self> {
        let density = density_table(alpha)?;
        let umax = TABLE_XMAX.asinh();
        let us: Vec<f64> = (0..TABLE_KNOTS).map(|i| umax * i as f64 / (TABLE_KNOTS - 1) as f64).collect();
        let mut ys = vec![0.0; TABLE_KNOTS];
        let last = series_tail(alpha, TABLE_XMAX);
        ys[TABLE_KNOTS - 1] = last;
        for i in (0..TABLE_KNOTS - 1).rev() {
            ys[i] = ys[i + 1] + gauss_legendre(|x| density.eval(x), us[i].sinh(), us[i + 1].sinh());
        }
        // the series and the table meet with a small offset; spread it so that P(Z > 0) = 1/2
        let offset = ys[0] - 0.5;
        let top = ys[0] - last;
        ys.iter_mut().for_each(|y| *y -= offset * (*y - last) / top);
        Ok(Self { alpha, table: MonotoneCubic::new(us, ys) })
    }

    /// `P(Z > x)` for any real `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let upper = if x.abs() > TABLE_XMAX {
            series_tail(self.alpha, x.abs())
        } else {
            self.table.eval(x.abs().asinh()).clamp(0.0, 0.5)
        };
        if x >= 0.0 {
            upper
        } else {
            1.0 - upper
        }
    }
}

/// Shared tail table for `alpha`, built on first use.
pub fn tail_table(alpha: f64) -> Result<Arc<TailTable>> {
    check_alpha(alpha)?;
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<TailTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("stable cache poisoned").get(&alpha.to_bits()) {
        return Ok(Arc::clone(t));
    }
    let built = Arc::new(TailTable::build(alpha)?);
    Ok(Arc::clone(cache.lock().expect("stable cache poisoned").entry(alpha.to_bits()).or_insert(built)))
}

/// One draw in dimension one by the Chambers–Mallows–Stuck transform.
pub fn sample_1d<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
    let u = u.clamp(-FRAC_PI_2 + 1e-12, FRAC_PI_2 - 1e-12);
    let w: f64 = Exp1.sample(rng);
    if alpha == 1.0 {
        return u.tan();
    }
    (alpha * u).sin() / u.cos().powf(1.0 / alpha) * (((1.0 - alpha) * u).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive stable amplitude with Laplace transform `exp(-s^a)`, `0 < a < 1` (Kanter).
pub fn sample_positive<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random_range(0.0..PI);
    let u = u.clamp(1e-12, PI - 1e-12);
    let e: f64 = Exp1.sample(rng);
    (a * u).sin() / u.sin().powf(1.0 / a) * (((1.0 - a) * u).sin() / e).powf((1.0 - a) / a)
}

/// Isotropic draw in `d` dimensions: a Gaussian scaled by `sqrt(2 S)`.
pub fn sample_isotropic<R: Rng + ?Sized>(alpha: f64, out: &mut [f64], rng: &mut R) {
    if out.len() == 1 {
        out[0] = sample_1d(alpha, rng);
        return;
    }
    let s = sample_positive(alpha / 2.0, rng);
    let scale = (2.0 * s).sqrt();
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v = scale * z;
    }
}

/// `E|Z|^θ` for the isotropic law in `d` dimensions, finite for `θ < α`.
pub fn abs_moment(alpha: f64, theta: f64, d: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if theta >= alpha || theta <= -1.0 {
        return Err(Error::MomentUnavailable);
    }
    let df = d as f64;
    let ln = theta * 2f64.ln() + ln_gamma(1.0 - theta / alpha) + ln_gamma((df + theta) / 2.0)
        - ln_gamma(1.0 - theta / 2.0)
        - ln_gamma(df / 2.0);
    Ok(ln.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_integrates_to_tail() {
        for &alpha in &[0.7, 1.5] {
            let x = 2.0;
            let mass = crate::quad::integrate(|s| density(alpha, s).unwrap(), 0.0, x).unwrap();
            let t = tail(alpha, x).unwrap();
            assert!((0.5 - mass - t).abs() < 1e-8, "alpha {alpha}: {mass} {t}");
        }
    }

    #[test]
    fn series_agrees_with_integral_far_out() {
        let x = 150.0;
        let a = density(1.5, x).unwrap();
        let b = series_density(1.5, x);
        assert!((a - b).abs() < 1e-14 + 1e-6 * b);
    }
}
