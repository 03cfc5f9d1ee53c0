//! Adaptive Simpson quadrature and monotone cubic interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for every distance-function integral.
pub const ABS_TOL: f64 = 1e-10;
/// Recursion limit of the adaptive Simpson rule.
pub const MAX_DEPTH: u32 = 40;

/// Adaptive Simpson on `[a, b]` with Richardson correction.
///
/// The interval is first cut into `panels` equal pieces so narrow features are
/// not skipped by the coarsest rule. Fails once a branch would exceed `max_depth`.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_depth: u32, panels: usize) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { lo + width };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += refine(&f, lo, hi, flo, fmid, fhi, whole, tol / panels as f64, max_depth)?;
    }
    Ok(total)
}

/// [`simpson`] with the crate defaults.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64> {
    simpson(f, a, b, ABS_TOL, MAX_DEPTH, 16)
}

const GL_NODES: [f64; 4] = [0.1834346424956498, 0.525532409916329, 0.7966664774136267, 0.9602898564975363];
const GL_WEIGHTS: [f64; 4] = [0.362683783378362, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];

/// Eight-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    half * GL_NODES.iter().zip(GL_WEIGHTS).map(|(&x, w)| w * (f(mid - half * x) + f(mid + half * x))).sum::<f64>()
}

/// `n` log-spaced points from `lo` to `hi`, both included.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    debug_assert!(lo > 0.0 && hi >= lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            i if i == n - 1 => hi,
            i => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Log-spaced points covering the half-open interval `(lo, hi]`; a zero `lo`
/// starts the grid at `hi·10⁻⁶`.
pub fn half_open_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let start = if lo > 0.0 { lo * (1.0 + 1e-12) } else { hi * 1e-6 };
    log_space(start.min(hi), hi, n)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::QuadratureNonConvergent);
    }
    if delta.abs() <= 15.0 * tol || (b - a).abs() < 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureNonConvergent);
    }
    Ok(refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Piecewise cubic Hermite interpolant that preserves monotone data.
///
/// Slopes are either supplied (exact derivatives) or chosen by the
/// Fritsch–Carlson rule, then limited so that monotone data stay monotone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n, "need at least two knots");
        let secants: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            slopes[i] = if secants[i - 1] * secants[i] <= 0.0 {
                0.0
            } else {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w0 = 2.0 * h1 + h0;
                let w1 = h1 + 2.0 * h0;
                (w0 + w1) / (w0 / secants[i - 1] + w1 / secants[i])
            };
        }
        Self::with_slopes(xs, ys, slopes)
    }

    /// Hermite interpolant through known slopes, limited for monotonicity.
    pub fn with_slopes(xs: Vec<f64>, ys: Vec<f64>, mut slopes: Vec<f64>) -> Self {
        let n = xs.len();
        for i in 0..n - 1 {
            let secant = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            if secant == 0.0 {
                slopes[i] = 0.0;
                slopes[i + 1] = 0.0;
                continue;
            }
            let a = slopes[i] / secant;
            let b = slopes[i + 1] / secant;
            let norm = a * a + b * b;
            if norm > 9.0 {
                let t = 3.0 / norm.sqrt();
                slopes[i] = t * a * secant;
                slopes[i + 1] = t * b * secant;
            }
        }
        Self { xs, ys, slopes }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.slopes[0] * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.slopes[n - 1] * (x - self.xs[n - 1]);
        }
        let i = match self.xs.binary_search_by(|probe| probe.total_cmp(&x)) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_matches_polynomial_exactly() {
        let v = integrate(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_reports_depth_exhaustion() {
        let r = simpson(|x: f64| if x > 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, 1e-300, 3, 1);
        assert_eq!(r, Err(Error::QuadratureNonConvergent));
    }

    #[test]
    fn monotone_cubic_keeps_monotone_data_monotone() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| if x < 10.0 { 0.0 } else { 1.0 + x }).collect();
        let table = MonotoneCubic::new(xs, ys);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..1900 {
            let v = table.eval(k as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }
}
