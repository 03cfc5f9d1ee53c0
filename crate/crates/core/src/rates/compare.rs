//! Gaussian versus heavy-tailed noise: how the total variation rate decays with `𝓡`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::euler::{unbounded_assumption, UnboundedInputs};
use super::{c_star_tv, CouplingKind};
use crate::error::{Error, Result};
use crate::noise::{NoiseFamily, NoiseSpec};
use crate::rho::build_tv_distance;
use crate::stats::ols_slope;

pub const CSV_HEADER: &str = "noise,alpha,d,h,R,J,a,c1,c3,c_star";

/// Drift constants and noise amplitude shared by every row; `g = σ h^{1/α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSetup {
    pub lipschitz: f64,
    pub dissipativity: f64,
    pub sigma: f64,
    pub coupling: CouplingKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub noise: String,
    pub alpha: f64,
    pub d: usize,
    pub h: f64,
    pub radius: f64,
    pub overlap: f64,
    pub a: f64,
    pub c1: f64,
    pub c3: f64,
    pub c_star: f64,
}

/// Regression slope of `log c1` against `log 𝓡` (heavy tails) or `𝓡²` (Gaussian).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSlope {
    pub noise: String,
    pub alpha: f64,
    pub h: f64,
    pub regressor: String,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub slopes: Vec<FittedSlope>,
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{:e},{:e},{:e},{:e},{:e}\n",
                r.noise, r.alpha, r.d, r.h, r.radius, r.overlap, r.a, r.c1, r.c3, r.c_star
            ));
        }
        out
    }

    pub fn slope(&self, noise: &str) -> Option<f64> {
        self.slopes.iter().find(|s| s.noise == noise).map(|s| s.slope)
    }

    pub fn row(&self, noise: &str, radius: f64) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.noise == noise && r.radius == radius)
    }
}

fn row(setup: &ComparisonSetup, noise: &NoiseSpec, h: f64, radius: f64) -> Result<ComparisonRow> {
    let (l, k) = (setup.lipschitz, setup.dissipativity);
    let c0 = (k - h * l * l / 2.0) * h;
    if !(c0 > 0.0) {
        return Err(Error::StepSizeTooLarge("h < 2K/L^2"));
    }
    let g = setup.sigma * noise.natural_scale(h);
    let inputs = UnboundedInputs { lipschitz: l, h, g, radius };
    let (q, overlap) = unbounded_assumption(inputs, radius, Some(c0), noise, setup.coupling)?;
    let rho = build_tv_distance(&q, true)?;
    let cert = c_star_tv(&q, &rho)?;
    let constant = |label: &str| cert.constant(label).unwrap_or(f64::NAN);
    Ok(ComparisonRow {
        noise: noise.key(),
        alpha: noise.alpha().unwrap_or(f64::NAN),
        d: noise.dim(),
        h,
        radius,
        overlap,
        a: rho.jump(),
        c1: constant("c1"),
        c3: constant("c3"),
        c_star: cert.c_star,
    })
}

/// Simplified total variation certificates over every `(noise, h, 𝓡)` with fitted decay slopes.
pub fn noise_rate_comparison(
    setup: &ComparisonSetup,
    noises: &[NoiseSpec],
    r_grid: &[f64],
    h_grid: &[f64],
) -> Result<ComparisonTable> {
    if setup.coupling == CouplingKind::Mixed {
        return Err(Error::InvalidModel("the comparison needs the refined basic or reflection coupling".into()));
    }
    let jobs: Vec<(usize, f64, f64)> = (0..noises.len())
        .flat_map(|i| h_grid.iter().flat_map(move |&h| r_grid.iter().map(move |&r| (i, h, r))))
        .collect();
    let rows = jobs.par_iter().map(|&(i, h, radius)| row(setup, &noises[i], h, radius)).collect::<Result<Vec<_>>>()?;
    let mut slopes = Vec::new();
    if r_grid.len() >= 2 {
        for noise in noises {
            for &h in h_grid {
                let key = noise.key();
                let subset: Vec<&ComparisonRow> = rows.iter().filter(|r| r.noise == key && r.h == h).collect();
                let gaussian = matches!(noise.family(), NoiseFamily::Gaussian);
                let xs: Vec<f64> =
                    subset.iter().map(|r| if gaussian { r.radius * r.radius } else { r.radius.ln() }).collect();
                let ys: Vec<f64> = subset.iter().map(|r| r.c1.ln()).collect();
                slopes.push(FittedSlope {
                    noise: key,
                    alpha: noise.alpha().unwrap_or(f64::NAN),
                    h,
                    regressor: if gaussian { "R^2" } else { "log R" }.into(),
                    slope: ols_slope(&xs, &ys),
                });
            }
        }
    }
    Ok(ComparisonTable { rows, slopes })
}
