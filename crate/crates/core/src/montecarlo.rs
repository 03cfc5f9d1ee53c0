//! Monte Carlo estimates of coupling statistics, marginal tests, contraction audits,
//! coupled-chain simulation and an exact lattice oracle.
//!
//! Samples are drawn in blocks of [`BLOCK`] steps, each from its own counter-based
//! stream, and reduced in block order, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::couplings::{coupled_outcomes, CoupledStep, Coupler, CouplingRule, EulerCoupler};
use crate::error::{Error, Result};
use crate::model::EulerModel;
use crate::noise::{LatticePmf, NoiseFamily, NoiseSpec};
use crate::rates::RateCertificate;
use crate::rho::RhoSpec;
use crate::rng::{domain, Streams, BLOCK};
use crate::stats::{ks_pvalue, ks_statistic, pairwise_sum, Estimate};

/// Smallest sample size accepted by [`estimate_coupling_stats`].
pub const MIN_STATS_SAMPLES: usize = 1_000;
/// Smallest sample size accepted by [`verify_marginals`].
pub const MIN_KS_SAMPLES: usize = 10_000;
/// Significance level of the marginal Kolmogorov–Smirnov tests.
pub const KS_LEVEL: f64 = 1e-3;
/// Standard errors added to the empirical mean before comparing with `(1 − c*) ρ`.
pub const AUDIT_SE_MULTIPLIER: f64 = 3.0;
/// Largest number of branch terms [`oracle_exact`] will enumerate.
pub const ORACLE_TERM_LIMIT: usize = 10_000_000;

fn point_tag(label: &str, x: &[f64], y: &[f64]) -> u64 {
    let coords: Vec<u64> = x.iter().chain(y).map(|v| v.to_bits()).collect();
    domain(label, &coords)
}

/// `n` coupled steps from `(x, y)`, each mapped through `f`, in a worker-independent order.
pub fn map_steps<C, T, F>(
    coupler: &C,
    x: &[f64],
    y: &[f64],
    n: usize,
    streams: &Streams,
    tag: u64,
    f: F,
) -> Result<Vec<T>>
where
    C: Coupler + ?Sized,
    T: Send,
    F: Fn(&CoupledStep) -> T + Sync,
{
    let blocks: Vec<Vec<T>> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|block| {
            let mut rng = streams.rng(tag, block as u64);
            (0..BLOCK.min(n - block * BLOCK)).map(|_| coupler.step(x, y, &mut rng).map(|s| f(&s))).collect()
        })
        .collect::<Result<_>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

/// `α̂_l` at one truncation level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedMoment {
    pub l: f64,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsEstimate {
    pub pi_hat: Estimate,
    pub beta_hat: Estimate,
    pub alpha_hat: Vec<TruncatedMoment>,
    pub n: usize,
}

/// Empirical `π`, `β` and `α_l` of one coupled step from `(x, y)`.
pub fn estimate_coupling_stats<C: Coupler + ?Sized>(
    coupler: &C,
    x: &[f64],
    y: &[f64],
    l_values: &[f64],
    n: usize,
    streams: &Streams,
) -> Result<StatsEstimate> {
    if n < MIN_STATS_SAMPLES {
        return Err(Error::InsufficientSamples);
    }
    let tag = point_tag("coupling-stats", x, y);
    let steps = map_steps(coupler, x, y, n, streams, tag, |s| (s.coalesced, s.r_after - s.r_before))?;
    let pi: Vec<f64> = steps.iter().map(|&(c, _)| if c { 1.0 } else { 0.0 }).collect();
    let beta: Vec<f64> = steps.iter().map(|&(_, d)| d).collect();
    let alpha_hat = l_values
        .iter()
        .map(|&l| {
            let values: Vec<f64> = beta.iter().map(|&d| if d < l { 0.5 * d * d } else { 0.0 }).collect();
            TruncatedMoment { l, estimate: Estimate::from_samples(&values) }
        })
        .collect();
    Ok(StatsEstimate { pi_hat: Estimate::from_samples(&pi), beta_hat: Estimate::from_samples(&beta), alpha_hat, n })
}

/// Kolmogorov–Smirnov tests of both rescaled increments against `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    pub n: usize,
    pub ks_x: f64,
    pub p_x: f64,
    pub ks_y: f64,
    pub p_y: f64,
    pub level: f64,
    pub passed: bool,
}

/// Tests `g⁻¹(X − x̂)` and `g⁻¹(Y − ŷ)` against `μ`, projected on `x̂ − ŷ` in `d > 1`.
pub fn verify_marginals<C: Coupler + ?Sized>(
    coupler: &C,
    x: &[f64],
    y: &[f64],
    n: usize,
    streams: &Streams,
) -> Result<MarginalReport> {
    if n < MIN_KS_SAMPLES {
        return Err(Error::InsufficientSamples);
    }
    let model = coupler.model();
    let noise = coupler.noise();
    let (x_hat, y_hat) = (model.drift_step(x), model.drift_step(y));
    let gap: Vec<f64> = x_hat.iter().zip(&y_hat).map(|(a, b)| a - b).collect();
    let gap_norm = gap.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut axis = vec![0.0; model.dim];
    if gap_norm > 0.0 && noise.is_monotone_radial() {
        axis.iter_mut().zip(&gap).for_each(|(a, g)| *a = g / gap_norm);
    } else {
        axis[0] = 1.0;
    }
    if model.dim > 1 && matches!(noise.family(), NoiseFamily::NonIsotropic { .. }) {
        return Err(Error::DensityUnavailable);
    }
    let g = model.g;
    let project =
        |p: &[f64], base: &[f64]| p.iter().zip(base).zip(&axis).map(|((a, b), e)| (a - b) / g * e).sum::<f64>();
    let tag = point_tag("marginals", x, y);
    let pairs = map_steps(coupler, x, y, n, streams, tag, |s| (project(&s.x, &x_hat), project(&s.y, &y_hat)))?;
    let (mut xs, mut ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let cdf = |v: f64| noise.cdf_1d(v).unwrap_or(f64::NAN);
    noise.cdf_1d(0.0)?;
    let ks_x = ks_statistic(&mut xs, cdf);
    let ks_y = ks_statistic(&mut ys, cdf);
    let (p_x, p_y) = (ks_pvalue(n, ks_x), ks_pvalue(n, ks_y));
    Ok(MarginalReport { n, ks_x, p_x, ks_y, p_y, level: KS_LEVEL, passed: p_x >= KS_LEVEL && p_y >= KS_LEVEL })
}

/// One state pair of a contraction audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub r: f64,
    pub rho: f64,
    pub mean: f64,
    pub se: f64,
    /// `(1 − c*) ρ(x, y)`.
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub c_star: f64,
    pub n: usize,
    pub policy: String,
    pub points: Vec<AuditPoint>,
    pub pass_rate: f64,
    pub passed: bool,
}

impl AuditReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,rho,E_rho,se,bound,passed\n");
        for p in &self.points {
            out.push_str(&format!("{:e},{:e},{:e},{:e},{:e},{}\n", p.r, p.rho, p.mean, p.se, p.bound, p.passed));
        }
        out
    }
}

/// Checks `Ê[ρ(X, Y)] + 3 SE ≤ (1 − c*) ρ(x, y)` at every state pair.
pub fn contraction_audit<C: Coupler + ?Sized>(
    coupler: &C,
    rho: &RhoSpec,
    cert: &RateCertificate,
    points: &[(Vec<f64>, Vec<f64>)],
    n: usize,
    streams: &Streams,
) -> Result<AuditReport> {
    let c_star = cert.c_star;
    let audited = points
        .iter()
        .map(|(x, y)| {
            let rho_xy = rho.eval(x, y)?;
            let tag = point_tag("audit", x, y);
            let values = map_steps(coupler, x, y, n, streams, tag, |s| rho.eval(&s.x, &s.y))?
                .into_iter()
                .collect::<Result<Vec<f64>>>()?;
            let est = Estimate::from_samples(&values);
            let bound = (1.0 - c_star) * rho_xy;
            let r = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            Ok(AuditPoint {
                x: x.clone(),
                y: y.clone(),
                r,
                rho: rho_xy,
                mean: est.mean,
                se: est.se,
                bound,
                passed: est.mean + AUDIT_SE_MULTIPLIER * est.se <= bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passes = audited.iter().filter(|p| p.passed).count();
    let pass_rate = if audited.is_empty() { 1.0 } else { passes as f64 / audited.len() as f64 };
    Ok(AuditReport {
        c_star,
        n,
        policy: format!("pass when mean + {AUDIT_SE_MULTIPLIER} SE <= (1 - c*) rho(x, y)"),
        passed: passes == audited.len(),
        points: audited,
        pass_rate,
    })
}

/// Per-step summary of an ensemble of coupled chains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: usize,
    pub e_rho: f64,
    pub se: f64,
    pub coalesced_frac: f64,
    /// Empirical W₁ between the marginal ensembles in `d = 1`; the coupled mean `|X − Y|` otherwise.
    pub w1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    /// `(t, chains first coalesced at step t)`.
    pub coalescence_histogram: Vec<(usize, usize)>,
    pub n_chains: usize,
    pub w1_method: String,
}

impl Trajectory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,E_rho,se,coalesced_frac,W1\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:e},{:e},{},{:e}\n", r.t, r.e_rho, r.se, r.coalesced_frac, r.w1));
        }
        out
    }

    /// Upper bound `1 − coalesced fraction` on the total variation distance at step `t`.
    pub fn tv_upper_bound(&self, t: usize) -> Option<f64> {
        self.rows.get(t).map(|r| 1.0 - r.coalesced_frac)
    }
}

struct ChainPath {
    states: Vec<(Vec<f64>, Vec<f64>)>,
    rho: Vec<f64>,
    coalesced_at: Option<usize>,
}

/// Runs `n_chains` coupled chains for `steps` steps from `(x0, y0)`.
pub fn simulate_coupled_chain<C: Coupler + ?Sized>(
    coupler: &C,
    rho: &RhoSpec,
    x0: &[f64],
    y0: &[f64],
    steps: usize,
    n_chains: usize,
    streams: &Streams,
) -> Result<Trajectory> {
    if steps == 0 || n_chains == 0 {
        return Err(Error::InsufficientSamples);
    }
    let tag = point_tag("chain", x0, y0);
    let rho0 = rho.eval(x0, y0)?;
    let paths: Vec<ChainPath> = (0..n_chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = streams.rng(tag, chain as u64);
            let mut states = Vec::with_capacity(steps + 1);
            let mut values = Vec::with_capacity(steps + 1);
            let (mut x, mut y) = (x0.to_vec(), y0.to_vec());
            let mut coalesced_at = (x == y).then_some(0);
            states.push((x.clone(), y.clone()));
            values.push(rho0);
            for t in 1..=steps {
                let s = coupler.step(&x, &y, &mut rng)?;
                if s.coalesced && coalesced_at.is_none() {
                    coalesced_at = Some(t);
                }
                values.push(rho.eval(&s.x, &s.y)?);
                x = s.x;
                y = s.y;
                states.push((x.clone(), y.clone()));
            }
            Ok(ChainPath { states, rho: values, coalesced_at })
        })
        .collect::<Result<_>>()?;
    let one_dim = x0.len() == 1;
    let rows = (0..=steps)
        .map(|t| {
            let values: Vec<f64> = paths.iter().map(|p| p.rho[t]).collect();
            let est = Estimate::from_samples(&values);
            let coalesced = paths.iter().filter(|p| p.coalesced_at.is_some_and(|c| c <= t)).count();
            let w1 = if one_dim {
                let mut xs: Vec<f64> = paths.iter().map(|p| p.states[t].0[0]).collect();
                let mut ys: Vec<f64> = paths.iter().map(|p| p.states[t].1[0]).collect();
                xs.sort_by(f64::total_cmp);
                ys.sort_by(f64::total_cmp);
                let gaps: Vec<f64> = xs.iter().zip(&ys).map(|(a, b)| (a - b).abs()).collect();
                pairwise_sum(&gaps) / n_chains as f64
            } else {
                let gaps: Vec<f64> = paths
                    .iter()
                    .map(|p| {
                        let (x, y) = &p.states[t];
                        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                    })
                    .collect();
                pairwise_sum(&gaps) / n_chains as f64
            };
            TrajectoryRow {
                t,
                e_rho: est.mean,
                se: if n_chains > 1 { est.se } else { 0.0 },
                coalesced_frac: coalesced as f64 / n_chains as f64,
                w1,
            }
        })
        .collect();
    let mut histogram = vec![0usize; steps + 1];
    paths.iter().filter_map(|p| p.coalesced_at).for_each(|t| histogram[t] += 1);
    let coalescence_histogram = histogram.into_iter().enumerate().filter(|&(_, c)| c > 0).collect();
    let w1_method =
        if one_dim { "sorted-sample W1 between marginals" } else { "coupled mean |X - Y|, an upper bound on W1" };
    Ok(Trajectory { rows, coalescence_histogram, n_chains, w1_method: w1_method.into() })
}

/// A one-dimensional model driven by lattice noise, small enough to enumerate.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub coupler: EulerCoupler,
}

impl OracleInstance {
    pub fn new(pmf: LatticePmf, model: EulerModel, rule: CouplingRule) -> Result<Self> {
        if model.dim != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: model.dim });
        }
        let total = pairwise_sum(&pmf.atoms().map(|(_, p)| p).collect::<Vec<_>>());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidNoise(format!("lattice masses sum to {total}")));
        }
        Ok(Self { coupler: EulerCoupler::new(model, NoiseSpec::lattice(pmf)?, rule)? })
    }

    /// Discretizes `noise` on `δℤ` up to its `1 − 10⁻⁶` quantile.
    pub fn discretized(noise: &NoiseSpec, delta: f64, model: EulerModel, rule: CouplingRule) -> Result<Self> {
        Self::new(LatticePmf::discretize(noise, delta)?, model, rule)
    }
}

/// Exact one-step statistics of a lattice instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleValues {
    pub pi: f64,
    pub beta: f64,
    /// `(l, α_l)` pairs.
    pub alpha: Vec<(f64, f64)>,
    pub e_rho: f64,
    pub terms: usize,
}

/// Sums the branch decomposition of one coupled step over every lattice atom.
pub fn oracle_exact(inst: &OracleInstance, x: f64, y: f64, rho: &RhoSpec, l_values: &[f64]) -> Result<OracleValues> {
    let coupler = &inst.coupler;
    let NoiseFamily::Lattice(pmf) = coupler.noise().family() else {
        return Err(Error::InvalidNoise("oracle needs lattice noise".into()));
    };
    if pmf.len() * 3 > ORACLE_TERM_LIMIT {
        return Err(Error::InstanceTooLarge);
    }
    let mut weighted = Vec::new();
    for (z, mass) in pmf.atoms().filter(|&(_, m)| m > 0.0) {
        for (p, step) in coupled_outcomes(&[x], &[y], coupler.model(), coupler.noise(), coupler.rule(), &[z])? {
            if p > 0.0 {
                weighted.push((mass * p, step));
            }
        }
    }
    let sum = |f: &dyn Fn(&CoupledStep) -> f64| -> Result<f64> {
        Ok(pairwise_sum(&weighted.iter().map(|(w, s)| w * f(s)).collect::<Vec<_>>()))
    };
    let pi = sum(&|s| if s.coalesced { 1.0 } else { 0.0 })?;
    let beta = sum(&|s| s.r_after - s.r_before)?;
    let alpha = l_values
        .iter()
        .map(|&l| {
            let d = |s: &CoupledStep| s.r_after - s.r_before;
            sum(&|s| if d(s) < l { 0.5 * d(s) * d(s) } else { 0.0 }).map(|a| (l, a))
        })
        .collect::<Result<Vec<_>>>()?;
    let rhos = weighted.iter().map(|(w, s)| rho.eval(&s.x, &s.y).map(|v| w * v)).collect::<Result<Vec<f64>>>()?;
    Ok(OracleValues { pi, beta, alpha, e_rho: pairwise_sum(&rhos), terms: weighted.len() })
}
