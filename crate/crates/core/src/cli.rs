//! Configuration-driven entry point: parse a TOML experiment, run one subcommand, write CSV and JSON.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::couplings::{Coupler, CouplingRule, EulerCoupler, MixedParams};
use crate::error::Error;
use crate::model::{Drift, EulerModel, Kappa};
use crate::montecarlo::{contraction_audit, simulate_coupled_chain, verify_marginals, AuditReport, MarginalReport};
use crate::noise::NoiseSpec;
use crate::rates::{
    certify_euler, certify_weighted_tv_euler, noise_rate_comparison, ComparisonSetup, ComparisonTable, CouplingKind,
    DriftBound, EulerPath, FittedSlope, RateCertificate,
};
use crate::rng::Streams;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "kantorovich", about = "Certify and audit contraction rates of Euler-type chains")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `mc.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Emit the rate certificate as JSON.
    Certify,
    /// Audit the certificate against coupled Monte Carlo.
    Audit,
    /// Simulate coupled chains and record the distance trajectory.
    Simulate,
    /// Tabulate Gaussian versus stable rates over a radius grid.
    CompareNoise,
    /// KS tests of both coupling marginals.
    VerifyCouplings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Option<ModelConfig>,
    pub noise: Option<NoiseConfig>,
    pub coupling: Option<CouplingConfig>,
    pub rho: Option<RhoConfig>,
    #[serde(default)]
    pub grids: GridsConfig,
    pub mc: McConfig,
    pub compare: Option<CompareConfig>,
    pub simulate: Option<SimulateConfig>,
    pub verify: Option<VerifyConfig>,
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftConfig {
    Linear { m: f64 },
    LinearTanh { a: f64, s: f64 },
    LinearBump { a: f64, s: f64 },
}

/// `x ↦ x + h b(x) + g ξ` with optional overrides of the catalogue constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub drift: DriftConfig,
    pub d: usize,
    pub h: f64,
    pub g: f64,
    /// `inf` disables truncation.
    pub kappa: f64,
    pub kappa0: f64,
    pub lipschitz: Option<f64>,
    pub dissipativity: Option<f64>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub kind: CouplingKind,
    pub switch_radius: Option<f64>,
    pub jump_cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RhoConfig {
    Tv,
    W1,
    WeightedTv { theta: f64, m1: f64, m2: f64, threshold: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsConfig {
    /// Audit distances; the pair is `(r/2, -r/2)` along the first axis.
    #[serde(default)]
    pub r: Vec<f64>,
    #[serde(default)]
    pub h: Vec<f64>,
    #[serde(default)]
    pub radius: Vec<f64>,
    #[serde(default)]
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n: usize,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub lipschitz: f64,
    pub dissipativity: f64,
    /// Noise amplitude for the stable rows, `g = σ h^{1/α}`.
    pub sigma: f64,
    /// Adds a Gaussian row set at this amplitude.
    pub gaussian_sigma: Option<f64>,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub steps: usize,
    pub chains: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatePair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub pairs: Vec<StatePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Failed(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Io { .. } => EXIT_CONFIG,
            Self::Failed(_) => EXIT_FAIL,
        }
    }

    fn config(path: impl Into<String>, message: impl ToString) -> Self {
        Self::Config { path: path.into(), message: message.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn positive(path: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(path, format!("must be finite and positive, got {v}")))
    }
}

fn all_positive(path: &str, values: &[f64]) -> CliResult<()> {
    values.iter().enumerate().try_for_each(|(i, &v)| positive(&format!("{path}[{i}]"), v))
}

fn nonzero(path: &str, v: usize) -> CliResult<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(CliError::config(path, "must be positive"))
    }
}

fn required<'a, T>(section: &'a Option<T>, path: &str) -> CliResult<&'a T> {
    section.as_ref().ok_or_else(|| CliError::config(path, "section required by this subcommand"))
}

impl ExperimentConfig {
    /// Parses TOML, reporting the dotted path of the first offending key.
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::config("", e.message()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(path, e.into_inner().message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Scalar sanity checks; model-level checks happen when the model is built.
    pub fn validate(&self) -> CliResult<()> {
        if let Some(m) = &self.model {
            match m.drift {
                DriftConfig::Linear { m } => positive("model.drift.m", m)?,
                DriftConfig::LinearTanh { a, .. } | DriftConfig::LinearBump { a, .. } => positive("model.drift.a", a)?,
            }
            nonzero("model.d", m.d)?;
            positive("model.h", m.h)?;
            positive("model.g", m.g)?;
            if !(m.kappa > 0.0) {
                return Err(CliError::config("model.kappa", format!("must be positive or inf, got {}", m.kappa)));
            }
            positive("model.kappa0", m.kappa0)?;
            for (path, v) in
                [("model.lipschitz", m.lipschitz), ("model.dissipativity", m.dissipativity), ("model.radius", m.radius)]
            {
                v.map_or(Ok(()), |v| positive(path, v))?;
            }
        }
        if let Some(n) = &self.noise {
            NoiseSpec::from_key(&n.key, 1).map_err(|e| CliError::config("noise.key", e))?;
        }
        if let Some(c) = &self.coupling {
            match (c.kind, c.switch_radius, c.jump_cap) {
                (CouplingKind::Mixed, Some(s), Some(l)) => {
                    positive("coupling.switch_radius", s)?;
                    positive("coupling.jump_cap", l)?;
                }
                (CouplingKind::Mixed, None, _) => {
                    return Err(CliError::config("coupling.switch_radius", "required by the mixed coupling"))
                }
                (CouplingKind::Mixed, _, None) => {
                    return Err(CliError::config("coupling.jump_cap", "required by the mixed coupling"))
                }
                (_, Some(_), _) => {
                    return Err(CliError::config("coupling.switch_radius", "only used by the mixed coupling"))
                }
                (_, _, Some(_)) => {
                    return Err(CliError::config("coupling.jump_cap", "only used by the mixed coupling"))
                }
                _ => {}
            }
        }
        if let Some(RhoConfig::WeightedTv { theta, m1, m2, threshold }) = self.rho {
            if !(theta > 0.0 && theta <= 2.0) {
                return Err(CliError::config("rho.theta", "must lie in (0, 2]"));
            }
            positive("rho.m1", m1)?;
            positive("rho.m2", m2)?;
            positive("rho.threshold", threshold)?;
        }
        all_positive("grids.r", &self.grids.r)?;
        all_positive("grids.h", &self.grids.h)?;
        all_positive("grids.radius", &self.grids.radius)?;
        all_positive("grids.alpha", &self.grids.alpha)?;
        nonzero("mc.n", self.mc.n)?;
        nonzero("mc.workers", self.mc.workers)?;
        if let Some(c) = &self.compare {
            positive("compare.lipschitz", c.lipschitz)?;
            positive("compare.dissipativity", c.dissipativity)?;
            positive("compare.sigma", c.sigma)?;
            c.gaussian_sigma.map_or(Ok(()), |s| positive("compare.gaussian_sigma", s))?;
            nonzero("compare.d", c.d)?;
        }
        if let Some(s) = &self.simulate {
            nonzero("simulate.steps", s.steps)?;
            nonzero("simulate.chains", s.chains)?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML rendering, after any seed override. The worker count
    /// is left out so that reports stay byte-identical across thread pools.
    pub fn hash(&self) -> String {
        let mut hashed = self.clone();
        hashed.mc.workers = 0;
        let canonical = toml::to_string(&hashed).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn build_model(&self) -> CliResult<EulerModel> {
        let m = required(&self.model, "model")?;
        let drift = match m.drift {
            DriftConfig::Linear { m } => Drift::Linear { m },
            DriftConfig::LinearTanh { a, s } => Drift::LinearTanh { a, s },
            DriftConfig::LinearBump { a, s } => Drift::LinearBump { a, s },
        };
        let mut constants =
            drift.constants(m.d, m.dissipativity, m.radius).map_err(|e| CliError::config("model.drift", e))?;
        if let Some(l) = m.lipschitz {
            constants.lipschitz = l;
        }
        let kappa = Kappa::from_value(m.kappa).map_err(|e| CliError::config("model.kappa", e))?;
        EulerModel::new(drift, constants, m.h, m.g, kappa, m.kappa0, m.d).map_err(|e| CliError::config("model", e))
    }

    fn build_noise(&self, dim: usize) -> CliResult<NoiseSpec> {
        let n = required(&self.noise, "noise")?;
        NoiseSpec::from_key(&n.key, dim).map_err(|e| CliError::config("noise.key", e))
    }

    fn rule(&self) -> CliResult<CouplingRule> {
        let c = required(&self.coupling, "coupling")?;
        Ok(match c.kind {
            CouplingKind::RefinedBasic => CouplingRule::RefinedBasic,
            CouplingKind::Reflection => CouplingRule::Reflection,
            CouplingKind::Mixed => CouplingRule::Mixed(
                MixedParams::new(c.switch_radius.unwrap_or(f64::NAN), c.jump_cap.unwrap_or(f64::NAN))
                    .map_err(|e| CliError::config("coupling", e))?,
            ),
        })
    }

    fn coupler(&self) -> CliResult<EulerCoupler> {
        let model = self.build_model()?;
        let noise = self.build_noise(model.dim)?;
        EulerCoupler::new(model, noise, self.rule()?).map_err(|e| CliError::config("coupling.kind", e))
    }

    fn certificate(&self, coupler: &EulerCoupler) -> CliResult<RateCertificate> {
        let (model, noise, kind) = (coupler.model(), coupler.noise(), coupler.rule().kind());
        let cert = match required(&self.rho, "rho")? {
            RhoConfig::Tv => certify_euler(model, noise, kind, EulerPath::Tv)?,
            RhoConfig::W1 => certify_euler(model, noise, kind, EulerPath::W1)?,
            &RhoConfig::WeightedTv { theta, m1, m2, threshold } => {
                certify_weighted_tv_euler(model, noise, kind, theta, DriftBound { m1, m2, threshold })?
            }
        };
        Ok(cert.with_config_hash(self.hash()))
    }

    fn streams(&self) -> Streams {
        Streams::new(self.mc.seed)
    }
}

/// What a subcommand produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct AuditSummary<'a> {
    config_hash: String,
    certificate: &'a RateCertificate,
    report: &'a AuditReport,
}

#[derive(Serialize)]
struct TrajectorySummary<'a> {
    config_hash: String,
    certificate: &'a RateCertificate,
    n_chains: usize,
    steps: usize,
    final_coalesced_frac: f64,
    coalescence_histogram: &'a [(usize, usize)],
    w1_method: &'a str,
}

#[derive(Serialize)]
struct ComparisonSummary<'a> {
    config_hash: String,
    slopes: &'a [FittedSlope],
}

#[derive(Serialize)]
struct PairReport<'a> {
    x: &'a [f64],
    y: &'a [f64],
    report: MarginalReport,
}

#[derive(Serialize)]
struct MarginalSummary<'a> {
    config_hash: String,
    coupling: &'a str,
    noise: String,
    passed: bool,
    pairs: Vec<PairReport<'a>>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn text(&mut self, name: &str, body: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|source| CliError::Io { path: path.clone(), source })?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut body = serde_json::to_string_pretty(value).expect("report serializes");
        body.push('\n');
        self.text(name, &body)
    }
}

fn audit_points(cfg: &ExperimentConfig, dim: usize) -> CliResult<Vec<(Vec<f64>, Vec<f64>)>> {
    if cfg.grids.r.is_empty() {
        return Err(CliError::config("grids.r", "audit needs at least one distance"));
    }
    Ok(cfg
        .grids
        .r
        .iter()
        .map(|&r| {
            let mut x = vec![0.0; dim];
            let mut y = vec![0.0; dim];
            x[0] = r / 2.0;
            y[0] = -r / 2.0;
            (x, y)
        })
        .collect())
}

fn check_dim(path: &str, v: &[f64], dim: usize) -> CliResult<()> {
    if v.len() == dim {
        Ok(())
    } else {
        Err(CliError::config(path, format!("expected {dim} coordinates, got {}", v.len())))
    }
}

fn compare(cfg: &ExperimentConfig) -> CliResult<ComparisonTable> {
    let c = required(&cfg.compare, "compare")?;
    let kind = required(&cfg.coupling, "coupling")?.kind;
    if cfg.grids.radius.is_empty() {
        return Err(CliError::config("grids.radius", "comparison needs at least one radius"));
    }
    if cfg.grids.h.is_empty() {
        return Err(CliError::config("grids.h", "comparison needs at least one step size"));
    }
    let setup =
        |sigma| ComparisonSetup { lipschitz: c.lipschitz, dissipativity: c.dissipativity, sigma, coupling: kind };
    let stable = cfg
        .grids
        .alpha
        .iter()
        .enumerate()
        .map(|(i, &a)| NoiseSpec::stable(a, c.d).map_err(|e| CliError::config(format!("grids.alpha[{i}]"), e)))
        .collect::<CliResult<Vec<_>>>()?;
    let mut table = noise_rate_comparison(&setup(c.sigma), &stable, &cfg.grids.radius, &cfg.grids.h)?;
    if let Some(sigma) = c.gaussian_sigma {
        let gaussian = NoiseSpec::gaussian(c.d)?;
        let extra = noise_rate_comparison(&setup(sigma), &[gaussian], &cfg.grids.radius, &cfg.grids.h)?;
        table.rows.extend(extra.rows);
        table.slopes.extend(extra.slopes);
    }
    Ok(table)
}

/// Runs one subcommand and writes its artifacts under `out`.
pub fn run(command: Command, cfg: &ExperimentConfig, out: &Path) -> CliResult<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.mc.workers)
        .build()
        .map_err(|e| CliError::config("mc.workers", e))?;
    pool.install(|| execute(command, cfg, out))
}

fn execute(command: Command, cfg: &ExperimentConfig, out: &Path) -> CliResult<Outcome> {
    let hash = cfg.hash();
    let mut w = Writer::new(out)?;
    let (passed, summary) = match command {
        Command::Certify => {
            let cert = cfg.certificate(&cfg.coupler()?)?;
            w.json("certificate.json", &cert)?;
            (true, format!("c* = {:e} ({})", cert.c_star, cert.theorem))
        }
        Command::Audit => {
            let coupler = cfg.coupler()?;
            let cert = cfg.certificate(&coupler)?;
            let points = audit_points(cfg, coupler.model().dim)?;
            let report = contraction_audit(&coupler, &cert.rho, &cert, &points, cfg.mc.n, &cfg.streams())?;
            w.text("audit.csv", &report.to_csv())?;
            w.json("audit.json", &AuditSummary { config_hash: hash, certificate: &cert, report: &report })?;
            (report.passed, format!("audit pass rate {} at c* = {:e}", report.pass_rate, report.c_star))
        }
        Command::Simulate => {
            let sim = required(&cfg.simulate, "simulate")?;
            let coupler = cfg.coupler()?;
            let dim = coupler.model().dim;
            check_dim("simulate.x0", &sim.x0, dim)?;
            check_dim("simulate.y0", &sim.y0, dim)?;
            let cert = cfg.certificate(&coupler)?;
            let traj =
                simulate_coupled_chain(&coupler, &cert.rho, &sim.x0, &sim.y0, sim.steps, sim.chains, &cfg.streams())?;
            w.text("trajectory.csv", &traj.to_csv())?;
            let last = traj.rows.last().map_or(0.0, |r| r.coalesced_frac);
            w.json(
                "trajectory.json",
                &TrajectorySummary {
                    config_hash: hash,
                    certificate: &cert,
                    n_chains: traj.n_chains,
                    steps: sim.steps,
                    final_coalesced_frac: last,
                    coalescence_histogram: &traj.coalescence_histogram,
                    w1_method: &traj.w1_method,
                },
            )?;
            (true, format!("{} chains, coalesced fraction {last} after {} steps", traj.n_chains, sim.steps))
        }
        Command::CompareNoise => {
            let table = compare(cfg)?;
            w.text("comparison.csv", &table.to_csv())?;
            w.json("comparison.json", &ComparisonSummary { config_hash: hash, slopes: &table.slopes })?;
            let slopes: Vec<String> =
                table.slopes.iter().map(|s| format!("{} h={}: {:.4}", s.noise, s.h, s.slope)).collect();
            (true, format!("slopes: {}", slopes.join(", ")))
        }
        Command::VerifyCouplings => {
            let verify = required(&cfg.verify, "verify")?;
            let coupler = cfg.coupler()?;
            let dim = coupler.model().dim;
            let streams = cfg.streams();
            let mut pairs = Vec::with_capacity(verify.pairs.len());
            for (i, p) in verify.pairs.iter().enumerate() {
                check_dim(&format!("verify.pairs[{i}].x"), &p.x, dim)?;
                check_dim(&format!("verify.pairs[{i}].y"), &p.y, dim)?;
                let report = verify_marginals(&coupler, &p.x, &p.y, cfg.mc.n, &streams)?;
                pairs.push(PairReport { x: &p.x, y: &p.y, report });
            }
            let passed = pairs.iter().all(|p| p.report.passed);
            let failed = pairs.iter().filter(|p| !p.report.passed).count();
            let summary = MarginalSummary {
                config_hash: hash,
                coupling: coupler.rule().kind().label(),
                noise: coupler.noise().key(),
                passed,
                pairs,
            };
            w.json("marginals.json", &summary)?;
            (passed, format!("{failed} of {} pairs rejected", verify.pairs.len()))
        }
    };
    Ok(Outcome { passed, summary, files: w.files })
}

/// Parses arguments, runs, prints a one-line summary and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match load_and_run(&args) {
        Ok(outcome) => {
            println!("{}: {}", if outcome.passed { "PASS" } else { "FAIL" }, outcome.summary);
            if outcome.passed {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_and_run(args: &Args) -> CliResult<Outcome> {
    let path = args.config.as_deref().ok_or_else(|| CliError::config("--config", "missing"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = args.seed {
        cfg.mc.seed = seed;
    }
    let out =
        args.out.clone().or_else(|| cfg.output.as_ref().map(|o| o.dir.clone())).unwrap_or_else(|| PathBuf::from("out"));
    run(args.command, &cfg, &out)
}
