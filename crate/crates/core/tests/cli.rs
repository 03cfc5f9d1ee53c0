use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use kantorovich::cli::{run, Command, ExperimentConfig, EXIT_CONFIG, EXIT_FAIL};
use kantorovich::rates::RateCertificate;

const BASE: &str = r#"
[model]
d = 1
h = 0.01
g = 3.0
kappa = 3.0
kappa0 = 1.0
dissipativity = 0.5

[model.drift]
kind = "linear-tanh"
a = 1.0
s = 2.0

[noise]
key = "gaussian"

[coupling]
kind = "refined-basic"

[rho]
kind = "tv"

[grids]
r = [0.05, 1.0, 10.0]

[mc]
n = 20000
seed = 11
workers = 2
"#;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kantorovich-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn binary(args: &[&str], config: &str, dir: &Path) -> (i32, String, String) {
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    let out = Process::new(env!("CARGO_BIN_EXE_kantorovich"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    let text = |b: Vec<u8>| String::from_utf8(b).unwrap();
    (out.status.code().unwrap(), text(out.stdout), text(out.stderr))
}

fn config_error_path(text: &str) -> String {
    match ExperimentConfig::from_toml(text) {
        Err(kantorovich::cli::CliError::Config { path, .. }) => path,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn negative_step_size_exits_with_the_offending_path() {
    let dir = scratch("negative-h");
    let (code, _, stderr) = binary(&["certify"], &BASE.replace("h = 0.01", "h = -0.01"), &dir);
    assert_eq!(code, EXIT_CONFIG);
    assert!(stderr.contains("`model.h`"), "{stderr}");
}

#[test]
fn unknown_and_missing_keys_are_reported_by_path() {
    assert_eq!(config_error_path(&BASE.replace("kappa0 = 1.0", "kappa0 = 1.0\nkapa = 2.0")), "model.kapa");
    assert_eq!(config_error_path(&BASE.replace("s = 2.0", "s = 2.0\nb = 1.0")), "model.drift");
    assert_eq!(config_error_path(&BASE.replace("seed = 11\n", "")), "mc");
    assert_eq!(config_error_path(&BASE.replace("workers = 2", "workers = 0")), "mc.workers");
    assert_eq!(config_error_path(&BASE.replace("\"gaussian\"", "\"stable:2.5\"")), "noise.key");
    assert_eq!(config_error_path(&BASE.replace("r = [0.05", "r = [-0.05")), "grids.r[0]");
    assert_eq!(
        config_error_path(&BASE.replace("\"refined-basic\"", "\"mixed\"\nswitch_radius = 8.0")),
        "coupling.jump_cap"
    );
    assert_eq!(
        config_error_path(&BASE.replace("\"refined-basic\"", "\"reflection\"\njump_cap = 8.0")),
        "coupling.jump_cap"
    );
}

#[test]
fn certify_embeds_the_config_hash() {
    let dir = scratch("certify");
    let (code, stdout, _) = binary(&["certify"], BASE, &dir);
    assert_eq!(code, 0, "{stdout}");
    let cert: RateCertificate =
        serde_json::from_str(&fs::read_to_string(dir.join("out/certificate.json")).unwrap()).unwrap();
    assert!(cert.c_star > 0.0 && cert.c_star < 1.0);
    assert!(cert.checked.iter().all(|c| c.holds));
    let expected = ExperimentConfig::from_toml(BASE).unwrap().hash();
    assert_eq!(cert.config_hash.as_deref(), Some(expected.as_str()));
    assert_eq!(expected.len(), 64);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = scratch("seed");
    binary(&["audit", "--seed", "99"], BASE, &dir);
    let overridden = fs::read_to_string(dir.join("out/audit.json")).unwrap();
    let reseeded = BASE.replace("seed = 11", "seed = 99");
    let direct = scratch("seed-direct");
    binary(&["audit"], &reseeded, &direct);
    assert_eq!(overridden, fs::read_to_string(direct.join("out/audit.json")).unwrap());
    let hash = ExperimentConfig::from_toml(&reseeded).unwrap().hash();
    assert!(overridden.contains(&hash));
    assert_ne!(hash, ExperimentConfig::from_toml(BASE).unwrap().hash());
}

#[test]
fn audit_outputs_do_not_depend_on_worker_count() {
    let files = |workers: usize| {
        let mut cfg = ExperimentConfig::from_toml(BASE).unwrap();
        cfg.mc.workers = workers;
        let dir = scratch(&format!("workers-{workers}"));
        let outcome = run(Command::Audit, &cfg, &dir).unwrap();
        assert!(outcome.passed, "{}", outcome.summary);
        (fs::read(dir.join("audit.csv")).unwrap(), fs::read(dir.join("audit.json")).unwrap())
    };
    let (csv1, json1) = files(1);
    let (csv3, json3) = files(3);
    assert_eq!(csv1, csv3);
    assert_eq!(json1, json3);
    assert!(String::from_utf8(csv1).unwrap().starts_with("r,rho,E_rho,se,bound,passed\n"));
}

#[test]
fn refused_certificate_exits_with_failure() {
    // h L R far above the step-size preconditions
    let dir = scratch("refused");
    let (code, _, stderr) = binary(&["certify"], &BASE.replace("h = 0.01", "h = 0.9"), &dir);
    assert_eq!(code, EXIT_FAIL, "{stderr}");
}

#[test]
fn simulate_and_verify_write_reports() {
    let text = format!(
        "{BASE}\n[simulate]\nx0 = [-3.0]\ny0 = [3.0]\nsteps = 50\nchains = 200\n\n[verify]\npairs = [{{ x = [0.0], y = [1.0] }}]\n"
    );
    let cfg = ExperimentConfig::from_toml(&text.replace("n = 20000", "n = 10000")).unwrap();
    let dir = scratch("simulate");
    assert!(run(Command::Simulate, &cfg, &dir).unwrap().passed);
    let csv = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,E_rho,se,coalesced_frac,W1\n"));
    assert_eq!(csv.lines().count(), 52);
    let verified = run(Command::VerifyCouplings, &cfg, &dir).unwrap();
    assert!(verified.passed, "{}", verified.summary);
    assert!(fs::read_to_string(dir.join("marginals.json")).unwrap().contains(&cfg.hash()));
}

#[test]
fn compare_noise_reproduces_the_tail_slopes() {
    let text = r#"
[coupling]
kind = "refined-basic"

[compare]
lipschitz = 0.1
dissipativity = 0.1
sigma = 0.5
gaussian_sigma = 1.0
d = 1

[grids]
h = [1.0]
radius = [5.0, 10.0, 20.0, 50.0]
alpha = [1.2, 1.5, 1.8]

[mc]
n = 1
seed = 0
workers = 1
"#;
    let dir = scratch("compare");
    let (code, stdout, stderr) = binary(&["compare-noise"], text, &dir);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.starts_with("PASS"));
    let csv = fs::read_to_string(dir.join("out/comparison.csv")).unwrap();
    assert!(csv.starts_with("noise,alpha,d,h,R,J,a,c1,c3,c_star\n"));
    assert_eq!(csv.lines().count(), 1 + 4 * 4);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/comparison.json")).unwrap()).unwrap();
    for s in summary["slopes"].as_array().unwrap().iter().filter(|s| s["noise"].as_str().unwrap().starts_with("stable"))
    {
        let (alpha, slope) = (s["alpha"].as_f64().unwrap(), s["slope"].as_f64().unwrap());
        assert!((slope + alpha).abs() <= 0.15, "α = {alpha}: {slope}");
    }
}

#[test]
fn missing_section_is_a_config_error() {
    let dir = scratch("missing");
    let (code, _, stderr) = binary(&["simulate"], BASE, &dir);
    assert_eq!(code, EXIT_CONFIG);
    assert!(stderr.contains("`simulate`"), "{stderr}");
}
