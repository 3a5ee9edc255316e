//! Config-driven experiment runner.
//!
//! One process invocation runs one experiment described by a TOML file and
//! writes `results.csv` plus `summary.json` into the output directory. Output
//! bytes depend only on the resolved config, the seed, and the crate version:
//! worker count and wall-clock never leak into the files.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::asymptotics::{breiman_constant, cr_limit, jes_factor, ruin_asymptote, RuinKind};
use crate::dep_families::{
    DependenceFamily, FamilySequence, MixingFn, StoppingLaw, Variant, WeightLaw,
};
use crate::error::Error;
use crate::limit_measure::{
    corner_mass_product, corner_mass_sum, mu_bar, mu_hat_product_box, mu_hat_sum_box,
    mu_tilde_stopped_box,
};
use crate::mc_engine::{
    estimate_cr, estimate_indicator, estimate_marginal_sum_tail, estimate_scaled_corner,
    estimate_scaled_sum_corner, Estimate, Side, StreamSpec,
};
use crate::risk_sim::{
    estimate_psi, estimate_stopped_corner, jes_empirical, positive_part_gap, sample_stopped_sums,
    simulate_paths, NetLossModel,
};
use crate::rv_core::RVMarginal;

#[derive(Parser)]
#[command(name = "brvlab", version, about = "Heavy-tailed dependence experiments")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// Path to the TOML experiment config.
    pub config: PathBuf,
    /// Worker threads for the sampling pool. Changes speed, never results.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Directory for results.csv and summary.json; beats the config value.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Seed override in hexadecimal; beats the config value.
    #[arg(long)]
    pub seed: Option<String>,
}

/// Parse the process arguments and run. Returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(&args) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
    }
}

/// Failure classes with their contract exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, unparseable, or schema-invalid configuration: exit 2.
    Config(String),
    /// Model rejected by a structural precondition: exit 3.
    Assumption(String),
    /// Quadrature or estimator breakdown, non-finite results: exit 4.
    Numeric(String),
    /// Run completed and files were written, but the configured tolerance
    /// failed at the deepest level: exit 5.
    Tolerance(String),
    /// Filesystem trouble writing outputs: exit 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Assumption(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Tolerance(_) => 5,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Assumption(m) => write!(f, "assumption violated: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Tolerance(m) => write!(f, "tolerance failed: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::OutOfSupport(_) => {
                CliError::Config(e.to_string())
            }
            Error::AssumptionViolation(_) => CliError::Assumption(e.to_string()),
            Error::QuadratureFailure(_) | Error::DegenerateEstimate(_) | Error::EmptyMerge => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Breiman,
    ProductCorner,
    SumMeasure,
    StoppedSum,
    Ruin,
    Jes,
    Cr,
    VerifyAssumptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    /// 64-bit master seed, hexadecimal, optional 0x prefix.
    pub seed: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_index: Vec<FamilyConfig>,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopping: Option<StoppingSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub marginal_x: MarginalConfig,
    pub marginal_y: MarginalConfig,
    pub theta: LawConfig,
    pub delta: LawConfig,
    pub variant: VariantConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalConfig {
    pub alpha: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawConfig {
    Uniform { lo: f64, hi: f64 },
    Discrete { atoms: Vec<ValueAtom> },
    Degenerate { value: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueAtom {
    pub v: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VariantConfig {
    Independence {
        base_mix: f64,
    },
    MarginalTilt {
        a1: f64,
        a2: f64,
    },
    JointMixture {
        c0: f64,
        #[serde(default)]
        c_theta: f64,
        #[serde(default)]
        c_delta: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Scale levels, strictly increasing; the pass/fail gate looks at the last.
    pub x_grid: Vec<f64>,
    /// Samples (weight draws or paths) per grid level.
    pub budget: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default = "default_coord")]
    pub p: f64,
    #[serde(default = "default_coord")]
    pub q: f64,
    /// Moment margin for the assumption checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Relative error allowed at the deepest level; absent means report-only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Experiment-specific selector: corner|box for measure experiments,
    /// and|or|simultaneous|positive-part-gap for ruin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<String>,
    /// Which product tail the breiman experiment estimates: x|y.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<String>,
}

fn default_coord() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSection {
    #[serde(default)]
    pub premium_x: f64,
    #[serde(default)]
    pub premium_y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_to: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<CountAtom>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountAtom {
    pub n: u32,
    pub p: f64,
}

/// One output line: estimate against asymptote at one scale level.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Row {
    pub x: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub asymptote: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CheckSummary {
    /// Level the gate was applied at.
    pub x: f64,
    pub relative_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub pass: Option<bool>,
    pub check: Option<CheckSummary>,
    pub diagnostics: serde_json::Value,
}

#[derive(Serialize)]
struct Summary<'a> {
    tool: ToolInfo,
    config: &'a ExperimentConfig,
    final_row: &'a Row,
    #[serde(skip_serializing_if = "Option::is_none")]
    check: &'a Option<CheckSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pass: Option<bool>,
    diagnostics: &'a serde_json::Value,
}

#[derive(Serialize)]
struct ToolInfo {
    name: &'static str,
    version: &'static str,
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = &args.seed {
        cfg.seed = seed.clone();
    }
    if let Some(dir) = &args.output {
        cfg.output = Some(dir.display().to_string());
    }
    let seed = parse_seed(&cfg.seed)?;
    cfg.seed = format!("0x{seed:016x}");
    validate(&cfg)?;

    let outcome = match args.workers {
        None => execute(&cfg, seed)?,
        Some(w) => {
            if w == 0 {
                return Err(CliError::Config("workers must be >= 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::Io(format!("cannot build worker pool: {e}")))?;
            pool.install(|| execute(&cfg, seed))?
        }
    };

    let dir = PathBuf::from(cfg.output.as_deref().unwrap_or("."));
    write_outputs(&dir, &cfg, &outcome)?;

    for r in &outcome.rows {
        println!(
            "x={:.3e}  empirical={:.6e}  stderr={:.3e}  asymptote={:.6e}  ratio={:.4}",
            r.x, r.empirical, r.stderr, r.asymptote, r.ratio
        );
    }
    println!("wrote {} and {}", dir.join("results.csv").display(), dir.join("summary.json").display());
    match outcome.pass {
        Some(true) => println!("PASS"),
        Some(false) => println!("FAIL"),
        None => println!("report-only (no tolerance configured)"),
    }
    if outcome.pass == Some(false) {
        let c = outcome.check.expect("gate result present when pass is set");
        return Err(CliError::Tolerance(format!(
            "relative error {:.3e} at x={:.3e} exceeds {:.3e}",
            c.relative_error,
            c.x,
            c.tolerance.unwrap_or(f64::NAN)
        )));
    }
    Ok(())
}

pub fn parse_seed(s: &str) -> Result<u64, CliError> {
    let t = s.trim();
    let t = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t);
    let t: String = t.chars().filter(|&c| c != '_').collect();
    u64::from_str_radix(&t, 16)
        .map_err(|e| CliError::Config(format!("seed must be hexadecimal, got {s:?}: {e}")))
}

fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if cfg.schema_version != 1 {
        return Err(CliError::Config(format!(
            "unsupported schema_version {}, expected 1",
            cfg.schema_version
        )));
    }
    let r = &cfg.run;
    if r.x_grid.is_empty() {
        return Err(CliError::Config("run.x_grid must be nonempty".into()));
    }
    if r.x_grid.iter().any(|x| !x.is_finite() || *x <= 1.0) {
        return Err(CliError::Config("run.x_grid entries must be finite and > 1".into()));
    }
    if r.x_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config("run.x_grid must be strictly increasing".into()));
    }
    if r.budget == 0 {
        return Err(CliError::Config("run.budget must be >= 1".into()));
    }
    for (name, v) in [("run.p", r.p), ("run.q", r.q)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(CliError::Config(format!("{name} must be finite and > 0")));
        }
    }
    if let Some(t) = r.tolerance {
        if !t.is_finite() || t <= 0.0 {
            return Err(CliError::Config("run.tolerance must be finite and > 0".into()));
        }
    }
    if let Some(e) = r.epsilon {
        if !e.is_finite() || e <= 0.0 {
            return Err(CliError::Config("run.epsilon must be finite and > 0".into()));
        }
    }
    if let Some(h) = r.horizon {
        if h == 0 {
            return Err(CliError::Config("run.horizon must be >= 1".into()));
        }
    }

    use ExperimentKind::*;
    let kind = cfg.experiment;
    let sequence_kind = matches!(kind, SumMeasure | Ruin | Cr);
    if sequence_kind {
        match (&cfg.family, cfg.per_index.is_empty()) {
            (Some(_), true) | (None, false) => {}
            (Some(_), false) => {
                return Err(CliError::Config(
                    "give either [family] with run.horizon or [[per_index]], not both".into(),
                ))
            }
            (None, true) => {
                return Err(CliError::Config(
                    "sequence experiment needs [family] or [[per_index]]".into(),
                ))
            }
        }
        if !cfg.per_index.is_empty() && r.horizon.is_some() {
            return Err(CliError::Config(
                "run.horizon conflicts with [[per_index]]; the list fixes the length".into(),
            ));
        }
    } else {
        if cfg.family.is_none() {
            return Err(CliError::Config("this experiment needs a [family] section".into()));
        }
        if !cfg.per_index.is_empty() {
            return Err(CliError::Config("[[per_index]] only applies to sequence experiments".into()));
        }
        if r.horizon.is_some() {
            return Err(CliError::Config("run.horizon only applies to sequence experiments".into()));
        }
    }
    if cfg.stopping.is_some() != matches!(kind, StoppedSum) {
        return Err(CliError::Config(match kind {
            StoppedSum => "stopped-sum needs a [stopping] section".into(),
            _ => "[stopping] only applies to the stopped-sum experiment".into(),
        }));
    }
    if cfg.risk.is_some() && !matches!(kind, Ruin) {
        return Err(CliError::Config("[risk] only applies to the ruin experiment".into()));
    }
    if r.side.is_some() && !matches!(kind, Breiman) {
        return Err(CliError::Config("run.side only applies to the breiman experiment".into()));
    }
    if r.functional.is_some() && !matches!(kind, ProductCorner | SumMeasure | StoppedSum | Ruin) {
        return Err(CliError::Config(
            "run.functional only applies to measure and ruin experiments".into(),
        ));
    }
    Ok(())
}

pub fn build_family(fc: &FamilyConfig) -> Result<DependenceFamily, CliError> {
    let mx = RVMarginal::new(fc.marginal_x.alpha, fc.marginal_x.sigma)?;
    let my = RVMarginal::new(fc.marginal_y.alpha, fc.marginal_y.sigma)?;
    let theta = build_law(&fc.theta)?;
    let delta = build_law(&fc.delta)?;
    let variant = match &fc.variant {
        VariantConfig::Independence { base_mix } => Variant::Independence { base_mix: *base_mix },
        VariantConfig::MarginalTilt { a1, a2 } => Variant::MarginalTilt { a1: *a1, a2: *a2 },
        VariantConfig::JointMixture { c0, c_theta, c_delta } => Variant::JointMixture {
            mixing: MixingFn { c0: *c0, c_theta: *c_theta, c_delta: *c_delta },
        },
    };
    Ok(DependenceFamily::new(mx, my, theta, delta, variant)?)
}

fn build_law(lc: &LawConfig) -> Result<WeightLaw, CliError> {
    Ok(match lc {
        LawConfig::Uniform { lo, hi } => WeightLaw::uniform(*lo, *hi)?,
        LawConfig::Discrete { atoms } => {
            let pairs: Vec<(f64, f64)> = atoms.iter().map(|a| (a.v, a.p)).collect();
            WeightLaw::discrete(&pairs)?
        }
        LawConfig::Degenerate { value } => WeightLaw::degenerate(*value)?,
    })
}

fn build_sequence(cfg: &ExperimentConfig) -> Result<FamilySequence, CliError> {
    if !cfg.per_index.is_empty() {
        let fams = cfg.per_index.iter().map(build_family).collect::<Result<Vec<_>, _>>()?;
        return Ok(FamilySequence::new(fams)?);
    }
    let fam = build_family(cfg.family.as_ref().expect("validated"))?;
    Ok(FamilySequence::iid(fam, cfg.run.horizon.unwrap_or(1))?)
}

fn single_family(cfg: &ExperimentConfig) -> Result<DependenceFamily, CliError> {
    build_family(cfg.family.as_ref().expect("validated"))
}

fn build_stopping(cfg: &ExperimentConfig) -> Result<StoppingLaw, CliError> {
    let s = cfg.stopping.as_ref().expect("validated");
    match (&s.uniform_to, s.atoms.is_empty()) {
        (Some(m), true) => Ok(StoppingLaw::uniform_1_to(*m)?),
        (None, false) => {
            let pairs: Vec<(u32, f64)> = s.atoms.iter().map(|a| (a.n, a.p)).collect();
            Ok(StoppingLaw::new(&pairs)?)
        }
        _ => Err(CliError::Config(
            "[stopping] needs exactly one of uniform_to or atoms".into(),
        )),
    }
}

fn make_row(x: f64, est: &Estimate, asymptote: f64) -> Result<Row, CliError> {
    let (ci_lo, ci_hi) = est.ci95();
    let row = Row {
        x,
        empirical: est.point,
        stderr: est.stderr,
        ci_lo,
        ci_hi,
        asymptote,
        ratio: if asymptote != 0.0 { est.point / asymptote } else { f64::NAN },
    };
    if !row.empirical.is_finite() || !row.stderr.is_finite() || !row.asymptote.is_finite() {
        return Err(CliError::Numeric(format!(
            "non-finite result at x={x}: empirical={}, stderr={}, asymptote={}",
            row.empirical, row.stderr, row.asymptote
        )));
    }
    Ok(row)
}

/// Gate the deepest level against the configured tolerance. Relative error
/// against a zero asymptote degrades to absolute.
fn gate(rows: &[Row], tolerance: Option<f64>) -> (Option<bool>, Option<CheckSummary>) {
    let last = rows.last().expect("grid validated nonempty");
    let rel = if last.asymptote != 0.0 {
        ((last.empirical - last.asymptote) / last.asymptote).abs()
    } else {
        last.empirical.abs()
    };
    let check = CheckSummary { x: last.x, relative_error: rel, tolerance };
    (tolerance.map(|t| rel <= t), Some(check))
}

fn execute(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome, CliError> {
    let stream = StreamSpec::new(seed);
    match cfg.experiment {
        ExperimentKind::Breiman => exp_breiman(cfg, &stream),
        ExperimentKind::ProductCorner => exp_product_corner(cfg, &stream),
        ExperimentKind::SumMeasure => exp_sum_measure(cfg, &stream),
        ExperimentKind::StoppedSum => exp_stopped_sum(cfg, &stream),
        ExperimentKind::Ruin => exp_ruin(cfg, &stream),
        ExperimentKind::Jes => exp_jes(cfg, &stream),
        ExperimentKind::Cr => exp_cr(cfg, &stream),
        ExperimentKind::VerifyAssumptions => exp_verify(cfg, &stream),
    }
}

fn exp_breiman(cfg: &ExperimentConfig, stream: &StreamSpec) -> Result<Outcome, CliError> {
    let fam = single_family(cfg)?;
    let side = match cfg.run.side.as_deref() {
        None | Some("x") => Side::X,
        Some("y") => Side::Y,
        Some(other) => return Err(CliError::Config(format!("run.side must be x or y, got {other:?}"))),
    };
    // The product-tail constant under the family's own dependence factor. The
    // factor closure only sees points inside the law's support, where it
    // cannot fail.
    let constant = match side {
        Side::X => breiman_constant(
            fam.theta_law(),
            |t| fam.h1(t).expect("inside support"),
            fam.alpha(),
        )?,
        Side::Y => breiman_constant(
            fam.delta_law(),
            |d| fam.h2(d).expect("inside support"),
            fam.beta(),
        )?,
    };
    let seq = FamilySequence::iid(fam, 1)?;
    let mut rows = Vec::new();
    for (i, &x) in cfg.run.x_grid.iter().enumerate() {
        let est = estimate_marginal_sum_tail(&seq, side, 1.0, x, cfg.run.budget, &stream.child(i as u64))?;
        rows.push(make_row(x, &est, constant)?);
    }
    let (pass, check) = gate(&rows, cfg.run.tolerance);
    Ok(Outcome { rows, pass, check, diagnostics: json!({ "constant": constant }) })
}

enum MeasureFunctional {
    Corner,
    Box,
}

fn measure_functional(cfg: &ExperimentConfig) -> Result<MeasureFunctional, CliError> {
    match cfg.run.functional.as_deref() {
        None | Some("corner") => Ok(MeasureFunctional::Corner),
        Some("box") => Ok(MeasureFunctional::Box),
        Some(other) => Err(CliError::Config(format!(
            "run.functional must be corner or box, got {other:?}"
        ))),
    }
}

fn exp_product_corner(cfg: &ExperimentConfig, stream: &StreamSpec) -> Result<Outcome, CliError> {
    let fam = single_family(cfg)?;
    let (p, q, budget) = (cfg.run.p, cfg.run.q, cfg.run.budget);
    let mut rows = Vec::new();
    let limit;
    match measure_functional(cfg)? {
        MeasureFunctional::Corner => {
            limit = corner_mass_product(&fam, p, q)?;
            for (i, &x) in cfg.run.x_grid.iter().enumerate() {
                let est = estimate_scaled_corner(&fam, p, q, x, budget, &stream.child(i as u64))?;
                rows.push(make_row(x, &est, limit)?);
            }
        }
        MeasureFunctional::Box => {
            limit = mu_hat_product_box(&fam, p, q)?;
            let seq = FamilySequence::iid(fam.clone(), 1)?;
            for (i, &x) in cfg.run.x_grid.iter().enumerate() {
                let c = stream.child(i as u64);
                let mx = estimate_marginal_sum_tail(&seq, Side::X, p, x, budget, &c.child(1))?;
                let my = estimate_marginal_sum_tail(&seq, Side::Y, q, x, budget, &c.child(2))?;
                let co = estimate_scaled_corner(&fam, p, q, x, budget, &c.child(3))?;
                // Inclusion-exclusion of the three independent estimates.
                let est = Estimate {
                    point: mx.point + my.point - co.point,
                    stderr: (mx.stderr.powi(2) + my.stderr.powi(2) + co.stderr.powi(2)).sqrt(),
                    n: budget,
                    hits: None,
                };
                rows.push(make_row(x, &est, limit)?);
            }
        }
    }
    let (pass, check) = gate(&rows, cfg.run.tolerance);
    let diagnostics = json!({
        "limit": limit,
        "base_pair_corner": mu_bar(&fam, p, q)?,
    });
    Ok(Outcome { rows, pass, check, diagnostics })
}

fn exp_sum_measure(cfg: &ExperimentConfig, stream: &StreamSpec) -> Result<Outcome, CliError> {
    let seq = build_sequence(cfg)?;
    let (p, q, budget) = (cfg.run.p, cfg.run.q, cfg.run.budget);
    let mut rows = Vec::new();
    let limit;
    match measure_functional(cfg)? {
        MeasureFunctional::Corner => {
            limit = corner_mass_sum(&seq, p, q)?;
            for (i, &x) in cfg.run.x_grid.iter().enumerate() {
                let est = estimate_scaled_sum_corner(&seq, p, q, x, budget, &stream.child(i as u64))?;
                rows.push(make_row(x, &est, limit)?);
            }
        }
        MeasureFunctional::Box => {
            limit = mu_hat_sum_box(&seq, p, q)?;
            for (i, &x) in cfg.run.x_grid.iter().enumerate() {
                let c = stream.child(i as u64);
                let mx = estimate_marginal_sum_tail(&seq, Side::X, p, x, budget, &c.child(1))?;
                let my = estimate_marginal_sum_tail(&seq, Side::Y, q, x, budget, &c.child(2))?;
                let co = estimate_scaled_sum_corner(&seq, p, q, x, budget, &c.child(3))?;
                let est = Estimate {
                    point: mx.point + my.point - co.point,
                    stderr: (mx.stderr.powi(2) + my.stderr.powi(2) + co.stderr.powi(2)).sqrt(),
                    n: budget,
                    hits: None,
                };
                rows.push(make_row(x, &est, limit)?);
            }
        }
    }
    let (pass, check) = gate(&rows, cfg.run.tolerance);
    Ok(Outcome { rows, pass, check, diagnostics: json!({ "limit": limit, "horizon": seq.len() }) })
}

fn exp_stopped_sum(cfg: &ExperimentConfig, stream: &StreamSpec) -> Result<Outcome, CliError> {
    let fam = single_family(cfg)?;
    let stopping = build_stopping(cfg)?;
    let (p, q, budget) = (cfg.run.p, cfg.run.q, cfg.run.budget);
    let single = corner_mass_product(&fam, p, q)?;
    let mut rows = Vec::new();
    let limit;
    match measure_functional(cfg)? {
        MeasureFunctional::Corner => {
            limit = stopping.mean() * single;
            for (i, &x) in cfg.run.x_grid.iter().enumerate() {
                let est =
                    estimate_stopped_corner(&fam, &stopping, p, q, x, budget, &stream.child(i as u64))?;
                rows.push(make_row(x, &est, limit)?);
            }
        }
        MeasureFunctional::Box => {
            limit = mu_tilde_stopped_box(&fam, &stopping, p, q)?;
            for (i, &x) in cfg.run.x_grid.iter().enumerate() {
                let tx = fam.marginal_x().normalization_u(x)? * p;
                let ty = fam.marginal_y().normalization_u(x)? * q;
                let est = estimate_indicator(&stream.child(i as u64), budget, |rng| {
                    let (sx, sy) = sample_stopped_sums(&fam, &stopping, rng);
                    sx > tx || sy > ty
                })?
                .scale(x);
                rows.push(make_row(x, &est, limit)?);
            }
        }
    }
    let (pass, check) = gate(&rows, cfg.run.tolerance);
    let diagnostics = json!({
        "limit": limit,
        "stopping_mean": stopping.mean(),
        "single_term_corner": single,
    });
    Ok(Outcome { rows, pass, check, diagnostics })
}

fn exp_ruin(cfg: &ExperimentConfig, stream: &StreamSpec) -> Result<Outcome, CliError> {
    let seq = build_sequence(cfg)?;
    let (prem_x, prem_y) = match &cfg.risk {
        Some(r) => (r.premium_x, r.premium_y),
        None => (0.0, 0.0),
    };
    let model = NetLossModel::new(seq.clone(), prem_x, prem_y)?;
    let (p, q, budget) = (cfg.run.p, cfg.run.q, cfg.run.budget);
    let mut rows = Vec::new();

    let kind = match cfg.run.functional.as_deref() {
        None | Some("and") => Some(RuinKind::And),
        Some("simultaneous") => Some(RuinKind::Simultaneous),
        Some("or") => Some(RuinKind::Or),
        Some("positive-part-gap") => None,
        Some(other) => {
            return Err(CliError::Config(format!(
                "run.functional must be and, or, simultaneous, or positive-part-gap, got {other:?}"
            )))
        }
    };

    let mut diagnostics = match kind {
        Some(kind) => {
            let asy = ruin_asymptote(&seq, p, q, kind)?;
            for (i, &x) in cfg.run.x_grid.iter().enumerate() {
                let est = estimate_psi(&model, x, p, q, kind, budget, &stream.child(i as u64))?;
                rows.push(make_row(x, &est, asy.psi(x))?);
            }
            json!({ "kind": kind, "coefficient": asy.coefficient })
        }
        None => {
            for (i, &x) in cfg.run.x_grid.iter().enumerate() {
                let est = positive_part_gap(&model, x, p, q, budget, &stream.child(i as u64))?;
                rows.push(make_row(x, &est, 1.0)?);
            }
            json!({ "kind": "positive-part-gap" })
        }
    };

    // Event-algebra audit on a capped batch at the deepest level.
    let deepest = *cfg.run.x_grid.last().expect("validated");
    let audit_paths = budget.min(200_000);
    let counts = simulate_paths(&model, deepest, p, q, audit_paths, &stream.child(0xD1A6))?;
    diagnostics["path_counts"] = serde_json::to_value(counts)
        .map_err(|e| CliError::Io(format!("serialize diagnostics: {e}")))?;
    if !counts.inclusions_ok {
        return Err(CliError::Numeric(
            "path audit found a ruin event outside its containing event".into(),
        ));
    }

    let (pass, check) = gate(&rows, cfg.run.tolerance);
    Ok(Outcome { rows, pass, check, diagnostics })
}

fn exp_jes(cfg: &ExperimentConfig, stream: &StreamSpec) -> Result<Outcome, CliError> {
    let fam = single_family(cfg)?;
    let factor = jes_factor(&fam)?;
    let mut rows = Vec::new();
    let mut share = f64::NAN;
    for (i, &x) in cfg.run.x_grid.iter().enumerate() {
        let jes = jes_empirical(&fam, x, cfg.run.budget, &stream.child(i as u64))?;
        rows.push(make_row(x, &jes.estimate, factor)?);
        share = jes.independent_share;
    }
    let (pass, check) = gate(&rows, cfg.run.tolerance);
    let diagnostics = json!({
        "factor": factor,
        "independent_share_at_deepest": share,
    });
    Ok(Outcome { rows, pass, check, diagnostics })
}

fn exp_cr(cfg: &ExperimentConfig, stream: &StreamSpec) -> Result<Outcome, CliError> {
    let seq = build_sequence(cfg)?;
    let (p, q) = (cfg.run.p, cfg.run.q);
    let limit = cr_limit(&seq, p, q)?;
    let mut rows = Vec::new();
    for (i, &x) in cfg.run.x_grid.iter().enumerate() {
        let est = estimate_cr(&seq, p, q, x, cfg.run.budget, &stream.child(i as u64))?;
        rows.push(make_row(x, &est, limit)?);
    }
    let (pass, check) = gate(&rows, cfg.run.tolerance);
    Ok(Outcome { rows, pass, check, diagnostics: json!({ "limit": limit, "horizon": seq.len() }) })
}

fn exp_verify(cfg: &ExperimentConfig, stream: &StreamSpec) -> Result<Outcome, CliError> {
    let fam = single_family(cfg)?;
    let epsilon = cfg.run.epsilon.unwrap_or(0.05);
    let mut rng = stream.rng();
    let report = fam.verify_assumptions(cfg.run.budget, &cfg.run.x_grid, epsilon, &mut rng)?;
    let rows = report
        .ratio_checks
        .iter()
        .map(|c| {
            let half = 1.959963984540054 * c.stderr;
            Row {
                x: c.x,
                empirical: c.empirical,
                stderr: c.stderr,
                ci_lo: c.empirical - half,
                ci_hi: c.empirical + half,
                asymptote: c.expected,
                ratio: if c.expected != 0.0 { c.empirical / c.expected } else { f64::NAN },
            }
        })
        .collect::<Vec<_>>();
    if rows.is_empty() {
        return Err(CliError::Numeric("assumption check produced no ratio probes".into()));
    }
    // The gate here is structural: the closed-form mean-one identities must
    // hold to quadrature accuracy and no empirical ratio may sit far from its
    // factor.
    let tol = cfg.run.tolerance.unwrap_or(1e-8);
    let mean_one = report.mean_one_error();
    let pass = Some(!report.flagged && mean_one <= tol);
    let check = Some(CheckSummary {
        x: *cfg.run.x_grid.last().expect("validated"),
        relative_error: mean_one,
        tolerance: Some(tol),
    });
    let diagnostics = serde_json::to_value(&report)
        .map_err(|e| CliError::Io(format!("serialize diagnostics: {e}")))?;
    Ok(Outcome { rows, pass, check, diagnostics })
}

/// 17 significant digits: lossless f64 round-trip in the CSV.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_outputs(dir: &Path, cfg: &ExperimentConfig, outcome: &Outcome) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut csv = String::from("x,empirical,stderr,ci_lo,ci_hi,asymptote,ratio\n");
    for r in &outcome.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt(r.x),
            fmt(r.empirical),
            fmt(r.stderr),
            fmt(r.ci_lo),
            fmt(r.ci_hi),
            fmt(r.asymptote),
            fmt(r.ratio)
        ));
    }
    let csv_path = dir.join("results.csv");
    fs::write(&csv_path, csv)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", csv_path.display())))?;

    let summary = Summary {
        tool: ToolInfo { name: "brvlab", version: env!("CARGO_PKG_VERSION") },
        config: cfg,
        final_row: outcome.rows.last().expect("rows nonempty"),
        check: &outcome.check,
        pass: outcome.pass,
        diagnostics: &outcome.diagnostics,
    };
    let mut text = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Io(format!("serialize summary: {e}")))?;
    text.push('\n');
    let json_path = dir.join("summary.json");
    fs::write(&json_path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", json_path.display())))?;
    Ok(())
}
