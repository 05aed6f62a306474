//! Command-line interface for diversity profiles, magnitude, maximum
//! diversity, and scaling-based estimators on finite similarity spaces.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 1 numeric
//! failure (no sign change, monotonicity violation, suspected non-unique
//! maximiser, ...), 3 solver ran out of budget (a partial result is still
//! written).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use maxdiv_core::error::{Error, Result};
use maxdiv_core::io::{
    load_space, maxdiv_result_json, read_measure_csv, read_points_csv, write_profile_csv,
    write_scaling_csv, write_weights_csv, MetricName, SpaceDescriptor, SpaceKind,
};
use maxdiv_core::maxdiv_exact::{verify_maximiser, MaxDivResult};
use maxdiv_core::maxdiv_numeric::{max_diversity_numeric, SolverOptions, StepRule};
use maxdiv_core::{
    crossing_order, diversity_profile, log_spaced, magnitude, minkowski_dimension_estimate,
    scaling_profile, uniform_measure_estimate, volume_estimate, weight_vector, MaxDivSolver,
    Measure, Metric, Order, SimilaritySpace,
};

#[derive(Parser)]
#[command(
    name = "maxdiv",
    version,
    about = "Diversity, magnitude, and maximum-diversity computations on finite similarity spaces"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Diversity and entropy of a measure over a grid of orders (CSV).
    Profile(ProfileArgs),
    /// Magnitude of the space: total weight of a solution of K w = 1 (JSON).
    Magnitude(SpaceArgs),
    /// The weighting w solving K w = 1, as label,weight CSV.
    Weighting(SpaceArgs),
    /// Maximum diversity, its maximising measure, and certificates (JSON).
    Maxdiv(MaxdivArgs),
    /// Check a claimed maximising measure and value against the certificates (JSON).
    Verify(VerifyArgs),
    /// Order at which two diversity profiles cross (JSON).
    Crossing(CrossingArgs),
    /// Maximum diversity across a grid of scale factors (CSV).
    Scaling(ScalingArgs),
    /// Growth-rate estimate of maximum diversity against scale (JSON).
    Dimension(ScalingArgs),
    /// Volume estimate from scaled maximum diversity of a point cloud (JSON).
    Volume(VolumeArgs),
    /// Maximising measure at the largest scale, with convergence diagnostics (JSON).
    Uniform(UniformArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Space descriptor JSON file.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Job configuration JSON; settings there override flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SolverFlags {
    /// exact (enumeration), convex (iterative), or auto (exact up to --cap).
    #[arg(long, value_enum)]
    solver: Option<SolverChoice>,
    /// Point-count cap for enumeration.
    #[arg(long)]
    cap: Option<usize>,
    /// Seed for randomized solver restarts.
    #[arg(long)]
    seed: Option<u64>,
    /// Convergence tolerance on the optimality gap.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration budget for the convex solver.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Number of random restarts for non-convex instances.
    #[arg(long)]
    restarts: Option<usize>,
    /// Step-size rule for the convex solver.
    #[arg(long, value_enum)]
    step_rule: Option<StepRuleChoice>,
}

#[derive(Args, Clone)]
struct GridFlags {
    /// Smallest scale factor of the log-spaced grid.
    #[arg(long)]
    t_min: Option<f64>,
    /// Largest scale factor.
    #[arg(long)]
    t_max: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct ProfileArgs {
    #[command(flatten)]
    common: Common,
    /// Measure CSV (label,weight rows) or the literal "uniform".
    #[arg(long)]
    measure: Option<String>,
    /// Comma-separated order grid; "inf" allowed.
    #[arg(long)]
    orders: Option<String>,
}

#[derive(Args)]
struct SpaceArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct MaxdivArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Candidate measure CSV or "uniform".
    #[arg(long)]
    measure: Option<String>,
    /// Claimed maximum-diversity value.
    #[arg(long)]
    value: Option<f64>,
    /// Certificate tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct CrossingArgs {
    #[command(flatten)]
    common: Common,
    /// First measure CSV or "uniform".
    #[arg(long)]
    measure: Option<String>,
    /// Second measure CSV or "uniform".
    #[arg(long)]
    measure2: Option<String>,
    /// Lower end of the order bracket.
    #[arg(long)]
    q_lo: Option<Order>,
    /// Upper end of the order bracket ("inf" allowed).
    #[arg(long)]
    q_hi: Option<Order>,
    /// Bisection tolerance on the order.
    #[arg(long)]
    xtol: Option<f64>,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: GridFlags,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct VolumeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: GridFlags,
    #[command(flatten)]
    solver: SolverFlags,
    /// Dimension of the point cloud (the growth exponent to divide out).
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args)]
struct UniformArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: GridFlags,
    #[command(flatten)]
    solver: SolverFlags,
    /// Largest acceptable total-variation step between the last two scales.
    #[arg(long)]
    tv_threshold: Option<f64>,
}

#[derive(ValueEnum, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum SolverChoice {
    Exact,
    Convex,
    Auto,
}

#[derive(ValueEnum, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum StepRuleChoice {
    LineSearch,
    Fixed,
}

impl From<StepRuleChoice> for StepRule {
    fn from(c: StepRuleChoice) -> StepRule {
        match c {
            StepRuleChoice::LineSearch => StepRule::LineSearch,
            StepRuleChoice::Fixed => StepRule::Fixed,
        }
    }
}

/// Optional settings from a `--config` JSON file. Anything present here
/// overrides the corresponding flag; flags override built-in defaults.
#[derive(Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct JobConfig {
    space: Option<PathBuf>,
    measure: Option<String>,
    measure2: Option<String>,
    out: Option<PathBuf>,
    orders: Option<Vec<Order>>,
    solver: Option<SolverChoice>,
    cap: Option<usize>,
    seed: Option<u64>,
    tol: Option<f64>,
    max_iters: Option<usize>,
    restarts: Option<usize>,
    step_rule: Option<StepRuleChoice>,
    t_min: Option<f64>,
    t_max: Option<f64>,
    samples: Option<usize>,
    tv_threshold: Option<f64>,
    dim: Option<usize>,
    value: Option<f64>,
    q_lo: Option<Order>,
    q_hi: Option<Order>,
    xtol: Option<f64>,
}

impl JobConfig {
    fn load(path: Option<&Path>) -> Result<JobConfig> {
        let Some(path) = path else {
            return Ok(JobConfig::default());
        };
        let text = fs::read_to_string(path)?;
        let mut cfg: JobConfig = serde_json::from_str(&text)?;
        // Input paths in a config file are relative to the config file.
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if let Some(p) = cfg.space.take() {
            cfg.space = Some(rebase(base, p));
        }
        cfg.measure = cfg.measure.take().map(|m| rebase_measure(base, m));
        cfg.measure2 = cfg.measure2.take().map(|m| rebase_measure(base, m));
        Ok(cfg)
    }
}

fn rebase(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn rebase_measure(base: &Path, m: String) -> String {
    if m == "uniform" {
        m
    } else {
        rebase(base, PathBuf::from(m)).display().to_string()
    }
}

fn missing(flag: &str) -> Error {
    Error::BadParameter {
        detail: format!("{flag} is required (flag or config file)"),
    }
}

fn space_path(cfg: &JobConfig, common: &Common) -> Result<PathBuf> {
    cfg.space
        .clone()
        .or_else(|| common.space.clone())
        .ok_or_else(|| missing("--space"))
}

fn out_path(cfg: &JobConfig, common: &Common) -> Option<PathBuf> {
    cfg.out.clone().or_else(|| common.out.clone())
}

fn load_measure(source: &str, space: &SimilaritySpace) -> Result<Measure> {
    if source == "uniform" {
        Measure::uniform(space.n())
    } else {
        read_measure_csv(Path::new(source), space.labels())
    }
}

fn solver_options(cfg: &JobConfig, f: &SolverFlags) -> SolverOptions {
    let mut o = SolverOptions::default();
    if let Some(t) = cfg.tol.or(f.tol) {
        o.tolerance = t;
    }
    if let Some(s) = cfg.seed.or(f.seed) {
        o.seed = Some(s);
    }
    if let Some(m) = cfg.max_iters.or(f.max_iters) {
        o.max_iters = m;
    }
    if let Some(r) = cfg.restarts.or(f.restarts) {
        o.restarts = r;
    }
    if let Some(sr) = cfg.step_rule.or(f.step_rule) {
        o.step_rule = sr.into();
    }
    o
}

fn build_solver(cfg: &JobConfig, f: &SolverFlags) -> MaxDivSolver {
    let options = solver_options(cfg, f);
    let cap = cfg.cap.or(f.cap);
    match cfg.solver.or(f.solver).unwrap_or(SolverChoice::Auto) {
        SolverChoice::Exact => MaxDivSolver::Exact { cap },
        SolverChoice::Convex => MaxDivSolver::Convex(options),
        SolverChoice::Auto => {
            let MaxDivSolver::Auto {
                cap: default_cap, ..
            } = MaxDivSolver::default()
            else {
                unreachable!()
            };
            MaxDivSolver::Auto {
                cap: cap.unwrap_or(default_cap),
                options,
            }
        }
    }
}

fn scale_grid(cfg: &JobConfig, g: &GridFlags) -> Result<Vec<f64>> {
    let t_min = cfg.t_min.or(g.t_min).ok_or_else(|| missing("--t-min"))?;
    let t_max = cfg.t_max.or(g.t_max).ok_or_else(|| missing("--t-max"))?;
    let samples = cfg.samples.or(g.samples).ok_or_else(|| missing("--samples"))?;
    if !(t_min.is_finite() && t_max.is_finite() && t_min > 0.0 && t_max >= t_min && samples >= 1) {
        return Err(Error::BadParameter {
            detail: format!(
                "scale grid needs 0 < t_min <= t_max (finite) and samples >= 1; \
                 got t_min={t_min}, t_max={t_max}, samples={samples}"
            ),
        });
    }
    if samples == 1 && t_max > t_min {
        return Err(Error::BadParameter {
            detail: "samples = 1 requires t_min = t_max".into(),
        });
    }
    Ok(log_spaced(t_min, t_max, samples))
}

/// Loads a point cloud for the estimators that need raw coordinates,
/// applying the descriptor's scale to the coordinates directly.
fn load_points_descriptor(path: &Path) -> Result<(Vec<Vec<f64>>, Metric)> {
    let text = fs::read_to_string(path)?;
    let desc: SpaceDescriptor = serde_json::from_str(&text)?;
    if desc.kind != SpaceKind::Points {
        return Err(Error::BadDescriptor {
            detail: "this command needs a point cloud (descriptor kind \"points\")".into(),
        });
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let data = rebase(base, desc.path.clone());
    let mut pts = read_points_csv(&data)?;
    let scale = desc.scale.unwrap_or(1.0);
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::NonpositiveScale { value: scale });
    }
    if scale != 1.0 {
        for p in &mut pts {
            for c in p {
                *c *= scale;
            }
        }
    }
    Ok((pts, desc.metric.unwrap_or(MetricName::Euclidean).into()))
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    use std::io::Write;
    match out {
        Some(p) => fs::write(p, contents)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(contents.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, v: &serde_json::Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    emit(out, &s)
}

fn labeled_measure<'a>(labels: &'a [String], mu: &Measure) -> BTreeMap<&'a String, f64> {
    labels.iter().zip(mu.weights().iter().copied()).collect()
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NotConverged { .. } => 3,
        Error::NonpositiveValueOnSupport { .. }
        | Error::TypicalityUnderflow { .. }
        | Error::NoSignChange { .. }
        | Error::NotMonotone { .. }
        | Error::Inconsistent { .. }
        | Error::NonUniqueSuspected { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    match std::env::var("MAXDIV_THREADS") {
        Err(_) => Ok(()),
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| format!("MAXDIV_THREADS must be a positive integer, got {v:?}"))?;
            if n == 0 {
                return Err("MAXDIV_THREADS must be at least 1".into());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| format!("could not configure thread pool: {e}"))
        }
    }
}

fn run(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Profile(a) => cmd_profile(a).map(|()| 0),
        Cmd::Magnitude(a) => cmd_magnitude(a).map(|()| 0),
        Cmd::Weighting(a) => cmd_weighting(a).map(|()| 0),
        Cmd::Maxdiv(a) => cmd_maxdiv(a).map(|()| 0),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Crossing(a) => cmd_crossing(a).map(|()| 0),
        Cmd::Scaling(a) => cmd_scaling(a).map(|()| 0),
        Cmd::Dimension(a) => cmd_dimension(a).map(|()| 0),
        Cmd::Volume(a) => cmd_volume(a).map(|()| 0),
        Cmd::Uniform(a) => cmd_uniform(a).map(|()| 0),
    }
}

const DEFAULT_ORDERS: &str = "0,0.25,0.5,1,2,4,inf";

fn cmd_profile(a: ProfileArgs) -> Result<()> {
    let cfg = JobConfig::load(a.common.config.as_deref())?;
    let space = load_space(&space_path(&cfg, &a.common)?)?;
    let measure_source = cfg
        .measure
        .clone()
        .or(a.measure)
        .unwrap_or_else(|| "uniform".into());
    let mu = load_measure(&measure_source, &space)?;
    let orders = match (&cfg.orders, &a.orders) {
        (Some(list), _) => list.clone(),
        (None, Some(s)) => parse_orders(s)?,
        (None, None) => parse_orders(DEFAULT_ORDERS)?,
    };
    let profile = diversity_profile(&space, &mu, &orders)?;
    let mut buf = Vec::new();
    write_profile_csv(&mut buf, &profile)?;
    emit(out_path(&cfg, &a.common).as_deref(), std::str::from_utf8(&buf).unwrap())
}

fn parse_orders(s: &str) -> Result<Vec<Order>> {
    s.split(',').map(|f| f.trim().parse()).collect()
}

fn cmd_magnitude(a: SpaceArgs) -> Result<()> {
    let cfg = JobConfig::load(a.common.config.as_deref())?;
    let space = load_space(&space_path(&cfg, &a.common)?)?;
    let m = magnitude(&space)?;
    emit_json(
        out_path(&cfg, &a.common).as_deref(),
        &json!({ "magnitude": m }),
    )
}

fn cmd_weighting(a: SpaceArgs) -> Result<()> {
    let cfg = JobConfig::load(a.common.config.as_deref())?;
    let space = load_space(&space_path(&cfg, &a.common)?)?;
    let wv = weight_vector(&space)?;
    let mut buf = Vec::new();
    write_weights_csv(&mut buf, space.labels(), wv.weighting().weights())?;
    emit(out_path(&cfg, &a.common).as_deref(), std::str::from_utf8(&buf).unwrap())
}

fn cmd_maxdiv(a: MaxdivArgs) -> Result<()> {
    let cfg = JobConfig::load(a.common.config.as_deref())?;
    let space = load_space(&space_path(&cfg, &a.common)?)?;
    let out = out_path(&cfg, &a.common);
    let solver = build_solver(&cfg, &a.solver);
    let result = match &solver {
        MaxDivSolver::Convex(opts) => max_diversity_numeric(&space, opts),
        other => other.solve(&space),
    };
    match result {
        Ok(r) => emit_maxdiv(out.as_deref(), &space, &r, true),
        Err(Error::NotConverged {
            iterations,
            gap,
            partial,
        }) => {
            emit_maxdiv(out.as_deref(), &space, &partial, false)?;
            Err(Error::NotConverged {
                iterations,
                gap,
                partial,
            })
        }
        Err(e) => Err(e),
    }
}

fn emit_maxdiv(
    out: Option<&Path>,
    space: &SimilaritySpace,
    r: &MaxDivResult,
    converged: bool,
) -> Result<()> {
    let mut v = maxdiv_result_json(space.labels(), r)?;
    v["converged"] = json!(converged);
    emit_json(out, &v)
}

fn cmd_verify(a: VerifyArgs) -> Result<u8> {
    let cfg = JobConfig::load(a.common.config.as_deref())?;
    let space = load_space(&space_path(&cfg, &a.common)?)?;
    let source = cfg
        .measure
        .clone()
        .or(a.measure)
        .ok_or_else(|| missing("--measure"))?;
    let mu = load_measure(&source, &space)?;
    let value = cfg.value.or(a.value).ok_or_else(|| missing("--value"))?;
    let tol = cfg.tol.or(a.tol).unwrap_or(maxdiv_core::maxdiv_exact::CERT_TOL);
    let report = verify_maximiser(&space, &mu, value, tol)?;
    emit_json(
        out_path(&cfg, &a.common).as_deref(),
        &serde_json::to_value(&report)?,
    )?;
    if report.pass {
        Ok(0)
    } else {
        eprintln!("verification failed; see the report for which certificate broke");
        Ok(1)
    }
}

fn cmd_crossing(a: CrossingArgs) -> Result<()> {
    let cfg = JobConfig::load(a.common.config.as_deref())?;
    let space = load_space(&space_path(&cfg, &a.common)?)?;
    let source1 = cfg
        .measure
        .clone()
        .or(a.measure)
        .ok_or_else(|| missing("--measure"))?;
    let source2 = cfg
        .measure2
        .clone()
        .or(a.measure2)
        .ok_or_else(|| missing("--measure2"))?;
    let mu1 = load_measure(&source1, &space)?;
    let mu2 = load_measure(&source2, &space)?;
    let lo = cfg.q_lo.or(a.q_lo).unwrap_or(Order::ZERO);
    let hi = cfg.q_hi.or(a.q_hi).unwrap_or(Order::INFINITY);
    let xtol = cfg.xtol.or(a.xtol).unwrap_or(1e-9);
    let q = crossing_order(&space, &mu1, &mu2, lo, hi, xtol)?;
    emit_json(
        out_path(&cfg, &a.common).as_deref(),
        &json!({ "crossing": q }),
    )
}

fn cmd_scaling(a: ScalingArgs) -> Result<()> {
    let cfg = JobConfig::load(a.common.config.as_deref())?;
    let space = load_space(&space_path(&cfg, &a.common)?)?;
    let ts = scale_grid(&cfg, &a.grid)?;
    let solver = build_solver(&cfg, &a.solver);
    let profile = scaling_profile(&space, &ts, &solver)?;
    let mut buf = Vec::new();
    write_scaling_csv(&mut buf, &profile)?;
    emit(out_path(&cfg, &a.common).as_deref(), std::str::from_utf8(&buf).unwrap())
}

fn cmd_dimension(a: ScalingArgs) -> Result<()> {
    let cfg = JobConfig::load(a.common.config.as_deref())?;
    let (points, metric) = load_points_descriptor(&space_path(&cfg, &a.common)?)?;
    let ts = scale_grid(&cfg, &a.grid)?;
    let (t_lo, t_hi, samples) = (ts[0], ts[ts.len() - 1], ts.len());
    let solver = build_solver(&cfg, &a.solver);
    let est = minkowski_dimension_estimate(&points, metric, t_lo, t_hi, samples, &solver)?;
    emit_json(
        out_path(&cfg, &a.common).as_deref(),
        &serde_json::to_value(&est)?,
    )
}

fn cmd_volume(a: VolumeArgs) -> Result<()> {
    let cfg = JobConfig::load(a.common.config.as_deref())?;
    let (points, metric) = load_points_descriptor(&space_path(&cfg, &a.common)?)?;
    if metric != Metric::Euclidean {
        return Err(Error::BadDescriptor {
            detail: "volume estimation uses the Euclidean metric".into(),
        });
    }
    let dim = cfg.dim.or(a.dim).ok_or_else(|| missing("--dim"))?;
    let ts = scale_grid(&cfg, &a.grid)?;
    let (t_lo, t_hi, samples) = (ts[0], ts[ts.len() - 1], ts.len());
    let solver = build_solver(&cfg, &a.solver);
    let est = volume_estimate(&points, dim, t_lo, t_hi, samples, &solver)?;
    emit_json(
        out_path(&cfg, &a.common).as_deref(),
        &serde_json::to_value(&est)?,
    )
}

fn cmd_uniform(a: UniformArgs) -> Result<()> {
    let cfg = JobConfig::load(a.common.config.as_deref())?;
    let space = load_space(&space_path(&cfg, &a.common)?)?;
    let ts = scale_grid(&cfg, &a.grid)?;
    let solver = build_solver(&cfg, &a.solver);
    let tv = cfg.tv_threshold.or(a.tv_threshold);
    let est = uniform_measure_estimate(&space, &ts, &solver, tv)?;
    let v = json!({
        "measure": labeled_measure(space.labels(), &est.measure),
        "t_used": est.t_used,
        "convergence_diag": est.convergence_diag,
        "converged": est.converged,
        "tv_threshold": est.tv_threshold,
        "resolution_warning": est.resolution_warning,
    });
    emit_json(out_path(&cfg, &a.common).as_deref(), &v)
}
