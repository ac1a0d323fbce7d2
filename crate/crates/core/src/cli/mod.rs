//! Command-line runner: `run`, `summarize`, `drift` and the `--schema` dump.
//!
//! Exit codes: 0 success, 1 configuration or runtime error, 2 drift hypothesis
//! violation, 3 failed checks under `--check`, 4 record schema mismatch.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

pub mod config;
pub mod summarize;

use crate::experiments::{
    defect, gap, kolmogorov, moment, oscillation, paths, validate_drift, Check, Outcome, SCHEMA_VERSION,
};
use config::{Config, Experiment, Layer};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error(transparent)]
    Run(#[from] crate::Error),
    #[error("checks failed: {}", .0.join(", "))]
    Checks(Vec<String>),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(crate::Error::HypothesisViolation { .. }) => 2,
            CliError::Checks(_) => 3,
            CliError::Schema(_) => 4,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "flowlab", version, about = "Seeded experiments on flows of SDEs with additive noise")]
pub struct Cli {
    /// Print CSV and JSONL layouts, config keys and exit codes as JSON.
    #[arg(long)]
    pub schema: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its artifacts.
    Run(RunArgs),
    /// Merge JSONL records into per-experiment quantile tables.
    Summarize(SummarizeArgs),
    /// Validate a drift and print its exponent bundle.
    Drift(DriftArgs),
}

#[derive(Debug, Args, Default)]
pub struct DriftFlags {
    /// Drift family: zero, constant:c, lipschitz:L, sign, checkerboard:j, holder:beta,rho,c.
    #[arg(long)]
    pub drift: Option<String>,
    #[arg(long)]
    pub dim: Option<u64>,
    /// Truncation radius N.
    #[arg(long)]
    pub truncation: Option<f64>,
    /// Integrability exponent of the bound envelope (number or inf).
    #[arg(long)]
    pub q1: Option<String>,
    /// Integrability exponent of the Hölder envelope (number or inf).
    #[arg(long)]
    pub q2: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub experiment: Option<String>,
    /// JSON file of flat dotted keys; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub drift: DriftFlags,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Number of seeds.
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub base_seed: Option<u64>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub k_min: Option<u64>,
    #[arg(long)]
    pub k_max: Option<u64>,
    /// Moment order.
    #[arg(long)]
    pub a: Option<f64>,
    /// Target Hölder exponents, comma separated.
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// brownian or flow.
    #[arg(long)]
    pub oracle: Option<String>,
    /// one-step, holder or borel.
    #[arg(long)]
    pub mode: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit 3 when an acceptance check fails.
    #[arg(long)]
    pub check: bool,
    /// Any config key, as key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// JSONL files or glob patterns.
    #[arg(required = true)]
    pub records: Vec<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DriftArgs {
    #[command(flatten)]
    pub drift: DriftFlags,
}

impl DriftFlags {
    fn layer(&self) -> Result<Layer, CliError> {
        let mut l = Layer::default();
        if let Some(v) = &self.drift {
            l.set("drift.id", json!(v))?;
        }
        if let Some(v) = self.dim {
            l.set("drift.dim", json!(v))?;
        }
        if let Some(v) = self.truncation {
            l.set("drift.truncation", json!(v))?;
        }
        if let Some(v) = &self.q1 {
            l.set_raw("drift.q1", v)?;
        }
        if let Some(v) = &self.q2 {
            l.set_raw("drift.q2", v)?;
        }
        if let Some(v) = self.delta {
            l.set("exponents.delta", json!(v))?;
        }
        Ok(l)
    }
}

impl RunArgs {
    /// File layer overlaid with the flags.
    pub fn layer(&self) -> Result<Layer, CliError> {
        let base = match &self.config {
            Some(p) => Layer::from_file(p)?,
            None => Layer::default(),
        };
        let mut l = self.drift.layer()?;
        let mut put = |key: &str, v: Option<Value>| -> Result<(), CliError> {
            if let Some(v) = v {
                l.set(key, v)?;
            }
            Ok(())
        };
        put("experiment", self.experiment.as_ref().map(|v| json!(v)))?;
        put("horizon", self.horizon.map(|v| json!(v)))?;
        put("seeds.count", self.seeds.map(|v| json!(v)))?;
        put("seeds.base", self.base_seed.map(|v| json!(v)))?;
        put("levels.m", self.m.map(|v| json!(v)))?;
        put("levels.n", self.n.map(|v| json!(v)))?;
        put("levels.k_min", self.k_min.map(|v| json!(v)))?;
        put("levels.k_max", self.k_max.map(|v| json!(v)))?;
        put("exponents.a", self.a.map(|v| json!(v)))?;
        put("exponents.eta", self.eta.map(|v| json!(v)))?;
        put("kolmogorov.oracle", self.oracle.as_ref().map(|v| json!(v)))?;
        put("defect.mode", self.mode.as_ref().map(|v| json!(v)))?;
        put("output.dir", self.out.as_ref().map(|v| json!(v.to_string_lossy())))?;
        if self.check {
            l.set("check", json!(true))?;
        }
        if let Some(v) = &self.alpha {
            l.set_raw("exponents.alpha", v)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {kv:?}")))?;
            l.set_raw(k.trim(), v.trim())?;
        }
        Ok(base.merge(l))
    }
}

/// Outcome of one `run`, with the summary already in JSON form.
#[derive(Debug)]
pub struct RunReport {
    pub experiment: Experiment,
    pub config_hash: String,
    pub out_dir: PathBuf,
    pub summary: Value,
    pub checks: Vec<Check>,
}

fn to_json<S: Serialize>(o: Outcome<S>) -> Result<Outcome<Value>, CliError> {
    let summary = serde_json::to_value(&o.summary).map_err(|e| crate::Error::Format(e.to_string()))?;
    Ok(o.map(|_| summary))
}

fn positive(cfg: &Config, key: &str) -> Result<f64, CliError> {
    let v = cfg.float(key)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config {
            key: key.into(),
            message: format!("must be positive, got {v}"),
        })
    }
}

/// Executes the experiment described by `cfg`; nothing is written.
pub fn execute(cfg: &Config) -> Result<Outcome<Value>, CliError> {
    let seeds = cfg.seeds()?;
    let horizon = positive(cfg, "horizon")?;
    let delta = cfg.opt_float("exponents.delta");
    let drift = || -> Result<crate::DriftSpec, CliError> {
        let d = cfg.drift()?;
        validate_drift(&d, delta)?;
        Ok(d)
    };
    match cfg.experiment {
        Experiment::GenPath => to_json(paths::gen_path(&paths::GenPathParams {
            seeds,
            dim: cfg.dim()?,
            horizon,
            level: cfg.level("levels.m")?,
        })?),
        Experiment::RunFlow => {
            let half = cfg.uint("flow.half_width")?;
            let p = paths::RunFlowParams {
                drift: drift()?,
                seeds,
                horizon,
                m: cfg.level("levels.m")?,
                n: cfg.level("levels.n")?,
                half_width: u32::try_from(half).map_err(|_| CliError::Config {
                    key: "flow.half_width".into(),
                    message: format!("{half} is too large"),
                })?,
                eta: positive(cfg, "flow.eta")?,
            };
            to_json(paths::run_flow(&p, &cfg.hash())?)
        }
        Experiment::VerifyKolmogorov => match cfg.text("kolmogorov.oracle")? {
            "brownian" => to_json(kolmogorov::brownian_oracle(&kolmogorov::BrownianOracleParams {
                seeds,
                horizon,
                n_min: cfg.level("levels.n_min")?,
                n_max: cfg.level("levels.n_max")?,
                a: positive(cfg, "exponents.a")?,
                alphas: cfg.floats("exponents.alpha")?,
                eta: positive(cfg, "exponents.eta")?,
            })?),
            "flow" => {
                let alphas = cfg.floats("exponents.alpha")?;
                let [alpha] = alphas.as_slice() else {
                    return Err(CliError::Config {
                        key: "exponents.alpha".into(),
                        message: "the flow oracle takes a single α".into(),
                    });
                };
                to_json(kolmogorov::flow_oracle(&kolmogorov::FlowOracleParams {
                    drift: drift()?,
                    seeds,
                    horizon,
                    n_min: cfg.level("levels.n_min")?,
                    n_max: cfg.level("levels.n_max")?,
                    m: cfg.level("levels.m")?,
                    alpha: *alpha,
                    half_width: positive(cfg, "kolmogorov.half_width")?,
                    a: positive(cfg, "exponents.a")?,
                })?)
            }
            other => Err(CliError::Config {
                key: "kolmogorov.oracle".into(),
                message: format!("expected brownian or flow, got {other:?}"),
            }),
        },
        Experiment::VerifyMoments => to_json(moment::run(&moment::MomentParams {
            drift: drift()?,
            seeds,
            horizon,
            a: positive(cfg, "exponents.a")?,
            x: cfg.point("start.x")?,
            sep_min: cfg.level("moments.sep_min")?,
            sep_max: cfg.level("moments.sep_max")?,
            n: cfg.level("levels.n")?,
            m: cfg.level("levels.m")?,
        })?),
        Experiment::VerifyDefect => {
            let kind: defect::DefectKind = cfg.text("defect.mode")?.parse().map_err(|e: crate::Error| {
                CliError::Config {
                    key: "defect.mode".into(),
                    message: e.to_string(),
                }
            })?;
            let t = match kind {
                defect::DefectKind::OneStep => crate::DyadicTime::ONE,
                _ => cfg.dyadic("defect.t")?,
            };
            to_json(defect::run(&defect::DefectParams {
                kind,
                drift: drift()?,
                seeds,
                horizon,
                x: cfg.point("start.x")?,
                k_min: cfg.level("levels.k_min")?,
                k_max: cfg.level("levels.k_max")?,
                offset: cfg.level("levels.offset")?,
                reference: cfg.level("levels.reference")?,
                t,
                delta,
            })?)
        }
        Experiment::VerifyOscillation => to_json(oscillation::run(&oscillation::OscillationParams {
            drift: drift()?,
            seeds,
            horizon,
            r: cfg.dyadic("oscillation.r")?,
            l_min: cfg.level("oscillation.l_min")?,
            l_max: cfg.level("oscillation.l_max")?,
            pairs: cfg.count("oscillation.pairs")?,
            extra: cfg.level("oscillation.extra")?,
            bound: positive(cfg, "oscillation.bound")?,
        })?),
        Experiment::VerifyUniqueness => to_json(gap::run(&gap::GapParams {
            drift: drift()?,
            seeds,
            horizon,
            x: cfg.point("start.x")?,
            m_min: cfg.level("gap.m_min")?,
            m_max: cfg.level("gap.m_max")?,
            m_fine: cfg.level("gap.m_fine")?,
        })?),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("json value");
    s.push(b'\n');
    s
}

/// Runs the experiment and writes `<exp>.csv`, `<exp>.jsonl`,
/// `<exp>.summary.json`, `run_record.json` and any extra files.
pub fn run(cfg: &Config) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let hash = cfg.hash();
    let outcome = execute(cfg)?;
    let out_dir = PathBuf::from(cfg.text("output.dir")?);
    fs::create_dir_all(&out_dir)?;
    let exp = cfg.experiment.name();

    let mut csv = format!("# flowlab {exp} config={hash}\n{}\n", outcome.table.header);
    for row in &outcome.table.rows {
        csv.push_str(row);
        csv.push('\n');
    }
    write_file(&out_dir.join(format!("{exp}.csv")), csv.as_bytes())?;

    let mut jsonl = Vec::new();
    for rec in &outcome.records {
        let line = json!({
            "schema": SCHEMA_VERSION,
            "experiment": exp,
            "config_hash": hash,
            "seed": rec.seed,
            "metrics": rec.metrics,
        });
        serde_json::to_writer(&mut jsonl, &line).map_err(|e| crate::Error::Format(e.to_string()))?;
        jsonl.push(b'\n');
    }
    write_file(&out_dir.join(format!("{exp}.jsonl")), &jsonl)?;

    let summary_doc = json!({
        "experiment": exp,
        "config_hash": hash,
        "version": VERSION,
        "summary": outcome.summary,
        "checks": outcome.checks,
    });
    write_file(&out_dir.join(format!("{exp}.summary.json")), &pretty(&summary_doc))?;
    for (name, bytes) in &outcome.blobs {
        write_file(&out_dir.join(name), bytes)?;
    }
    let record = json!({
        "experiment": exp,
        "config_hash": hash,
        "version": VERSION,
        "config": cfg.hashed(),
        "summary": outcome.summary,
        "checks": outcome.checks,
        "passed": outcome.passed(),
        "files": outcome.blobs.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    write_file(&out_dir.join("run_record.json"), &pretty(&record))?;
    Ok(RunReport {
        experiment: cfg.experiment,
        config_hash: hash,
        out_dir,
        summary: outcome.summary,
        checks: outcome.checks,
    })
}

/// Layout of every artifact, for `--schema`.
pub fn schema() -> Value {
    let csv = json!({
        "gen-path": "seed,t_num,t_level,w0..w{d-1}",
        "run-flow": "seed,starts,points,max_residual,monotonicity_violations,worst_order_gap",
        "verify-kolmogorov(brownian)": "seed,n,y_normalized",
        "verify-kolmogorov(flow)": "seed,n,c_hat,worst_s_num,worst_s_level,worst_t_num,worst_t_level",
        "verify-moments": "a,x0..x{d-1},y0..y{d-1},sep,estimate,stderr,s_argmax_num,s_argmax_level",
        "verify-defect(one-step)": "seed,k,m,max_defect,trivial_bound,bound_excess",
        "verify-defect(holder|borel)":
            "seed,k,m,max_increment,terminal,telescoping_error,max_one_step,gated_fraction,chained_ratio",
        "verify-oscillation": "j,l,seed,seed_max,exceeds_c",
        "verify-uniqueness": "seed,m,m_fine,sup_gap,terminal_gap",
    });
    let keys: serde_json::Map<String, Value> = config::KEYS
        .iter()
        .map(|(k, t)| ((*k).to_owned(), json!(format!("{t:?}").to_lowercase())))
        .collect();
    json!({
        "version": VERSION,
        "schema": SCHEMA_VERSION,
        "csv_preamble": "# flowlab <experiment> config=<hash>",
        "csv": csv,
        "jsonl": {"fields": ["schema", "experiment", "config_hash", "seed", "metrics"]},
        "files": ["<experiment>.csv", "<experiment>.jsonl", "<experiment>.summary.json", "run_record.json"],
        "config_keys": keys,
        "exit_codes": {"0": "success", "1": "configuration or runtime error", "2": "drift hypothesis violation",
                       "3": "failed check with --check", "4": "record schema mismatch"},
        "env": {"FLOWLAB_THREADS": "size of the worker pool"},
    })
}

fn drift_command(args: &DriftArgs) -> Result<Value, CliError> {
    let cfg = args.drift.layer()?.merge({
        let mut l = Layer::default();
        l.set("experiment", json!(Experiment::GenPath.name()))?;
        l
    });
    let cfg = cfg.resolve()?;
    if cfg.values().get("drift.id").is_none() {
        return Err(CliError::Config {
            key: "drift.id".into(),
            message: "--drift is required".into(),
        });
    }
    let drift = cfg.drift()?;
    let bundle = drift.validate_with(cfg.opt_float("exponents.delta"))?;
    Ok(json!({"drift": drift, "exponents": bundle}))
}

/// Sets up the worker pool from `FLOWLAB_THREADS`; repeated calls are no-ops.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("FLOWLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::Usage(format!("FLOWLAB_THREADS must be a positive integer, got {raw:?}")))?;
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    if cli.schema {
        stdout.write_all(&pretty(&schema()))?;
        return Ok(());
    }
    match cli.command {
        None => Err(CliError::Usage("no command given; try --help".into())),
        Some(Command::Run(args)) => {
            let cfg = args.layer()?.resolve()?;
            let check = cfg.flag("check");
            let report = run(&cfg)?;
            let failed: Vec<String> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
            for c in &report.checks {
                writeln!(stdout, "{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail)?;
            }
            writeln!(
                stdout,
                "{} config={} -> {}",
                report.experiment,
                report.config_hash,
                report.out_dir.display()
            )?;
            if check && !failed.is_empty() {
                return Err(CliError::Checks(failed));
            }
            Ok(())
        }
        Some(Command::Summarize(args)) => {
            let report = summarize::summarize(&args.records)?;
            let bytes = pretty(&report);
            match args.out {
                Some(p) => write_file(&p, &bytes)?,
                None => stdout.write_all(&bytes)?,
            }
            Ok(())
        }
        Some(Command::Drift(args)) => {
            stdout.write_all(&pretty(&drift_command(&args)?))?;
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    let mut out = std::io::stdout().lock();
    match dispatch(cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    main_with(std::env::args_os())
}
