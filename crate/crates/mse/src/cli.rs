//! The `mse` command line.
//!
//! Exit codes: 0 on success, 1 for usage and data errors, 2 when the
//! requested model has no estimate (nonexistent MLE or unidentifiable).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mse_core::bootstrap::{bootstrap_estimate, BootstrapConfig, BootstrapResult};
use mse_core::inference::{estimate_population_cells, stepwise_cells, Method};
use mse_core::loglinear::{fit_cells, FitOptions};
use mse_core::simulation::{
    deviance_qq_study, threshold_study, Scenario, SCENARIO_THRESHOLDS, STUDY_THRESHOLDS,
};
use mse_core::{check_all_models, check_model, BuiltinDataset, CaptureDataset, ModelSpec};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::data::{self, DataError, DatasetJson};
use crate::par::Pool;
use crate::report::{
    deviance_csv, pair_labels, threshold_study_csv, AuditReport, BootstrapReport, CheckReport,
    DevianceReport, FitReport, StepwiseReport, ThresholdStudyReport,
};

pub const DEFAULT_SEED: u64 = 1001;

/// Share of failed bootstrap draws above which a warning is printed.
const FAILURE_WARN_RATE: f64 = 0.01;

/// Datasets behind the default threshold-study scenarios.
pub const STUDY_DATASETS: [BuiltinDataset; 7] = [
    BuiltinDataset::Netherlands,
    BuiltinDataset::Netherlands5,
    BuiltinDataset::NewOrleans,
    BuiltinDataset::NewOrleans5,
    BuiltinDataset::Uk,
    BuiltinDataset::Uk5,
    BuiltinDataset::Western,
];

#[derive(Parser, Debug)]
#[command(
    name = "mse",
    version,
    about = "Multiple systems estimation for sparse capture-recapture data"
)]
struct Cli {
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Main,
    Full,
    Stepwise,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Builtin dataset name or path to a CSV file.
    #[arg(long)]
    data: String,

    /// Two-list terms, e.g. `LA:GP,NG:PF`.
    #[arg(long, value_delimiter = ',')]
    pairs: Vec<String>,

    #[arg(long, value_enum)]
    model: Option<ModelKind>,

    /// Stepwise p-value threshold.
    #[arg(long, default_value_t = mse_core::inference::DEFAULT_THRESHOLD)]
    pthresh: f64,
}

#[derive(Args, Debug)]
struct BootArgs {
    #[arg(long, default_value_t = 1000)]
    nboot: usize,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Confidence levels.
    #[arg(long, value_delimiter = ',', default_value = "0.80,0.95")]
    levels: Vec<f64>,

    /// Write one replicate estimate per line to this file.
    #[arg(long)]
    dump_replicates: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model (main effects unless --pairs or --model says otherwise).
    Fit(ModelArgs),
    /// Forward stepwise selection with its full trail.
    Stepwise(ModelArgs),
    /// Population estimate with BCa intervals (--nboot 0 for the point only).
    Estimate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        boot: BootArgs,
    },
    /// Existence and identifiability of one model.
    Check(ModelArgs),
    /// Existence and identifiability of every choice of two-list terms.
    CheckAll {
        #[arg(long)]
        data: String,
    },
    /// Bootstrap the estimation pipeline.
    Bootstrap {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        boot: BootArgs,
    },
    /// Monte Carlo studies.
    #[command(subcommand)]
    Simulate(SimCommand),
    /// List the builtin datasets, or print one.
    Datasets { name: Option<String> },
}

#[derive(Subcommand, Debug)]
enum SimCommand {
    /// Log mean squared error of log population estimates per threshold.
    ThresholdStudy {
        /// Builtin datasets used to build scenarios.
        #[arg(long, value_delimiter = ',')]
        datasets: Vec<String>,

        /// Thresholds of the generating models (0 main effects, 1 full).
        #[arg(long, value_delimiter = ',', default_value = "0")]
        scenario_thresholds: Vec<f64>,

        #[arg(long, value_delimiter = ',')]
        est_thresholds: Vec<f64>,

        #[arg(long, default_value_t = 200)]
        nsims: usize,

        /// All four scenario models and 1000 realizations each.
        #[arg(long)]
        full: bool,

        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Deviance drop for one pair on three independent lists.
    DevianceQq {
        #[arg(long, value_delimiter = ',', default_value = "0.3,0.3,0.3")]
        probs: Vec<f64>,

        #[arg(long, default_value_t = 1000.0)]
        pop: f64,

        #[arg(long, default_value_t = 10000)]
        nsims: usize,

        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Core(#[from] mse_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_estimability() => 2,
            _ => 1,
        }
    }
}

type CliResult = Result<i32, CliError>;

struct Ctx<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    pool: Pool,
    format: Option<Format>,
}

impl Ctx<'_> {
    fn format(&self, default: Format, allowed: &[Format]) -> Result<Format, CliError> {
        let f = self.format.unwrap_or(default);
        if !allowed.contains(&f) {
            return Err(CliError::Usage(
                format!("--format {f:?} is not available for this command").to_lowercase(),
            ));
        }
        Ok(f)
    }

    fn json<T: Serialize>(&mut self, value: &T) -> Result<(), CliError> {
        serde_json::to_writer_pretty(&mut *self.out, value)?;
        writeln!(self.out)?;
        Ok(())
    }

    fn warn(&mut self, msg: &str) -> Result<(), CliError> {
        writeln!(self.err, "warning: {msg}")?;
        Ok(())
    }

    fn seed(&mut self, seed: u64) -> Result<(), CliError> {
        writeln!(self.err, "seed: {seed}")?;
        Ok(())
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let pool = match Pool::new(cli.threads) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    let mut ctx = Ctx {
        out,
        err,
        pool,
        format: cli.format,
    };
    match dispatch(cli.command, &mut ctx) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(ctx.err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, ctx: &mut Ctx) -> CliResult {
    match command {
        Command::Fit(m) => cmd_fit(&m, ctx),
        Command::Stepwise(m) => cmd_stepwise(&m, ctx),
        Command::Estimate { model, boot } => cmd_estimate(&model, &boot, ctx),
        Command::Check(m) => cmd_check(&m, ctx),
        Command::CheckAll { data } => cmd_check_all(&data, ctx),
        Command::Bootstrap { model, boot } => cmd_bootstrap(&model, &boot, ctx),
        Command::Simulate(sim) => cmd_simulate(sim, ctx),
        Command::Datasets { name } => cmd_datasets(name.as_deref(), ctx),
    }
}

fn check_threshold(p: f64, what: &str) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CliError::Usage(format!("{what} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn fixed_spec(d: &CaptureDataset, pairs: &[String]) -> Result<ModelSpec, CliError> {
    let parsed = pairs
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| d.parse_pair(s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ModelSpec::with_pairs(d.t(), parsed)?)
}

/// Resolves `--pairs` / `--model` / `--pthresh`; `default` applies when
/// neither of the first two is given.
fn method(d: &CaptureDataset, m: &ModelArgs, default: ModelKind) -> Result<Method, CliError> {
    check_threshold(m.pthresh, "--pthresh")?;
    if !m.pairs.is_empty() {
        if m.model.is_some() {
            return Err(CliError::Usage("give either --pairs or --model, not both".into()));
        }
        return Ok(Method::Fixed(fixed_spec(d, &m.pairs)?));
    }
    Ok(match m.model.unwrap_or(default) {
        ModelKind::Main => Method::MainEffects,
        ModelKind::Full => Method::Full,
        ModelKind::Stepwise => Method::Stepwise(m.pthresh),
    })
}

fn method_json(d: &CaptureDataset, m: Method) -> serde_json::Value {
    match m {
        Method::Stepwise(p) => json!({ "kind": "stepwise", "pthresh": p }),
        Method::Fixed(spec) => json!({ "kind": "fixed", "pairs": pair_labels(d, spec.pairs()) }),
        Method::MainEffects => json!({ "kind": "main" }),
        Method::Full => json!({ "kind": "full" }),
    }
}

fn cmd_fit(m: &ModelArgs, ctx: &mut Ctx) -> CliResult {
    let format = ctx.format(Format::Json, &[Format::Json, Format::Table])?;
    let d = data::load(&m.data)?;
    let method = method(&d, m, ModelKind::Main)?;
    let fit = match method {
        Method::Stepwise(p) => stepwise_cells(d.cells(), p, &ctx.pool)?.fit,
        Method::Fixed(spec) => fit_cells(d.cells(), &spec, &FitOptions::default())?,
        other => estimate_population_cells(d.cells(), other, &ctx.pool)?.fit,
    };
    let report = FitReport::new(&d, &fit);
    if format == Format::Json {
        ctx.json(&report)?;
        return Ok(0);
    }
    writeln!(ctx.out, "model      {}", display_pairs(&report.model))?;
    writeln!(ctx.out, "estimate   {:.2}", report.estimate)?;
    writeln!(ctx.out, "dark       {:.2}", report.dark_figure)?;
    writeln!(ctx.out, "deviance   {:.4}", report.deviance)?;
    writeln!(ctx.out, "iterations {}", report.iterations)?;
    writeln!(ctx.out)?;
    for c in &report.coefficients {
        let v = c
            .estimate
            .as_f64()
            .map_or_else(|| c.estimate.to_string().replace('"', ""), |x| format!("{x:.6}"));
        writeln!(ctx.out, "{:<20} {v:>14}", c.term)?;
    }
    Ok(0)
}

fn display_pairs(pairs: &[String]) -> String {
    if pairs.is_empty() {
        "main effects".to_string()
    } else {
        pairs.join(", ")
    }
}

fn cmd_stepwise(m: &ModelArgs, ctx: &mut Ctx) -> CliResult {
    let format = ctx.format(Format::Table, &[Format::Json, Format::Table])?;
    check_threshold(m.pthresh, "--pthresh")?;
    if !m.pairs.is_empty() || m.model.is_some() {
        return Err(CliError::Usage(
            "stepwise takes --pthresh, not --pairs or --model".into(),
        ));
    }
    let d = data::load(&m.data)?;
    let s = stepwise_cells(d.cells(), m.pthresh, &ctx.pool)?;
    let report = StepwiseReport::new(&d, &s.trail);
    if format == Format::Json {
        ctx.json(&json!({
            "trail": report,
            "estimate": s.fit.population_estimate,
        }))?;
        return Ok(0);
    }
    write!(ctx.out, "{}", report.table())?;
    writeln!(ctx.out)?;
    writeln!(ctx.out, "model    {}", display_pairs(&report.model))?;
    writeln!(ctx.out, "estimate {:.2}", s.fit.population_estimate)?;
    Ok(0)
}

fn check_boot_args(b: &BootArgs, allow_zero: bool) -> Result<(), CliError> {
    if b.nboot == 0 && !allow_zero {
        return Err(CliError::Usage("--nboot must be at least 1".into()));
    }
    if let Some(l) = b.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(CliError::Usage(format!("confidence level {l} outside (0, 1)")));
    }
    Ok(())
}

fn run_bootstrap(
    d: &CaptureDataset,
    method: Method,
    b: &BootArgs,
    ctx: &mut Ctx,
) -> Result<BootstrapResult, CliError> {
    ctx.seed(b.seed)?;
    let config = BootstrapConfig {
        method,
        n_boot: b.nboot,
        levels: b.levels.clone(),
        seed: b.seed,
    };
    let r = bootstrap_estimate(d.cells(), &config, &ctx.pool)?;
    if r.failure_rate() > FAILURE_WARN_RATE {
        ctx.warn(&format!(
            "{} of {} bootstrap resamples had no estimate and were redrawn",
            r.n_failed, r.n_requested
        ))?;
    }
    if r.jackknife.degenerate {
        ctx.warn("all leave-one-out estimates are equal; acceleration set to 0")?;
    }
    if r.z0_clamped {
        ctx.warn("every replicate lies on one side of the point estimate; bias correction clamped")?;
    }
    if r.intervals.iter().any(|i| i.clamped) {
        ctx.warn("acceleration reached its singularity; interval levels clamped")?;
    }
    if let Some(path) = &b.dump_replicates {
        let mut w = BufWriter::new(File::create(path)?);
        for v in &r.replicates {
            writeln!(w, "{v}")?;
        }
        w.flush()?;
    }
    Ok(r)
}

fn cmd_estimate(m: &ModelArgs, b: &BootArgs, ctx: &mut Ctx) -> CliResult {
    let format = ctx.format(Format::Json, &[Format::Json, Format::Table])?;
    check_boot_args(b, true)?;
    let d = data::load(&m.data)?;
    let method = method(&d, m, ModelKind::Stepwise)?;
    let est = estimate_population_cells(d.cells(), method, &ctx.pool)?;
    let boot = if b.nboot > 0 {
        Some(run_bootstrap(&d, method, b, ctx)?)
    } else {
        None
    };
    let model = pair_labels(&d, est.fit.spec.pairs());
    if format == Format::Table {
        writeln!(ctx.out, "model    {}", display_pairs(&model))?;
        writeln!(ctx.out, "estimate {:.2}", est.estimate())?;
        if let Some(r) = &boot {
            for i in &r.intervals {
                writeln!(ctx.out, "{:>5.1}%   ({:.1}, {:.1})", 100.0 * i.level, i.lo, i.hi)?;
            }
        }
        return Ok(0);
    }
    ctx.json(&json!({
        "data": m.data,
        "method": method_json(&d, method),
        "model": model,
        "observed_total": est.fit.observed_total,
        "dark_figure": est.fit.dark_figure,
        "estimate": est.estimate(),
        "bootstrap": boot.as_ref().map(BootstrapReport::from),
    }))?;
    Ok(0)
}

fn cmd_bootstrap(m: &ModelArgs, b: &BootArgs, ctx: &mut Ctx) -> CliResult {
    let format = ctx.format(Format::Json, &[Format::Json, Format::Table])?;
    check_boot_args(b, false)?;
    let d = data::load(&m.data)?;
    let method = method(&d, m, ModelKind::Stepwise)?;
    let r = run_bootstrap(&d, method, b, ctx)?;
    if format == Format::Table {
        writeln!(ctx.out, "point    {:.2}", r.point)?;
        writeln!(ctx.out, "z0       {:.6}", r.z0)?;
        writeln!(ctx.out, "a        {:.6}", r.a)?;
        writeln!(ctx.out, "failed   {}", r.n_failed)?;
        for i in &r.intervals {
            writeln!(ctx.out, "{:>5.1}%   ({:.1}, {:.1})", 100.0 * i.level, i.lo, i.hi)?;
        }
        return Ok(0);
    }
    let mut value = serde_json::to_value(BootstrapReport::from(&r))?;
    value["method"] = method_json(&d, method);
    ctx.json(&value)?;
    Ok(0)
}

fn cmd_check(m: &ModelArgs, ctx: &mut Ctx) -> CliResult {
    let format = ctx.format(Format::Json, &[Format::Json, Format::Table])?;
    let d = data::load(&m.data)?;
    let spec = match method(&d, m, ModelKind::Main)? {
        Method::Fixed(spec) => spec,
        Method::MainEffects => ModelSpec::main_effects(d.t()),
        Method::Full => ModelSpec::full(d.t()),
        Method::Stepwise(_) => {
            return Err(CliError::Usage("check needs --pairs or --model main|full".into()))
        }
    };
    let r = check_model(d.cells(), &spec)?;
    let report = CheckReport::new(&d, spec.pairs(), &r);
    if format == Format::Json {
        ctx.json(&report)?;
    } else {
        writeln!(ctx.out, "model   {}", display_pairs(&report.model))?;
        writeln!(ctx.out, "s_max   {}", report.s_max)?;
        writeln!(ctx.out, "verdict {}", report.verdict)?;
    }
    Ok(if r.is_ok() { 0 } else { 2 })
}

fn cmd_check_all(source: &str, ctx: &mut Ctx) -> CliResult {
    let format = ctx.format(Format::Json, &[Format::Json, Format::Table])?;
    let d = data::load(source)?;
    let audit = match check_all_models(d.cells(), &ctx.pool) {
        Err(mse_core::Error::TooManyNonOverlapping { count, pairs }) => {
            return Err(CliError::Usage(format!(
                "{count} non-overlapping pairs would need 2^{count} linear programs; refusing ({})",
                pairs.join(", ")
            )));
        }
        other => other?,
    };
    let report = AuditReport::new(&d, &audit);
    if format == Format::Json {
        ctx.json(&report)?;
    } else {
        writeln!(ctx.out, "all_ok         {}", report.all_ok)?;
        writeln!(ctx.out, "tested         {}", report.tested)?;
        writeln!(ctx.out, "initial_sweep  {}", report.initial_sweep)?;
        writeln!(ctx.out, "nonoverlapping {}", report.nonoverlapping.join(", "))?;
        for f in &report.failures {
            writeln!(ctx.out, "{:<16} {}", f.verdict, display_pairs(&f.model))?;
        }
    }
    Ok(if audit.all_ok { 0 } else { 2 })
}

fn cmd_simulate(sim: SimCommand, ctx: &mut Ctx) -> CliResult {
    let format = ctx.format(Format::Csv, &[Format::Csv, Format::Json])?;
    match sim {
        SimCommand::ThresholdStudy {
            datasets,
            mut scenario_thresholds,
            est_thresholds,
            mut nsims,
            full,
            seed,
        } => {
            if full {
                scenario_thresholds = SCENARIO_THRESHOLDS.to_vec();
                nsims = 1000;
            }
            for &t in scenario_thresholds.iter().chain(&est_thresholds) {
                check_threshold(t, "thresholds")?;
            }
            let est_thresholds = if est_thresholds.is_empty() {
                STUDY_THRESHOLDS.to_vec()
            } else {
                est_thresholds
            };
            let names: Vec<BuiltinDataset> = if datasets.is_empty() {
                STUDY_DATASETS.to_vec()
            } else {
                datasets
                    .iter()
                    .map(|n| n.parse::<BuiltinDataset>())
                    .collect::<Result<_, _>>()?
            };
            let mut scenarios = Vec::new();
            for &t in &scenario_thresholds {
                for &n in &names {
                    scenarios.push(Scenario {
                        name: n.name().to_string(),
                        cells: n.load().cells().clone(),
                        model_threshold: t,
                    });
                }
            }
            ctx.seed(seed)?;
            let r = threshold_study(&scenarios, nsims, &est_thresholds, seed, &ctx.pool)?;
            for s in &r.skipped {
                ctx.warn(&format!(
                    "skipped {} at {}: {}",
                    s.name, s.model_threshold, s.reason
                ))?;
            }
            if format == Format::Json {
                ctx.json(&ThresholdStudyReport::new(&r, seed))?;
            } else {
                write!(ctx.out, "{}", threshold_study_csv(&r))?;
            }
            Ok(0)
        }
        SimCommand::DevianceQq {
            probs,
            pop,
            nsims,
            seed,
        } => {
            ctx.seed(seed)?;
            let s = deviance_qq_study(&probs, pop, nsims, seed, &ctx.pool)?;
            let report = DevianceReport::new(&s, seed);
            if s.n_dropped > 0 {
                ctx.warn(&format!(
                    "{} of {} simulations had no main-effects estimate",
                    s.n_dropped, s.n_sims
                ))?;
            }
            if format == Format::Json {
                ctx.json(&report)?;
            } else {
                write!(ctx.out, "{}", deviance_csv(&s))?;
            }
            Ok(0)
        }
    }
}

fn cmd_datasets(name: Option<&str>, ctx: &mut Ctx) -> CliResult {
    match name {
        None => {
            let format = ctx.format(Format::Table, &[Format::Json, Format::Table])?;
            let rows: Vec<_> = BuiltinDataset::ALL
                .iter()
                .map(|b| {
                    let d = b.load();
                    json!({ "name": b.name(), "lists": d.t(), "observed": d.total(), "labels": d.labels() })
                })
                .collect();
            if format == Format::Json {
                ctx.json(&rows)?;
            } else {
                for b in BuiltinDataset::ALL {
                    let d = b.load();
                    writeln!(
                        ctx.out,
                        "{:<14} {:>2} lists {:>6} observed  {}",
                        b.name(),
                        d.t(),
                        d.total(),
                        d.labels().join(" ")
                    )?;
                }
            }
        }
        Some(n) => {
            let format = ctx.format(Format::Json, &[Format::Json, Format::Csv])?;
            let which: BuiltinDataset = n.parse()?;
            let d = which.load();
            if format == Format::Json {
                ctx.json(&DatasetJson::from(&d))?;
            } else {
                data::write_csv(&d, &mut *ctx.out)?;
            }
        }
    }
    Ok(0)
}
