//! The `driven-pp` command-line front end.
//!
//! Every subcommand reads and writes the formats of [`crate::ingest`]. On
//! failure a single JSON error record is written to stderr and the process
//! exits with 2 (validation), 3 (numerical or fit failure) or 4 (I/O).
//!
//! Environment: `DRIVEN_PP_OUT_DIR` supplies `--out-dir` and `DRIVEN_PP_JOBS`
//! supplies `--jobs` when the flags are absent. `RUST_LOG` sets log verbosity
//! (default `warn`).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::em::{run_em, EmConfig, FitReport, Init};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate, linf_distance, recovery_experiment, relative_linf, runtime_by_duration, segment_ttest,
    write_aggregate_csv, write_recovery_csv, write_runtime_csv, DriverTruth, RecoveryCell,
    RecoveryConfig, DEFAULT_GRID_STEP,
};
use crate::ingest::{self, fmt_float, BinarizeRule};
use crate::model::{Driver, DriverParams, EventSequence, KernelSupport, ModelParams};
use crate::simulate::{gen_drivers, thinning_simulate, DriverGenSpec};

#[derive(Debug, Parser)]
#[command(name = "driven-pp", version, about = "Stimulus-driven point processes: simulate, fit, evaluate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate drivers and simulate events from a JSON configuration.
    Simulate(SimulateArgs),
    /// Fit the model to an events file and a drivers file with EM.
    Fit(FitArgs),
    /// Compare true and estimated parameters with the l-infinity metrics.
    Eval(EvalArgs),
    /// Run the simulate/fit/score recovery grid.
    Experiment(ExperimentArgs),
    /// Turn a continuous activation stream into events.
    Binarize(BinarizeArgs),
    /// Refit across a grid of one hyperparameter.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Segment t-test of events on kernel windows against baseline stretches.
    Ttest(TtestArgs),
}

#[derive(Debug, Args)]
pub struct SupportArgs {
    /// Kernel support lower bound a [seconds].
    #[arg(long)]
    pub a: f64,
    /// Kernel support upper bound b [seconds].
    #[arg(long)]
    pub b: f64,
}

#[derive(Debug, Args)]
pub struct EmArgs {
    /// Number of EM iterations N [count].
    #[arg(long, default_value_t = 50)]
    pub iters: usize,
    /// Lower bound on every kernel sigma [seconds].
    #[arg(long, default_value_t = crate::em::DEFAULT_SIGMA_FLOOR)]
    pub eps: f64,
    /// Divergence margin around [a, b] [multiples of b - a].
    #[arg(long, default_value_t = 1.0)]
    pub margin: f64,
}

impl EmArgs {
    fn config(&self, init: Init) -> EmConfig {
        EmConfig {
            n_iterations: self.iters,
            sigma_floor: self.eps,
            divergence_margin: self.margin,
            init,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Events CSV with header `time` [path; times in seconds].
    #[arg(long)]
    pub events: PathBuf,
    /// Drivers CSV with header `driver_id,time` [path; times in seconds].
    #[arg(long)]
    pub drivers: PathBuf,
    /// Observation horizon T; defaults to the last event time [seconds].
    #[arg(long)]
    pub duration: Option<f64>,
}

impl DataArgs {
    fn load(&self) -> Result<(EventSequence, Vec<Driver>)> {
        Ok((ingest::read_events(&self.events, self.duration)?, ingest::read_drivers(&self.drivers)?))
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config JSON [path].
    #[arg(long)]
    pub config: PathBuf,
    /// RNG seed, overrides the config key `seed` [integer].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Horizon T, overrides the config key `duration` [seconds].
    #[arg(long)]
    pub duration: Option<f64>,
    /// Directory receiving events.csv, drivers.csv, params.json and meta.json [path].
    #[arg(long, env = "DRIVEN_PP_OUT_DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub support: SupportArgs,
    #[command(flatten)]
    pub em: EmArgs,
    /// Initialisation: `smart`, or `smart-or-covered` to fall back when the
    /// supports cover the whole horizon [enum].
    #[arg(long, value_parser = ["smart", "smart-or-covered"], conflicts_with = "init_params")]
    pub init: Option<String>,
    /// Start from the parameters of this JSON file instead of the smart start [path].
    #[arg(long)]
    pub init_params: Option<PathBuf>,
    /// Fit report JSON; printed to stdout when absent [path].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// True parameters or fit report JSON [path].
    #[arg(long = "true")]
    pub true_params: PathBuf,
    /// Estimated parameters or fit report JSON [path].
    #[arg(long)]
    pub est: PathBuf,
    /// Grid resolution of the l-infinity metric [seconds].
    #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
    pub grid_step: f64,
    /// Restrict to one driver id; all true drivers when absent [string].
    #[arg(long)]
    pub driver: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment config JSON; the two-kernel benchmark when absent [path].
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Process durations T, comma separated, override `durations` [seconds].
    #[arg(long, value_delimiter = ',')]
    pub durations: Option<Vec<f64>>,
    /// Kept fractions P/S, comma separated, override `keep_fractions` [fraction in (0, 1]].
    #[arg(long, value_delimiter = ',')]
    pub keep_fractions: Option<Vec<f64>>,
    /// Seeds per cell, overrides `n_seeds` [count].
    #[arg(long)]
    pub n_seeds: Option<usize>,
    /// First seed, overrides `seed_offset` [integer].
    #[arg(long)]
    pub seed_offset: Option<u64>,
    /// Output directory for cells/, recovery.csv, aggregate.csv, runtime.csv [path].
    #[arg(long, env = "DRIVEN_PP_OUT_DIR")]
    pub out_dir: PathBuf,
    /// Worker threads; all cores when absent [count].
    #[arg(long, env = "DRIVEN_PP_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
#[group(id = "rule", required = true, multiple = false)]
pub struct RuleArgs {
    /// Keep samples strictly above this value [activation units].
    #[arg(long, group = "rule")]
    pub threshold: Option<f64>,
    /// Keep positive samples at or above this percentile of the positive values [percent in [0, 100)].
    #[arg(long, group = "rule")]
    pub percentile: Option<f64>,
}

impl RuleArgs {
    fn rule(&self) -> BinarizeRule {
        match (self.threshold, self.percentile) {
            (Some(x), _) => BinarizeRule::Absolute(x),
            (None, Some(q)) => BinarizeRule::Percentile(q),
            (None, None) => unreachable!("clap enforces one rule"),
        }
    }
}

#[derive(Debug, Args)]
pub struct BinarizeArgs {
    /// Activations CSV with header `time,value` [path; times in seconds].
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub rule: RuleArgs,
    /// Events CSV to write [path].
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum SweepCommand {
    /// Refit with support [a, b] for each b.
    Support(SweepSupportArgs),
    /// Binarise at each percentile and refit.
    Threshold(SweepThresholdArgs),
}

#[derive(Debug, Args)]
pub struct SweepSupportArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Kernel support lower bound a [seconds].
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    /// Upper bounds b, comma separated [seconds].
    #[arg(long, value_delimiter = ',', required = true)]
    pub b_values: Vec<f64>,
    #[command(flatten)]
    pub em: EmArgs,
    /// Output directory for sweep.csv and one fit report per cell [path].
    #[arg(long, env = "DRIVEN_PP_OUT_DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepThresholdArgs {
    /// Activations CSV with header `time,value` [path; times in seconds].
    #[arg(long)]
    pub activations: PathBuf,
    /// Drivers CSV with header `driver_id,time` [path; times in seconds].
    #[arg(long)]
    pub drivers: PathBuf,
    /// Observation horizon T; defaults to the last activation sample [seconds].
    #[arg(long)]
    pub duration: Option<f64>,
    #[command(flatten)]
    pub support: SupportArgs,
    /// Percentiles of the positive activations, comma separated [percent in [0, 100)].
    #[arg(long, value_delimiter = ',', required = true)]
    pub percentiles: Vec<f64>,
    #[command(flatten)]
    pub em: EmArgs,
    /// Output directory for sweep.csv and one fit report per cell [path].
    #[arg(long, env = "DRIVEN_PP_OUT_DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TtestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub support: SupportArgs,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SupportDoc {
    a: f64,
    b: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimDriverDoc {
    id: String,
    isi: f64,
    keep_fraction: f64,
    alpha: f64,
    m: f64,
    sigma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateDoc {
    duration: Option<f64>,
    #[serde(default)]
    seed: u64,
    mu: f64,
    support: SupportDoc,
    #[serde(default)]
    drivers: Vec<SimDriverDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthDoc {
    id: String,
    isi: f64,
    alpha: f64,
    m: f64,
    sigma: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmDoc {
    n_iterations: Option<usize>,
    sigma_floor: Option<f64>,
    divergence_margin: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentDoc {
    durations: Option<Vec<f64>>,
    keep_fractions: Option<Vec<f64>>,
    n_seeds: Option<usize>,
    seed_offset: Option<u64>,
    mu: Option<f64>,
    support: Option<SupportDoc>,
    drivers: Option<Vec<TruthDoc>>,
    em: Option<EmDoc>,
    grid_step: Option<f64>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let doc: SimulateDoc = read_json(&args.config)?;
    let duration = args
        .duration
        .or(doc.duration)
        .ok_or_else(|| Error::invalid("simulation needs a duration (config key or --duration)"))?;
    let seed = args.seed.unwrap_or(doc.seed);
    let support = KernelSupport::new(doc.support.a, doc.support.b)?;
    let mut params = ModelParams::baseline(doc.mu, support)?;
    let mut specs = Vec::new();
    for d in &doc.drivers {
        if params.per_driver.contains_key(&d.id) {
            return Err(Error::validation(format!("duplicate driver id '{}'", d.id)));
        }
        params = params.with_driver(d.id.clone(), DriverParams::new(d.alpha, d.m, d.sigma)?);
        specs.push((d.id.clone(), DriverGenSpec::new(d.isi, d.keep_fraction, duration)?));
    }
    let drivers = gen_drivers(&specs, seed)?;
    let events = thinning_simulate(&params, &drivers, duration, seed)?;

    ensure_dir(&args.out_dir)?;
    ingest::write_events(&events, args.out_dir.join("events.csv"))?;
    ingest::write_drivers(&drivers, args.out_dir.join("drivers.csv"))?;
    ingest::write_params(&params, args.out_dir.join("params.json"))?;
    let meta = serde_json::json!({ "duration": duration, "seed": seed, "n_events": events.len() });
    write_text(&args.out_dir.join("meta.json"), &format!("{}\n", serde_json::to_string_pretty(&meta)?))?;
    Ok(())
}

fn fit(events: &EventSequence, drivers: &[Driver], support: KernelSupport, config: &EmConfig) -> Result<FitReport> {
    run_em(events, drivers, support, config)
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let (events, drivers) = args.data.load()?;
    let support = KernelSupport::new(args.support.a, args.support.b)?;
    let init = match (&args.init_params, args.init.as_deref()) {
        (Some(path), _) => Init::Explicit(ingest::read_params(path)?),
        (None, Some("smart-or-covered")) => Init::SmartStartOrCovered,
        (None, _) => Init::SmartStart,
    };
    let report = fit(&events, &drivers, support, &args.em.config(init))?;
    let text = ingest::fit_report_to_json(&report)?;
    match &args.out {
        Some(path) => write_text(path, &text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let truth = ingest::read_params(&args.true_params)?;
    let est = ingest::read_params(&args.est)?;
    let ids: Vec<String> = match &args.driver {
        Some(id) => vec![id.clone()],
        None => truth.per_driver.keys().cloned().collect(),
    };
    let mut out = csv::Writer::from_writer(std::io::stdout().lock());
    let io = |e: csv::Error| Error::Io(e.into());
    out.write_record(["driver_id", "linf", "rel_linf"]).map_err(io)?;
    for id in ids {
        let linf = linf_distance(&truth, &est, &id, args.grid_step)?;
        let rel = relative_linf(&truth, &est, &id, args.grid_step)?;
        out.write_record([id, fmt_float(linf), fmt_float(rel)]).map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

fn experiment_config(args: &ExperimentArgs) -> Result<RecoveryConfig> {
    let doc: ExperimentDoc = match &args.config {
        Some(path) => read_json(path)?,
        None => ExperimentDoc::default(),
    };
    let mut config = RecoveryConfig::two_kernel_benchmark(vec![10_000.0], vec![0.6], 30);
    if let Some(v) = args.durations.clone().or(doc.durations) {
        config.durations = v;
    }
    if let Some(v) = args.keep_fractions.clone().or(doc.keep_fractions) {
        config.keep_fractions = v;
    }
    if let Some(v) = args.n_seeds.or(doc.n_seeds) {
        config.n_seeds = v;
    }
    if let Some(v) = args.seed_offset.or(doc.seed_offset) {
        config.seed_offset = v;
    }
    if let Some(v) = doc.mu {
        config.mu = v;
    }
    if let Some(s) = doc.support {
        config.support = KernelSupport::new(s.a, s.b)?;
    }
    if let Some(ds) = doc.drivers {
        config.drivers = ds
            .into_iter()
            .map(|d| Ok(DriverTruth { id: d.id, isi: d.isi, params: DriverParams::new(d.alpha, d.m, d.sigma)? }))
            .collect::<Result<_>>()?;
        let mut ids: Vec<&str> = config.drivers.iter().map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("duplicate driver id in experiment config"));
        }
    }
    if let Some(em) = doc.em {
        config.em.n_iterations = em.n_iterations.unwrap_or(config.em.n_iterations);
        config.em.sigma_floor = em.sigma_floor.unwrap_or(config.em.sigma_floor);
        config.em.divergence_margin = em.divergence_margin.unwrap_or(config.em.divergence_margin);
    }
    if let Some(v) = doc.grid_step {
        config.grid_step = v;
    }
    config.validate()?;
    Ok(config)
}

fn cell_file_name(c: &RecoveryCell) -> String {
    format!("T{}_keep{}_seed{}.csv", fmt_float(c.duration), fmt_float(c.keep_fraction), c.seed)
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let config = experiment_config(args)?;
    let cells_dir = args.out_dir.join("cells");
    ensure_dir(&cells_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;
    let cells = pool.install(|| recovery_experiment(&config))?;

    // One file per (T, P/S, seed), then a merge in grid order.
    let mut order: Vec<String> = Vec::new();
    let mut i = 0;
    while i < cells.len() {
        let name = cell_file_name(&cells[i]);
        let mut j = i;
        while j < cells.len() && cell_file_name(&cells[j]) == name {
            j += 1;
        }
        write_recovery_csv(&cells[i..j], fs::File::create(cells_dir.join(&name))?)?;
        order.push(name);
        i = j;
    }
    let mut merged = String::new();
    for (k, name) in order.iter().enumerate() {
        let text = fs::read_to_string(cells_dir.join(name))?;
        let body = if k == 0 { text.as_str() } else { text.split_once('\n').map_or("", |x| x.1) };
        merged.push_str(body);
    }
    write_text(&args.out_dir.join("recovery.csv"), &merged)?;
    write_aggregate_csv(&aggregate(&cells), fs::File::create(args.out_dir.join("aggregate.csv"))?)?;
    write_runtime_csv(&runtime_by_duration(&cells), fs::File::create(args.out_dir.join("runtime.csv"))?)?;
    let failed = cells.iter().filter(|c| c.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} cell rows failed; see recovery.csv", cells.len());
    }
    Ok(())
}

fn cmd_binarize(args: &BinarizeArgs) -> Result<()> {
    let stream = ingest::read_activations(&args.input)?;
    let events = ingest::binarize(&stream, args.rule.rule(), None)?;
    ingest::write_events(&events, &args.out)
}

const SWEEP_COLUMNS: [&str; 7] = ["driver_id", "alpha", "m", "sigma", "mu", "termination", "iterations_run"];

fn sweep_rows(report: &FitReport) -> Vec<Vec<String>> {
    report
        .params
        .per_driver
        .iter()
        .map(|(id, p)| {
            vec![
                id.clone(),
                fmt_float(p.alpha),
                fmt_float(p.m),
                fmt_float(p.sigma),
                fmt_float(report.params.mu),
                report.termination.as_str().to_string(),
                report.iterations_run.to_string(),
            ]
        })
        .collect()
}

fn write_sweep(out_dir: &Path, key: &str, cells: &[(f64, FitReport)]) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.into());
    let mut w = csv::Writer::from_path(out_dir.join("sweep.csv")).map_err(io)?;
    let mut header = vec![key];
    header.extend(SWEEP_COLUMNS);
    w.write_record(&header).map_err(io)?;
    for (value, report) in cells {
        for row in sweep_rows(report) {
            let mut record = vec![fmt_float(*value)];
            record.extend(row);
            w.write_record(&record).map_err(io)?;
        }
        ingest::write_fit_report(report, out_dir.join(format!("fit_{key}{}.json", fmt_float(*value))))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_sweep_support(args: &SweepSupportArgs) -> Result<()> {
    let (events, drivers) = args.data.load()?;
    let config = args.em.config(Init::SmartStartOrCovered);
    let cells = args
        .b_values
        .iter()
        .map(|&b| Ok((b, fit(&events, &drivers, KernelSupport::new(args.a, b)?, &config)?)))
        .collect::<Result<Vec<_>>>()?;
    ensure_dir(&args.out_dir)?;
    write_sweep(&args.out_dir, "b", &cells)
}

fn cmd_sweep_threshold(args: &SweepThresholdArgs) -> Result<()> {
    let stream = ingest::read_activations(&args.activations)?;
    let drivers = ingest::read_drivers(&args.drivers)?;
    let support = KernelSupport::new(args.support.a, args.support.b)?;
    let config = args.em.config(Init::SmartStartOrCovered);
    let cells = args
        .percentiles
        .iter()
        .map(|&q| {
            let events = ingest::binarize(&stream, BinarizeRule::Percentile(q), args.duration)?;
            Ok((q, fit(&events, &drivers, support, &config)?))
        })
        .collect::<Result<Vec<_>>>()?;
    ensure_dir(&args.out_dir)?;
    write_sweep(&args.out_dir, "percentile", &cells)
}

fn cmd_ttest(args: &TtestArgs) -> Result<()> {
    let (events, drivers) = args.data.load()?;
    let support = KernelSupport::new(args.support.a, args.support.b)?;
    let io = |e: csv::Error| Error::Io(e.into());
    let mut out = csv::Writer::from_writer(std::io::stdout().lock());
    out.write_record(["driver_id", "t_statistic", "p_value", "df", "n_support", "n_baseline"])
        .map_err(io)?;
    for d in &drivers {
        let r = segment_ttest(&events, d, support)?;
        out.write_record([
            d.id().to_string(),
            fmt_float(r.t_statistic),
            fmt_float(r.p_value),
            fmt_float(r.df),
            r.n_support.to_string(),
            r.n_baseline.to_string(),
        ])
        .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Binarize(a) => cmd_binarize(a),
        Command::Sweep(SweepCommand::Support(a)) => cmd_sweep_support(a),
        Command::Sweep(SweepCommand::Threshold(a)) => cmd_sweep_threshold(a),
        Command::Ttest(a) => cmd_ttest(a),
    }
}

fn error_record(kind: &str, message: &str, exit_code: i32) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message, "exit_code": exit_code } }).to_string()
}

/// Parse the process arguments, run, and return the exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let message = e.render().to_string();
            eprintln!("{}", error_record("usage", message.trim(), 2));
            return 2;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("{}", error_record(e.kind(), &e.to_string(), code));
            code
        }
    }
}
