//! `specdist` command line.
//!
//! Exit codes:
//!
//! | code | meaning                                                         |
//! |------|-----------------------------------------------------------------|
//! | 0    | success                                                         |
//! | 2    | usage error (unknown flag, missing argument)                    |
//! | 3    | I/O error (unreadable input, unwritable output)                 |
//! | 4    | input format or schema error                                    |
//! | 5    | configuration error                                             |
//! | 6    | metric files on different window grids                         |
//! | 7    | analysis error (too few channels, degenerate data, bad fit)     |
//!
//! Failures print one line to stderr:
//! `error: kind=<kind> code=<code> message="<text>"`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::csvio::{read_panel, write_panel};
use crate::distances::{fit_linear, WeightVector, DEFAULT_KL_FLOOR};
use crate::error::{Error, Result};
use crate::ingest::{build_panel, read_tick_file, MarketSeries, PanelField, ResampleGrid, Side, TickCsvFormat, Transform};
use crate::pipeline::{
    align_series, analyze, compare_metric_series, read_metrics, sweep_parameter_entropy, write_kl_dump,
    write_metrics, write_spectra_dump, write_sweep, AnalysisConfig,
};
use crate::simulator::{run_simulation, SimConfig};
use crate::spectra::WindowSpec;

#[derive(Debug, Parser)]
#[command(name = "specdist", version, about = "Spectral entropy and spectral distances of multi-channel time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Resample a quote tick CSV into activity and best-rate panels.
    Ingest(IngestArgs),
    /// Sliding-window spectral metrics of a panel CSV.
    Analyze(AnalyzeArgs),
    /// Run the agent-based market and write rate/activity panels.
    Simulate(SimulateArgs),
    /// Correlation and proportionality slope between two metric columns.
    Compare(CompareArgs),
    /// Mean activity JS as a function of sensitivity-range entropy.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Tick CSV (`.gz` is decompressed).
    ticks: PathBuf,
    #[arg(long, default_value = "ask")]
    side: String,
    #[arg(long, default_value_t = 1.0)]
    dt_minutes: f64,
    /// Output path for the quotation-frequency panel.
    #[arg(long)]
    activity: Option<PathBuf>,
    /// Output path for the best-rate panel.
    #[arg(long)]
    rates: Option<PathBuf>,
    /// Transform for the rate panel (raw | log-return).
    #[arg(long, default_value = "raw")]
    transform: String,
    #[arg(long, default_value_t = 0.01)]
    max_malformed: f64,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    panel: PathBuf,
    /// Metrics CSV output; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    window: usize,
    /// Defaults to half the window.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long, default_value = "raw")]
    transform: String,
    /// Leading samples to drop before analysis.
    #[arg(long, default_value_t = 0)]
    skip: usize,
    /// Comma-separated channel names.
    #[arg(long, value_delimiter = ',')]
    channels: Option<Vec<String>>,
    /// Comma-separated JS weights (uniform when omitted).
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_KL_FLOOR)]
    floor: f64,
    #[arg(long)]
    dump_spectra: Option<PathBuf>,
    #[arg(long)]
    dump_kl: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Key-value config file; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    rates: PathBuf,
    #[arg(long)]
    activity: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value = "js")]
    a_column: String,
    #[arg(long, default_value = "js")]
    b_column: String,
    /// Also report an ordinary least-squares fit with intercept.
    #[arg(long)]
    unconstrained: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = -2.5, allow_hyphen_values = true)]
    h_min: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    h_max: f64,
    #[arg(long, default_value_t = 5)]
    points: usize,
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    /// Centre of the sensitivity range.
    #[arg(long, default_value_t = 1.0)]
    center: f64,
    #[arg(long, default_value_t = 128)]
    window: usize,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 3,
        Error::Format(_) | Error::TooManyMalformed { .. } | Error::InvalidPanel(_) => 4,
        Error::Config(_) | Error::InvalidWindow(_) => 5,
        Error::Alignment(_) => 6,
        _ => 7,
    }
}

fn error_line(kind: &str, code: i32, message: &str) -> String {
    let message = message.lines().next().unwrap_or_default().replace('"', "'");
    format!("error: kind={kind} code={code} message=\"{message}\"")
}

/// Runs the CLI and returns the process exit status.
pub fn cli_main<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let _ = writeln!(stderr, "{}", error_line("usage", 2, &e.kind().to_string()));
            return 2;
        }
    };
    match run(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            let _ = writeln!(stderr, "{}", error_line(e.kind(), code, &e.to_string()));
            code
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn window_spec(width: usize, stride: Option<usize>) -> Result<WindowSpec> {
    WindowSpec::new(width, stride.unwrap_or((width / 2).max(1))).map_err(|e| Error::Config(e.to_string()))
}

fn load_sim_config(path: Option<&Path>) -> Result<SimConfig> {
    match path {
        Some(p) => SimConfig::from_path(p),
        None => Ok(SimConfig::default()),
    }
}

fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a, stdout),
        Command::Analyze(a) => analyze_cmd(a, stdout),
        Command::Simulate(a) => simulate(a, stdout),
        Command::Compare(a) => compare(a, stdout),
        Command::Sweep(a) => sweep(a, stdout),
    }
}

fn ingest(a: IngestArgs, stdout: &mut dyn Write) -> Result<()> {
    let side: Side = a.side.parse()?;
    let transform: Transform = a.transform.parse()?;
    if !(a.dt_minutes > 0.0) {
        return Err(Error::Config("dt-minutes must be positive".into()));
    }
    let parsed = read_tick_file(
        &a.ticks,
        &TickCsvFormat {
            max_malformed_fraction: a.max_malformed,
        },
    )?;
    let dt_ms = (a.dt_minutes * 60_000.0).round() as i64;
    let grid = ResampleGrid::covering(&parsed.records, dt_ms)?;
    let series = MarketSeries::from_ticks(&parsed.records, grid, side);
    let source = a.ticks.display();
    if let Some(path) = &a.activity {
        let panel = build_panel(&series, PanelField::Activity, Transform::Raw)?;
        let note = vec![format!("field=activity side={side} transform=raw dt_minutes={} source={source}", a.dt_minutes)];
        write_panel(&panel, &note, create(path)?)?;
    }
    if let Some(path) = &a.rates {
        let panel = build_panel(&series, PanelField::BestRate, transform)?;
        let note = vec![format!("field=best_rate side={side} transform={transform} dt_minutes={} source={source}", a.dt_minutes)];
        write_panel(&panel, &note, create(path)?)?;
    }
    writeln!(
        stdout,
        "ticks={} malformed={} buckets={} instruments={}",
        parsed.records.len(),
        parsed.malformed.len(),
        grid.bucket_count,
        series.activity.len()
    )?;
    Ok(())
}

fn analyze_cmd(a: AnalyzeArgs, stdout: &mut dyn Write) -> Result<()> {
    let panel = read_panel(File::open(&a.panel)?)?;
    let weights = a.weights.map(WeightVector::new).transpose()?;
    let cfg = AnalysisConfig {
        window: window_spec(a.window, a.stride)?,
        channels: a.channels,
        transform: a.transform.parse()?,
        skip: a.skip,
        weights,
        kl_floor: a.floor,
        keep_spectra: a.dump_spectra.is_some(),
    };
    let analysis = analyze(&panel, &cfg)?;
    match &a.output {
        Some(path) => write_metrics(&analysis, &cfg, create(path)?)?,
        None => write_metrics(&analysis, &cfg, &mut *stdout)?,
    }
    if let Some(path) = &a.dump_spectra {
        write_spectra_dump(&analysis, create(path)?)?;
    }
    if let Some(path) = &a.dump_kl {
        write_kl_dump(&analysis, create(path)?)?;
    }
    Ok(())
}

fn simulate(a: SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = load_sim_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.rng_seed = seed;
    }
    if let Some(h) = a.horizon {
        cfg.horizon = h;
    }
    let panels = run_simulation(&cfg)?;
    let note = |field: &str| vec![format!("field={field} transform=raw simulated seed={} gamma={}", cfg.rng_seed, cfg.gamma)];
    write_panel(&panels.rates, &note("rate"), create(&a.rates)?)?;
    write_panel(&panels.activity, &note("activity"), create(&a.activity)?)?;
    writeln!(stdout, "steps={} commodities={} agents={}", cfg.horizon, cfg.n_commodities, cfg.n_agents)?;
    Ok(())
}

fn compare(a: CompareArgs, stdout: &mut dyn Write) -> Result<()> {
    let ta = read_metrics(File::open(&a.a)?)?;
    let tb = read_metrics(File::open(&a.b)?)?;
    ta.provenance.check_aligned(&tb.provenance)?;
    let (x, y) = align_series(&ta.column(&a.a_column)?, &tb.column(&a.b_column)?);
    if x.len() < 2 {
        return Err(Error::Alignment(format!("only {} common windows", x.len())));
    }
    let c = compare_metric_series(&x, &y)?;
    writeln!(stdout, "n={} correlation={} slope={}", x.len(), c.correlation, c.slope)?;
    if a.unconstrained {
        let fit = fit_linear(&x, &y)?;
        writeln!(stdout, "ols_slope={} ols_intercept={}", fit.slope, fit.intercept)?;
    }
    Ok(())
}

fn sweep(a: SweepArgs, stdout: &mut dyn Write) -> Result<()> {
    let base = load_sim_config(a.config.as_deref())?;
    if a.points < 2 || !(a.h_max > a.h_min) {
        return Err(Error::Config("sweep needs points >= 2 and h-max > h-min".into()));
    }
    let step = (a.h_max - a.h_min) / (a.points - 1) as f64;
    let h: Vec<f64> = (0..a.points).map(|i| a.h_min + step * i as f64).collect();
    let seeds: Vec<u64> = (0..a.seeds).map(|s| base.rng_seed + s).collect();
    let cfg = AnalysisConfig {
        window: window_spec(a.window, a.stride)?,
        ..AnalysisConfig::default()
    };
    let points = sweep_parameter_entropy(&base, &h, &seeds, a.center, &cfg)?;
    match &a.output {
        Some(path) => write_sweep(&points, create(path)?),
        None => write_sweep(&points, stdout),
    }
}
