//! Experiment driver for the chirp-spread-spectrum error-rate toolkit:
//! analytic curves, Monte Carlo sweeps, interference-pattern dumps, and the
//! two preset figure reproductions, emitted as figure-ready CSV or JSON.
//!
//! Exit codes: 0 on success, 2 for validation problems, 3 for numerical
//! failures. Diagnostics go to stderr as single JSON objects.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lorasym::channel::{InterfererState, TauMode};
use lorasym::monte_carlo::{sweep, OmegaMode, TrialConfig};
use lorasym::pattern::pattern_closed_form;
use lorasym::phy::ModulationParams;
use lorasym::ser::{
    ser_awgn_approx, ser_awgn_exact, ser_combined, ser_full, ser_interference_approx, SerPoint,
    SerQuery, SymbolSelection,
};

use config::{parse_sf_list, parse_snr_grid, parse_trials, resolve, resolve_seed, ConfigFile};
use output::{emit, render_curves, render_pattern, CurveRecord, Format, PatternRecord};

#[derive(Parser)]
#[command(
    name = "lorasym",
    version,
    about = "Chirp-spread-spectrum symbol error rates under noise and same-spreading-factor interference"
)]
struct Cli {
    /// Key = value config file holding the same names as the long flags;
    /// explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output file (defaults to stdout).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Noise-only error-rate curves (exact integral, closed-form
    /// approximation, or simulation).
    SerAwgn(SerAwgnArgs),
    /// Error-rate curves under one same-spreading-factor interferer.
    SerInterf(SerInterfArgs),
    /// Dump the interference pattern of one collision geometry, per bin.
    Pattern(PatternArgs),
    /// Preset: simulated interference curves with and without the relative
    /// channel phase, plus the noise-only reference, per spreading factor.
    Figure2(FigureArgs),
    /// Preset: fractional-offset versus chip-aligned interference models,
    /// simulation and low-complexity approximation, per spreading factor.
    Figure3(FigureArgs),
}

#[derive(Args)]
struct SerAwgnArgs {
    /// Spreading factor (7..=12 standard; down to 2 for mini-mode studies).
    #[arg(long)]
    sf: Option<u32>,
    /// SNR grid in dB: start:stop:step, or one value.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Comma list out of: exact, approx, mc.
    #[arg(long, alias = "method")]
    methods: Option<String>,
    /// Monte Carlo trials per point.
    #[arg(long)]
    trials: Option<String>,
    /// Master seed for simulation methods.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SerInterfArgs {
    #[arg(long)]
    sf: Option<u32>,
    /// SNR grid in dB: start:stop:step, or one value.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Signal-to-interference ratio in dB.
    #[arg(long, allow_negative_numbers = true)]
    sir: Option<f64>,
    /// Comma list out of: full, approx-interf, combined, mc.
    #[arg(long, alias = "method")]
    methods: Option<String>,
    /// Offset-integral step for the analytic routes.
    #[arg(long)]
    eps: Option<f64>,
    /// Relative-phase nodes for the full expression.
    #[arg(long)]
    omega_nodes: Option<usize>,
    /// Offset model: the general fractional one or whole chips only.
    #[arg(long, value_enum)]
    tau_mode: Option<TauModeArg>,
    /// Relative-phase handling in simulation.
    #[arg(long, value_enum)]
    omega_mode: Option<OmegaModeArg>,
    /// Subsample this many symbol triples in the full expression instead of
    /// the exact triple sum (required beyond mini-mode alphabets).
    #[arg(long)]
    subsample: Option<usize>,
    /// Evaluation budget for the full expression, in integration cells.
    #[arg(long)]
    budget: Option<u64>,
    /// Diagnostics: skip the (N-1)/N dominant-bin-collision weighting in the
    /// approximate interference term.
    #[arg(long)]
    include_bin_collision: bool,
    /// Use the closed-form noise approximation inside the combined estimate.
    #[arg(long)]
    pn_approx: bool,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PatternArgs {
    #[arg(long)]
    sf: Option<u32>,
    /// Interferer offset in chips, in [0, N).
    #[arg(long)]
    tau: Option<f64>,
    /// First (earlier) interfering symbol.
    #[arg(long)]
    si1: Option<u32>,
    /// Second (later) interfering symbol.
    #[arg(long)]
    si2: Option<u32>,
}

#[derive(Args)]
struct FigureArgs {
    /// Comma list of spreading factors (defaults to the preset's set).
    #[arg(long)]
    sf: Option<String>,
    /// SNR grid in dB.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Signal-to-interference ratio in dB.
    #[arg(long, allow_negative_numbers = true)]
    sir: Option<f64>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Offset-integral step for the approximation curves.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TauModeArg {
    Fractional,
    ChipAligned,
}

impl From<TauModeArg> for TauMode {
    fn from(v: TauModeArg) -> TauMode {
        match v {
            TauModeArg::Fractional => TauMode::Fractional,
            TauModeArg::ChipAligned => TauMode::ChipAligned,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OmegaModeArg {
    Random,
    Ignored,
}

impl From<OmegaModeArg> for OmegaMode {
    fn from(v: OmegaModeArg) -> OmegaMode {
        match v {
            OmegaModeArg::Random => OmegaMode::Random,
            OmegaModeArg::Ignored => OmegaMode::Ignored,
        }
    }
}

/// Error class for exit-code mapping.
enum Failure {
    Validation(String),
    Numerical(String),
}

fn classify(err: anyhow::Error) -> Failure {
    if let Some(lib) = err.downcast_ref::<lorasym::Error>() {
        return match lib {
            lorasym::Error::QuadratureNonConvergence { .. } => Failure::Numerical(format!("{lib}")),
            _ => Failure::Validation(format!("{lib}")),
        };
    }
    Failure::Validation(format!("{err:#}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (kind, message, code) = match classify(err) {
                Failure::Validation(m) => ("validation", m, 2),
                Failure::Numerical(m) => ("numerical", m, 3),
            };
            eprintln!(
                "{}",
                serde_json::json!({ "error": { "kind": kind, "message": message } })
            );
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let format = match cli.format {
        Some(f) => f,
        None => match config.get_raw("format") {
            Some("json") => Format::Json,
            Some("csv") | None => Format::Csv,
            Some(other) => bail!("unknown format '{other}'"),
        },
    };
    let out = cli
        .out
        .clone()
        .or_else(|| config.get_raw("out").map(PathBuf::from));

    let payload = match cli.command {
        Command::SerAwgn(args) => run_ser_awgn(args, &config, format)?,
        Command::SerInterf(args) => run_ser_interf(args, &config, format)?,
        Command::Pattern(args) => run_pattern(args, &config, format)?,
        Command::Figure2(args) => run_figure2(args, &config, format)?,
        Command::Figure3(args) => run_figure3(args, &config, format)?,
    };
    emit(&payload, out.as_deref())
}

fn modulation(sf: u32) -> Result<ModulationParams> {
    ModulationParams::new(sf).map_err(|e| anyhow!(e))
}

fn record(sf: u32, point: &SerPoint, method: &str) -> CurveRecord {
    CurveRecord {
        method: method.to_string(),
        sf,
        snr_db: point.snr_db,
        sir_db: point.sir_db,
        ser: point.ser,
        ci_low: point.ci_low,
        ci_high: point.ci_high,
        trials: point.trials,
    }
}

fn mc_records(
    label: &str,
    base: &TrialConfig,
    grid: &[f64],
    trials: u64,
    sf: u32,
) -> Result<Vec<CurveRecord>> {
    let curve = sweep(base, grid, trials)?;
    Ok(curve
        .points
        .iter()
        .map(|pt| record(sf, pt, label))
        .collect())
}

fn run_ser_awgn(args: SerAwgnArgs, config: &ConfigFile, format: Format) -> Result<String> {
    let sf: u32 = resolve(args.sf, config, "sf", 7)?;
    let p = modulation(sf)?;
    let grid_spec: String = args
        .snr
        .or_else(|| config.get_raw("snr").map(String::from))
        .ok_or_else(|| anyhow!("--snr is required"))?;
    let grid = parse_snr_grid(&grid_spec)?;
    let methods: String = resolve(args.methods, config, "methods", "exact,approx".into())?;
    let trials = parse_trials(&resolve(args.trials, config, "trials", "1e5".to_string())?)?;
    let seed = resolve_seed(args.seed, config)?;

    let mut records = Vec::new();
    for method in methods.split(',').map(str::trim) {
        match method {
            "exact" => {
                for &snr_db in &grid {
                    let pt = ser_awgn_exact(&SerQuery::new(p, snr_db))?;
                    records.push(record(sf, &pt, pt.method.name()));
                }
            }
            "approx" => {
                for &snr_db in &grid {
                    let pt = ser_awgn_approx(&SerQuery::new(p, snr_db))?;
                    records.push(record(sf, &pt, pt.method.name()));
                }
            }
            "mc" => {
                let base = TrialConfig::new(p, 0.0, seed);
                records.extend(mc_records("monte_carlo", &base, &grid, trials, sf)?);
            }
            other => bail!("unknown noise-only method '{other}' (expected exact, approx, mc)"),
        }
    }
    render_curves(&records, format)
}

fn run_ser_interf(args: SerInterfArgs, config: &ConfigFile, format: Format) -> Result<String> {
    let sf: u32 = resolve(args.sf, config, "sf", 7)?;
    let p = modulation(sf)?;
    let grid_spec: String = args
        .snr
        .or_else(|| config.get_raw("snr").map(String::from))
        .ok_or_else(|| anyhow!("--snr is required"))?;
    let grid = parse_snr_grid(&grid_spec)?;
    let sir: f64 = resolve(args.sir, config, "sir", 3.0)?;
    let methods: String = resolve(args.methods, config, "methods", "combined,mc".into())?;
    let trials = parse_trials(&resolve(args.trials, config, "trials", "1e5".to_string())?)?;
    let seed = resolve_seed(args.seed, config)?;
    let eps: f64 = resolve(args.eps, config, "eps", 0.1)?;
    let omega_nodes: usize = resolve(args.omega_nodes, config, "omega-nodes", 16)?;
    let tau_mode: TauMode = args
        .tau_mode
        .map(TauMode::from)
        .or_else(|| match config.get_raw("tau-mode") {
            Some("chip-aligned") => Some(TauMode::ChipAligned),
            Some("fractional") => Some(TauMode::Fractional),
            _ => None,
        })
        .unwrap_or(TauMode::Fractional);
    let omega_mode: OmegaMode = args
        .omega_mode
        .map(OmegaMode::from)
        .or_else(|| match config.get_raw("omega-mode") {
            Some("ignored") => Some(OmegaMode::Ignored),
            Some("random") => Some(OmegaMode::Random),
            _ => None,
        })
        .unwrap_or(OmegaMode::Random);
    let subsample = match args.subsample {
        Some(m) => Some(m),
        None => config.get::<usize>("subsample")?,
    };

    let base_query = |snr_db: f64| {
        let mut q = SerQuery::new(p, snr_db).with_sir_db(sir);
        q.tau_step = eps;
        q.omega_nodes = omega_nodes;
        q.tau_mode = tau_mode;
        q.include_bin_collision = args.include_bin_collision;
        q.combined_uses_approx_awgn = args.pn_approx;
        q.subsample_seed = seed;
        if let Some(m) = subsample {
            q.symbol_selection = SymbolSelection::Sample(m);
        }
        if let Some(b) = args.budget {
            q.budget = b;
        }
        q
    };

    let mut records = Vec::new();
    for method in methods.split(',').map(str::trim) {
        match method {
            "full" => {
                for &snr_db in &grid {
                    let pt = ser_full(&base_query(snr_db))?;
                    records.push(record(sf, &pt, pt.method.name()));
                }
            }
            "approx-interf" => {
                for &snr_db in &grid {
                    let pt = ser_interference_approx(&base_query(snr_db))?;
                    records.push(record(sf, &pt, pt.method.name()));
                }
            }
            "combined" => {
                for &snr_db in &grid {
                    let pt = ser_combined(&base_query(snr_db))?;
                    records.push(record(sf, &pt, pt.method.name()));
                }
            }
            "mc" => {
                let mut base = TrialConfig::new(p, 0.0, seed);
                base.sir_db = Some(sir);
                base.tau_mode = tau_mode;
                base.omega_mode = omega_mode;
                let label = match (tau_mode, omega_mode) {
                    (TauMode::ChipAligned, _) => "monte_carlo_chip_aligned",
                    (_, OmegaMode::Ignored) => "monte_carlo_omega_ignored",
                    _ => "monte_carlo",
                };
                records.extend(mc_records(label, &base, &grid, trials, sf)?);
            }
            other => bail!(
                "unknown interference method '{other}' (expected full, approx-interf, combined, mc)"
            ),
        }
    }
    render_curves(&records, format)
}

fn run_pattern(args: PatternArgs, config: &ConfigFile, format: Format) -> Result<String> {
    let sf: u32 = resolve(args.sf, config, "sf", 7)?;
    let p = modulation(sf)?;
    let tau: f64 = resolve(args.tau, config, "tau", 0.0)?;
    let si1: u32 = resolve(args.si1, config, "si1", 0)?;
    let si2: u32 = resolve(args.si2, config, "si2", 0)?;
    let state = InterfererState::new(
        1.0,
        0.0,
        tau,
        p.symbol(si1).map_err(|e| anyhow!(e))?,
        p.symbol(si2).map_err(|e| anyhow!(e))?,
        &p,
    )
    .map_err(|e| anyhow!(e))?;
    let pattern = pattern_closed_form(&state, &p)?;
    let records: Vec<PatternRecord> = pattern
        .bins()
        .iter()
        .enumerate()
        .map(|(k, c)| PatternRecord {
            k,
            re: c.re,
            im: c.im,
            mag: c.norm(),
        })
        .collect();
    render_pattern(&records, format)
}

/// Simulated interference curves with and without the relative channel
/// phase, plus the noise-only reference.
fn run_figure2(args: FigureArgs, config: &ConfigFile, format: Format) -> Result<String> {
    let sfs = match args.sf.or_else(|| config.get_raw("sf").map(String::from)) {
        Some(spec) => parse_sf_list(&spec)?,
        None => vec![7, 8, 9, 10, 11, 12],
    };
    let grid = parse_snr_grid(
        &args
            .snr
            .or_else(|| config.get_raw("snr").map(String::from))
            .unwrap_or_else(|| "8:20:0.5".into()),
    )?;
    let sir: f64 = resolve(args.sir, config, "sir", 3.0)?;
    let trials = parse_trials(&resolve(args.trials, config, "trials", "1e5".to_string())?)?;
    let seed = resolve_seed(args.seed, config)?;

    let mut records = Vec::new();
    for &sf in &sfs {
        let p = modulation(sf)?;
        let mut mc = TrialConfig::new(p, 0.0, seed ^ u64::from(sf));
        mc.sir_db = Some(sir);
        records.extend(mc_records("monte_carlo", &mc, &grid, trials, sf)?);
        let mut ignored = mc;
        ignored.omega_mode = OmegaMode::Ignored;
        ignored.master_seed = seed ^ u64::from(sf) ^ 0x10000;
        records.extend(mc_records(
            "monte_carlo_omega_ignored",
            &ignored,
            &grid,
            trials,
            sf,
        )?);
        for &snr_db in &grid {
            let pt = ser_awgn_exact(&SerQuery::new(p, snr_db))?;
            records.push(record(sf, &pt, pt.method.name()));
        }
    }
    render_curves(&records, format)
}

/// Fractional versus chip-aligned offset models, simulated and approximated.
fn run_figure3(args: FigureArgs, config: &ConfigFile, format: Format) -> Result<String> {
    let sfs = match args.sf.or_else(|| config.get_raw("sf").map(String::from)) {
        Some(spec) => parse_sf_list(&spec)?,
        None => vec![9, 10, 11],
    };
    let grid = parse_snr_grid(
        &args
            .snr
            .or_else(|| config.get_raw("snr").map(String::from))
            .unwrap_or_else(|| "8:20:0.5".into()),
    )?;
    let sir: f64 = resolve(args.sir, config, "sir", 3.0)?;
    let trials = parse_trials(&resolve(args.trials, config, "trials", "1e5".to_string())?)?;
    let seed = resolve_seed(args.seed, config)?;
    let eps: f64 = resolve(args.eps, config, "eps", 0.1)?;

    let mut records = Vec::new();
    for &sf in &sfs {
        let p = modulation(sf)?;
        let mut frac = TrialConfig::new(p, 0.0, seed ^ u64::from(sf));
        frac.sir_db = Some(sir);
        records.extend(mc_records("monte_carlo", &frac, &grid, trials, sf)?);
        let mut chip = frac;
        chip.tau_mode = TauMode::ChipAligned;
        chip.master_seed = seed ^ u64::from(sf) ^ 0x20000;
        records.extend(mc_records(
            "monte_carlo_chip_aligned",
            &chip,
            &grid,
            trials,
            sf,
        )?);
        for tau_mode in [TauMode::Fractional, TauMode::ChipAligned] {
            let label = match tau_mode {
                TauMode::Fractional => "combined",
                TauMode::ChipAligned => "combined_chip_aligned",
            };
            for &snr_db in &grid {
                let mut q = SerQuery::new(p, snr_db).with_sir_db(sir);
                q.tau_step = eps;
                q.tau_mode = tau_mode;
                let pt = ser_combined(&q)?;
                records.push(record(sf, &pt, label));
            }
        }
    }
    render_curves(&records, format)
}
