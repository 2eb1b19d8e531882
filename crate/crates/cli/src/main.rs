//! lumispec: photocurrent noise spectra of a coherently pumped three-level
//! laser, analytically and by Langevin Monte Carlo.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::GridSpec;

#[derive(Parser)]
#[command(
    name = "lumispec",
    version,
    about = "Intensity-noise spectra of a coupled two-level/three-level laser pair",
    after_help = "Worker count is capped by the LUMISPEC_THREADS environment variable."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact spectra from the transfer engine, with optional closed forms.
    Spectrum(SpectrumArgs),
    /// Langevin Monte Carlo plus spectral estimation of the sampled currents.
    Simulate(SimulateArgs),
    /// Parameter scans with zero-frequency Fano factors and the duplication
    /// distance.
    Sweep(SweepArgs),
    /// Engine-vs-closed-form validation suite (optionally with Monte Carlo).
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Frequency grid, min:max:n[:log].
    #[arg(long, value_name = "SPEC")]
    grid: Option<GridSpec>,
    /// RNG seed (Monte Carlo and validation draws).
    #[arg(long)]
    seed: Option<u64>,
    /// Fold to one-sided spectra (values doubled for omega > 0).
    #[arg(long)]
    one_sided: bool,
    /// Emit a gnuplot script next to the CSV outputs.
    #[arg(long)]
    emit_plot_script: bool,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// System to evaluate: coupled | isolated_2l | fb_isolated | fb_coupled.
    #[arg(long, default_value = "coupled")]
    configuration: String,
    /// Closed-form reference spectra to tabulate side by side (repeatable).
    #[arg(long = "closed-form", value_name = "KIND")]
    closed_forms: Vec<String>,
    /// Write raw (unnormalized) engine spectra instead of shot-normalized.
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// System to simulate: coupled | isolated_2l | fb_isolated | fb_coupled.
    #[arg(long, default_value = "coupled")]
    configuration: String,
    /// Integration step (must satisfy dt <= 0.01 / spectral radius).
    #[arg(long)]
    dt: Option<f64>,
    /// Recorded duration per trajectory.
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    n_traj: Option<usize>,
    /// Boxcar decimation of the recorded samples.
    #[arg(long)]
    record_stride: Option<usize>,
    /// Spectral estimator: auto | welch | transform.
    #[arg(long, default_value = "auto")]
    estimator: String,
    /// Segments per record for the transform estimator.
    #[arg(long)]
    segments: Option<usize>,
    /// Segment length for the Welch estimator.
    #[arg(long)]
    segment_len: Option<usize>,
    /// Dump the first N trajectories as CSV files.
    #[arg(long, value_name = "N")]
    dump_trajectories: Option<usize>,
    /// Write raw (unnormalized) estimates instead of shot-normalized.
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Swept parameter: kappa0 | lambda_fb.
    #[arg(long)]
    parameter: Option<String>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    /// System to evaluate at each point.
    #[arg(long)]
    configuration: Option<String>,
    /// Attach the full spectrum per sweep point to the JSON output.
    #[arg(long)]
    curves: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of random parameter draws.
    #[arg(long, default_value_t = 100)]
    draws: usize,
    /// Also run the Monte Carlo cross-checks (tens of seconds).
    #[arg(long)]
    mc: bool,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

fn configure_threads() {
    if let Ok(value) = std::env::var("LUMISPEC_THREADS") {
        match value.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring invalid LUMISPEC_THREADS = {value:?}"),
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Spectrum(args) => commands::spectrum::run(args),
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Sweep(args) => commands::sweep::run(args),
        Command::Validate(args) => commands::validate::run(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
