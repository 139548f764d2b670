//! `sawkit` command-line front end.
//!
//! Exit codes: 0 success, 2 unparseable input or invalid parameters,
//! 3 extraction or prediction failure, 4 I/O error, 5 fit did not converge.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sawkit::design::SweepAxis;
use sawkit::touchstone::{FrequencyUnit, ValueFormat};

#[derive(Debug, Parser)]
#[command(
    name = "sawkit",
    version,
    about = "Acoustic resonator S11 analysis, mBVD fitting and frequency scaling"
)]
struct Cli {
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rewrite a .s1p file in another format, unit or reference impedance.
    Convert(ConvertArgs),
    /// Extract f_s, f_p, k_eff², Y_R, Q_max and FoM from a .s1p file.
    Extract(ExtractArgs),
    /// Fit an mBVD model to a .s1p file.
    Fit(FitArgs),
    /// Write the S11 of an mBVD model as a .s1p file.
    Synth(SynthArgs),
    /// Predict f_s and k_eff² across a geometry sweep.
    Sweep(SweepArgs),
    /// Collect extraction reports into one table.
    Report(ReportArgs),
    /// Write the six reference-device fixtures.
    #[command(hide = true)]
    MakeFixtures(MakeFixturesArgs),
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    pub input: PathBuf,
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
    /// RI, MA or DB; defaults to the input's format.
    #[arg(long)]
    pub format: Option<ValueFormat>,
    /// HZ, KHZ, MHZ or GHZ; defaults to the input's unit.
    #[arg(long)]
    pub unit: Option<FrequencyUnit>,
    /// Renormalise to this reference impedance (Ω).
    #[arg(long)]
    pub z0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    pub input: PathBuf,
    /// Report JSON destination.
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
    /// Also write the one-row summary CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Smith-circle band `LO,HI` in Hz.
    #[arg(long, value_parser = commands::parse_band)]
    pub smith_band: Option<sawkit::Band>,
    /// Q_max search band `LO,HI` in Hz.
    #[arg(long, value_parser = commands::parse_band)]
    pub q_band: Option<sawkit::Band>,
    /// Treat the data as referenced to this impedance instead of the file's.
    #[arg(long)]
    pub z0: Option<f64>,
    /// Smooth S11 before Bode-Q with this half-window (samples).
    #[arg(long)]
    pub smooth: Option<usize>,
    /// Also fit an mBVD model and report its k_eff².
    #[arg(long)]
    pub mbvd: bool,
    /// Device name; defaults to a `! device:` comment in the file.
    #[arg(long)]
    pub device: Option<String>,
    /// Wavelength in nm; defaults to a `! lambda_nm:` comment in the file.
    #[arg(long)]
    pub lambda_nm: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub input: PathBuf,
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
    /// `auto`, or `from-file PATH` with params or fit-result JSON.
    #[arg(long, num_args = 1..=2, value_names = ["MODE", "PATH"], default_value = "auto")]
    pub init: Vec<String>,
    #[arg(long, default_value_t = 200)]
    pub max_iterations: usize,
    /// Also extract the data and the fitted model and compare k_eff².
    #[arg(long)]
    pub report: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// mBVD parameter JSON.
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub f_lo: f64,
    #[arg(long)]
    pub f_hi: f64,
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
    #[arg(long, default_value_t = 50.0)]
    pub z0: f64,
    #[arg(long, default_value = "MA")]
    pub format: ValueFormat,
    #[arg(long, default_value = "GHZ")]
    pub unit: FrequencyUnit,
    /// Standard deviation of complex Gaussian noise added to S11.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub device: Option<String>,
    #[arg(long)]
    pub lambda_nm: Option<f64>,
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Base geometry JSON.
    #[arg(long)]
    pub geometry: PathBuf,
    /// lambda, h_ln, h_elec, duty, n_e, n_r or aperture.
    #[arg(long)]
    pub axis: SweepAxis,
    /// Comma-separated values in SI units (metres for lengths).
    #[arg(
        long,
        value_delimiter = ',',
        required_unless_present = "linspace",
        conflicts_with = "linspace"
    )]
    pub values: Vec<f64>,
    /// `LO,HI,N` evenly spaced values.
    #[arg(long, value_parser = commands::parse_linspace)]
    pub linspace: Option<commands::Linspace>,
    #[arg(long, default_value = "measured")]
    pub family: sawkit::Family,
    /// Dispersion table CSV to use instead of the built-in one.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub allow_extrapolation: bool,
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Extraction report JSON files.
    pub inputs: Vec<PathBuf>,
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
    /// Markdown table instead of CSV.
    #[arg(long)]
    pub markdown: bool,
    /// Sort rows by wavelength, longest first.
    #[arg(long)]
    pub sort_lambda: bool,
}

#[derive(Debug, Args)]
pub struct MakeFixturesArgs {
    #[arg(long, default_value = "fixtures")]
    pub out_dir: PathBuf,
    /// Also write the mBVD parameter JSON next to each fixture.
    #[arg(long)]
    pub with_params: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Convert(a) => commands::convert::run(&a),
        Command::Extract(a) => commands::extract::run(&a),
        Command::Fit(a) => commands::fit::run(&a),
        Command::Synth(a) => commands::synth::run(&a),
        Command::Sweep(a) => commands::sweep::run(&a),
        Command::Report(a) => commands::report::run(&a),
        Command::MakeFixtures(a) => commands::fixtures::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sawkit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
