//! Command-line front end for the noonforge simulator.
//!
//! Exit codes: 0 success, 1 reproduction-tolerance failure, 2 usage or
//! validation error, 3 numeric degeneracy of the device.

mod commands;
mod output;
mod reproduce;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use noonforge::device::DeviceParams;
use noonforge::fock::{FockState, DEFAULT_MAX_PHOTONS};
use noonforge::DeviceParams64;

#[derive(Debug)]
pub enum CliError {
    Lib(noonforge::Error),
    Io(std::io::Error),
    Json(serde_json::Error),
    Usage(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Json(e) => write!(f, "{e}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<noonforge::Error> for CliError {
    fn from(e: noonforge::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Json(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(noonforge::Error::DegenerateDevice { .. }) => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "noonforge",
    version,
    about = "Simulate and optimize a double-microring photonic circuit that heralds NOON states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the 3x3 scattering matrix and print it with its unitarity residual.
    Smatrix(SmatrixArgs),
    /// Evolve a photon-number input through the device and print the output state.
    Evolve(EvolveArgs),
    /// Run one heralded experiment and print the report.
    Herald(HeraldArgs),
    /// Search the tunable parameters for the best heralded NOON output.
    Optimize(OptimizeArgs),
    /// Evaluate the heralded experiment over a parameter grid.
    Sweep(SweepArgs),
    /// Regenerate stored reference results and compare against targets.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Device parameters, either from a JSON file or from direct flags.
#[derive(Args, Debug)]
pub struct ParamArgs {
    /// JSON file holding {"tau0": .., "tau1": .., "theta1": .., "theta2": ..}.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["tau0", "tau1", "theta", "theta1", "theta2"])]
    params: Option<PathBuf>,
    /// Amplitude transmission of both outer couplers (0..=1).
    #[arg(long)]
    tau0: Option<f64>,
    /// Transmission parameter of the central junction (0..=1).
    #[arg(long)]
    tau1: Option<f64>,
    /// Round-trip phase of both rings (radians).
    #[arg(long, conflicts_with_all = ["theta1", "theta2"])]
    theta: Option<f64>,
    /// Round-trip phase of the upper ring (radians); needs --theta2.
    #[arg(long, requires = "theta2")]
    theta1: Option<f64>,
    /// Round-trip phase of the lower ring (radians); needs --theta1.
    #[arg(long, requires = "theta1")]
    theta2: Option<f64>,
}

impl ParamArgs {
    pub fn resolve(&self) -> CliResult<DeviceParams64> {
        if let Some(path) = &self.params {
            let text = std::fs::read_to_string(path)?;
            return Ok(serde_json::from_str(&text)?);
        }
        let (Some(tau0), Some(tau1)) = (self.tau0, self.tau1) else {
            return Err(CliError::Usage(
                "device parameters required: pass --params FILE or --tau0/--tau1 with --theta (or --theta1/--theta2)"
                    .into(),
            ));
        };
        match (self.theta, self.theta1, self.theta2) {
            (Some(theta), None, None) => Ok(DeviceParams::tied(tau0, tau1, theta)?),
            (None, Some(t1), Some(t2)) => Ok(DeviceParams::new(tau0, tau1, t1, t2)?),
            _ => Err(CliError::Usage(
                "ring phases required: pass --theta or both --theta1 and --theta2".into(),
            )),
        }
    }
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Write the primary output here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format (default: json, except sweep which defaults to csv).
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Significant digits for numbers in CSV and summary output.
    #[arg(long, value_name = "DIGITS", default_value_t = 17)]
    precision: usize,
}

impl OutputArgs {
    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

#[derive(Args)]
struct SmatrixArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EvolveArgs {
    /// Input occupations of waveguides a,b,c, e.g. 1,2,1.
    #[arg(long, value_parser = parse_occupations)]
    input: FockState,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct HeraldArgs {
    /// Input occupations of waveguides a,b,c, e.g. 1,2,1.
    #[arg(long, value_parser = parse_occupations)]
    input: FockState,
    /// Photon count detected on the central output mode b.
    #[arg(long)]
    herald: u32,
    /// NOON order scored on the outer modes; defaults to the photon budget
    /// left after the herald.
    #[arg(long)]
    n: Option<u32>,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Maximize fidelity, then click probability on the unit-fidelity set.
    FidelityFirst,
    /// Maximize lambda*f_noon + (1-lambda)*p_click.
    Weighted,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long, value_parser = parse_occupations)]
    input: FockState,
    #[arg(long)]
    herald: u32,
    /// NOON order; defaults to the photon budget left after the herald.
    #[arg(long)]
    n: Option<u32>,
    #[arg(long, value_enum, default_value_t = ModeArg::FidelityFirst)]
    mode: ModeArg,
    /// Fidelity weight for --mode weighted.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Search theta1 and theta2 independently (4 free parameters).
    #[arg(long)]
    untied_theta: bool,
    /// Simplex restarts.
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    /// Coarse grid resolution tau0 x tau1 x theta, e.g. 21x21x25.
    #[arg(long, value_parser = parse_grid_shape)]
    grid: Option<(usize, usize, usize)>,
    /// Evaluation budget per simplex search.
    #[arg(long, default_value_t = 20_000)]
    max_evals: usize,
    /// Extra starting point tau0,tau1,theta[,theta2].
    #[arg(long, value_parser = parse_init_point)]
    init: Option<DeviceParams64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write a per-restart convergence log as CSV.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_parser = parse_occupations)]
    input: FockState,
    #[arg(long)]
    herald: u32,
    /// NOON order; defaults to the photon budget left after the herald.
    #[arg(long)]
    n: Option<u32>,
    /// Axis as start:stop:count or a single value.
    #[arg(long, value_parser = parse_axis)]
    tau0: AxisSpec,
    #[arg(long, value_parser = parse_axis)]
    tau1: AxisSpec,
    /// Ring phase axis (both rings unless --theta2 is given).
    #[arg(long, value_parser = parse_axis)]
    theta: AxisSpec,
    /// Independent axis for the lower ring phase.
    #[arg(long, value_parser = parse_axis)]
    theta2: Option<AxisSpec>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Name of the stored reference data set.
    #[arg(value_parser = ["fig2"])]
    name: String,
    /// Directory for the emitted CSV file.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Significant digits for numbers in the CSV output.
    #[arg(long, value_name = "DIGITS", default_value_t = 17)]
    precision: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct AxisSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

fn parse_occupations(text: &str) -> Result<FockState, String> {
    let occ: Result<Vec<u32>, _> = text.split(',').map(|p| p.trim().parse::<u32>()).collect();
    let occ = occ.map_err(|e| format!("bad occupation list `{text}`: {e}"))?;
    if occ.len() != 3 {
        return Err(format!(
            "expected three comma-separated occupations (waveguides a,b,c), got {}",
            occ.len()
        ));
    }
    Ok(FockState::new(occ))
}

fn parse_axis(text: &str) -> Result<AxisSpec, String> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [v] => {
            let v: f64 = v.trim().parse().map_err(|e| format!("bad axis value `{text}`: {e}"))?;
            Ok(AxisSpec { start: v, stop: v, count: 1 })
        }
        [a, b, c] => {
            let start: f64 = a.trim().parse().map_err(|e| format!("bad axis start in `{text}`: {e}"))?;
            let stop: f64 = b.trim().parse().map_err(|e| format!("bad axis stop in `{text}`: {e}"))?;
            let count: usize = c.trim().parse().map_err(|e| format!("bad axis count in `{text}`: {e}"))?;
            Ok(AxisSpec { start, stop, count })
        }
        _ => Err(format!("axis `{text}` must be a value or start:stop:count")),
    }
}

fn parse_grid_shape(text: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = text.split('x').collect();
    if parts.len() != 3 {
        return Err(format!("grid `{text}` must look like 21x21x25"));
    }
    let mut vals = [0usize; 3];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p.trim().parse().map_err(|e| format!("bad grid `{text}`: {e}"))?;
    }
    Ok((vals[0], vals[1], vals[2]))
}

fn parse_init_point(text: &str) -> Result<DeviceParams64, String> {
    let vals: Result<Vec<f64>, _> = text.split(',').map(|p| p.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|e| format!("bad init point `{text}`: {e}"))?;
    let params = match vals.as_slice() {
        [t0, t1, th] => DeviceParams::tied(*t0, *t1, *th),
        [t0, t1, th1, th2] => DeviceParams::new(*t0, *t1, *th1, *th2),
        _ => return Err(format!("init point `{text}` needs 3 or 4 comma-separated values")),
    };
    params.map_err(|e| e.to_string())
}

/// Photon cap, overridable through NOONFORGE_MAX_PHOTONS.
pub fn photon_cap() -> CliResult<usize> {
    match std::env::var("NOONFORGE_MAX_PHOTONS") {
        Ok(text) => text.trim().parse::<usize>().map_err(|e| {
            CliError::Usage(format!("NOONFORGE_MAX_PHOTONS=`{text}` is not a photon count: {e}"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_MAX_PHOTONS),
        Err(e) => Err(CliError::Usage(format!("NOONFORGE_MAX_PHOTONS unreadable: {e}"))),
    }
}

fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Smatrix(args) => commands::smatrix(&args.params, &args.output).map(|()| 0),
        Command::Evolve(args) => {
            commands::evolve(&args.input, &args.params, &args.output).map(|()| 0)
        }
        Command::Herald(args) => commands::herald(
            &args.input,
            args.herald,
            args.n,
            &args.params,
            &args.output,
        )
        .map(|()| 0),
        Command::Optimize(args) => commands::optimize(&args),
        Command::Sweep(args) => commands::sweep(&args).map(|()| 0),
        Command::Reproduce(args) => reproduce::run(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
