//! Command-line front end for the drivevol pipeline.
//!
//! Settings are resolved in three layers, each overriding the last: built-in
//! defaults, the TOML file given by `--config`, then command-line flags. The
//! thread count is the only setting read from the environment
//! (`DRIVEVOL_THREADS`); it never affects results.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Args, Parser, Subcommand};
use commands::Command;
use config::RunConfig;
use drivevol::report::Format;
use drivevol::volatility::ZeroSpeedMode;
use std::ffi::OsString;
use std::path::PathBuf;

/// Exit status for usage and configuration errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for data and computation errors.
pub const EXIT_DATA: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "drivevol", version, about = "Trip-level driving volatility and its correlates")]
pub struct Cli {
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, env = "DRIVEVOL_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Per-trip volatility from driving cycles.
    Volatility(BaseArgs),
    /// Descriptive statistics, volatility histogram and VIFs.
    Describe(AnalysisArgs),
    /// OLS and quantile fits with a coefficient table.
    Fit(FitArgs),
    /// Coefficients across the quantile grid, in long format.
    Profile(FitArgs),
    /// Seeded synthetic cycles and survey tables.
    Synth(SynthArgs),
    /// volatility, describe, fit and profile in one run.
    Pipeline(FitArgs),
    /// Print the effective configuration as TOML.
    Config(FitArgs),
}

fn zero_speed_mode(s: &str) -> Result<ZeroSpeedMode, String> {
    match s {
        "drop-pair" => Ok(ZeroSpeedMode::DropPair),
        "floor-epsilon" => Ok(ZeroSpeedMode::FloorEpsilon),
        "error" => Ok(ZeroSpeedMode::Error),
        _ => Err(format!("unknown policy `{s}` (expected drop-pair, floor-epsilon or error)")),
    }
}

#[derive(Debug, Args)]
pub struct BaseArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Table format: text, csv or json.
    #[arg(long)]
    pub format: Option<Format>,
    /// Decimals in rendered tables.
    #[arg(long)]
    pub decimals: Option<usize>,
    /// Long-format speed traces.
    #[arg(long)]
    pub cycles: Option<PathBuf>,
    /// Zero-speed handling: drop-pair, floor-epsilon or error.
    #[arg(long, value_parser = zero_speed_mode)]
    pub zero_speed: Option<ZeroSpeedMode>,
    /// Floor for the floor-epsilon policy, mph.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Fewest log returns a trip needs to be measured.
    #[arg(long)]
    pub min_returns: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalysisArgs {
    #[command(flatten)]
    pub base: BaseArgs,
    /// Volatility CSV from an earlier run, used instead of --cycles.
    #[arg(long)]
    pub volatility: Option<PathBuf>,
    #[arg(long)]
    pub trips: Option<PathBuf>,
    #[arg(long)]
    pub vehicles: Option<PathBuf>,
    #[arg(long)]
    pub persons: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Comma-separated quantile grid.
    #[arg(long, value_delimiter = ',')]
    pub quantiles: Option<Vec<f64>>,
    /// Bootstrap resamples per quantile.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Bootstrap seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Skip the OLS fit.
    #[arg(long)]
    pub no_ols: bool,
    /// Skip the quantile fits.
    #[arg(long)]
    pub no_quantile: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub n_trips: Option<usize>,
    #[arg(long)]
    pub trips_per_vehicle: Option<usize>,
    /// Standard deviation of the volatility noise; 0 for none.
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Generate cycles without zero-speed dwells.
    #[arg(long)]
    pub no_dwell_stops: bool,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

impl BaseArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.output.dir, self.out);
        set(&mut c.output.format, self.format);
        set(&mut c.output.decimals, self.decimals);
        set_opt(&mut c.inputs.cycles, self.cycles);
        set(&mut c.volatility.zero_speed.mode, self.zero_speed);
        set(&mut c.volatility.zero_speed.epsilon_mph, self.epsilon);
        set(&mut c.volatility.min_returns, self.min_returns);
    }
}

impl AnalysisArgs {
    fn apply(self, c: &mut RunConfig) {
        self.base.apply(c);
        set_opt(&mut c.inputs.volatility, self.volatility);
        set_opt(&mut c.inputs.trips, self.trips);
        set_opt(&mut c.inputs.vehicles, self.vehicles);
        set_opt(&mut c.inputs.persons, self.persons);
    }
}

impl FitArgs {
    fn apply(self, c: &mut RunConfig) {
        self.analysis.apply(c);
        set(&mut c.model.quantiles, self.quantiles);
        set(&mut c.fit.bootstrap_reps, self.reps);
        set(&mut c.fit.seed, self.seed);
        if self.no_ols {
            c.fit.ols = false;
        }
        if self.no_quantile {
            c.fit.quantile = false;
        }
    }
}

impl SynthArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.output.dir, self.out);
        set(&mut c.synth.n_trips, self.n_trips);
        set(&mut c.synth.trips_per_vehicle, self.trips_per_vehicle);
        set(&mut c.synth.noise_sd, self.noise_sd);
        set(&mut c.synth.seed, self.seed);
        if self.no_dwell_stops {
            c.synth.dwell_stops = false;
        }
    }
}

fn config_path(cmd: &Cmd) -> Option<&PathBuf> {
    match cmd {
        Cmd::Volatility(a) => a.config.as_ref(),
        Cmd::Describe(a) => a.base.config.as_ref(),
        Cmd::Fit(a) | Cmd::Profile(a) | Cmd::Pipeline(a) | Cmd::Config(a) => a.analysis.base.config.as_ref(),
        Cmd::Synth(a) => a.config.as_ref(),
    }
}

/// Loads the config file, if any, and layers the flags on top.
pub fn resolve(cmd: Cmd) -> anyhow::Result<(Option<Command>, RunConfig)> {
    let mut config = match config_path(&cmd) {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let command = match cmd {
        Cmd::Volatility(a) => {
            a.apply(&mut config);
            Some(Command::Volatility)
        }
        Cmd::Describe(a) => {
            a.apply(&mut config);
            Some(Command::Describe)
        }
        Cmd::Fit(a) => {
            a.apply(&mut config);
            Some(Command::Fit)
        }
        Cmd::Profile(a) => {
            a.apply(&mut config);
            Some(Command::Profile)
        }
        Cmd::Pipeline(a) => {
            a.apply(&mut config);
            Some(Command::Pipeline)
        }
        Cmd::Synth(a) => {
            a.apply(&mut config);
            Some(Command::Synth)
        }
        Cmd::Config(a) => {
            a.apply(&mut config);
            None
        }
    };
    config.validate()?;
    Ok((command, config))
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (command, config) = match resolve(cli.command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_USAGE;
        }
    };
    let Some(command) = command else {
        return match config.to_toml() {
            Ok(text) => {
                print!("{text}");
                0
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                EXIT_DATA
            }
        };
    };

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| commands::execute(command, &config)) {
        Ok(files) => {
            println!("{}: wrote {} files to {}", command.name(), files.len(), config.output.dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_DATA
        }
    }
}
