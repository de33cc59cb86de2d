//! Command-line front end. `main.rs` only forwards to [`main_with`].

pub mod report;
pub mod reproduce;
pub mod sweep;
pub mod verify;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::exec::Execution;
use crate::params::{load_config, ConfigError, ProtocolParams};
use crate::rates::{self, RateReport, RatesError};
use crate::sim::{self, SimError, SimPolicy};
use report::{emit, Format, Record};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GUARD: i32 = 3;

const PRECEDENCE: &str = "Parameter precedence: built-in defaults, then --config FILE, then --<key> flags (highest).";

#[derive(Debug, Parser)]
#[command(name = "repeaterlab", version, about = "Quantum-repeater chain laboratory", after_help = PRECEDENCE)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form probabilities, waiting times and total distribution time.
    Rates {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo estimate of the mean end-to-end time.
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        /// Root seed; trial i uses its own substream.
        #[arg(long, env = "REPEATERLAB_SEED", default_value_t = 0)]
        seed: u64,
        /// Charge classical signalling time to every swap.
        #[arg(long, value_enum, default_value_t = Switch::Off)]
        swap_comm: Switch,
        /// Run trials on one thread (same output).
        #[arg(long)]
        sequential: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Closed-form rates over a one-parameter grid.
    Sweep {
        #[command(flatten)]
        params: ParamArgs,
        /// Configuration key to vary.
        #[arg(long)]
        param: String,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        /// Evenly spaced points including both ends.
        #[arg(long, conflicts_with = "integer")]
        steps: Option<usize>,
        /// Every integer in [from, to]; the default for --param n.
        #[arg(long)]
        integer: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the optical-engine invariant checks.
    BsmVerify {
        /// Points per phase axis.
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
        phases: u64,
        /// Replace every per-check tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Recompute the headline numbers and compare with the published ones.
    ReproducePaper {
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Diagnostics on stderr.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    /// JSON document of parameter overrides.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub eta_p: Option<f64>,
    #[arg(long)]
    pub eta_s: Option<f64>,
    #[arg(long)]
    pub eta_e1: Option<f64>,
    #[arg(long)]
    pub eta_e2: Option<f64>,
    #[arg(long)]
    pub eta_d: Option<f64>,
    #[arg(long)]
    pub r_hz: Option<f64>,
    #[arg(long)]
    pub l_km: Option<f64>,
    #[arg(long)]
    pub l_att_km: Option<f64>,
    #[arg(long)]
    pub c_km_s: Option<f64>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub p_d: Option<f64>,
}

impl ParamArgs {
    pub fn resolve(&self) -> Result<ProtocolParams, CliError> {
        let mut p = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
                load_config(&text)?
            }
            None => ProtocolParams::default(),
        };
        let floats = [
            ("eta_p", self.eta_p),
            ("eta_s", self.eta_s),
            ("eta_e1", self.eta_e1),
            ("eta_e2", self.eta_e2),
            ("eta_d", self.eta_d),
            ("r_hz", self.r_hz),
            ("l_km", self.l_km),
            ("l_att_km", self.l_att_km),
            ("c_km_s", self.c_km_s),
            ("p_d", self.p_d),
        ];
        for (key, v) in floats {
            if let Some(v) = v {
                p.set(key, v)?;
            }
        }
        if let Some(n) = self.n {
            p.n = n;
        }
        p.validate().map_err(ConfigError::from)?;
        Ok(p)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Guard(String),
    #[error("{0}")]
    Failed(String),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => EXIT_CHECK_FAILED,
            CliError::Guard(_) => EXIT_GUARD,
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => EXIT_USAGE,
        }
    }
}

impl From<RatesError> for CliError {
    fn from(e: RatesError) -> Self {
        match e {
            RatesError::ZeroProbability { .. } => CliError::Guard(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        if e.is_guard() {
            CliError::Guard(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl From<sweep::SweepError> for CliError {
    fn from(e: sweep::SweepError) -> Self {
        match e {
            sweep::SweepError::Config(c) => c.into(),
            sweep::SweepError::Rates { source: RatesError::ZeroProbability { .. }, .. } => CliError::Guard(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

/// Parses `args` (program name first), runs the command, returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                EXIT_USAGE
            } else {
                let _ = out.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    match run(&cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "repeaterlab: {e}");
            e.exit_code()
        }
    }
}

fn rate_record(r: &RateReport) -> Record {
    RateReport::FIELDS.iter().zip(r.values()).fold(Record::new(), |rec, (k, v)| rec.with(k, v))
}

pub fn run(command: &Command, out: &mut impl Write, err: &mut impl Write) -> Result<(), CliError> {
    let started = Instant::now();
    let (records, output, failure) = match command {
        Command::Rates { params, output } => {
            let p = params.resolve()?;
            (vec![rate_record(&rates::t_total(&p)?)], output, None)
        }
        Command::Simulate { params, trials, seed, swap_comm, sequential, output } => {
            let p = params.resolve()?;
            let policy = SimPolicy { swap_comm_time: *swap_comm == Switch::On };
            let exec = if *sequential { Execution::Sequential } else { Execution::Parallel };
            let (cmp, est) = sim::compare_analytic(&p, &policy, *trials, *seed, exec)?;
            let swaps = est.swap_attempts.iter().map(u128::to_string).collect::<Vec<_>>().join(";");
            let rec = Record::new()
                .with("n", p.n)
                .with("trials", est.trials)
                .with("seed", est.seed)
                .with("swap_comm_time", policy.swap_comm_time)
                .with("parallel_restart", sim::PARALLEL_RESTART)
                .with("mean", est.mean)
                .with("std_error", est.std_error)
                .with("std_error_defined", est.std_error_defined)
                .with("p50", est.p50)
                .with("p90", est.p90)
                .with("p99", est.p99)
                .with("analytic", cmp.analytic)
                .with("ratio", cmp.ratio)
                .with("ratio_std_error", cmp.ratio_std_error)
                .with("local_prep_attempts", est.local_prep_attempts)
                .with("link_attempts", est.link_attempts)
                .with("swap_attempts", swaps);
            (vec![rec], output, None)
        }
        Command::Sweep { params, param, from, to, steps, integer, output } => {
            let p = params.resolve()?;
            let grid = match (steps, *integer || (steps.is_none() && param == "n")) {
                (Some(steps), _) => sweep::Grid::Linear { from: *from, to: *to, steps: *steps },
                (None, true) => sweep::Grid::Integer { from: *from, to: *to },
                (None, false) => return Err(CliError::Usage("sweep needs --steps or --integer".into())),
            };
            let rows = sweep::sweep(&p, param, &grid, Execution::default())?;
            (rows.iter().map(|r| sweep::record(param, r)).collect(), output, None)
        }
        Command::BsmVerify { phases, tolerance, output } => {
            let opts = verify::VerifyOptions { phases: *phases as usize, tolerance: *tolerance, ..Default::default() };
            let checks = verify::run_suite(&opts).map_err(|e| CliError::Usage(e.to_string()))?;
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.check).collect();
            let records = checks
                .iter()
                .map(|c| {
                    Record::new()
                        .with("check", c.check)
                        .with("passed", c.passed)
                        .with("worst", c.worst)
                        .with("tolerance", c.tolerance)
                        .with("detail", c.detail.clone())
                })
                .collect();
            let failure = (!failed.is_empty()).then(|| format!("failed checks: {}", failed.join(", ")));
            (records, output, failure)
        }
        Command::ReproducePaper { output } => {
            let rows = reproduce::rows()?;
            let failure = (!reproduce::all_pass(&rows)).then(|| "reproduction outside tolerance".to_string());
            (rows.iter().map(reproduce::Row::record).collect(), output, failure)
        }
    };
    emit(&records, output.format, out)?;
    out.flush()?;
    if output.verbose {
        writeln!(err, "repeaterlab: {} record(s) in {:.3} s", records.len(), started.elapsed().as_secs_f64())?;
    }
    match failure {
        Some(msg) => Err(CliError::Failed(msg)),
        None => Ok(()),
    }
}
