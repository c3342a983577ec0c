//! Experiment driver: one subcommand per experiment, plain-text config,
//! CSV outputs plus a `run_meta` provenance file per run.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! failure.

mod commands;
mod config;

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{ConfigError, RawConfig};

#[derive(Parser)]
#[command(
    name = "semcom",
    version,
    about = "Goal-oriented semantic communication experiments"
)]
struct Cli {
    /// Run configuration file (`key = value` lines, `#` comments,
    /// `[section]` headers per subcommand).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed; overrides the config's [general] seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for CSVs and run metadata.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Accuracy-vs-complexity frontier of a triangulation vs. its glued
    /// cell complex.
    TopoCurve,
    /// Complexity/error trade-off of the linear bottleneck encoder across
    /// the weight beta.
    IbFrontier,
    /// Slot-level power/clock/beta control under accuracy and delay
    /// constraints, swept over delay targets.
    AdaptSim,
    /// Train the latent codec with the channel in the loop and persist it.
    GlvmTrain,
    /// Evaluate a persisted codec: channel-conditions table and
    /// accuracy-vs-dimension sweep.
    GlvmEval,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Lib(semcom::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<semcom::Error> for CliError {
    fn from(e: semcom::Error) -> Self {
        CliError::Lib(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Config(_) => 2,
        CliError::Lib(semcom::Error::InvalidArgument(_)) => 2,
        CliError::Lib(semcom::Error::Io(_)) | CliError::Lib(semcom::Error::Format { .. }) => 3,
        CliError::Lib(semcom::Error::NumericFailure(_)) => 4,
    }
}

/// Resolved run context shared by the commands.
pub struct Ctx {
    pub raw: RawConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    started: Instant,
}

impl Ctx {
    fn new(cli: &Cli) -> CliResult<Ctx> {
        let raw = match &cli.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::default(),
        };
        let mut general = raw.section("general");
        let cfg_seed = general.get_u64("seed")?;
        let cfg_out = general.get_str("out").map(PathBuf::from);
        general.finish()?;
        let seed = cli.seed.or(cfg_seed).unwrap_or(7);
        let out_dir = cli.out.clone().or(cfg_out).unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&out_dir).map_err(|e| {
            CliError::Config(ConfigError(format!(
                "cannot create output directory {}: {e}",
                out_dir.display()
            )))
        })?;
        Ok(Ctx {
            raw,
            seed,
            out_dir,
            started: Instant::now(),
        })
    }

    /// Writes a CSV file under the output directory and returns its path.
    pub fn write_csv(&self, name: &str, header: &str, rows: &[String]) -> CliResult<PathBuf> {
        let path = self.out_dir.join(name);
        let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        fs::write(&path, text).map_err(semcom::Error::from)?;
        Ok(path)
    }

    /// Records the resolved settings, seed, version and wall time. The wall
    /// time makes this file exempt from the byte-identical-rerun guarantee
    /// that the CSVs honor.
    pub fn write_run_meta(&self, command: &str, settings: &[(String, String)]) -> CliResult<()> {
        let mut text = String::new();
        text.push_str(&format!("command = {command}\n"));
        text.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
        text.push_str(&format!("seed = {}\n", self.seed));
        for (k, v) in settings {
            text.push_str(&format!("{k} = {v}\n"));
        }
        text.push_str(&format!(
            "wall_time_s = {:.3}\n",
            self.started.elapsed().as_secs_f64()
        ));
        let path = self.out_dir.join(format!("{command}_run_meta.txt"));
        fs::write(path, text).map_err(semcom::Error::from)?;
        Ok(())
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> CliResult<()> {
    let ctx = Ctx::new(cli)?;
    match cli.command {
        Command::TopoCurve => commands::topo_curve::run(&ctx),
        Command::IbFrontier => commands::ib_frontier::run(&ctx),
        Command::AdaptSim => commands::adapt_sim::run(&ctx),
        Command::GlvmTrain => commands::glvm_train::run(&ctx),
        Command::GlvmEval => commands::glvm_eval::run(&ctx),
    }
}
