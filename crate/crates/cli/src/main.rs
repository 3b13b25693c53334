use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;

use config::{EngineChoice, OutputConfig, RunConfig};
use error::CliError;

/// Lattice pricing of American and European options with time-dependent r, q and sigma.
#[derive(Debug, Parser)]
#[command(name = "tdlattice", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Root price, step count, terminal gap and condition flags.
    Price(Common),
    /// Exercise boundary as CSV (t, x_boundary, S_boundary).
    Boundary(Common),
    /// Full value surface, partition and run metadata.
    Surface(Common),
    /// Checks and refinement studies; exits 4 when a check fails.
    Study(Common),
    /// Condition report for the partition only.
    Verify(Common),
}

#[derive(Debug, clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the engine in the config.
    #[arg(long, value_enum)]
    engine: Option<EngineChoice>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append a short final step so the partition ends at maturity.
    #[arg(long)]
    snap_last_step: bool,
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(&common.config).map_err(|source| CliError::Read {
        path: common.config.clone(),
        source,
    })?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(engine) = common.engine {
        cfg.engine = engine;
    }
    if let Some(dir) = &common.out {
        cfg.output = Some(OutputConfig { dir: dir.clone() });
    }
    if common.snap_last_step {
        cfg.numerics.snap_last_step = true;
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<Option<&Path>, CliError> {
    let Some(out) = &cfg.output else {
        return Ok(None);
    };
    std::fs::create_dir_all(&out.dir).map_err(|source| CliError::Write {
        path: out.dir.clone(),
        source,
    })?;
    commands::write_file(&out.dir.join("config.json"), &cfg.to_json())?;
    Ok(Some(&out.dir))
}

type Handler = fn(&RunConfig, Option<&Path>) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, command): (&Common, Handler) = match &cli.command {
        Command::Price(c) => (c, commands::price),
        Command::Boundary(c) => (c, commands::boundary),
        Command::Surface(c) => (c, commands::surface),
        Command::Study(c) => (c, commands::study),
        Command::Verify(c) => (c, commands::verify),
    };
    let cfg = load(common)?;
    cfg.resolve()?;
    let dir = out_dir(&cfg)?;
    command(&cfg, dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
