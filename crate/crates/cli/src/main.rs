//! `hloop` command-line driver.
//!
//! Exit status: 0 when every assertion of the invoked suite passed, 1 when one
//! failed, 2 for bad input (malformed JSON, invalid options), 3 when a
//! computation errored.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{file}: {message}\n  | {line}")]
    Parse { file: String, message: String, line: String },

    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Run(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<hloop::Error> for CliError {
    fn from(e: hloop::Error) -> Self {
        match e {
            hloop::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Config(_) => 2,
            CliError::Run(_) | CliError::Io(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "hloop", version, about = "Closed curves of prescribed curvature: checks, solves and mountain-pass runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the inequalities on random loops for one field.
    Invariants(Common),
    /// Closed-form N values, regime table, zero-energy circles.
    Appendix(Common),
    /// Look for a critical loop from an initial guess.
    Solve(Common),
    /// Estimate the mountain-pass level with a relaxed path of loops.
    MountainPass(Common),
    /// Integrate the curvature ODE and report the closing defect.
    Shoot(Common),
    /// Hardy-inequality grids and the mollification identity.
    Hardy(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Field spec JSON.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Run config JSON; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Samples per loop, or grid cells per half side for `hardy`.
    #[arg(long)]
    grid: Option<usize>,
    /// `circle:r`, `circle:r@x,y` or `random`.
    #[arg(long)]
    init: Option<String>,
    /// Speed for `shoot`.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long = "L-max", alias = "l-max")]
    l_max: Option<f64>,
    /// Number of random loops for `invariants`.
    #[arg(long)]
    loops: Option<usize>,
    /// Nodes on the mountain-pass path.
    #[arg(long)]
    nodes: Option<usize>,
    /// Center of the disc where H ≥ 1, as `x,y`.
    #[arg(long, value_parser = parse_point)]
    well: Option<[f64; 2]>,
    /// Integration time for `shoot`, in units of 2π.
    #[arg(long)]
    period: Option<f64>,
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    Ok([x.trim().parse().map_err(|_| "bad x")?, y.trim().parse().map_err(|_| "bad y")?])
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let field = match &self.field {
            Some(p) => Some(config::load_field(p)?),
            None => None,
        };
        let flags = RunConfig {
            field,
            out: self.out.clone(),
            seed: self.seed,
            tol: self.tol,
            grid: self.grid,
            init: self.init.clone(),
            c: self.c,
            max_iters: self.max_iters,
            l_max: self.l_max,
            loops: self.loops,
            nodes: self.nodes,
            well_center: self.well,
            period: self.period,
        };
        let cfg = match &self.config {
            Some(p) => flags.or(RunConfig::load(p)?),
            None => flags,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Invariants(c) => commands::invariants(&c.resolve()?),
        Command::Appendix(c) => commands::appendix(&c.resolve()?),
        Command::Solve(c) => commands::solve(&c.resolve()?),
        Command::MountainPass(c) => commands::mountain_pass(&c.resolve()?),
        Command::Shoot(c) => commands::shoot_cmd(&c.resolve()?),
        Command::Hardy(c) => commands::hardy(&c.resolve()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
