use std::io::{self, Read, Write};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::Value;
use thiserror::Error;

use tomo_core::SearchLimits;

mod commands;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error(transparent)]
    Core(#[from] tomo_core::Error),
    #[error("{0}")]
    Input(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: u8 = 0;
pub const EXIT_NO: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_LIMIT: u8 = 3;

/// Result of one subcommand: a JSON document, its text rendering and the
/// process exit code.
pub struct Outcome {
    pub json: Value,
    pub text: String,
    pub code: u8,
}

#[derive(Parser)]
#[command(name = "tomo", version, about = "Tile-packing tomography toolkit")]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct GlobalOpts {
    /// Maximum number of search nodes.
    #[arg(long, global = true)]
    limit_nodes: Option<u64>,
    /// Maximum number of solutions collected when enumerating.
    #[arg(long, global = true)]
    limit_solutions: Option<u64>,
    /// Wall-clock budget for a search.
    #[arg(long, global = true)]
    timeout_secs: Option<f64>,
    /// Print plain text instead of JSON.
    #[arg(long, global = true)]
    pub ascii: bool,
    /// Worker threads for the packing search.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

impl GlobalOpts {
    pub fn limits(&self) -> CliResult<SearchLimits> {
        let mut limits = SearchLimits::default().with_jobs(self.jobs);
        if let Some(n) = self.limit_nodes {
            limits.max_nodes = n;
        }
        if let Some(n) = self.limit_solutions {
            limits.max_solutions = n;
        }
        if let Some(secs) = self.timeout_secs {
            if !secs.is_finite() || secs < 0.0 {
                return Err(CliError::Input(format!("--timeout-secs must be a non-negative number, got {secs}")));
            }
            limits.timeout = Some(Duration::from_secs_f64(secs));
        }
        Ok(limits)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a tile.
    #[command(subcommand)]
    Tile(TileCommand),
    /// Normalize a tile and report its case.
    Classify(TileArg),
    /// Show the three block packings used by the reduction.
    Gadget(TileArg),
    /// Reduce a 3-color instance to a packing instance for a tile.
    Reduce(ReduceArgs),
    /// Compute the projections of a packing.
    Project(PackingArgs),
    /// Check that a packing is valid for a tile.
    VerifyPacking(PackingArgs),
    /// Solve a packing or 3-color instance.
    Solve(SolveArgs),
    /// List every solution of a packing or 3-color instance.
    Enumerate(InstanceArg),
    /// Draw a packing as text.
    Render(PackingArgs),
    /// Run one of the verification checks.
    #[command(subcommand)]
    Check(CheckCommand),
    /// List canonical tiles up to a bounding box.
    Catalog(CatalogArgs),
}

#[derive(Subcommand)]
pub enum TileCommand {
    /// Size, bounding box and picture.
    Info(TileArg),
    /// Conflicting vectors.
    Conflicts(TileArg),
}

#[derive(Subcommand)]
pub enum CheckCommand {
    /// Affine independence of the gadget projections.
    Requirement1(TileArg),
    /// Every packing of a reduced instance decomposes into gadget blocks.
    Requirement2(ReduceArgs),
    /// Start counts in a row and column subproduct are forced.
    RyserLemma(RyserArgs),
    /// A 3-color instance and its reduction are solvable together.
    Equisat(ReduceArgs),
}

#[derive(Args)]
pub struct TileArg {
    /// Tile JSON file, or `-` for standard input.
    #[arg(long)]
    pub tile: String,
}

#[derive(Args)]
pub struct ReduceArgs {
    /// 3-color instance JSON file, or `-` for standard input.
    #[arg(long)]
    pub instance: String,
    #[arg(long)]
    pub tile: String,
}

#[derive(Args)]
pub struct PackingArgs {
    #[arg(long)]
    pub tile: String,
    /// Packing JSON file, or `-` for standard input.
    #[arg(long)]
    pub packing: String,
}

#[derive(Args)]
pub struct InstanceArg {
    /// Instance JSON file, or `-` for standard input. Files with a `tile`
    /// key are packing instances, others are 3-color instances.
    #[arg(long)]
    pub instance: String,
}

#[derive(Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub instance: InstanceArg,
    /// decide, find, count or enumerate.
    #[arg(long, default_value = "find")]
    pub mode: String,
}

#[derive(Args)]
pub struct RyserArgs {
    /// Packing instance JSON file, or `-` for standard input.
    #[arg(long)]
    pub instance: String,
    /// Row indices of I, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub rows: Vec<usize>,
    /// Column indices of J, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub cols: Vec<usize>,
}

#[derive(Args)]
pub struct CatalogArgs {
    #[arg(long, default_value_t = 3)]
    pub max_h: usize,
    #[arg(long, default_value_t = 3)]
    pub max_w: usize,
    /// Include bar tiles.
    #[arg(long)]
    pub bars: bool,
}

pub fn read_text(path: &str) -> CliResult<String> {
    let mut buf = String::new();
    let res = if path == "-" {
        io::stdin().read_to_string(&mut buf).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|s| buf = s)
    };
    res.map_err(|source| CliError::Io { path: path.to_string(), source })?;
    Ok(buf)
}

pub fn read_json<T: DeserializeOwned>(path: &str) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_string(), source })
}

pub fn parse_value<T: DeserializeOwned>(path: &str, value: Value) -> CliResult<T> {
    serde_json::from_value(value).map_err(|source| CliError::Json { path: path.to_string(), source })
}

fn run(cli: Cli) -> CliResult<Outcome> {
    let opts = &cli.opts;
    match cli.command {
        Command::Tile(TileCommand::Info(a)) => commands::tile_info(&a),
        Command::Tile(TileCommand::Conflicts(a)) => commands::tile_conflicts(&a),
        Command::Classify(a) => commands::classify(&a),
        Command::Gadget(a) => commands::gadget(&a),
        Command::Reduce(a) => commands::reduce(&a),
        Command::Project(a) => commands::project(&a),
        Command::VerifyPacking(a) => commands::verify_packing(&a),
        Command::Solve(a) => commands::solve(&a.instance, &a.mode, opts),
        Command::Enumerate(a) => commands::solve(&a, "enumerate", opts),
        Command::Render(a) => commands::render(&a),
        Command::Check(c) => commands::check(c, opts),
        Command::Catalog(a) => Ok(commands::catalog(&a)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ascii = cli.opts.ascii;
    match run(cli) {
        Ok(out) => {
            let mut stdout = io::stdout().lock();
            let body = if ascii {
                out.text
            } else {
                serde_json::to_string_pretty(&out.json).expect("JSON values always serialize")
            };
            let _ = writeln!(stdout, "{}", body.trim_end());
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("tomo: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
