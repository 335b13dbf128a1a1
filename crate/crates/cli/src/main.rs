//! `nopath`: prove that no motion plan exists, benchmark the prover, render
//! bitmaps.
//!
//! Exit codes: 0 infeasible, 2 feasible at this resolution, 3 timed out
//! (bench only), 1 on errors, including a start or goal inside an obstacle.

mod bench;
mod render;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nopath_core::{
    prove_infeasibility, write_stats_csv, Connectivity, EngineError, EngineParams, Run, SamplerParams, Scenario, ScenarioError,
    VerdictKind,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{0}-d grid needs a slice: pass --fixed with one index per axis")]
    UnsupportedDimension(usize),
    #[error("bitmap dump: {0}")]
    Dump(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Scenario(_) => "scenario",
            CliError::Engine(_) => "engine",
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
            CliError::UnsupportedDimension(_) => "unsupported_dimension",
            CliError::Dump(_) => "dump",
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

#[derive(Parser)]
#[command(name = "nopath", version, about = "Prove motion-planning infeasibility on a C-space bitmap")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the prover once and print the verdict as JSON.
    Prove {
        scenario: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Repeat the prover with consecutive seeds and print per-trial CSV.
    Bench(bench::BenchArgs),
    /// Write the bitmap and its component labels as PGM images.
    Render(render::RenderArgs),
}

#[derive(Args, Clone)]
pub struct RunArgs {
    /// Minimum direct obstacle hits per sampling round.
    #[arg(long, default_value_t = 100)]
    pub ns: usize,
    /// Random neighbors checked around each hit.
    #[arg(long, default_value_t = 5)]
    pub d: usize,
    /// Grid resolution: one value for every axis or a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    pub resolution: Option<Vec<usize>>,
    #[arg(long, default_value = "faces")]
    pub connectivity: Connectivity,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Segment only after every k-th sampling round.
    #[arg(long, default_value_t = 1)]
    pub segment_every: usize,
    /// Search only the first k links of a serial chain.
    #[arg(long)]
    pub truncate_links: Option<usize>,
    /// Write the final bitmap as a binary dump.
    #[arg(long)]
    pub export_bitmap: Option<PathBuf>,
    /// Write per-iteration stats as CSV.
    #[arg(long)]
    pub stats_csv: Option<PathBuf>,
}

impl RunArgs {
    pub fn params(&self) -> EngineParams {
        EngineParams {
            sampler: SamplerParams { ns: self.ns, d: self.d },
            connectivity: self.connectivity,
            threads: self.threads,
            segment_every: self.segment_every,
            batch_size: 0,
        }
    }

    /// Loads the scenario and applies the truncation and resolution overrides.
    pub fn scenario(&self, path: &Path) -> Result<Scenario, CliError> {
        let mut sc = Scenario::load(path)?;
        if let Some(k) = self.truncate_links {
            sc = Scenario::new(sc.robot, sc.obstacles, sc.start, sc.goal, sc.grid, Some(k))?;
        }
        if let Some(res) = &self.resolution {
            let n = sc.grid.ndim();
            let res = match sc.truncate_to_links {
                // A list for the searched axes only; the rest keep their size.
                Some(k) if res.len() == k && k != n && k != 1 => {
                    res.iter().copied().chain(sc.grid.dims()[k..].iter().copied()).collect()
                }
                _ => res.clone(),
            };
            sc = sc.with_resolution(&res)?;
        }
        Ok(sc)
    }

    pub fn rng(&self, offset: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(offset))
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

/// Writes the optional bitmap dump and stats log of a finished run.
pub fn export(run: &Run, args: &RunArgs) -> Result<(), CliError> {
    if let Some(path) = &args.export_bitmap {
        run.bitmap.write_dump(create(path)?).map_err(|e| CliError::io(path, e))?;
    }
    if let Some(path) = &args.stats_csv {
        write_stats_csv(create(path)?, &run.verdict.stats).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

pub fn exit_code(kind: VerdictKind) -> u8 {
    match kind {
        VerdictKind::Infeasible => 0,
        VerdictKind::FeasibleAtResolution => 2,
        VerdictKind::StartOrGoalInObstacle => 1,
    }
}

fn prove(path: &Path, args: &RunArgs) -> Result<u8, CliError> {
    let sc = args.scenario(path)?;
    let run = prove_infeasibility(&sc, &args.params(), &mut args.rng(0))?;
    export(&run, args)?;
    println!("{}", run.verdict.to_json());
    Ok(exit_code(run.verdict.kind))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Prove { scenario, run } => prove(scenario, run),
        Command::Bench(args) => bench::run(args),
        Command::Render(args) => render::run(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let msg = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
