use std::io::{self, Write};
use std::path::PathBuf;
use std::time::Duration;

use clap::Args;
use nopath_core::{prove_with_timeout, Completion, VerdictKind};

use crate::{create, CliError, RunArgs};

#[derive(Args)]
pub struct BenchArgs {
    scenario: PathBuf,
    /// Trials; trial i uses seed `--seed + i`.
    #[arg(long, default_value_t = 30)]
    trials: usize,
    /// Wall-clock budget per trial, in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

struct Row {
    kind: &'static str,
    iterations: usize,
    segmentation: f64,
    total: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn kind_name(kind: VerdictKind) -> &'static str {
    match kind {
        VerdictKind::Infeasible => "Infeasible",
        VerdictKind::FeasibleAtResolution => "FeasibleAtResolution",
        VerdictKind::StartOrGoalInObstacle => "StartOrGoalInObstacle",
    }
}

fn write_csv(mut w: impl Write, seed: u64, rows: &[Row]) -> io::Result<()> {
    writeln!(w, "trial,seed,kind,iterations,segmentation_time,total_time")?;
    for (i, r) in rows.iter().enumerate() {
        writeln!(w, "{},{},{},{},{:.6},{:.6}", i + 1, seed.wrapping_add(i as u64), r.kind, r.iterations, r.segmentation, r.total)?;
    }
    let col = |f: fn(&Row) -> f64| mean_std(&rows.iter().map(f).collect::<Vec<_>>());
    let (im, is) = col(|r| r.iterations as f64);
    let (sm, ss) = col(|r| r.segmentation);
    let (tm, ts) = col(|r| r.total);
    writeln!(w, "mean±std,,,{im:.2}±{is:.2},{sm:.4}±{ss:.4},{tm:.4}±{ts:.4}")
}

pub fn run(args: &BenchArgs) -> Result<u8, CliError> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be >= 1".into()));
    }
    let timeout = match args.timeout {
        Some(t) if !(t.is_finite() && t >= 0.0) => return Err(CliError::Usage(format!("invalid --timeout {t}"))),
        t => t.map(Duration::from_secs_f64),
    };
    let sc = args.run.scenario(&args.scenario)?;
    let params = args.run.params();
    let mut rows = Vec::with_capacity(args.trials);
    let mut code = 0;
    for i in 0..args.trials {
        let row = match prove_with_timeout(&sc, &params, &mut args.run.rng(i as u64), timeout)? {
            Completion::Done(run) => {
                let v = &run.verdict;
                if v.kind == VerdictKind::StartOrGoalInObstacle {
                    code = 1;
                }
                Row { kind: kind_name(v.kind), iterations: v.iterations, segmentation: v.segmentation_secs, total: v.total_secs }
            }
            Completion::TimedOut { iterations, stats, elapsed_secs } => {
                code = code.max(3);
                let segmentation = stats.iter().map(|s| s.segment_secs).sum();
                Row { kind: "Timeout", iterations, segmentation, total: elapsed_secs }
            }
        };
        rows.push(row);
    }
    match &args.out {
        Some(path) => write_csv(create(path)?, args.run.seed, &rows).map_err(|e| CliError::io(path, e))?,
        None => write_csv(io::stdout().lock(), args.run.seed, &rows).map_err(|e| CliError::io("stdout".as_ref(), e))?,
    }
    Ok(code)
}
