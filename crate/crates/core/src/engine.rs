//! The prover loop: sample obstacle cells, segment the bitmap, stop as soon
//! as start and goal fall into different components or every cell has been
//! visited.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bitmap::{CSpaceBitmap, GridError, GridSpec};
use crate::kinematics::check_unchecked;
use crate::sampler::{sample_cobstacle, sample_cobstacle_batched, SampleSet, SamplerError, SamplerParams};
use crate::scenario::{Scenario, ScenarioError};
use crate::segmentation::{segment_with_threads, Connectivity, LabelField};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid engine parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EngineParams {
    pub sampler: SamplerParams,
    pub connectivity: Connectivity,
    /// Values above 1 switch the sampler to its batch-parallel mode and split
    /// segmentation into slabs. Labels do not depend on the thread count.
    pub threads: usize,
    /// Segment after every k-th sampling round (and always at exhaustion).
    pub segment_every: usize,
    /// Cells drawn per parallel batch; 0 picks `8 * threads`.
    pub batch_size: usize,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self { sampler: SamplerParams::default(), connectivity: Connectivity::Faces, threads: 1, segment_every: 1, batch_size: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerdictKind {
    Infeasible,
    FeasibleAtResolution,
    StartOrGoalInObstacle,
}

/// One sampling round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub hits: usize,
    pub neighbor_hits: usize,
    pub checks: usize,
    pub propagated: usize,
    /// Obstacle cells in the bitmap after this round.
    pub obstacle_cells: usize,
    /// Component count when the bitmap was segmented after this round.
    pub components: Option<u32>,
    pub sample_secs: f64,
    pub segment_secs: f64,
    pub elapsed_secs: f64,
}

impl IterationRecord {
    /// Everything except the timings, for determinism comparisons.
    pub fn counts(&self) -> (usize, usize, usize, usize, usize, usize, Option<u32>) {
        (self.iteration, self.hits, self.neighbor_hits, self.checks, self.propagated, self.obstacle_cells, self.components)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub iterations: usize,
    pub stats: Vec<IterationRecord>,
    pub grid: GridSpec,
    /// SHA-256 of the bitmap dump at termination.
    pub digest: String,
    pub components: Option<u32>,
    pub start_cell: usize,
    pub goal_cell: usize,
    pub start_label: Option<u32>,
    pub goal_label: Option<u32>,
    /// `"start"` or `"goal"` for [`VerdictKind::StartOrGoalInObstacle`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocked: Option<&'static str>,
    pub segmentation_secs: f64,
    pub total_secs: f64,
}

impl Verdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

/// A finished run: the verdict plus the final bitmap and, when the last round
/// was segmented, its label field.
#[derive(Debug, Clone)]
pub struct Run {
    pub verdict: Verdict,
    pub bitmap: CSpaceBitmap,
    pub labels: Option<LabelField>,
}

/// Result of a run with a wall-clock budget.
#[derive(Debug, Clone)]
pub enum Completion {
    Done(Box<Run>),
    TimedOut { iterations: usize, stats: Vec<IterationRecord>, elapsed_secs: f64 },
}

/// Runs the prover until it reaches a verdict.
pub fn prove_infeasibility(scenario: &Scenario, params: &EngineParams, rng: &mut impl Rng) -> Result<Run, EngineError> {
    match prove_with_timeout(scenario, params, rng, None)? {
        Completion::Done(run) => Ok(*run),
        Completion::TimedOut { .. } => unreachable!("no timeout was set"),
    }
}

/// Like [`prove_infeasibility`] but gives up once `timeout` has elapsed; the
/// budget is checked between sampling rounds.
pub fn prove_with_timeout(
    scenario: &Scenario,
    params: &EngineParams,
    rng: &mut impl Rng,
    timeout: Option<Duration>,
) -> Result<Completion, EngineError> {
    let t0 = Instant::now();
    let sc = scenario.effective()?;
    let spec = sc.grid.clone();
    params.sampler.validate(spec.ndim())?;
    if params.threads == 0 || params.segment_every == 0 {
        return Err(EngineError::InvalidParams("threads and segment_every must be >= 1".into()));
    }
    let start = sc.start_cell()?;
    let goal = sc.goal_cell()?;
    let bm = CSpaceBitmap::new(spec.clone());

    let finish = |kind, bm: CSpaceBitmap, labels: Option<LabelField>, stats: Vec<IterationRecord>, blocked| {
        let verdict = Verdict {
            kind,
            iterations: stats.len(),
            grid: spec.clone(),
            digest: bm.digest(),
            components: labels.as_ref().map(|l| l.component_count()),
            start_cell: start,
            goal_cell: goal,
            start_label: labels.as_ref().map(|l| l.label(start)),
            goal_label: labels.as_ref().map(|l| l.label(goal)),
            blocked,
            segmentation_secs: stats.iter().map(|s| s.segment_secs).sum(),
            total_secs: t0.elapsed().as_secs_f64(),
            stats,
        };
        Ok(Completion::Done(Box::new(Run { verdict, bitmap: bm, labels })))
    };

    // The grid models every cell by its center, so that is what must be free.
    for (name, cell) in [("start", start), ("goal", goal)] {
        let m = spec.lin_to_multi(cell)?;
        let q = spec.cell_to_config(&m)?;
        if check_unchecked(&sc.robot, &q, &sc.obstacles).colliding {
            return finish(VerdictKind::StartOrGoalInObstacle, bm, None, Vec::new(), Some(name));
        }
    }

    let pool = if params.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(params.threads)
            .build()
            .map_err(|e| EngineError::InvalidParams(e.to_string()))?;
        Some(pool)
    } else {
        None
    };
    let batch = if params.batch_size == 0 { 8 * params.threads } else { params.batch_size };

    let mut ss = SampleSet::new(spec.size())?;
    let mut stats: Vec<IterationRecord> = Vec::new();
    loop {
        if let Some(limit) = timeout {
            if t0.elapsed() >= limit {
                return Ok(Completion::TimedOut { iterations: stats.len(), stats, elapsed_secs: t0.elapsed().as_secs_f64() });
            }
        }
        let ts = Instant::now();
        let s = match &pool {
            Some(pool) => sample_cobstacle_batched(&bm, &mut ss, &sc.robot, &sc.obstacles, &params.sampler, rng, pool, batch),
            None => sample_cobstacle(&bm, &mut ss, &sc.robot, &sc.obstacles, &params.sampler, rng),
        };
        let sample_secs = ts.elapsed().as_secs_f64();
        let iteration = stats.len() + 1;
        let mut record = IterationRecord {
            iteration,
            hits: s.hits,
            neighbor_hits: s.neighbor_hits,
            checks: s.checks,
            propagated: s.propagated,
            obstacle_cells: bm.obstacle_count(),
            components: None,
            sample_secs,
            segment_secs: 0.0,
            elapsed_secs: 0.0,
        };
        for (name, cell) in [("start", start), ("goal", goal)] {
            if !bm.is_free(cell) {
                record.elapsed_secs = t0.elapsed().as_secs_f64();
                stats.push(record);
                return finish(VerdictKind::StartOrGoalInObstacle, bm, None, stats, Some(name));
            }
        }
        if !s.exhausted && !iteration.is_multiple_of(params.segment_every) {
            record.elapsed_secs = t0.elapsed().as_secs_f64();
            stats.push(record);
            continue;
        }
        let tg = Instant::now();
        let labels = match &pool {
            Some(pool) => pool.install(|| segment_with_threads(&bm, params.connectivity, params.threads)),
            None => segment_with_threads(&bm, params.connectivity, 1),
        };
        record.segment_secs = tg.elapsed().as_secs_f64();
        record.components = Some(labels.component_count());
        record.elapsed_secs = t0.elapsed().as_secs_f64();
        stats.push(record);
        if labels.label(start) != labels.label(goal) {
            return finish(VerdictKind::Infeasible, bm, Some(labels), stats, None);
        }
        if s.exhausted {
            return finish(VerdictKind::FeasibleAtResolution, bm, Some(labels), stats, None);
        }
    }
}

/// Per-iteration stats as CSV with a header row.
pub fn write_stats_csv(mut w: impl Write, stats: &[IterationRecord]) -> io::Result<()> {
    writeln!(w, "iteration,hits,neighbor_hits,checks,propagated,obstacle_cells,components,sample_secs,segment_secs,elapsed_secs")?;
    for r in stats {
        let comps = r.components.map(|c| c.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{:.6},{:.6},{:.6}",
            r.iteration, r.hits, r.neighbor_hits, r.checks, r.propagated, r.obstacle_cells, comps, r.sample_secs, r.segment_secs, r.elapsed_secs
        )?;
    }
    Ok(())
}
