//! Incremental construction of the obstacle region.
//!
//! Cells are drawn uniformly without replacement from a [`SampleSet`],
//! collision-checked at their centers, and every hit is amplified: the cause
//! reported by the collision checker identifies a whole family of cells that
//! must collide as well ([`speedup`]), and a few random Moore neighbors of the
//! hit are checked too.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;
use thiserror::Error;

use crate::bitmap::{CSpaceBitmap, GridSpec};
use crate::kinematics::{check_unchecked, CollisionCause, CollisionReport, Obstacle, RobotModel};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SamplerError {
    #[error("every cell has been visited")]
    Exhausted,
    #[error("invalid sampler parameters: {0}")]
    InvalidParams(String),
    #[error("grid of {0} cells exceeds the 32-bit sample pool")]
    TooLarge(usize),
}

const REMOVED: u32 = u32::MAX;

/// Pool of unvisited cells with O(1) uniform draw and O(1) removal.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pool: Vec<u32>,
    slot: Vec<u32>,
}

impl SampleSet {
    pub fn new(size: usize) -> Result<Self, SamplerError> {
        if size >= REMOVED as usize {
            return Err(SamplerError::TooLarge(size));
        }
        Ok(Self { pool: (0..size as u32).collect(), slot: (0..size as u32).collect() })
    }

    pub fn len(&self) -> usize {
        self.pool.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.is_empty()
    }

    #[inline]
    pub fn contains(&self, cell: usize) -> bool {
        self.slot[cell] != REMOVED
    }

    /// Swap-removes `cell`; returns whether it was still in the pool.
    #[inline]
    pub fn remove(&mut self, cell: usize) -> bool {
        let s = self.slot[cell];
        if s == REMOVED {
            return false;
        }
        self.take_slot(s as usize);
        true
    }

    #[inline]
    fn take_slot(&mut self, s: usize) -> usize {
        let cell = self.pool.swap_remove(s);
        if s < self.pool.len() {
            self.slot[self.pool[s] as usize] = s as u32;
        }
        self.slot[cell as usize] = REMOVED;
        cell as usize
    }

    /// Uniform draw; the drawn cell leaves the pool.
    pub fn random_sample(&mut self, rng: &mut impl Rng) -> Result<usize, SamplerError> {
        if self.pool.is_empty() {
            return Err(SamplerError::Exhausted);
        }
        let s = rng.gen_range(0..self.pool.len());
        Ok(self.take_slot(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SamplerParams {
    /// Minimum number of directly sampled obstacle hits per iteration.
    pub ns: usize,
    /// Random neighbors checked around every hit.
    pub d: usize,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self { ns: 100, d: 5 }
    }
}

impl SamplerParams {
    pub fn validate(&self, ndim: usize) -> Result<(), SamplerError> {
        if self.ns == 0 {
            return Err(SamplerError::InvalidParams("ns must be >= 1".into()));
        }
        let max_d = 3usize.saturating_pow(ndim as u32) - 1;
        if self.d > max_d {
            return Err(SamplerError::InvalidParams(format!("d = {} exceeds the {max_d} Moore neighbors", self.d)));
        }
        Ok(())
    }
}

/// Counters for one call of [`sample_cobstacle`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SampleStats {
    /// Directly sampled cells that collided.
    pub hits: usize,
    /// Neighbor checks that collided.
    pub neighbor_hits: usize,
    /// Collision checks performed.
    pub checks: usize,
    /// Cells newly marked by propagation, excluding the checked cells themselves.
    pub propagated: usize,
    /// The pool ran dry before `ns` hits were collected.
    pub exhausted: bool,
}

/// Axes held fixed by a collision cause; every cell agreeing with the hit on
/// these axes collides too. `None` means only the hit cell itself is known.
fn fixed_axes(robot: &RobotModel, cause: CollisionCause) -> Option<Vec<usize>> {
    match (robot, cause) {
        (RobotModel::Chain(_), CollisionCause::ObstacleHit { link, .. }) => Some((0..=link).collect()),
        (RobotModel::Chain(_), CollisionCause::SelfHit { first, second }) => Some((first..=second).collect()),
        (RobotModel::Rigid(_), CollisionCause::BaseInObstacle { .. }) => Some(vec![0, 1]),
        _ => None,
    }
}

/// Marks the hit cell and every cell implied by its collision cause as
/// obstacle and drops them from the pool. Returns the number of cells that
/// changed from free to obstacle.
pub fn speedup(
    bm: &CSpaceBitmap,
    ss: &mut SampleSet,
    robot: &RobotModel,
    q_multi: &[usize],
    report: &CollisionReport,
) -> usize {
    let spec = bm.spec();
    let hit = spec.multi_to_lin_unchecked(q_multi);
    let mut marked = usize::from(bm.clear_unchecked(hit));
    ss.remove(hit);
    let Some(fixed) = fixed_axes(robot, report.cause) else {
        return marked;
    };
    let n = spec.ndim();
    let free: Vec<usize> = (0..n).filter(|a| !fixed.contains(a)).collect();
    let base: usize = fixed.iter().map(|&a| q_multi[a] * spec.strides()[a]).sum();
    let mut counter = vec![0usize; free.len()];
    loop {
        let lin = base + free.iter().zip(&counter).map(|(&a, &m)| m * spec.strides()[a]).sum::<usize>();
        if bm.clear_unchecked(lin) {
            marked += 1;
        }
        ss.remove(lin);
        // Odometer over the free axes.
        let mut k = 0;
        loop {
            if k == free.len() {
                return marked;
            }
            counter[k] += 1;
            if counter[k] < spec.dims()[free[k]] {
                break;
            }
            counter[k] = 0;
            k += 1;
        }
    }
}

/// Collision check at the center of `cell`.
pub fn check_cell(spec: &GridSpec, robot: &RobotModel, obstacles: &[Obstacle], cell: usize) -> (Vec<usize>, CollisionReport) {
    let mut m = vec![0; spec.ndim()];
    let mut q = vec![0.0; spec.ndim()];
    spec.lin_to_multi_into(cell, &mut m);
    spec.cell_to_config_into(&m, &mut q);
    let report = check_unchecked(robot, &q, obstacles);
    (m, report)
}

/// Up to `d` distinct random Moore neighbors of `cell`; neighbors already
/// visited are skipped, not replaced. Returned cells are removed from the pool.
fn pick_neighbors(spec: &GridSpec, ss: &mut SampleSet, cell: usize, d: usize, rng: &mut impl Rng) -> Vec<usize> {
    if d == 0 {
        return Vec::new();
    }
    let all = spec.moore_neighbors_lin(cell);
    let k = d.min(all.len());
    index::sample(rng, all.len(), k)
        .into_iter()
        .map(|i| all[i])
        .filter(|&c| ss.remove(c))
        .collect()
}

/// One sampling round: draw until `params.ns` direct hits are collected or the
/// pool is exhausted. Free samples stay free and are never drawn again.
pub fn sample_cobstacle(
    bm: &CSpaceBitmap,
    ss: &mut SampleSet,
    robot: &RobotModel,
    obstacles: &[Obstacle],
    params: &SamplerParams,
    rng: &mut impl Rng,
) -> SampleStats {
    let spec = bm.spec().clone();
    let mut stats = SampleStats::default();
    while stats.hits < params.ns {
        let cell = match ss.random_sample(rng) {
            Ok(c) => c,
            Err(_) => {
                stats.exhausted = true;
                break;
            }
        };
        let (m, report) = check_cell(&spec, robot, obstacles, cell);
        stats.checks += 1;
        if !report.colliding {
            continue;
        }
        stats.hits += 1;
        stats.propagated += speedup(bm, ss, robot, &m, &report).saturating_sub(1);
        for nb in pick_neighbors(&spec, ss, cell, params.d, rng) {
            let (nm, nrep) = check_cell(&spec, robot, obstacles, nb);
            stats.checks += 1;
            if nrep.colliding {
                stats.neighbor_hits += 1;
                stats.propagated += speedup(bm, ss, robot, &nm, &nrep).saturating_sub(1);
            }
        }
    }
    stats
}

/// Batch-parallel variant: batches of `batch` cells are drawn under exclusive
/// access to the pool, collision-checked on `pool`'s workers, and applied in
/// draw order, so results are deterministic for a given seed. A batch may
/// contain cells that an earlier hit of the same batch already propagated
/// to; they are checked anyway, and marking them again is a no-op.
#[allow(clippy::too_many_arguments)]
pub fn sample_cobstacle_batched(
    bm: &CSpaceBitmap,
    ss: &mut SampleSet,
    robot: &RobotModel,
    obstacles: &[Obstacle],
    params: &SamplerParams,
    rng: &mut impl Rng,
    pool: &ThreadPool,
    batch: usize,
) -> SampleStats {
    let spec = bm.spec().clone();
    let mut stats = SampleStats::default();
    let check_all = |cells: &[usize]| -> Vec<(Vec<usize>, CollisionReport)> {
        pool.install(|| cells.par_iter().map(|&c| check_cell(&spec, robot, obstacles, c)).collect())
    };
    while stats.hits < params.ns {
        let mut drawn = Vec::with_capacity(batch);
        while drawn.len() < batch.max(1) {
            match ss.random_sample(rng) {
                Ok(c) => drawn.push(c),
                Err(_) => {
                    stats.exhausted = true;
                    break;
                }
            }
        }
        if drawn.is_empty() {
            break;
        }
        stats.checks += drawn.len();
        let mut followups = Vec::new();
        for (&cell, (m, report)) in drawn.iter().zip(check_all(&drawn)) {
            if report.colliding {
                stats.hits += 1;
                stats.propagated += speedup(bm, ss, robot, &m, &report).saturating_sub(1);
                followups.extend(pick_neighbors(&spec, ss, cell, params.d, rng));
            }
        }
        stats.checks += followups.len();
        for (m, report) in check_all(&followups) {
            if report.colliding {
                stats.neighbor_hits += 1;
                stats.propagated += speedup(bm, ss, robot, &m, &report).saturating_sub(1);
            }
        }
        if stats.exhausted {
            break;
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point2, Polygon2};
    use crate::kinematics::{Link, SerialChain};
    use crate::oracle::brute_force_bitmap;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain(n: usize) -> RobotModel {
        RobotModel::Chain(SerialChain::new(Point2::default(), vec![Link::new(1.0); n]).unwrap())
    }

    fn hit(link: usize) -> CollisionReport {
        CollisionReport { colliding: true, cause: CollisionCause::ObstacleHit { link, obstacle: 0 } }
    }

    #[test]
    fn single_cell_pool() {
        let mut ss = SampleSet::new(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(ss.random_sample(&mut rng).unwrap(), 0);
        assert!(ss.is_empty());
        assert_eq!(ss.random_sample(&mut rng), Err(SamplerError::Exhausted));
    }

    #[test]
    fn draws_without_replacement() {
        let mut ss = SampleSet::new(1000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        ss.remove(10);
        ss.remove(999);
        assert!(!ss.remove(10));
        let mut seen = vec![0u8; 1000];
        while let Ok(c) = ss.random_sample(&mut rng) {
            seen[c] += 1;
        }
        assert_eq!(seen.iter().filter(|&&v| v == 1).count(), 998);
        assert_eq!(seen[10] + seen[999], 0);
    }

    #[test]
    fn first_draw_is_uniform() {
        // Pearson chi-square over 100 bins, 99 degrees of freedom.
        // The 0.999 quantile of chi2(99) is 148.23.
        let mut counts = [0usize; 100];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = 100_000;
        for _ in 0..trials {
            let mut ss = SampleSet::new(100).unwrap();
            counts[ss.random_sample(&mut rng).unwrap()] += 1;
        }
        let expected = trials as f64 / 100.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 148.23, "chi2 = {chi2}");
    }

    #[test]
    fn params_validation() {
        assert!(SamplerParams { ns: 0, d: 0 }.validate(2).is_err());
        assert!(SamplerParams { ns: 1, d: 9 }.validate(2).is_err());
        assert!(SamplerParams { ns: 1, d: 8 }.validate(2).is_ok());
        assert!(SamplerParams::default().validate(4).is_ok());
    }

    #[test]
    fn suffix_volume() {
        let spec = GridSpec::torus(vec![36; 4]).unwrap();
        let robot = chain(4);
        let bm = CSpaceBitmap::new(spec.clone());
        let mut ss = SampleSet::new(spec.size()).unwrap();
        assert_eq!(speedup(&bm, &mut ss, &robot, &[3, 7, 11, 20], &hit(0)), 36 * 36 * 36);
        assert_eq!(ss.len(), spec.size() - 36 * 36 * 36);
        let bm = CSpaceBitmap::new(spec.clone());
        let mut ss = SampleSet::new(spec.size()).unwrap();
        assert_eq!(speedup(&bm, &mut ss, &robot, &[3, 7, 11, 20], &hit(3)), 1);
        let self_hit = CollisionReport { colliding: true, cause: CollisionCause::SelfHit { first: 1, second: 3 } };
        let bm = CSpaceBitmap::new(spec.clone());
        assert_eq!(speedup(&bm, &mut ss, &robot, &[3, 7, 11, 20], &self_hit), 36);
        // Marking again changes nothing.
        assert_eq!(speedup(&bm, &mut ss, &robot, &[3, 7, 11, 20], &self_hit), 0);
    }

    #[test]
    fn rigid_rotation_sweep() {
        let body = Polygon2::rect(-0.2, -0.1, 0.2, 0.1).unwrap();
        let robot = RobotModel::Rigid(crate::kinematics::RigidBody::new(body, Point2::default()).unwrap());
        let spec = GridSpec::new(vec![10, 10, 24], vec![false, false, true], vec![0.0, 0.0, 0.0], vec![1.0, 1.0, std::f64::consts::TAU]).unwrap();
        let bm = CSpaceBitmap::new(spec.clone());
        let mut ss = SampleSet::new(spec.size()).unwrap();
        let base = CollisionReport { colliding: true, cause: CollisionCause::BaseInObstacle { obstacle: 0 } };
        assert_eq!(speedup(&bm, &mut ss, &robot, &[2, 3, 5], &base), 24);
        let body_hit = CollisionReport { colliding: true, cause: CollisionCause::ObstacleHit { link: 0, obstacle: 0 } };
        assert_eq!(speedup(&bm, &mut ss, &robot, &[4, 3, 5], &body_hit), 1);
    }

    fn scene() -> (RobotModel, Vec<Obstacle>) {
        let obstacles = vec![
            Obstacle::new("a", Polygon2::rect(0.6, 0.3, 1.1, 1.6).unwrap()).unwrap(),
            Obstacle::new("b", Polygon2::rect(-2.6, -0.5, -1.5, 0.3).unwrap()).unwrap(),
        ];
        (chain(3), obstacles)
    }

    #[test]
    fn empty_workspace_exhausts() {
        // A single link with no obstacles can never collide.
        let robot = chain(1);
        let spec1 = GridSpec::torus(vec![30]).unwrap();
        let bm = CSpaceBitmap::new(spec1.clone());
        let mut ss = SampleSet::new(spec1.size()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let stats = sample_cobstacle(&bm, &mut ss, &robot, &[], &SamplerParams::default(), &mut rng);
        assert!(stats.exhausted);
        assert_eq!(stats.hits, 0);
        assert_eq!(stats.checks, 30);
        assert_eq!(bm.free_count(), 30);
    }

    #[test]
    fn everything_collides() {
        let robot = chain(2);
        let cover = vec![Obstacle::new("all", Polygon2::rect(-5.0, -5.0, 5.0, 5.0).unwrap()).unwrap()];
        let spec = GridSpec::torus(vec![36, 36]).unwrap();
        let bm = CSpaceBitmap::new(spec.clone());
        let mut ss = SampleSet::new(spec.size()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = SamplerParams { ns: 10, d: 0 };
        let stats = sample_cobstacle(&bm, &mut ss, &robot, &cover, &params, &mut rng);
        assert_eq!(stats.hits, 10);
        assert_eq!(stats.checks, 10);
        // Link 0 hits: whole q1 columns of 36 cells each.
        assert_eq!(bm.obstacle_count(), 360);
    }

    #[test]
    fn marked_cells_are_true_obstacles() {
        let (robot, obstacles) = scene();
        let spec = GridSpec::torus(vec![12, 12, 12]).unwrap();
        let truth = brute_force_bitmap(&robot, &obstacles, &spec).unwrap();
        for seed in 0..5 {
            let bm = CSpaceBitmap::new(spec.clone());
            let mut ss = SampleSet::new(spec.size()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..3 {
                let stats = sample_cobstacle(&bm, &mut ss, &robot, &obstacles, &SamplerParams { ns: 20, d: 5 }, &mut rng);
                assert!(truth_contains(&truth, &bm), "unsound marks");
                if !stats.exhausted {
                    assert!(stats.hits >= 20);
                }
            }
        }
    }

    /// Every obstacle of `bm` is an obstacle of `truth`.
    fn truth_contains(truth: &CSpaceBitmap, bm: &CSpaceBitmap) -> bool {
        (0..bm.size()).all(|c| bm.is_free(c) || !truth.is_free(c))
    }

    #[test]
    fn seeded_runs_are_deterministic() {
        let (robot, obstacles) = scene();
        let spec = GridSpec::torus(vec![12, 12, 12]).unwrap();
        let run = |seed| {
            let bm = CSpaceBitmap::new(spec.clone());
            let mut ss = SampleSet::new(spec.size()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_cobstacle(&bm, &mut ss, &robot, &obstacles, &SamplerParams { ns: 30, d: 5 }, &mut rng);
            bm.to_dump()
        };
        assert_eq!(run(8), run(8));
    }

    #[test]
    fn batched_is_sound_and_deterministic() {
        let (robot, obstacles) = scene();
        let spec = GridSpec::torus(vec![12, 12, 12]).unwrap();
        let truth = brute_force_bitmap(&robot, &obstacles, &spec).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let run = |seed| {
            let bm = CSpaceBitmap::new(spec.clone());
            let mut ss = SampleSet::new(spec.size()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let stats = sample_cobstacle_batched(&bm, &mut ss, &robot, &obstacles, &SamplerParams { ns: 30, d: 5 }, &mut rng, &pool, 16);
            assert!(stats.hits >= 30 || stats.exhausted);
            bm
        };
        let a = run(3);
        assert!(truth_contains(&truth, &a));
        assert_eq!(a.to_dump(), run(3).to_dump());
    }
}
