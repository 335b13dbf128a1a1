//! Ground truth for tests: exhaustive bitmap construction, breadth-first
//! connectivity, and the bitmap equivalence check.
//!
//! Nothing here is on the prover's path. The search code deliberately does
//! not reuse the labeler or the grid's neighbor helpers so that it can serve
//! as an independent reference for them.

use std::collections::{BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bitmap::{CSpaceBitmap, GridSpec};
use crate::kinematics::{check_unchecked, Obstacle, RobotModel};
use crate::scenario::Scenario;
use crate::segmentation::Connectivity;

/// Largest grid [`brute_force_bitmap`] will enumerate.
pub const MAX_BRUTE_FORCE_CELLS: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("grid of {0} cells is too large to enumerate")]
    TooLarge(usize),
    #[error("{0} cell lies in an obstacle")]
    StartOrGoalInObstacle(&'static str),
    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),
}

/// Collision-checks every cell center.
pub fn brute_force_bitmap(robot: &RobotModel, obstacles: &[Obstacle], grid: &GridSpec) -> Result<CSpaceBitmap, OracleError> {
    let size = grid.size();
    if size > MAX_BRUTE_FORCE_CELLS {
        return Err(OracleError::TooLarge(size));
    }
    let n = grid.ndim();
    let words: Vec<u64> = (0..size.div_ceil(64))
        .into_par_iter()
        .map(|w| {
            let mut m = vec![0; n];
            let mut q = vec![0.0; n];
            let mut word = 0u64;
            for bit in 0..64 {
                let c = w * 64 + bit;
                if c >= size {
                    break;
                }
                grid.lin_to_multi_into(c, &mut m);
                grid.cell_to_config_into(&m, &mut q);
                if !check_unchecked(robot, &q, obstacles).colliding {
                    word |= 1 << bit;
                }
            }
            word
        })
        .collect();
    Ok(CSpaceBitmap::from_words(grid.clone(), words).expect("word count matches"))
}

/// [`brute_force_bitmap`] for the effective (possibly truncated) scenario.
pub fn brute_force_scenario(scenario: &Scenario) -> Result<CSpaceBitmap, OracleError> {
    let s = scenario.effective().map_err(|e| OracleError::IncompatibleGrids(e.to_string()))?;
    brute_force_bitmap(&s.robot, &s.obstacles, &s.grid)
}

fn unravel(dims: &[usize], mut c: usize) -> Vec<usize> {
    dims.iter()
        .map(|&d| {
            let v = c % d;
            c /= d;
            v
        })
        .collect()
}

fn ravel(dims: &[usize], m: &[usize]) -> usize {
    m.iter().rev().zip(dims.iter().rev()).fold(0, |acc, (&v, &d)| acc * d + v)
}

/// All cells reachable in one step, computed directly from multi-indices.
fn adjacent(spec: &GridSpec, c: usize, conn: Connectivity) -> Vec<usize> {
    let dims = spec.dims();
    let n = dims.len();
    let m = unravel(dims, c);
    let mut out = Vec::new();
    let deltas: Vec<Vec<i64>> = match conn {
        Connectivity::Faces => (0..n)
            .flat_map(|a| {
                [-1i64, 1].into_iter().map(move |d| {
                    let mut v = vec![0i64; n];
                    v[a] = d;
                    v
                })
            })
            .collect(),
        Connectivity::Moore => {
            let mut all = vec![vec![]];
            for _ in 0..n {
                all = all
                    .into_iter()
                    .flat_map(|p: Vec<i64>| {
                        (-1i64..=1).map(move |d| {
                            let mut q = p.clone();
                            q.push(d);
                            q
                        })
                    })
                    .collect();
            }
            all.into_iter().filter(|v| v.iter().any(|&d| d != 0)).collect()
        }
    };
    'next: for delta in deltas {
        let mut t = m.clone();
        for a in 0..n {
            let v = m[a] as i64 + delta[a];
            let d = dims[a] as i64;
            t[a] = if (0..d).contains(&v) {
                v as usize
            } else if spec.wrap()[a] {
                v.rem_euclid(d) as usize
            } else {
                continue 'next;
            };
        }
        out.push(ravel(dims, &t));
    }
    out
}

/// Breadth-first search for a free path between two cells.
pub fn bfs_connected(bm: &CSpaceBitmap, start: usize, goal: usize, conn: Connectivity) -> Result<bool, OracleError> {
    if !bm.is_free(start) {
        return Err(OracleError::StartOrGoalInObstacle("start"));
    }
    if !bm.is_free(goal) {
        return Err(OracleError::StartOrGoalInObstacle("goal"));
    }
    let mut seen = vec![false; bm.size()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(c) = queue.pop_front() {
        if c == goal {
            return Ok(true);
        }
        for t in adjacent(bm.spec(), c, conn) {
            if !seen[t] && bm.is_free(t) {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    Ok(false)
}

/// Reference component labeling by repeated flood fill.
pub fn flood_labels(bm: &CSpaceBitmap, conn: Connectivity) -> (Vec<u32>, u32) {
    let mut labels = vec![0u32; bm.size()];
    let mut count = 0;
    for s in 0..bm.size() {
        if labels[s] != 0 || !bm.is_free(s) {
            continue;
        }
        count += 1;
        labels[s] = count;
        let mut queue = VecDeque::from([s]);
        while let Some(c) = queue.pop_front() {
            for t in adjacent(bm.spec(), c, conn) {
                if labels[t] == 0 && bm.is_free(t) {
                    labels[t] = count;
                    queue.push_back(t);
                }
            }
        }
    }
    (labels, count)
}

/// True when two labelings describe the same partition (0 = obstacle in both).
pub fn same_partition(a: &[u32], b: &[u32]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = std::collections::HashMap::new();
    let mut bwd = std::collections::HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        if (x == 0) != (y == 0) {
            return false;
        }
        *fwd.entry(x).or_insert(y) == y && *bwd.entry(y).or_insert(x) == x
    })
}

/// Outcome of comparing a coarse bitmap against a fine stand-in for the
/// continuous configuration space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Equivalence {
    Equivalent,
    /// Violated conditions, ascending: 1 component counts differ, 2 a coarse
    /// component does not map onto exactly one distinct fine component,
    /// 3 start cell is an obstacle, 4 goal cell is an obstacle.
    Violation(Vec<u8>),
}

impl Equivalence {
    pub fn violates(&self, condition: u8) -> bool {
        matches!(self, Equivalence::Violation(v) if v.contains(&condition))
    }
}

/// Checks whether `coarse` preserves the connectivity structure of `fine`.
/// Each fine axis must be an integer multiple of the coarse one over the same
/// range; a coarse cell covers the block of fine cells inside it.
pub fn check_equivalence(
    fine: &CSpaceBitmap,
    coarse: &CSpaceBitmap,
    start: &[f64],
    goal: &[f64],
    conn: Connectivity,
) -> Result<Equivalence, OracleError> {
    let (fs, cs) = (fine.spec(), coarse.spec());
    if fs.ndim() != cs.ndim() {
        return Err(OracleError::IncompatibleGrids("dimension mismatch".into()));
    }
    let mut ratio = Vec::with_capacity(fs.ndim());
    for a in 0..fs.ndim() {
        if fs.dims()[a] % cs.dims()[a] != 0 {
            return Err(OracleError::IncompatibleGrids(format!("axis {a}: {} is not a multiple of {}", fs.dims()[a], cs.dims()[a])));
        }
        if fs.wrap()[a] != cs.wrap()[a] || fs.lo()[a] != cs.lo()[a] || fs.hi()[a] != cs.hi()[a] {
            return Err(OracleError::IncompatibleGrids(format!("axis {a}: ranges differ")));
        }
        ratio.push(fs.dims()[a] / cs.dims()[a]);
    }
    let (fine_labels, fine_count) = flood_labels(fine, conn);
    let (coarse_labels, coarse_count) = flood_labels(coarse, conn);
    let mut violated = Vec::new();

    if fine_count != coarse_count {
        violated.push(1);
    }

    let mut images: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); coarse_count as usize + 1];
    let block: usize = ratio.iter().product();
    for c in 0..coarse.size() {
        let lc = coarse_labels[c];
        if lc == 0 {
            continue;
        }
        let m = unravel(cs.dims(), c);
        for k in 0..block {
            let off = unravel(&ratio, k);
            let f: Vec<usize> = m.iter().zip(&ratio).zip(&off).map(|((&mc, &r), &o)| mc * r + o).collect();
            let lf = fine_labels[ravel(fs.dims(), &f)];
            if lf != 0 {
                images[lc as usize].insert(lf);
            }
        }
    }
    let mut used = BTreeSet::new();
    let maps_one_to_one = images[1..].iter().all(|img| img.len() == 1 && used.insert(*img.first().unwrap()));
    if !maps_one_to_one {
        violated.push(2);
    }

    let cell = |q: &[f64]| cs.config_to_cell(q).map(|m| ravel(cs.dims(), &m));
    let bad_query = |e: crate::bitmap::GridError| OracleError::IncompatibleGrids(e.to_string());
    if !coarse.is_free(cell(start).map_err(bad_query)?) {
        violated.push(3);
    }
    if !coarse.is_free(cell(goal).map_err(bad_query)?) {
        violated.push(4);
    }

    Ok(if violated.is_empty() { Equivalence::Equivalent } else { Equivalence::Violation(violated) })
}
