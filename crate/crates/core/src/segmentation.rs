//! Connected-component labeling of the free cells of a [`CSpaceBitmap`].
//!
//! Two-pass union-find over the raster. Wrapping axes are handled inside the
//! labeler by merging across the wrap boundary, so comparing the start and
//! goal labels is a complete connectivity query.
//!
//! With `threads > 1` the grid is cut into slabs along the slowest axis. Each
//! slab is labeled independently, then the slab seams are merged. Unions
//! always keep the smaller index as root, so every component's root is its
//! first cell in raster order and the canonical labeling is identical for any
//! slab count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitmap::{CSpaceBitmap, GridSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SegmentError {
    #[error("{0} cell lies in an obstacle")]
    StartOrGoalInObstacle(&'static str),
    #[error("cell {0} out of range")]
    OutOfRange(usize),
}

/// Adjacency used for free-space paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    /// `2n` neighbors: one axis changes by one.
    #[default]
    Faces,
    /// `3^n - 1` neighbors: any axes change by at most one.
    Moore,
}

impl std::str::FromStr for Connectivity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "faces" | "face" => Ok(Connectivity::Faces),
            "moore" => Ok(Connectivity::Moore),
            other => Err(format!("unknown connectivity '{other}' (expected faces or moore)")),
        }
    }
}

/// Per-cell component labels: 0 for obstacles, `1..=component_count` for free cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelField {
    labels: Vec<u32>,
    component_count: u32,
}

impl LabelField {
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, linear: usize) -> u32 {
        self.labels[linear]
    }

    pub fn component_count(&self) -> u32 {
        self.component_count
    }

    /// Gray levels spread over `[64, 255]` for components, 0 for obstacles.
    pub fn gray_levels(&self) -> Vec<u8> {
        let k = self.component_count.max(1) as f64;
        self.labels
            .iter()
            .map(|&l| if l == 0 { 0 } else { (64.0 + 191.0 * (l as f64) / k).round() as u8 })
            .collect()
    }
}

/// Half of the neighborhood: offsets whose highest nonzero axis is -1. Each
/// entry lists `(axis, delta)` for its nonzero components.
fn half_offsets(n: usize, conn: Connectivity) -> Vec<Vec<(usize, isize)>> {
    match conn {
        Connectivity::Faces => (0..n).map(|a| vec![(a, -1)]).collect(),
        Connectivity::Moore => {
            let total = 3usize.pow(n as u32);
            let mut out = Vec::new();
            for code in 0..total {
                let mut c = code;
                let comps: Vec<(usize, isize)> = (0..n)
                    .filter_map(|a| {
                        let d = (c % 3) as isize - 1;
                        c /= 3;
                        (d != 0).then_some((a, d))
                    })
                    .collect();
                if comps.last().is_some_and(|&(_, d)| d == -1) {
                    out.push(comps);
                }
            }
            out
        }
    }
}

/// Neighbor of the cell at `lin`/`m` under `offset`, honoring wrap flags.
#[inline]
fn step(spec: &GridSpec, lin: usize, m: &[usize], offset: &[(usize, isize)]) -> Option<usize> {
    let dims = spec.dims();
    let strides = spec.strides();
    let mut t = lin as isize;
    for &(a, d) in offset {
        let v = m[a] as isize + d;
        let s = strides[a] as isize;
        if v < 0 {
            if !spec.wrap()[a] {
                return None;
            }
            t += (dims[a] as isize - 1) * s;
        } else if v >= dims[a] as isize {
            if !spec.wrap()[a] {
                return None;
            }
            t -= (dims[a] as isize - 1) * s;
        } else {
            t += d * s;
        }
    }
    Some(t as usize)
}

const NONE: u32 = u32::MAX;

/// Union-find over a window `[base, base + parent.len())` of the global index space.
struct Forest<'a> {
    parent: &'a mut [u32],
    base: usize,
}

impl Forest<'_> {
    #[inline]
    fn find(&mut self, x: u32) -> u32 {
        let mut x = x;
        loop {
            let p = self.parent[x as usize - self.base];
            if p == x {
                return x;
            }
            let gp = self.parent[p as usize - self.base];
            self.parent[x as usize - self.base] = gp;
            x = gp;
        }
    }

    #[inline]
    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra < rb {
            self.parent[rb as usize - self.base] = ra;
        } else if rb < ra {
            self.parent[ra as usize - self.base] = rb;
        }
    }
}

fn advance(m: &mut [usize], dims: &[usize]) {
    for (v, &d) in m.iter_mut().zip(dims) {
        *v += 1;
        if *v < d {
            return;
        }
        *v = 0;
    }
}

/// Labels one slab of layers `[first, last)` along the slowest axis. Offsets
/// stepping below `first` on that axis are left to the seam merge.
fn label_slab(bm: &CSpaceBitmap, offsets: &[Vec<(usize, isize)>], first: usize, parent: &mut [u32]) {
    let spec = bm.spec();
    let n = spec.ndim();
    let top = n - 1;
    let base = first * spec.strides()[top];
    let mut m = vec![0; n];
    spec.lin_to_multi_into(base, &mut m);
    for (k, p) in parent.iter_mut().enumerate() {
        *p = if bm.is_free(base + k) { (base + k) as u32 } else { NONE };
    }
    let mut forest = Forest { parent, base };
    for k in 0..forest.parent.len() {
        let c = base + k;
        if forest.parent[k] != NONE {
            for off in offsets {
                let crosses = off.last().is_some_and(|&(a, _)| a == top) && m[top] == first;
                if crosses {
                    continue;
                }
                if let Some(t) = step(spec, c, &m, off) {
                    if bm.is_free(t) {
                        forest.union(c as u32, t as u32);
                    }
                }
            }
        }
        advance(&mut m, spec.dims());
    }
}

/// Labels free components with `threads` slabs (1 = purely sequential).
pub fn segment_with_threads(bm: &CSpaceBitmap, conn: Connectivity, threads: usize) -> LabelField {
    let spec = bm.spec();
    let size = spec.size();
    assert!(size < NONE as usize, "grid too large for 32-bit labels");
    let n = spec.ndim();
    let top = n - 1;
    let layers = spec.dims()[top];
    let layer = spec.strides()[top];
    let offsets = half_offsets(n, conn);

    let slabs = threads.clamp(1, layers);
    let bounds: Vec<usize> = (0..=slabs).map(|s| s * layers / slabs).collect();
    let mut parent = vec![NONE; size];
    {
        let mut chunks = Vec::with_capacity(slabs);
        let mut rest = parent.as_mut_slice();
        for s in 0..slabs {
            let (head, tail) = rest.split_at_mut((bounds[s + 1] - bounds[s]) * layer);
            chunks.push((bounds[s], head));
            rest = tail;
        }
        if slabs == 1 {
            for (first, chunk) in chunks {
                label_slab(bm, &offsets, first, chunk);
            }
        } else {
            chunks
                .into_par_iter()
                .for_each(|(first, chunk)| label_slab(bm, &offsets, first, chunk));
        }
    }

    // Seams: the first layer of every slab against its predecessor layer,
    // including the wrap seam between layer 0 and the last layer.
    let mut forest = Forest { parent: &mut parent, base: 0 };
    let seam_offsets: Vec<&Vec<(usize, isize)>> =
        offsets.iter().filter(|o| o.last().is_some_and(|&(a, _)| a == top)).collect();
    let mut m = vec![0; n];
    for &first in &bounds[..slabs] {
        if first == 0 && !spec.wrap()[top] {
            continue;
        }
        let start = first * layer;
        spec.lin_to_multi_into(start, &mut m);
        for c in start..start + layer {
            if bm.is_free(c) {
                for off in &seam_offsets {
                    if let Some(t) = step(spec, c, &m, off) {
                        if bm.is_free(t) {
                            forest.union(c as u32, t as u32);
                        }
                    }
                }
            }
            advance(&mut m, spec.dims());
        }
    }

    let mut labels = vec![0u32; size];
    let mut count = 0u32;
    for c in 0..size {
        if forest.parent[c] == NONE {
            continue;
        }
        let r = forest.find(c as u32) as usize;
        if r == c {
            count += 1;
            labels[c] = count;
        } else {
            labels[c] = labels[r];
        }
    }
    LabelField { labels, component_count: count }
}

/// Sequential labeling.
pub fn segment(bm: &CSpaceBitmap, conn: Connectivity) -> LabelField {
    segment_with_threads(bm, conn, 1)
}

/// True when start and goal lie in different components.
pub fn segment_check(labels: &LabelField, start: usize, goal: usize) -> Result<bool, SegmentError> {
    let get = |c: usize| labels.labels.get(c).copied().ok_or(SegmentError::OutOfRange(c));
    let (ls, lg) = (get(start)?, get(goal)?);
    if ls == 0 {
        return Err(SegmentError::StartOrGoalInObstacle("start"));
    }
    if lg == 0 {
        return Err(SegmentError::StartOrGoalInObstacle("goal"));
    }
    Ok(ls != lg)
}
