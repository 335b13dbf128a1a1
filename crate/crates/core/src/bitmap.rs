//! The dense n-dimensional configuration-space bitmap.
//!
//! Cells are linearized first-axis-fastest:
//! `linear = m0 + N0 * (m1 + N1 * (m2 + ...))`. A set bit means free, a
//! cleared bit means obstacle. Bits are cleared with atomic `fetch_and`, so
//! several workers may mark obstacles concurrently; clearing is idempotent.

use std::f64::consts::TAU;
use std::io::{self, Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("index {0} out of range")]
    OutOfRange(String),
    #[error("coordinate {axis} = {value} outside [{lo}, {hi}]")]
    OutOfBounds { axis: usize, value: f64, lo: f64, hi: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("malformed bitmap dump: {0}")]
    MalformedDump(String),
}

/// Resolution, bounds and wrap flags of every axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    dims: Vec<usize>,
    wrap: Vec<bool>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    #[serde(skip)]
    strides: Vec<usize>,
    #[serde(skip)]
    size: usize,
}

impl GridSpec {
    pub fn new(dims: Vec<usize>, wrap: Vec<bool>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GridError> {
        let n = dims.len();
        if n == 0 {
            return Err(GridError::InvalidGrid("zero-dimensional grid".into()));
        }
        if wrap.len() != n || lo.len() != n || hi.len() != n {
            return Err(GridError::InvalidGrid("per-axis lists differ in length".into()));
        }
        let mut strides = Vec::with_capacity(n);
        let mut size: usize = 1;
        for a in 0..n {
            if dims[a] < 2 {
                return Err(GridError::InvalidGrid(format!("axis {a}: resolution must be >= 2")));
            }
            if !(lo[a].is_finite() && hi[a].is_finite() && lo[a] < hi[a]) {
                return Err(GridError::InvalidGrid(format!("axis {a}: lo < hi violated")));
            }
            if wrap[a] && ((hi[a] - lo[a]) - TAU).abs() > 1e-9 {
                return Err(GridError::InvalidGrid(format!("axis {a}: wrapping axis must span 2*pi")));
            }
            strides.push(size);
            size = size
                .checked_mul(dims[a])
                .ok_or_else(|| GridError::InvalidGrid("cell count overflows".into()))?;
        }
        Ok(Self { dims, wrap, lo, hi, strides, size })
    }

    /// Every axis wraps over `[0, 2pi)`.
    pub fn torus(dims: Vec<usize>) -> Result<Self, GridError> {
        let n = dims.len();
        Self::new(dims, vec![true; n], vec![0.0; n], vec![TAU; n])
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn wrap(&self) -> &[bool] {
        &self.wrap
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Total number of cells.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn step(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.dims[axis] as f64
    }

    /// The grid with only the first `k` axes.
    pub fn truncated(&self, k: usize) -> Result<Self, GridError> {
        if k == 0 || k > self.ndim() {
            return Err(GridError::InvalidGrid(format!("cannot keep {k} of {} axes", self.ndim())));
        }
        Self::new(self.dims[..k].to_vec(), self.wrap[..k].to_vec(), self.lo[..k].to_vec(), self.hi[..k].to_vec())
    }

    pub fn lin_to_multi(&self, linear: usize) -> Result<Vec<usize>, GridError> {
        if linear >= self.size {
            return Err(GridError::OutOfRange(format!("linear {linear} >= {}", self.size)));
        }
        let mut out = vec![0; self.ndim()];
        self.lin_to_multi_into(linear, &mut out);
        Ok(out)
    }

    #[inline]
    pub fn lin_to_multi_into(&self, mut linear: usize, out: &mut [usize]) {
        for (m, &d) in out.iter_mut().zip(&self.dims) {
            *m = linear % d;
            linear /= d;
        }
    }

    pub fn multi_to_lin(&self, multi: &[usize]) -> Result<usize, GridError> {
        self.check_multi(multi)?;
        Ok(self.multi_to_lin_unchecked(multi))
    }

    #[inline]
    pub fn multi_to_lin_unchecked(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(m, s)| m * s).sum()
    }

    fn check_multi(&self, multi: &[usize]) -> Result<(), GridError> {
        if multi.len() != self.ndim() || multi.iter().zip(&self.dims).any(|(m, d)| m >= d) {
            return Err(GridError::OutOfRange(format!("{multi:?} for dims {:?}", self.dims)));
        }
        Ok(())
    }

    /// Cell-center configuration: `q_i = lo_i + (m_i + 0.5) * step_i`.
    pub fn cell_to_config(&self, multi: &[usize]) -> Result<Vec<f64>, GridError> {
        self.check_multi(multi)?;
        let mut out = vec![0.0; self.ndim()];
        self.cell_to_config_into(multi, &mut out);
        Ok(out)
    }

    #[inline]
    pub fn cell_to_config_into(&self, multi: &[usize], out: &mut [f64]) {
        for a in 0..self.ndim() {
            out[a] = self.lo[a] + (multi[a] as f64 + 0.5) * self.step(a);
        }
    }

    /// Cell containing `q`; wrapping axes reduce modulo the period first,
    /// non-wrapping axes clamp the upper bound into the last cell.
    pub fn config_to_cell(&self, q: &[f64]) -> Result<Vec<usize>, GridError> {
        if q.len() != self.ndim() {
            return Err(GridError::OutOfRange(format!("{} coordinates for a {}-d grid", q.len(), self.ndim())));
        }
        let mut out = Vec::with_capacity(self.ndim());
        for (a, &v) in q.iter().enumerate() {
            let (lo, hi) = (self.lo[a], self.hi[a]);
            let rel = if self.wrap[a] {
                (v - lo).rem_euclid(hi - lo)
            } else {
                if !(v >= lo && v <= hi) {
                    return Err(GridError::OutOfBounds { axis: a, value: v, lo, hi });
                }
                v - lo
            };
            let m = (rel / self.step(a)).floor();
            out.push((m.max(0.0) as usize).min(self.dims[a] - 1));
        }
        Ok(out)
    }

    /// Moore neighborhood (offsets in `{-1,0,1}^n` minus zero) with wraparound
    /// on wrapping axes; offsets leaving a non-wrapping axis are dropped.
    pub fn neighbors(&self, multi: &[usize]) -> Result<Vec<Vec<usize>>, GridError> {
        self.check_multi(multi)?;
        let mut out: Vec<Vec<usize>> = self
            .moore_neighbors_lin(self.multi_to_lin_unchecked(multi))
            .into_iter()
            .map(|l| self.lin_to_multi(l).expect("in range"))
            .collect();
        out.sort();
        Ok(out)
    }

    /// Linear indices of the Moore neighborhood, deduplicated (a wrapping axis
    /// of size 2 reaches the same cell with -1 and +1).
    pub fn moore_neighbors_lin(&self, linear: usize) -> Vec<usize> {
        let n = self.ndim();
        let mut m = vec![0; n];
        self.lin_to_multi_into(linear, &mut m);
        let total = 3usize.pow(n as u32);
        let mut out = Vec::with_capacity(total - 1);
        'offsets: for code in 0..total {
            let mut c = code;
            let mut lin = 0;
            let mut zero = true;
            for a in 0..n {
                let off = (c % 3) as isize - 1;
                c /= 3;
                if off != 0 {
                    zero = false;
                }
                let d = self.dims[a] as isize;
                let mut v = m[a] as isize + off;
                if v < 0 || v >= d {
                    if !self.wrap[a] {
                        continue 'offsets;
                    }
                    v = v.rem_euclid(d);
                }
                lin += v as usize * self.strides[a];
            }
            if !zero && lin != linear {
                out.push(lin);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Packed C-space bitmap; bit set = free.
pub struct CSpaceBitmap {
    spec: GridSpec,
    words: Vec<AtomicU64>,
}

impl Clone for CSpaceBitmap {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            words: self.words.iter().map(|w| AtomicU64::new(w.load(Ordering::Relaxed))).collect(),
        }
    }
}

impl std::fmt::Debug for CSpaceBitmap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CSpaceBitmap")
            .field("dims", &self.spec.dims)
            .field("free", &self.free_count())
            .finish()
    }
}

impl PartialEq for CSpaceBitmap {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a.load(Ordering::Relaxed) == b.load(Ordering::Relaxed))
    }
}

impl CSpaceBitmap {
    /// All cells free.
    pub fn new(spec: GridSpec) -> Self {
        let size = spec.size();
        let nwords = size.div_ceil(64);
        let words = (0..nwords)
            .map(|w| {
                let remaining = size - w * 64;
                AtomicU64::new(if remaining >= 64 { u64::MAX } else { (1u64 << remaining) - 1 })
            })
            .collect();
        Self { spec, words }
    }

    pub fn from_fn(spec: GridSpec, mut free: impl FnMut(usize) -> bool) -> Self {
        let bm = Self::new(spec);
        for c in 0..bm.size() {
            if !free(c) {
                bm.clear_unchecked(c);
            }
        }
        bm
    }

    /// Builds a bitmap from packed words; bits past the last cell are ignored.
    pub fn from_words(spec: GridSpec, words: Vec<u64>) -> Result<Self, GridError> {
        let size = spec.size();
        if words.len() != size.div_ceil(64) {
            return Err(GridError::InvalidGrid(format!("{} words for {size} cells", words.len())));
        }
        let words = words
            .into_iter()
            .enumerate()
            .map(|(w, v)| {
                let remaining = size - w * 64;
                AtomicU64::new(if remaining >= 64 { v } else { v & ((1u64 << remaining) - 1) })
            })
            .collect();
        Ok(Self { spec, words })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn size(&self) -> usize {
        self.spec.size()
    }

    #[inline]
    pub fn is_free(&self, linear: usize) -> bool {
        self.words[linear >> 6].load(Ordering::Relaxed) >> (linear & 63) & 1 == 1
    }

    pub fn get(&self, linear: usize) -> Result<bool, GridError> {
        if linear >= self.size() {
            return Err(GridError::OutOfRange(format!("linear {linear} >= {}", self.size())));
        }
        Ok(self.is_free(linear))
    }

    /// Marks a cell as obstacle. Returns whether the cell was free before.
    pub fn set_obstacle(&self, linear: usize) -> Result<bool, GridError> {
        if linear >= self.size() {
            return Err(GridError::OutOfRange(format!("linear {linear} >= {}", self.size())));
        }
        Ok(self.clear_unchecked(linear))
    }

    #[inline]
    pub fn clear_unchecked(&self, linear: usize) -> bool {
        let bit = 1u64 << (linear & 63);
        self.words[linear >> 6].fetch_and(!bit, Ordering::Relaxed) & bit != 0
    }

    pub fn free_count(&self) -> usize {
        self.words.iter().map(|w| w.load(Ordering::Relaxed).count_ones() as usize).sum()
    }

    pub fn obstacle_count(&self) -> usize {
        self.size() - self.free_count()
    }

    /// Packed words, bit `c % 64` of word `c / 64` is cell `c`.
    pub fn words(&self) -> Vec<u64> {
        self.words.iter().map(|w| w.load(Ordering::Relaxed)).collect()
    }

    /// True iff every obstacle cell of `self` is also an obstacle in `other`.
    pub fn obstacles_subset_of(&self, other: &CSpaceBitmap) -> bool {
        self.spec == other.spec
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| !a.load(Ordering::Relaxed) & b.load(Ordering::Relaxed) == 0)
    }

    /// Binary dump: little-endian `u64` n, `u64` dims, `u64` wrap flags (0/1),
    /// `f64` lo, `f64` hi, then the cell bits packed LSB-first into
    /// `ceil(size / 8)` bytes, axis 0 fastest.
    pub fn write_dump(&self, mut w: impl Write) -> io::Result<()> {
        let s = &self.spec;
        w.write_all(&(s.ndim() as u64).to_le_bytes())?;
        for &d in &s.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &f in &s.wrap {
            w.write_all(&u64::from(f).to_le_bytes())?;
        }
        for &v in &s.lo {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in &s.hi {
            w.write_all(&v.to_le_bytes())?;
        }
        let nbytes = self.size().div_ceil(8);
        let mut bytes = Vec::with_capacity(nbytes);
        for word in self.words() {
            bytes.extend_from_slice(&word.to_le_bytes());
        }
        bytes.truncate(nbytes);
        w.write_all(&bytes)
    }

    pub fn to_dump(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_dump(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_dump(mut r: impl Read) -> Result<Self, GridError> {
        let bad = |e: io::Error| GridError::MalformedDump(e.to_string());
        let mut buf = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 8], GridError> {
            r.read_exact(&mut buf).map_err(bad)?;
            Ok(buf)
        };
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        if n == 0 || n > 64 {
            return Err(GridError::MalformedDump(format!("implausible dimension {n}")));
        }
        let mut dims = Vec::with_capacity(n);
        for _ in 0..n {
            dims.push(u64::from_le_bytes(next(&mut r)?) as usize);
        }
        let mut wrap = Vec::with_capacity(n);
        for _ in 0..n {
            wrap.push(match u64::from_le_bytes(next(&mut r)?) {
                0 => false,
                1 => true,
                v => return Err(GridError::MalformedDump(format!("wrap flag {v}"))),
            });
        }
        let mut lo = Vec::with_capacity(n);
        for _ in 0..n {
            lo.push(f64::from_le_bytes(next(&mut r)?));
        }
        let mut hi = Vec::with_capacity(n);
        for _ in 0..n {
            hi.push(f64::from_le_bytes(next(&mut r)?));
        }
        let spec = GridSpec::new(dims, wrap, lo, hi)?;
        let size = spec.size();
        let mut bytes = vec![0u8; size.div_ceil(8)];
        r.read_exact(&mut bytes).map_err(bad)?;
        let words = bytes
            .chunks(8)
            .enumerate()
            .map(|(w, chunk)| {
                let mut b = [0u8; 8];
                b[..chunk.len()].copy_from_slice(chunk);
                let remaining = size - w * 64;
                let mask = if remaining >= 64 { u64::MAX } else { (1u64 << remaining) - 1 };
                AtomicU64::new(u64::from_le_bytes(b) & mask)
            })
            .collect();
        Ok(Self { spec, words })
    }

    /// Hex SHA-256 of the binary dump.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_dump());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// A 2D slice over `axes = (horizontal, vertical)` with every other axis
    /// held at `fixed[axis]`. Returns `(width, height, free)` row-major.
    pub fn slice_2d(&self, axes: (usize, usize), fixed: &[usize]) -> Result<(usize, usize, Vec<bool>), GridError> {
        let s = &self.spec;
        let (ax, ay) = axes;
        if ax >= s.ndim() || ay >= s.ndim() || ax == ay || fixed.len() != s.ndim() {
            return Err(GridError::OutOfRange(format!("slice axes {axes:?}")));
        }
        let (w, h) = (s.dims[ax], s.dims[ay]);
        let mut m = fixed.to_vec();
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                m[ax] = x;
                m[ay] = y;
                out.push(self.is_free(s.multi_to_lin(&m)?));
            }
        }
        Ok((w, h, out))
    }
}

/// Writes a binary (P5) PGM. `gray` is row-major with row 0 at the bottom,
/// so the vertical axis points up in the image.
pub fn write_pgm(mut w: impl Write, width: usize, height: usize, gray: &[u8]) -> io::Result<()> {
    assert_eq!(gray.len(), width * height);
    write!(w, "P5\n{width} {height}\n255\n")?;
    for row in (0..height).rev() {
        w.write_all(&gray[row * width..(row + 1) * width])?;
    }
    Ok(())
}
