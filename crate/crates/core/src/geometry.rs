//! Points, the Euclidean metric, and grid-key arithmetic.
//!
//! Grids are anchored at the origin: a point's cell along axis `j` is
//! `floor(coords[j] / side)`. Cells are 64-bit; any coordinate whose cell
//! would exceed `2^62` in magnitude is rejected rather than wrapped.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Largest tolerated `|coord / side|`.
pub const MAX_CELL: f64 = (1u64 << 62) as f64;

/// Inline storage for cell vectors; covers every dimension we test without
/// touching the allocator.
pub type Cell = SmallVec<[i64; 8]>;

#[derive(Clone, PartialEq)]
pub struct Point {
    pub id: u64,
    pub coords: Arc<[f64]>,
}

impl Point {
    pub fn new(id: u64, coords: Vec<f64>) -> Point {
        Point { id, coords: coords.into() }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}{:?}", self.id, &self.coords[..])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridKey {
    pub cell: Cell,
}

impl GridKey {
    pub fn new(cell: &[i64]) -> GridKey {
        GridKey { cell: Cell::from_slice(cell) }
    }
}

/// A witnessed pair distance. Ordered by `(dist, a, b)`, which is the global
/// tie rule every algorithm in the crate reports under.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairResult {
    pub a: u64,
    pub b: u64,
    pub dist: f64,
}

impl PairResult {
    /// Sentinel that compares above every real pair.
    pub const INFINITE: PairResult = PairResult { a: u64::MAX, b: u64::MAX, dist: f64::INFINITY };

    pub fn new(x: u64, y: u64, dist: f64) -> PairResult {
        if x <= y {
            PairResult { a: x, b: y, dist }
        } else {
            PairResult { a: y, b: x, dist }
        }
    }

    pub fn of(p: &Point, q: &Point) -> PairResult {
        PairResult::new(p.id, q.id, dist(&p.coords, &q.coords))
    }

    pub fn is_finite(&self) -> bool {
        self.dist.is_finite()
    }

    /// The endpoint that is not `id`.
    pub fn other(&self, id: u64) -> u64 {
        if self.a == id {
            self.b
        } else {
            self.a
        }
    }

    pub fn min(self, other: PairResult) -> PairResult {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Eq for PairResult {}

impl PartialOrd for PairResult {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PairResult {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

/// Euclidean distance on raw coordinate slices. Every algorithm goes through
/// this one function so that equal pairs give bitwise-equal distances.
#[inline]
pub fn dist(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut s = 0.0;
    for j in 0..p.len() {
        let d = p[j] - q[j];
        s += d * d;
    }
    s.sqrt()
}

pub fn distance(p: &Point, q: &Point) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    Ok(dist(&p.coords, &q.coords))
}

pub fn check_side(side: f64) -> Result<()> {
    if side > 0.0 && side.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSide(side))
    }
}

/// Fills `out` with the cell of `coords`. Caller guarantees a valid side and
/// coordinates that passed the overflow check.
#[inline]
pub fn cell_into(coords: &[f64], side: f64, out: &mut Cell) {
    out.clear();
    for &c in coords {
        out.push((c / side).floor() as i64);
    }
}

#[inline]
pub fn cell_of(coords: &[f64], side: f64) -> Cell {
    let mut c = Cell::new();
    cell_into(coords, side, &mut c);
    c
}

/// Rejects coordinates whose cell at `side` would not fit comfortably in i64.
pub fn check_coords(coords: &[f64], side: f64) -> Result<()> {
    for &c in coords {
        if !c.is_finite() {
            return Err(Error::Invalid(format!("non-finite coordinate {c}")));
        }
        if (c / side).abs() > MAX_CELL {
            return Err(Error::CoordinateOverflow { coord: c, side });
        }
    }
    Ok(())
}

pub fn grid_key(p: &Point, side: f64) -> Result<GridKey> {
    check_side(side)?;
    check_coords(&p.coords, side)?;
    Ok(GridKey { cell: cell_of(&p.coords, side) })
}

/// Calls `f` on each of the `3^k` cells around `center` (itself included),
/// in lexicographic order of the offset vectors.
#[inline]
pub fn for_each_neighbor_cell<F: FnMut(&[i64])>(center: &[i64], mut f: F) {
    for_each_neighbor_cell_until(center, |c| {
        f(c);
        true
    })
}

/// As [`for_each_neighbor_cell`], stopping once `f` returns false.
#[inline]
pub fn for_each_neighbor_cell_until<F: FnMut(&[i64]) -> bool>(center: &[i64], mut f: F) {
    let k = center.len();
    let mut cur: Cell = center.iter().map(|&c| c - 1).collect();
    loop {
        if !f(&cur) {
            return;
        }
        // odometer increment, last axis fastest
        let mut j = k;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            if cur[j] < center[j] + 1 {
                cur[j] += 1;
                break;
            }
            cur[j] = center[j] - 1;
        }
    }
}

/// Calls `f` on each cell of the `3^k` neighborhood of `coords` at `side`
/// whose box comes within `r` of `coords`. Gaps are shrunk by a rounding
/// margin, so a cell is only skipped when it is certainly too far.
pub fn for_each_cell_near<F: FnMut(&[i64])>(coords: &[f64], side: f64, r: f64, mut f: F) {
    let center = cell_of(coords, side);
    let mut lo: SmallVec<[f64; 8]> = SmallVec::new();
    let mut hi: SmallVec<[f64; 8]> = SmallVec::new();
    for (j, &c) in coords.iter().enumerate() {
        if (c / side).abs() < 4.0e15 {
            let base = center[j] as f64 * side;
            let eps = (c.abs() + side) * 1e-12;
            lo.push((c - base - eps).max(0.0));
            hi.push((base + side - c - eps).max(0.0));
        } else {
            // cells this far out are saturated or too coarse to reason about
            lo.push(0.0);
            hi.push(0.0);
        }
    }
    let r2 = r * r * (1.0 + 1e-12);
    let mut cur = Cell::new();
    near_rec(&center, &lo, &hi, r2, 0.0, &mut cur, &mut f);
}

fn near_rec<F: FnMut(&[i64])>(center: &[i64], lo: &[f64], hi: &[f64], r2: f64, acc: f64, cur: &mut Cell, f: &mut F) {
    let j = cur.len();
    if j == center.len() {
        f(cur);
        return;
    }
    for (off, gap) in [(-1, lo[j]), (0, 0.0), (1, hi[j])] {
        let a = acc + gap * gap;
        if a <= r2 {
            cur.push(center[j] + off);
            near_rec(center, lo, hi, r2, a, cur, f);
            cur.pop();
        }
    }
}

pub fn neighborhood_keys(key: &GridKey) -> Vec<GridKey> {
    let mut out = Vec::with_capacity(3usize.pow(key.cell.len() as u32));
    for_each_neighbor_cell(&key.cell, |c| out.push(GridKey::new(c)));
    out
}

/// True when two cells differ by at most one along every axis.
#[inline]
pub fn cells_adjacent(a: &[i64], b: &[i64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1)
}
