//! Hashed grid of point buckets at a fixed box side.
//!
//! The key map is an open-addressing table (linear probing, backward-shift
//! deletion) indexing a dense vector of boxes. Keys are hashed with a fixed
//! multiply-xor mix so that layouts, and therefore iteration orders, repeat
//! across runs. The table doubles once it passes 0.7 load.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{cell_into, cell_of, check_coords, check_side, dist, for_each_neighbor_cell, Cell, GridKey, Point};
use crate::ids::{IdMap, IdSet};

const EMPTY: u32 = u32::MAX;
const MAX_LOAD: f64 = 0.7;
/// Below this many items the parallel paths cost more than they save.
pub(crate) const PAR_CUTOFF: usize = 2048;

#[inline]
fn hash_cell(cell: &[i64]) -> u64 {
    let mut h: u64 = 0x243f_6a88_85a3_08d3;
    for &c in cell {
        h ^= c as u64;
        h = h.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        h ^= h >> 31;
    }
    h ^= h >> 29;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^ (h >> 32)
}

struct GridBox {
    cell: Cell,
    members: Vec<Point>,
    /// epoch in the high half, member count for that epoch in the low half
    stamp: AtomicU64,
}

/// Token returned by [`GridDict::stamp_members`]; valid until the next stamp.
#[derive(Clone, Copy, Debug)]
pub struct Stamp(u32);

pub struct GridDict {
    side: f64,
    table: Vec<u32>,
    boxes: Vec<GridBox>,
    points: IdMap<Point>,
    epoch: AtomicU32,
}

impl GridDict {
    pub fn new(side: f64) -> Result<GridDict> {
        check_side(side)?;
        Ok(GridDict {
            side,
            table: vec![EMPTY; 16],
            boxes: Vec::new(),
            points: IdMap::default(),
            epoch: AtomicU32::new(0),
        })
    }

    pub fn build(points: &[Point], side: f64) -> Result<GridDict> {
        let mut g = GridDict::new(side)?;
        g.insert_batch(points)?;
        Ok(g)
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn num_boxes(&self) -> usize {
        self.boxes.len()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.points.contains_key(&id)
    }

    pub fn get(&self, id: u64) -> Option<&Point> {
        self.points.get(&id)
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.points.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.points.keys().copied()
    }

    /// `(cell, occupants)` for every non-empty box.
    pub fn boxes(&self) -> impl Iterator<Item = (&[i64], &[Point])> {
        self.boxes.iter().map(|b| (b.cell.as_slice(), b.members.as_slice()))
    }

    pub fn key_of(&self, p: &Point) -> GridKey {
        GridKey { cell: cell_of(&p.coords, self.side) }
    }

    #[inline]
    fn slot_of(&self, cell: &[i64]) -> (usize, bool) {
        let mask = self.table.len() - 1;
        let mut s = hash_cell(cell) as usize & mask;
        loop {
            let b = self.table[s];
            if b == EMPTY {
                return (s, false);
            }
            if self.boxes[b as usize].cell.as_slice() == cell {
                return (s, true);
            }
            s = (s + 1) & mask;
        }
    }

    #[inline]
    fn find_box(&self, cell: &[i64]) -> Option<&GridBox> {
        let (s, found) = self.slot_of(cell);
        if found {
            Some(&self.boxes[self.table[s] as usize])
        } else {
            None
        }
    }

    /// Occupants of the box at `cell` (empty if no such box).
    pub fn bucket(&self, cell: &[i64]) -> &[Point] {
        self.find_box(cell).map(|b| b.members.as_slice()).unwrap_or(&[])
    }

    fn grow(&mut self) {
        let cap = self.table.len() * 2;
        let mut table = vec![EMPTY; cap];
        let mask = cap - 1;
        for (i, b) in self.boxes.iter().enumerate() {
            let mut s = hash_cell(&b.cell) as usize & mask;
            while table[s] != EMPTY {
                s = (s + 1) & mask;
            }
            table[s] = i as u32;
        }
        self.table = table;
    }

    fn box_index_or_insert(&mut self, cell: &[i64]) -> usize {
        if (self.boxes.len() + 1) as f64 > MAX_LOAD * self.table.len() as f64 {
            self.grow();
        }
        let (s, found) = self.slot_of(cell);
        if found {
            return self.table[s] as usize;
        }
        let idx = self.boxes.len();
        self.table[s] = idx as u32;
        self.boxes.push(GridBox { cell: Cell::from_slice(cell), members: Vec::new(), stamp: AtomicU64::new(0) });
        idx
    }

    /// Removes the table entry at slot `s`, shifting later probe-chain entries back.
    fn remove_slot(&mut self, mut s: usize) {
        let mask = self.table.len() - 1;
        self.table[s] = EMPTY;
        let mut j = s;
        loop {
            j = (j + 1) & mask;
            let b = self.table[j];
            if b == EMPTY {
                return;
            }
            let home = hash_cell(&self.boxes[b as usize].cell) as usize & mask;
            // entry at j may move to s if its home does not lie cyclically in (s, j]
            let in_range = if s <= j { home > s && home <= j } else { home > s || home <= j };
            if !in_range {
                self.table[s] = b;
                self.table[j] = EMPTY;
                s = j;
            }
        }
    }

    fn remove_box(&mut self, idx: usize) {
        let (s, found) = self.slot_of(&self.boxes[idx].cell.clone());
        debug_assert!(found);
        self.remove_slot(s);
        let last = self.boxes.len() - 1;
        if idx != last {
            let (ls, lfound) = self.slot_of(&self.boxes[last].cell.clone());
            debug_assert!(lfound);
            self.table[ls] = idx as u32;
        }
        self.boxes.swap_remove(idx);
    }

    pub fn insert_batch(&mut self, pts: &[Point]) -> Result<()> {
        let mut seen = IdSet::default();
        for p in pts {
            if self.points.contains_key(&p.id) || !seen.insert(p.id) {
                return Err(Error::DuplicateId(p.id));
            }
            check_coords(&p.coords, self.side)?;
        }
        let side = self.side;
        let cells: Vec<Cell> = if pts.len() >= PAR_CUTOFF {
            pts.par_iter().map(|p| cell_of(&p.coords, side)).collect()
        } else {
            pts.iter().map(|p| cell_of(&p.coords, side)).collect()
        };
        self.points.reserve(pts.len());
        for (p, c) in pts.iter().zip(&cells) {
            let b = self.box_index_or_insert(c);
            self.boxes[b].members.push(p.clone());
            self.points.insert(p.id, p.clone());
        }
        Ok(())
    }

    pub fn delete_batch(&mut self, ids: &[u64]) -> Result<()> {
        let mut seen = IdSet::default();
        for &id in ids {
            if !self.points.contains_key(&id) || !seen.insert(id) {
                return Err(Error::UnknownId(id));
            }
        }
        let mut cell = Cell::new();
        let mut emptied = Vec::new();
        for &id in ids {
            let p = self.points.remove(&id).expect("checked above");
            cell_into(&p.coords, self.side, &mut cell);
            let (s, found) = self.slot_of(&cell);
            debug_assert!(found);
            let bi = self.table[s] as usize;
            let m = &mut self.boxes[bi].members;
            let pos = m.iter().position(|q| q.id == id).expect("point is in its own box");
            m.swap_remove(pos);
            if m.is_empty() {
                emptied.push(cell.clone());
            }
        }
        for c in emptied {
            let (s, found) = self.slot_of(&c);
            if found {
                let bi = self.table[s] as usize;
                if self.boxes[bi].members.is_empty() {
                    self.remove_box(bi);
                }
            }
        }
        Ok(())
    }

    /// Visits every stored point other than `exclude` in the `3^k` boxes
    /// around the cell of `coords`. Stops early when `f` returns false.
    #[inline]
    pub fn visit_neighborhood<'a, F: FnMut(&'a Point) -> bool>(&'a self, coords: &[f64], exclude: u64, mut f: F) {
        let center = cell_of(coords, self.side);
        let mut go = true;
        for_each_neighbor_cell(&center, |c| {
            if !go {
                return;
            }
            if let Some(b) = self.find_box(c) {
                for q in &b.members {
                    if q.id != exclude && !f(q) {
                        go = false;
                        return;
                    }
                }
            }
        });
    }

    /// Same as [`visit_neighborhood`](Self::visit_neighborhood) but hands whole boxes to `f`.
    #[inline]
    pub fn visit_neighbor_boxes<'a, F: FnMut(&'a [i64], &'a [Point])>(&'a self, coords: &[f64], mut f: F) {
        let center = cell_of(coords, self.side);
        for_each_neighbor_cell(&center, |c| {
            if let Some(b) = self.find_box(c) {
                f(&b.cell, &b.members);
            }
        });
    }

    pub fn neighborhood(&self, p: &Point) -> Vec<Point> {
        let mut out = Vec::new();
        self.visit_neighborhood(&p.coords, p.id, |q| {
            out.push(q.clone());
            true
        });
        out
    }

    pub fn is_sparse(&self, p: &Point) -> bool {
        self.is_sparse_at(&p.coords, p.id)
    }

    #[inline]
    pub fn is_sparse_at(&self, coords: &[f64], exclude: u64) -> bool {
        let mut empty = true;
        self.visit_neighborhood(coords, exclude, |_| {
            empty = false;
            false
        });
        empty
    }

    /// Closest neighborhood occupant, ties to the smaller id.
    pub fn nearest_in_neighborhood(&self, p: &Point) -> Option<(Point, f64)> {
        let mut best: Option<(&Point, f64)> = None;
        self.visit_neighborhood(&p.coords, p.id, |q| {
            let d = dist(&p.coords, &q.coords);
            match best {
                Some((b, bd)) if (bd, b.id) <= (d, q.id) => {}
                _ => best = Some((q, d)),
            }
            true
        });
        best.map(|(q, d)| (q.clone(), d))
    }

    /// Counts, per box, how many of `ids` it holds. Counters are tagged with a
    /// fresh epoch, so earlier stamps are invalidated without clearing anything.
    /// Ids not stored in the grid are ignored.
    pub fn stamp_members(&self, ids: &[u64]) -> Stamp {
        let e = self.epoch.fetch_add(1, Ordering::Relaxed).wrapping_add(1);
        let tag = (e as u64) << 32;
        let bump = |id: &u64| {
            if let Some(p) = self.points.get(id) {
                let c = cell_of(&p.coords, self.side);
                let b = self.find_box(&c).expect("stored point has a box");
                let mut cur = b.stamp.load(Ordering::Relaxed);
                loop {
                    let next = if cur & !0xffff_ffff == tag { cur + 1 } else { tag | 1 };
                    match b.stamp.compare_exchange_weak(cur, next, Ordering::AcqRel, Ordering::Relaxed) {
                        Ok(_) => break,
                        Err(v) => cur = v,
                    }
                }
            }
        };
        if ids.len() >= PAR_CUTOFF {
            ids.par_iter().for_each(bump);
        } else {
            ids.iter().for_each(bump);
        }
        Stamp(e)
    }

    fn stamped_count(b: &GridBox, s: Stamp) -> usize {
        let v = b.stamp.load(Ordering::Acquire);
        if (v >> 32) as u32 == s.0 {
            (v & 0xffff_ffff) as usize
        } else {
            0
        }
    }

    /// Number of occupants of the box at `cell` that were not stamped.
    pub fn box_outsiders(&self, cell: &[i64], s: Stamp) -> usize {
        match self.find_box(cell) {
            Some(b) => b.members.len() - Self::stamped_count(b, s),
            None => 0,
        }
    }

    /// True iff every occupant of the box at `key` was among the stamped ids.
    pub fn box_only_contains(&self, key: &GridKey, s: Stamp) -> bool {
        self.box_outsiders(&key.cell, s) == 0
    }

    /// Direct subset test; the reference for the counter scheme.
    pub fn box_subset_of(&self, key: &GridKey, ids: &IdSet) -> bool {
        self.bucket(&key.cell).iter().all(|p| ids.contains(&p.id))
    }

    /// Audits bucket placement and the table; returns a description of the
    /// first problem found.
    pub fn audit(&self) -> std::result::Result<(), String> {
        let mut total = 0;
        for (i, b) in self.boxes.iter().enumerate() {
            if b.members.is_empty() {
                return Err(format!("empty box {:?} persists", b.cell));
            }
            let (s, found) = self.slot_of(&b.cell);
            if !found || self.table[s] as usize != i {
                return Err(format!("box {:?} unreachable from table", b.cell));
            }
            for p in &b.members {
                if cell_of(&p.coords, self.side) != b.cell {
                    return Err(format!("point {} stored in wrong box", p.id));
                }
                if !self.points.contains_key(&p.id) {
                    return Err(format!("point {} missing from id map", p.id));
                }
            }
            total += b.members.len();
        }
        if total != self.points.len() {
            return Err(format!("bucket occupancy {} != count {}", total, self.points.len()));
        }
        Ok(())
    }
}

impl std::fmt::Debug for GridDict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridDict")
            .field("side", &self.side)
            .field("points", &self.points.len())
            .field("boxes", &self.boxes.len())
            .finish()
    }
}
