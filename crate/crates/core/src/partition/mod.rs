//! The randomized sparse partition.
//!
//! Level `i` holds a point set `S_i`, a random pivot `p_i` with its nearest
//! neighbor `q_i` at distance `d_i`, and a grid of side `d_i / 6k` over `S_i`.
//! Points alone in their `3^k` box neighborhood form the sparse set `S'_i`;
//! the rest make up `S_{i+1}`. The sparse sets partition the input and the
//! closest pair is found among the last `k + 1` of them.
//!
//! Levels are numbered from 0 here. Restricted distances are truncated at
//! `d_i`: an owner in `S'_i` only looks at candidates within `d_i`, which
//! always contains the closest pair and lets a query at level `i` probe the
//! level-`j` sparse index (side `d_j >= d_i`) with a single box neighborhood.

mod engine;
mod heaps;
mod update;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{check_coords, dist, PairResult, Point};
use crate::heap::{BatchHeap, HeapifyMode};
use crate::ids::{IdMap, IdSet};

pub(crate) use engine::Engine;

const PAR_MIN: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    /// One heap of restricted distances per level.
    #[default]
    Theoretical,
    /// A single heap of nearest-neighbor distances over one deep level.
    Simplified,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Theoretical => "theoretical",
            Mode::Simplified => "simplified",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theoretical" | "theory" => Ok(Mode::Theoretical),
            "simplified" | "simple" => Ok(Mode::Simplified),
            _ => Err(Error::Invalid(format!("unknown mode '{s}'"))),
        }
    }
}

/// How per-level heaps learn about changed sparse sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum HeapProtocol {
    /// Receptor levels pull changes once their inputs are final.
    #[default]
    Pull,
    /// Each level pushes its changes to its receptors right after its grid
    /// update; kept as the reference for `Pull`.
    Naive,
}

#[derive(Clone, Copy, Debug)]
pub struct Config {
    pub mode: Mode,
    pub protocol: HeapProtocol,
    /// Dimension from which neighborhoods are served by kd-trees.
    pub kd_threshold: usize,
    pub heapify: HeapifyMode,
}

impl Default for Config {
    fn default() -> Self {
        Config { mode: Mode::Theoretical, protocol: HeapProtocol::Pull, kd_threshold: 5, heapify: HeapifyMode::Sync }
    }
}

impl Config {
    pub fn with_mode(mode: Mode) -> Self {
        Config { mode, ..Config::default() }
    }
}

/// Net changes to one sparse set during the current batch.
#[derive(Default, Debug)]
pub(crate) struct Delta {
    // +1 added, -1 removed; an add and a remove of the same point cancel
    net: IdMap<(Point, i8)>,
}

impl Delta {
    fn add(&mut self, p: &Point) {
        self.flip(p, 1);
    }

    fn remove(&mut self, p: &Point) {
        self.flip(p, -1);
    }

    fn flip(&mut self, p: &Point, s: i8) {
        match self.net.get(&p.id) {
            Some(&(_, t)) if t == -s => {
                self.net.remove(&p.id);
            }
            Some(_) => debug_assert!(false, "point {} changed twice the same way", p.id),
            None => {
                self.net.insert(p.id, (p.clone(), s));
            }
        }
    }

    pub fn added(&self) -> impl Iterator<Item = &Point> {
        self.net.values().filter(|(_, s)| *s > 0).map(|(p, _)| p)
    }

    pub fn removed(&self) -> impl Iterator<Item = &Point> {
        self.net.values().filter(|(_, s)| *s < 0).map(|(p, _)| p)
    }

    pub fn is_empty(&self) -> bool {
        self.net.is_empty()
    }

    pub fn clear(&mut self) {
        self.net.clear();
    }
}

#[derive(Debug)]
pub(crate) struct Level {
    pub pivot: Point,
    pub witness: Point,
    pub d: f64,
    /// `S_i` at side `d_i / 6k`
    pub s: Engine,
    /// `S'_i`
    pub sparse: IdSet,
    /// `S'_i` at side `d_i`, for restricted distances (theoretical mode)
    pub coarse: Option<Engine>,
    pub delta: Delta,
}

impl Level {
    fn add_sparse(&mut self, pts: &[Point]) -> Result<()> {
        if let Some(c) = self.coarse.as_mut() {
            c.insert(pts)?;
        }
        for p in pts {
            self.sparse.insert(p.id);
            self.delta.add(p);
        }
        Ok(())
    }

    fn remove_sparse(&mut self, pts: &[Point]) -> Result<()> {
        if let Some(c) = self.coarse.as_mut() {
            let ids: Vec<u64> = pts.iter().map(|p| p.id).collect();
            c.delete(&ids)?;
        }
        for p in pts {
            self.sparse.remove(&p.id);
            self.delta.remove(p);
        }
        Ok(())
    }
}

/// The single heap of simplified mode: nearest neighbor within `S_j`,
/// truncated at `d_j`, for every point of `S_j`.
#[derive(Debug)]
pub(crate) struct Star {
    pub j: usize,
    /// `S_j` at side `d_j`
    pub index: Engine,
    pub heap: BatchHeap<PairResult>,
    pub delta: Delta,
}

/// Per-batch counters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchStats {
    pub batch: usize,
    /// distinct points that moved between levels
    pub moved: usize,
    /// moved points summed over every level they passed
    pub moved_sum: usize,
    /// `m * 3^k`
    pub packing_bound: f64,
    pub rebuild_level: Option<usize>,
    pub levels_before: usize,
    pub levels_after: usize,
    pub heap_swaps: u64,
}

impl BatchStats {
    pub fn packing_ok(&self) -> bool {
        self.moved as f64 <= self.packing_bound && self.moved_sum as f64 <= self.packing_bound
    }
}

/// Summary of one level for reporting.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelInfo {
    pub size: usize,
    pub sparse: usize,
    pub d: f64,
    pub pivot: u64,
    pub witness: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedDistance {
    pub owner: u64,
    pub witness: Option<u64>,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, v: String) {
        self.violations.push(v);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("clean");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

pub struct SparsePartition {
    k: usize,
    cfg: Config,
    rng: ChaCha8Rng,
    pub(crate) levels: Vec<Level>,
    pub(crate) heaps: Vec<BatchHeap<PairResult>>,
    pub(crate) star: Option<Star>,
    /// sparse level of every point
    pub(crate) level_of: IdMap<u32>,
    /// the whole set while it has fewer than two points
    idle: Vec<Point>,
    last: BatchStats,
    packing_violations: usize,
}

impl fmt::Debug for SparsePartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SparsePartition")
            .field("k", &self.k)
            .field("n", &self.len())
            .field("levels", &self.levels.len())
            .field("mode", &self.cfg.mode)
            .finish()
    }
}

/// Nearest other point of `pts` to `p`, as a pair.
fn nearest_pair(p: &Point, pts: &[Point]) -> PairResult {
    let f = |q: &Point| if q.id == p.id { PairResult::INFINITE } else { PairResult::of(p, q) };
    if pts.len() >= PAR_MIN {
        pts.par_iter().map(f).reduce(|| PairResult::INFINITE, PairResult::min)
    } else {
        pts.iter().map(f).fold(PairResult::INFINITE, PairResult::min)
    }
}

fn coord_key(p: &Point) -> Vec<u64> {
    p.coords.iter().map(|&c| (c + 0.0).to_bits()).collect()
}

impl SparsePartition {
    /// Empty structure of dimension `k`.
    pub fn new(k: usize, cfg: Config, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Invalid("dimension must be positive".into()));
        }
        Ok(SparsePartition {
            k,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            levels: Vec::new(),
            heaps: Vec::new(),
            star: None,
            level_of: IdMap::default(),
            idle: Vec::new(),
            last: BatchStats::default(),
            packing_violations: 0,
        })
    }

    pub fn build(points: Vec<Point>, mode: Mode, seed: u64) -> Result<Self> {
        Self::build_with(points, Config::with_mode(mode), seed)
    }

    pub fn build_with(mut points: Vec<Point>, cfg: Config, seed: u64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::TooFewPoints { need: 2, got: points.len() });
        }
        let k = points[0].dim();
        let mut sp = Self::new(k, cfg, seed)?;
        sp.check_new(&points)?;
        // fixed order so the pivot draw depends only on the set and the seed
        points.sort_by_key(|p| p.id);
        sp.build_levels(0, points, None)?;
        sp.rebuild_heaps_from(0)?;
        sp.refresh_star(true)?;
        Ok(sp)
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn mode(&self) -> Mode {
        self.cfg.mode
    }

    pub fn len(&self) -> usize {
        if self.levels.is_empty() {
            self.idle.len()
        } else {
            self.levels[0].s.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.get(id).is_some()
    }

    pub fn get(&self, id: u64) -> Option<&Point> {
        match self.levels.first() {
            Some(l) => l.s.get(id),
            None => self.idle.iter().find(|p| p.id == id),
        }
    }

    pub fn points(&self) -> Vec<Point> {
        match self.levels.first() {
            Some(l) => l.s.points().cloned().collect(),
            None => self.idle.clone(),
        }
    }

    /// Sparse level of `id`.
    pub fn level_of(&self, id: u64) -> Option<usize> {
        self.level_of.get(&id).map(|&l| l as usize)
    }

    pub fn level_info(&self) -> Vec<LevelInfo> {
        self.levels
            .iter()
            .map(|l| LevelInfo {
                size: l.s.len(),
                sparse: l.sparse.len(),
                d: l.d,
                pivot: l.pivot.id,
                witness: l.witness.id,
            })
            .collect()
    }

    /// Grid side used at level `i`.
    pub fn grid_side(&self, i: usize) -> Option<f64> {
        self.levels.get(i).map(|l| l.s.side())
    }

    pub fn last_batch(&self) -> &BatchStats {
        &self.last
    }

    /// Batches so far whose moved-point counts broke the packing bound.
    pub fn packing_violations(&self) -> usize {
        self.packing_violations
    }

    /// Simplified-mode cutoff level: `L - 1 - ceil(log3(2 sqrt k))`, at least 0.
    pub fn cutoff_level(&self) -> Option<usize> {
        self.star.as_ref().map(|s| s.j)
    }

    fn cutoff_for(&self, levels: usize) -> usize {
        let c = ((2.0 * (self.k as f64).sqrt()).ln() / 3f64.ln()).ceil() as usize;
        levels.saturating_sub(1).saturating_sub(c)
    }

    fn use_kd(&self) -> bool {
        self.k >= self.cfg.kd_threshold
    }

    fn fine_side(&self, d: f64) -> f64 {
        d / (6.0 * self.k as f64)
    }

    /// Receptor heaps that cover the closest pair: the last `k + 1` levels.
    fn query_levels(&self) -> std::ops::Range<usize> {
        let l = self.levels.len();
        l.saturating_sub(self.k + 1)..l
    }

    pub fn closest_pair(&self) -> Result<PairResult> {
        if self.levels.is_empty() {
            return Err(Error::TooFewPoints { need: 2, got: self.idle.len() });
        }
        let best = match self.cfg.mode {
            Mode::Theoretical => self
                .query_levels()
                .filter_map(|h| self.heaps[h].find_min().ok())
                .map(|e| e.key)
                .fold(PairResult::INFINITE, PairResult::min),
            Mode::Simplified => {
                let star = self.star.as_ref().expect("simplified mode keeps a star heap");
                star.heap.find_min().map(|e| e.key).unwrap_or(PairResult::INFINITE)
            }
        };
        if best.is_finite() {
            Ok(best)
        } else {
            Err(Error::Invalid("no finite pair found; structure is inconsistent".into()))
        }
    }

    /// Restricted distance of `id` at level `i`, computed from the sparse sets.
    pub fn restricted_distance(&self, id: u64, i: usize) -> Result<RestrictedDistance> {
        let lv = self.levels.get(i).ok_or(Error::NotSparse { id, level: i })?;
        if !lv.sparse.contains(&id) {
            return Err(Error::NotSparse { id, level: i });
        }
        let p = lv.s.get(id).expect("sparse points are stored");
        let r = if self.cfg.mode == Mode::Theoretical {
            heaps::restricted(&self.levels, self.k, i, p)
        } else {
            heaps::restricted_scan(&self.levels, self.k, i, p)
        };
        Ok(RestrictedDistance {
            owner: id,
            witness: if r.is_finite() { Some(r.other(id)) } else { None },
            value: r.dist,
        })
    }

    // ---- input checks ------------------------------------------------

    /// Dimension, finiteness, id and coordinate uniqueness, and cell range
    /// against every grid that currently exists.
    fn check_new(&self, pts: &[Point]) -> Result<()> {
        let mut ids = IdSet::default();
        let mut coords: std::collections::HashMap<Vec<u64>, u64> = std::collections::HashMap::new();
        let min_side = self.levels.iter().map(|l| l.s.side()).fold(f64::INFINITY, f64::min);
        for p in pts {
            if p.dim() != self.k {
                return Err(Error::DimensionMismatch { expected: self.k, got: p.dim() });
            }
            if p.coords.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite(p.id));
            }
            if p.id == u64::MAX {
                return Err(Error::Invalid("id u64::MAX is reserved".into()));
            }
            if !ids.insert(p.id) || self.contains(p.id) {
                return Err(Error::DuplicateId(p.id));
            }
            if let Some(other) = coords.insert(coord_key(p), p.id) {
                return Err(Error::DuplicateCoordinates(other, p.id));
            }
            if min_side.is_finite() {
                check_coords(&p.coords, min_side)?;
            }
        }
        // against stored points: an equal point shares the box at level 0
        if let Some(l0) = self.levels.first() {
            for p in pts {
                let mut clash = None;
                l0.s.visit_nbrs(&p.coords, u64::MAX, |q| {
                    if dist(&p.coords, &q.coords) == 0.0 {
                        clash = Some(q.id);
                        false
                    } else {
                        true
                    }
                });
                if let Some(q) = clash {
                    return Err(Error::DuplicateCoordinates(q, p.id));
                }
            }
        } else {
            for q in &self.idle {
                if let Some(&p) = coords.get(&coord_key(q)) {
                    return Err(Error::DuplicateCoordinates(q.id, p));
                }
            }
        }
        Ok(())
    }

    // ---- construction --------------------------------------------------

    /// Replaces levels `start..` by a fresh construction over `cur`. Heaps are
    /// not touched; see [`rebuild_heaps_from`](Self::rebuild_heaps_from).
    pub(crate) fn build_levels(&mut self, start: usize, mut cur: Vec<Point>, mut forced: Option<Point>) -> Result<()> {
        self.levels.truncate(start);
        self.heaps.truncate(start);
        let kd = self.use_kd();
        let theoretical = self.cfg.mode == Mode::Theoretical;
        let mut i = start;
        while !cur.is_empty() {
            debug_assert!(cur.len() >= 2, "a level never holds a single point");
            let pivot = match forced.take() {
                Some(p) => p,
                None => cur[self.rng.random_range(0..cur.len())].clone(),
            };
            let pair = nearest_pair(&pivot, &cur);
            let witness_id = pair.other(pivot.id);
            let witness = cur.iter().find(|q| q.id == witness_id).expect("witness is in the set").clone();
            let d = pair.dist;
            let s = Engine::build(&cur, self.fine_side(d), self.k, kd)?;
            let flags: Vec<bool> = if cur.len() >= PAR_MIN {
                cur.par_iter().map(|p| s.is_sparse(p)).collect()
            } else {
                cur.iter().map(|p| s.is_sparse(p)).collect()
            };
            let mut sparse_pts = Vec::new();
            let mut next = Vec::new();
            for (p, lone) in cur.into_iter().zip(flags) {
                if lone {
                    sparse_pts.push(p);
                } else {
                    next.push(p);
                }
            }
            let coarse = if theoretical { Some(Engine::build(&sparse_pts, d, self.k, kd)?) } else { None };
            for p in &sparse_pts {
                self.level_of.insert(p.id, i as u32);
            }
            self.levels.push(Level {
                pivot,
                witness,
                d,
                s,
                sparse: sparse_pts.iter().map(|p| p.id).collect(),
                coarse,
                delta: Delta::default(),
            });
            cur = next;
            i += 1;
        }
        Ok(())
    }

    /// Builds heaps for levels `start..` from scratch.
    pub(crate) fn rebuild_heaps_from(&mut self, start: usize) -> Result<()> {
        if self.cfg.mode != Mode::Theoretical {
            self.heaps.clear();
            return Ok(());
        }
        self.heaps.truncate(start);
        let levels = &self.levels;
        let k = self.k;
        let mode = self.cfg.heapify;
        let fresh: Vec<Result<BatchHeap<PairResult>>> =
            (start..levels.len()).into_par_iter().map(|h| heaps::build_heap(levels, k, h, mode)).collect();
        for h in fresh {
            self.heaps.push(h?);
        }
        Ok(())
    }

    /// Drops everything and keeps `pts` as the idle set.
    fn go_idle(&mut self, pts: Vec<Point>) {
        self.levels.clear();
        self.heaps.clear();
        self.star = None;
        self.level_of.clear();
        self.idle = pts;
    }

    // ---- validation ----------------------------------------------------

    /// Checks every structural invariant; violations are reported, not raised.
    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        if self.levels.is_empty() {
            if self.idle.len() >= 2 {
                rep.push(format!("idle with {} points", self.idle.len()));
            }
            if !self.level_of.is_empty() {
                rep.push("idle structure keeps level assignments".into());
            }
            return rep;
        }
        let n = self.levels[0].s.len();
        if self.level_of.len() != n {
            rep.push(format!("{} level assignments for {} points", self.level_of.len(), n));
        }
        let mut seen_sparse = 0usize;
        for (i, lv) in self.levels.iter().enumerate() {
            let tag = format!("level {i}");
            if let Err(e) = lv.s.audit() {
                rep.push(format!("{tag}: grid audit: {e}"));
            }
            if lv.s.len() < 2 {
                rep.push(format!("{tag}: holds {} points", lv.s.len()));
            }
            let want_side = self.fine_side(lv.d);
            if lv.s.side() != want_side {
                rep.push(format!("{tag}: grid side {} != d/6k = {}", lv.s.side(), want_side));
            }
            // pivot and witness
            if !lv.s.contains(lv.pivot.id) || !lv.s.contains(lv.witness.id) {
                rep.push(format!("{tag}: pivot {} or witness {} not in S_i", lv.pivot.id, lv.witness.id));
            }
            if dist(&lv.pivot.coords, &lv.witness.coords) != lv.d {
                rep.push(format!("{tag}: d_i differs from d(p_i, q_i)"));
            }
            let nn = lv
                .s
                .points()
                .filter(|q| q.id != lv.pivot.id)
                .map(|q| dist(&q.coords, &lv.pivot.coords))
                .fold(f64::INFINITY, f64::min);
            if nn != lv.d {
                rep.push(format!("{tag}: d_i = {} but nearest point to pivot is at {}", lv.d, nn));
            }
            if i + 1 < self.levels.len() && self.levels[i + 1].d > lv.d / 3.0 {
                rep.push(format!("{tag}: d_(i+1) = {} exceeds d_i / 3 = {}", self.levels[i + 1].d, lv.d / 3.0));
            }
            // sparse set and nesting
            for p in lv.s.points() {
                let lone = lv.s.is_sparse(p);
                let member = lv.sparse.contains(&p.id);
                if lone != member {
                    rep.push(format!(
                        "{tag}: point {} is {} but {} the sparse set",
                        p.id,
                        if lone { "sparse" } else { "not sparse" },
                        if member { "in" } else { "missing from" }
                    ));
                }
                let next = self.levels.get(i + 1).is_some_and(|n| n.s.contains(p.id));
                if member == next {
                    rep.push(format!("{tag}: point {} must be in exactly one of S'_i and S_(i+1)", p.id));
                }
                if member && self.level_of.get(&p.id) != Some(&(i as u32)) {
                    rep.push(format!("{tag}: point {} has level {:?}", p.id, self.level_of.get(&p.id)));
                }
            }
            for id in &lv.sparse {
                if !lv.s.contains(*id) {
                    rep.push(format!("{tag}: sparse id {id} missing from S_i"));
                }
            }
            seen_sparse += lv.sparse.len();
            if let Some(c) = &lv.coarse {
                if let Err(e) = c.audit() {
                    rep.push(format!("{tag}: sparse index audit: {e}"));
                }
                if c.side() != lv.d || c.len() != lv.sparse.len() || lv.sparse.iter().any(|id| !c.contains(*id)) {
                    rep.push(format!("{tag}: sparse index out of sync"));
                }
            } else if self.cfg.mode == Mode::Theoretical {
                rep.push(format!("{tag}: sparse index missing"));
            }
            if !lv.delta.is_empty() {
                rep.push(format!("{tag}: batch scratch not cleared"));
            }
        }
        if seen_sparse != n {
            rep.push(format!("sparse sets hold {seen_sparse} points, expected {n}"));
        }
        match self.cfg.mode {
            Mode::Theoretical => heaps::validate_heaps(self, &mut rep),
            Mode::Simplified => heaps::validate_star(self, &mut rep),
        }
        rep
    }
}

#[cfg(test)]
mod tests;
