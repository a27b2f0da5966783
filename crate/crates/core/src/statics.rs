//! Static closest-pair algorithms.
//!
//! All of them return the minimum of `(dist, a, b)` over every pair, so on
//! the same input they agree bit for bit. The grid-based ones never filter a
//! candidate by an inexact bound: any pair at distance at most the current
//! radius always lands in adjacent cells.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{cell_into, dist, for_each_cell_near, for_each_neighbor_cell_until, Cell, PairResult, Point};
use crate::ids::IdSet;
use crate::kdtree::DynKdTree;

/// Below this many points the recursive algorithms brute-force.
pub const CUTOFF: usize = 64;

/// Sample exponent for the sampling algorithm.
pub const RABIN_EXPONENT: f64 = 0.8;

const PAR_MIN: usize = 4096;

// grids are built slightly wider than the radius so that rounding in the
// cell computation can never separate a pair at exactly that distance
const SLACK: f64 = 1.0 + 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StaticAlgo {
    BruteForce,
    DivideConquer,
    Rabin,
    Sieve,
    Incremental,
}

impl StaticAlgo {
    pub const ALL: [StaticAlgo; 5] =
        [StaticAlgo::BruteForce, StaticAlgo::DivideConquer, StaticAlgo::Rabin, StaticAlgo::Sieve, StaticAlgo::Incremental];

    pub fn name(self) -> &'static str {
        match self {
            StaticAlgo::BruteForce => "brute",
            StaticAlgo::DivideConquer => "divide-conquer",
            StaticAlgo::Rabin => "rabin",
            StaticAlgo::Sieve => "sieve",
            StaticAlgo::Incremental => "incremental",
        }
    }

    pub fn run(self, pts: &[Point], seed: u64) -> Result<PairResult> {
        match self {
            StaticAlgo::BruteForce => brute_force(pts),
            StaticAlgo::DivideConquer => divide_conquer(pts),
            StaticAlgo::Rabin => rabin(pts, seed),
            StaticAlgo::Sieve => sieve(pts, seed),
            StaticAlgo::Incremental => incremental(pts, seed),
        }
    }
}

impl fmt::Display for StaticAlgo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StaticAlgo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "brute" | "brute_force" | "brute-force" => StaticAlgo::BruteForce,
            "dc" | "divide_conquer" | "divide-conquer" => StaticAlgo::DivideConquer,
            "rabin" => StaticAlgo::Rabin,
            "sieve" => StaticAlgo::Sieve,
            "incremental" | "inc" => StaticAlgo::Incremental,
            _ => return Err(Error::Invalid(format!("unknown static algorithm '{s}'"))),
        })
    }
}

fn check_input(pts: &[Point]) -> Result<usize> {
    if pts.len() < 2 {
        return Err(Error::TooFewPoints { need: 2, got: pts.len() });
    }
    let k = pts[0].dim();
    let mut ids = IdSet::default();
    for p in pts {
        if p.dim() != k {
            return Err(Error::DimensionMismatch { expected: k, got: p.dim() });
        }
        if p.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(p.id));
        }
        if !ids.insert(p.id) {
            return Err(Error::DuplicateId(p.id));
        }
    }
    Ok(k)
}

fn brute_slice(pts: &[&Point]) -> PairResult {
    let mut best = PairResult::INFINITE;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.min(PairResult::of(pts[i], pts[j]));
        }
    }
    best
}

pub fn brute_force(pts: &[Point]) -> Result<PairResult> {
    check_input(pts)?;
    let n = pts.len();
    let row = |i: usize| {
        let mut best = PairResult::INFINITE;
        for j in i + 1..n {
            best = best.min(PairResult::of(&pts[i], &pts[j]));
        }
        best
    };
    Ok(if n >= PAR_MIN {
        (0..n).into_par_iter().map(row).reduce(|| PairResult::INFINITE, PairResult::min)
    } else {
        (0..n).map(row).fold(PairResult::INFINITE, PairResult::min)
    })
}

/// Pairs with identical coordinates are the answer whenever they exist.
/// Returns the smallest such pair, or `None`.
fn zero_pair(pts: &[Point]) -> Option<PairResult> {
    let mut groups: HashMap<Vec<u64>, u64> = HashMap::with_capacity(pts.len());
    let mut best: Option<PairResult> = None;
    for p in pts {
        // +0.0 folds negative zero into positive zero
        let key: Vec<u64> = p.coords.iter().map(|&c| (c + 0.0).to_bits()).collect();
        match groups.get_mut(&key) {
            Some(first) => {
                let r = PairResult::new(*first, p.id, 0.0);
                best = Some(best.map_or(r, |b| b.min(r)));
                *first = (*first).min(p.id);
            }
            None => {
                groups.insert(key, p.id);
            }
        }
    }
    // the running minimum of a group pairs with every later member, and the
    // two smallest ids in a group are always compared
    best
}

pub fn divide_conquer(pts: &[Point]) -> Result<PairResult> {
    check_input(pts)?;
    let mut by_x: Vec<&Point> = pts.iter().collect();
    by_x.sort_by(|p, q| p.coords[0].total_cmp(&q.coords[0]).then(p.id.cmp(&q.id)));
    Ok(dc_rec(&by_x))
}

fn dc_rec(by_x: &[&Point]) -> PairResult {
    let n = by_x.len();
    if n <= CUTOFF {
        return brute_slice(by_x);
    }
    let mid = n / 2;
    let (l, r) = by_x.split_at(mid);
    let (bl, br) = if n >= PAR_MIN { rayon::join(|| dc_rec(l), || dc_rec(r)) } else { (dc_rec(l), dc_rec(r)) };
    let mut best = bl.min(br);
    let xm = by_x[mid].coords[0];
    let mut slab: Vec<&Point> =
        by_x.iter().copied().filter(|p| (p.coords[0] - xm).abs() <= best.dist * SLACK).collect();
    slab.sort_by(|p, q| p.coords[1.min(p.dim() - 1)].total_cmp(&q.coords[1.min(q.dim() - 1)]));
    let y = |p: &Point| p.coords[1.min(p.dim() - 1)];
    for i in 0..slab.len() {
        for j in i + 1..slab.len() {
            if y(slab[j]) - y(slab[i]) > best.dist * SLACK {
                break;
            }
            best = best.min(PairResult::of(slab[i], slab[j]));
        }
    }
    best
}

/// Exact closest pair among points at distance at most `radius`, via a grid
/// of side `radius`. `radius` must be at least the true minimum distance.
/// Probes share a running upper bound, so later probes visit fewer cells.
fn grid_pass(pts: &[Point], radius: f64) -> PairResult {
    let side = radius * SLACK;
    let mut grid: HashMap<Cell, Vec<u32>> = HashMap::with_capacity(pts.len());
    let mut cell = Cell::new();
    for (i, p) in pts.iter().enumerate() {
        // `as` saturates, so enormous cells merge rather than wrap; merged
        // cells only add candidates
        cell_into(&p.coords, side, &mut cell);
        grid.entry(cell.clone()).or_default().push(i as u32);
    }
    // non-negative doubles order like their bit patterns
    let bound = AtomicU64::new(side.to_bits());
    let probe = |i: usize| {
        let p = &pts[i];
        let mut best = PairResult::INFINITE;
        let r = f64::from_bits(bound.load(Ordering::Relaxed));
        for_each_cell_near(&p.coords, side, r, |nc| {
            if let Some(v) = grid.get(nc) {
                for &j in v {
                    if (j as usize) > i {
                        best = best.min(PairResult::of(p, &pts[j as usize]));
                    }
                }
            }
        });
        if best.dist.is_finite() {
            bound.fetch_min((best.dist * SLACK).to_bits(), Ordering::Relaxed);
        }
        best
    };
    if pts.len() >= PAR_MIN {
        (0..pts.len()).into_par_iter().map(probe).reduce(|| PairResult::INFINITE, PairResult::min)
    } else {
        (0..pts.len()).map(probe).fold(PairResult::INFINITE, PairResult::min)
    }
}

/// Sampling algorithm: the closest pair of a random `n^0.8`-subset bounds
/// the answer from above, and one grid pass at that side finishes.
pub fn rabin(pts: &[Point], seed: u64) -> Result<PairResult> {
    check_input(pts)?;
    if let Some(z) = zero_pair(pts) {
        return Ok(z);
    }
    let n = pts.len();
    let m = ((n as f64).powf(RABIN_EXPONENT).ceil() as usize).clamp(2, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: Vec<Point> = sample(&mut rng, n, m).into_iter().map(|i| pts[i].clone()).collect();
    let sampled = if m == n { brute_force(&chosen)? } else { divide_conquer(&chosen)? };
    let best = grid_pass(pts, sampled.dist);
    assert!(sampled.dist >= best.dist, "sample radius {} below the closest pair {}", sampled.dist, best.dist);
    Ok(best)
}

/// Dimension from which the sieve tests sparsity with a kd-tree instead of
/// enumerating `3^k` cells.
pub const SIEVE_KD_DIM: usize = 5;

/// Indices of the points of `alive` that share their box neighborhood at
/// `side` with another point of `alive`.
fn crowded(pts: &[Point], alive: &[u32], side: f64, k: usize) -> Vec<u32> {
    if k >= SIEVE_KD_DIM {
        let tree = DynKdTree::build(k, alive.iter().map(|&j| pts[j as usize].clone()).collect())
            .expect("points were validated");
        let keep = |&j: &u32| !tree.is_sparse_at(&pts[j as usize], side);
        return if alive.len() >= PAR_MIN {
            alive.par_iter().copied().filter(|j| keep(j)).collect()
        } else {
            alive.iter().copied().filter(keep).collect()
        };
    }
    let mut grid: HashMap<Cell, u32> = HashMap::with_capacity(alive.len());
    let mut cells: Vec<Cell> = Vec::with_capacity(alive.len());
    for &j in alive {
        let mut c = Cell::new();
        cell_into(&pts[j as usize].coords, side, &mut c);
        *grid.entry(c.clone()).or_default() += 1;
        cells.push(c);
    }
    let busy = |c: &Cell| {
        grid[c] >= 2 || {
            let mut count = 0;
            for_each_neighbor_cell_until(c, |nc| {
                count += grid.get(nc).copied().unwrap_or(0);
                count < 2
            });
            count >= 2
        }
    };
    alive.iter().zip(&cells).filter(|(_, c)| busy(c)).map(|(&j, _)| j).collect()
}

/// Sieve: the construction rounds of the sparse partition without heaps. A
/// random point's nearest-neighbor distance `d` sets the side `d / 6k`, the
/// points alone in their box neighborhood are peeled, and the rest go to the
/// next round. The smallest `d` bounds the answer from above; one grid pass
/// at that side finishes.
pub fn sieve(pts: &[Point], seed: u64) -> Result<PairResult> {
    let k = check_input(pts)?;
    if let Some(z) = zero_pair(pts) {
        return Ok(z);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alive: Vec<u32> = (0..pts.len() as u32).collect();
    let mut radius = f64::INFINITY;
    while alive.len() >= 2 {
        let x = &pts[alive[rand::Rng::random_range(&mut rng, 0..alive.len())] as usize];
        let nn = alive
            .iter()
            .filter(|&&j| pts[j as usize].id != x.id)
            .map(|&j| dist(&x.coords, &pts[j as usize].coords))
            .fold(f64::INFINITY, f64::min);
        let before = (alive.len(), radius);
        radius = radius.min(nn);
        alive = crowded(pts, &alive, nn / (6.0 * k as f64), k);
        // saturated cells at extreme coordinates can stall the rounds; any
        // radius seen so far is still a valid bound
        if alive.len() == before.0 && radius >= before.1 {
            break;
        }
    }
    Ok(grid_pass(pts, radius))
}

/// Randomized incremental insertion in batches of doubling size. Each batch
/// is probed in parallel against the points before it in the random order;
/// the earliest point that strictly improves the distance triggers a grid
/// rebuild at the new side, and the batch resumes after it.
pub fn incremental(pts: &[Point], seed: u64) -> Result<PairResult> {
    check_input(pts)?;
    if let Some(z) = zero_pair(pts) {
        return Ok(z);
    }
    let n = pts.len();
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let at = |t: usize| &pts[order[t] as usize];
    let mut best = PairResult::of(at(0), at(1));
    let mut side = best.dist * SLACK;
    // cells hold positions in `order`
    let mut grid: HashMap<Cell, Vec<u32>> = HashMap::new();
    let place = |grid: &mut HashMap<Cell, Vec<u32>>, from: usize, to: usize, side: f64| {
        let mut c = Cell::new();
        for t in from..to {
            cell_into(&at(t).coords, side, &mut c);
            grid.entry(c.clone()).or_default().push(t as u32);
        }
    };
    place(&mut grid, 0, 2, side);
    let mut start = 2;
    let mut size = 2;
    while start < n {
        let end = (start + size).min(n);
        place(&mut grid, start, end, side);
        let r = best.dist;
        // closest earlier point, within the current bound
        let local = |t: usize| {
            let p = at(t);
            let mut m = PairResult::INFINITE;
            for_each_cell_near(&p.coords, side, r * SLACK, |nc| {
                if let Some(v) = grid.get(nc) {
                    for &s in v {
                        if (s as usize) < t {
                            m = m.min(PairResult::of(p, at(s as usize)));
                        }
                    }
                }
            });
            (t, m)
        };
        let pick = |a: (usize, PairResult), b: (usize, PairResult)| {
            // earliest strict improvement wins; otherwise the smallest tie
            match (a.1.dist < r, b.1.dist < r) {
                (true, true) => if a.0 <= b.0 { a } else { b },
                (true, false) => a,
                (false, true) => b,
                (false, false) => if a.1 <= b.1 { a } else { b },
            }
        };
        let none = (usize::MAX, PairResult::INFINITE);
        let (t, m) = if end - start >= PAR_MIN {
            (start..end).into_par_iter().map(local).reduce(|| none, pick)
        } else {
            // in order, so the first strict improvement ends the scan
            let mut acc = none;
            for t in start..end {
                acc = pick(acc, local(t));
                if acc.1.dist < r {
                    break;
                }
            }
            acc
        };
        if m.dist < r {
            best = m;
            side = best.dist * SLACK;
            grid.clear();
            place(&mut grid, 0, t + 1, side);
            start = t + 1;
            // points after `t` in the batch are placed again at the new side
            continue;
        }
        best = best.min(m);
        start = end;
        size *= 2;
    }
    Ok(best)
}
