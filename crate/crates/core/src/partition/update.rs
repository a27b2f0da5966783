//! Batch insertion and deletion.
//!
//! Insertion walks the levels top-down carrying the new points `Q_i` that
//! are still non-sparse and the points `down_i` pushed out of `S'_{i-1}`.
//! Deletion walks bottom-up carrying the points `up_i` that lost every
//! neighbor and rise into `S'_i`. In both, the heap refresh for a finished
//! level runs alongside the grid work of the next level.

use rand::Rng;
use rayon::prelude::*;

use super::heaps::{self, View};
use super::{BatchStats, HeapProtocol, Level, Mode, SparsePartition};
use crate::error::{Error, Result};
use crate::geometry::{dist, Point};
use crate::ids::{IdMap, IdSet};

const PAR_MIN: usize = 2048;

fn sparse_flags(lv: &Level, pts: &[Point]) -> Vec<bool> {
    if pts.len() >= PAR_MIN {
        pts.par_iter().map(|p| lv.s.is_sparse(p)).collect()
    } else {
        pts.iter().map(|p| lv.s.is_sparse(p)).collect()
    }
}

fn split_by(pts: Vec<Point>, flags: &[bool]) -> (Vec<Point>, Vec<Point>) {
    let mut yes = Vec::new();
    let mut no = Vec::new();
    for (p, &f) in pts.into_iter().zip(flags) {
        if f {
            yes.push(p);
        } else {
            no.push(p);
        }
    }
    (yes, no)
}

/// Inserts `q` and `down` into level `i`. Returns what continues to level
/// `i + 1`: non-sparse new points, and non-sparse moved points together with
/// old sparse points the new ones crowded out.
fn grid_insert(
    lv: &mut Level,
    i: usize,
    q: Vec<Point>,
    down: Vec<Point>,
    level_of: &mut IdMap<u32>,
) -> Result<(Vec<Point>, Vec<Point>)> {
    lv.s.insert(&q)?;
    lv.s.insert(&down)?;
    let qf = sparse_flags(lv, &q);
    let df = sparse_flags(lv, &down);
    // an old sparse point can only be crowded out by a new point; moved
    // points were alone in a coarser neighborhood that contains this one
    let crowded_out = |x: &Point, out: &mut Vec<Point>| {
        lv.s.visit_nbrs(&x.coords, x.id, |r| {
            if lv.sparse.contains(&r.id) {
                out.push(r.clone());
            }
            true
        });
    };
    let mut found = Vec::new();
    if q.len() >= PAR_MIN {
        found = q
            .par_iter()
            .fold(Vec::new, |mut v, x| {
                crowded_out(x, &mut v);
                v
            })
            .reduce(Vec::new, |mut a, mut b| {
                a.append(&mut b);
                a
            });
    } else {
        for x in &q {
            crowded_out(x, &mut found);
        }
    }
    let mut hit = IdSet::default();
    let demoted: Vec<Point> = found.into_iter().filter(|r| hit.insert(r.id)).collect();
    let (q_sparse, q_next) = split_by(q, &qf);
    let (d_sparse, mut down_next) = split_by(down, &df);
    lv.remove_sparse(&demoted)?;
    lv.add_sparse(&q_sparse)?;
    lv.add_sparse(&d_sparse)?;
    for p in q_sparse.iter().chain(&d_sparse) {
        level_of.insert(p.id, i as u32);
    }
    down_next.extend(demoted);
    Ok((q_next, down_next))
}

/// Deletes `q_here` (= `Q_i`) from level `i` after adding `up` to `S'_i`,
/// then finds the sparse points of level `i` that lose all their neighbors at
/// level `i - 1` once `q_prev` (= `Q_{i-1}`) is gone; those leave level `i`
/// and are returned. The flag reports that the pivot or witness left `S_i`.
#[allow(clippy::too_many_arguments)]
fn grid_delete(
    lv: &mut Level,
    prev: Option<&Level>,
    i: usize,
    up: &[Point],
    q_here: &[Point],
    q_prev: &[Point],
    gone: &IdSet,
    level_of: &mut IdMap<u32>,
) -> Result<(Vec<Point>, bool)> {
    lv.add_sparse(up)?;
    for p in up {
        level_of.insert(p.id, i as u32);
    }
    let ids: Vec<u64> = q_here.iter().map(|p| p.id).collect();
    lv.s.delete(&ids)?;
    let dropped: Vec<Point> = q_here.iter().filter(|p| lv.sparse.contains(&p.id)).cloned().collect();
    lv.remove_sparse(&dropped)?;
    let mut mark = gone.contains(&lv.pivot.id) || gone.contains(&lv.witness.id);
    let rising = match prev {
        Some(prev) => {
            let sparse = &lv.sparse;
            prev.s.freed_by(q_prev, gone, |r| sparse.contains(&r.id))
        }
        None => Vec::new(),
    };
    if !rising.is_empty() {
        let ids: Vec<u64> = rising.iter().map(|p| p.id).collect();
        lv.s.delete(&ids)?;
        lv.remove_sparse(&rising)?;
        mark |= ids.contains(&lv.pivot.id) || ids.contains(&lv.witness.id);
    }
    Ok((rising, mark))
}

impl SparsePartition {
    fn total_swaps(&self) -> u64 {
        self.heaps.iter().map(|h| h.swaps()).sum::<u64>() + self.star.as_ref().map_or(0, |s| s.heap.swaps())
    }

    fn begin_stats(&self, m: usize) -> BatchStats {
        BatchStats {
            batch: m,
            packing_bound: m as f64 * 3f64.powi(self.k as i32),
            levels_before: self.levels.len(),
            ..BatchStats::default()
        }
    }

    fn end_stats(&mut self, mut stats: BatchStats, swaps0: u64) {
        stats.levels_after = self.levels.len();
        stats.heap_swaps = self.total_swaps().saturating_sub(swaps0);
        if !stats.packing_ok() {
            self.packing_violations += 1;
        }
        debug_assert!(
            stats.packing_ok(),
            "packing bound broken: {} distinct / {} total moves for bound {}",
            stats.moved,
            stats.moved_sum,
            stats.packing_bound
        );
        self.last = stats;
    }

    fn clear_deltas(&mut self) {
        for lv in &mut self.levels {
            lv.delta.clear();
        }
    }

    fn run_pull(&mut self, h: usize) -> Result<()> {
        let view = View::new(0, &self.levels);
        heaps::pull(view, self.k, h, &mut self.heaps[h])
    }

    pub(crate) fn refresh_star(&mut self, force: bool) -> Result<()> {
        if self.cfg.mode != Mode::Simplified {
            return Ok(());
        }
        if self.levels.is_empty() {
            self.star = None;
            return Ok(());
        }
        let j = self.cutoff_for(self.levels.len());
        let stale = self.star.as_ref().is_none_or(|s| s.j != j);
        if force || stale {
            self.star = Some(heaps::build_star(self, j)?);
        } else {
            let d = self.levels[j].d;
            heaps::update_star(self.star.as_mut().expect("checked"), d)?;
        }
        Ok(())
    }

    pub fn batch_insert(&mut self, pts: Vec<Point>) -> Result<()> {
        self.check_new(&pts)?;
        let stats = self.begin_stats(pts.len());
        let swaps0 = self.total_swaps();
        if pts.is_empty() {
            self.end_stats(stats, swaps0);
            return Ok(());
        }
        if self.levels.is_empty() {
            let mut all = std::mem::take(&mut self.idle);
            all.extend(pts);
            let mut stats = stats;
            if all.len() >= 2 {
                all.sort_by_key(|p| p.id);
                self.build_levels(0, all, None)?;
                self.rebuild_heaps_from(0)?;
                self.refresh_star(true)?;
                stats.rebuild_level = Some(0);
            } else {
                self.idle = all;
            }
            self.end_stats(stats, swaps0);
            return Ok(());
        }
        let mut stats = stats;
        let k = self.k;
        let theoretical = self.cfg.mode == Mode::Theoretical;
        let pulling = theoretical && self.cfg.protocol == HeapProtocol::Pull;
        let star_j = self.star.as_ref().map(|s| s.j);
        let mut q = pts;
        let mut down: Vec<Point> = Vec::new();
        let mut moved = IdSet::default();
        let mut pending: Option<usize> = None;
        let mut rebuild: Option<usize> = None;
        let mut i = 0;
        while !(q.is_empty() && down.is_empty()) {
            if i >= self.levels.len() {
                if let Some(h) = pending.take() {
                    self.run_pull(h)?;
                }
                let mut all = q;
                all.append(&mut down);
                self.build_levels(i, all, None)?;
                rebuild = Some(i);
                break;
            }
            let lv = &self.levels[i];
            let inc = q.len() + down.len();
            let coin = self.rng.random::<f64>() * ((inc + lv.s.len()) as f64) < inc as f64;
            let forced = if coin {
                let t = self.rng.random_range(0..inc);
                Some(if t < q.len() { q[t].clone() } else { down[t - q.len()].clone() })
            } else if q.iter().chain(&down).any(|x| dist(&x.coords, &lv.pivot.coords) < lv.d) {
                Some(lv.pivot.clone())
            } else {
                None
            };
            if let Some(pivot) = forced {
                if let Some(h) = pending.take() {
                    self.run_pull(h)?;
                }
                let mut all: Vec<Point> = self.levels[i].s.points().cloned().collect();
                all.append(&mut q);
                all.append(&mut down);
                all.sort_by_key(|p| p.id);
                self.build_levels(i, all, Some(pivot))?;
                rebuild = Some(i);
                break;
            }
            if star_j == Some(i) {
                let star = self.star.as_mut().expect("star level implies a star");
                for p in q.iter().chain(&down) {
                    star.delta.add(p);
                }
            }
            let (q_next, down_next) = match pending.take() {
                Some(h) => {
                    debug_assert_eq!(h + 1, i);
                    let (lo, hi) = self.levels.split_at_mut(i);
                    let heap = &mut self.heaps[h];
                    let level_of = &mut self.level_of;
                    let view = View::new(0, lo);
                    let cur = &mut hi[0];
                    let (a, b) =
                        rayon::join(|| heaps::pull(view, k, h, heap), || grid_insert(cur, i, q, down, level_of));
                    a?;
                    b?
                }
                None => grid_insert(&mut self.levels[i], i, q, down, &mut self.level_of)?,
            };
            stats.moved_sum += down_next.len();
            moved.extend(down_next.iter().map(|p| p.id));
            if pulling {
                pending = Some(i);
            } else if theoretical {
                heaps::push(&self.levels, k, i, &mut self.heaps)?;
            }
            q = q_next;
            down = down_next;
            i += 1;
        }
        if let Some(h) = pending.take() {
            self.run_pull(h)?;
        }
        if theoretical {
            let limit = rebuild.unwrap_or(self.levels.len());
            if pulling {
                // receptors below the last touched level still read its changes
                for h in i..(i + k).min(limit) {
                    self.run_pull(h)?;
                }
            }
            if let Some(r) = rebuild {
                self.rebuild_heaps_from(r)?;
            }
        }
        self.clear_deltas();
        let force = matches!((rebuild, star_j), (Some(r), Some(j)) if r <= j);
        self.refresh_star(force)?;
        stats.moved = moved.len();
        stats.rebuild_level = rebuild;
        self.end_stats(stats, swaps0);
        Ok(())
    }

    pub fn batch_delete(&mut self, ids: &[u64]) -> Result<()> {
        let mut gone = IdSet::default();
        for &id in ids {
            if !self.contains(id) || !gone.insert(id) {
                return Err(Error::UnknownId(id));
            }
        }
        let stats = self.begin_stats(ids.len());
        let swaps0 = self.total_swaps();
        if ids.is_empty() {
            self.end_stats(stats, swaps0);
            return Ok(());
        }
        if self.levels.is_empty() {
            self.idle.retain(|p| !gone.contains(&p.id));
            self.end_stats(stats, swaps0);
            return Ok(());
        }
        let mut stats = stats;
        if self.len() - ids.len() < 2 {
            let rest: Vec<Point> = self.levels[0].s.points().filter(|p| !gone.contains(&p.id)).cloned().collect();
            self.go_idle(rest);
            stats.rebuild_level = Some(0);
            self.end_stats(stats, swaps0);
            return Ok(());
        }
        let k = self.k;
        let n_levels = self.levels.len();
        let theoretical = self.cfg.mode == Mode::Theoretical;
        let pulling = theoretical && self.cfg.protocol == HeapProtocol::Pull;
        let star_j = self.star.as_ref().map(|s| s.j);
        let mut by_level: Vec<Vec<Point>> = vec![Vec::new(); n_levels];
        for id in ids {
            let p = self.levels[0].s.get(*id).expect("checked").clone();
            by_level[self.level_of[id] as usize].push(p);
        }
        let mut q_here: Vec<Point> = Vec::new();
        let mut up: Vec<Point> = Vec::new();
        let mut moved = IdSet::default();
        let mut mark: Option<usize> = None;
        let mut pending: Option<usize> = None;
        for i in (0..n_levels).rev() {
            q_here.append(&mut by_level[i]);
            let q_prev: Vec<Point> = match i {
                0 => Vec::new(),
                _ => q_here.iter().chain(&by_level[i - 1]).cloned().collect(),
            };
            let (lo, hi) = self.levels.split_at_mut(i);
            let (cur, deeper) = hi.split_first_mut().expect("level exists");
            let prev = lo.last();
            let level_of = &mut self.level_of;
            let (rising, marked) = match pending.take() {
                Some(h) => {
                    let heap = &mut self.heaps[h];
                    let view = View::new(i + 1, deeper);
                    let (a, b) = rayon::join(
                        || heaps::pull(view, k, h, heap),
                        || grid_delete(cur, prev, i, &up, &q_here, &q_prev, &gone, level_of),
                    );
                    a?;
                    b?
                }
                None => grid_delete(cur, prev, i, &up, &q_here, &q_prev, &gone, level_of)?,
            };
            if star_j == Some(i) {
                let star = self.star.as_mut().expect("star level implies a star");
                for p in q_here.iter().chain(&rising) {
                    star.delta.remove(p);
                }
            }
            if marked {
                mark = Some(i);
            }
            stats.moved_sum += rising.len();
            moved.extend(rising.iter().map(|p| p.id));
            if pulling {
                let h = i + k;
                if h < n_levels && mark.is_none_or(|r| h < r) {
                    pending = Some(h);
                }
            } else if theoretical {
                heaps::push(&self.levels, k, i, &mut self.heaps)?;
            }
            up = rising;
        }
        debug_assert!(up.is_empty());
        if let Some(h) = pending.take() {
            self.run_pull(h)?;
        }
        if pulling {
            for h in 0..k.min(n_levels) {
                if mark.is_none_or(|r| h < r) {
                    self.run_pull(h)?;
                }
            }
        }
        for id in ids {
            self.level_of.remove(id);
        }
        if let Some(mut r) = mark {
            while r > 0 && self.levels[r].s.len() == 1 {
                debug_assert!(false, "a level cannot shrink to one point");
                r -= 1;
            }
            let mut rest: Vec<Point> = self.levels[r].s.points().cloned().collect();
            rest.sort_by_key(|p| p.id);
            if rest.is_empty() {
                self.levels.truncate(r);
                self.heaps.truncate(r);
            } else {
                self.build_levels(r, rest, None)?;
                self.rebuild_heaps_from(r)?;
            }
            stats.rebuild_level = Some(r);
        }
        self.clear_deltas();
        let force = matches!((mark, star_j), (Some(r), Some(j)) if r <= j);
        self.refresh_star(force)?;
        stats.moved = moved.len();
        self.end_stats(stats, swaps0);
        Ok(())
    }
}
