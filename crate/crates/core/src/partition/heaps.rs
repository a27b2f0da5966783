//! Restricted distances and the heaps that hold them.
//!
//! A receptor heap `H_h` depends on the sparse sets of its initiator levels
//! `h-k..=h`. Whenever one of those changes, entries whose witness left, or
//! which a newcomer beats, are recomputed. The pull protocol does that once
//! per receptor after all its initiators are final; the naive protocol has
//! each initiator push to its receptors as soon as it is done.

use std::ops::RangeInclusive;

use rayon::prelude::*;

use super::{Delta, Engine, Level, Mode, SparsePartition, Star, ValidationReport};
use crate::error::Result;
use crate::geometry::{PairResult, Point};
use crate::heap::{BatchHeap, HeapEntry, HeapifyMode};
use crate::ids::IdSet;

const PAR_MIN: usize = 256;

/// Read access to a contiguous run of levels starting at `base`.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub base: usize,
    pub levels: &'a [Level],
}

impl<'a> View<'a> {
    pub fn new(base: usize, levels: &'a [Level]) -> Self {
        View { base, levels }
    }

    #[inline]
    pub fn at(&self, j: usize) -> &'a Level {
        &self.levels[j - self.base]
    }
}

pub(crate) fn initiators(h: usize, k: usize) -> RangeInclusive<usize> {
    h.saturating_sub(k)..=h
}

fn witness_of(r: &PairResult, owner: u64) -> u64 {
    if r.is_finite() {
        r.other(owner)
    } else {
        u64::MAX
    }
}

fn restricted_in(view: View<'_>, k: usize, h: usize, q: &Point) -> PairResult {
    let r = view.at(h).d;
    let mut best = PairResult::INFINITE;
    for j in initiators(h, k) {
        let c = view.at(j).coarse.as_ref().expect("theoretical levels keep a sparse index");
        c.visit_ball(&q.coords, r, q.id, |x| {
            best = best.min(PairResult::of(q, x));
            true
        });
    }
    best
}

/// Restricted distance of `q` at receptor level `h` via the sparse indexes.
pub(crate) fn restricted(levels: &[Level], k: usize, h: usize, q: &Point) -> PairResult {
    restricted_in(View::new(0, levels), k, h, q)
}

/// Same value by a linear scan of the sparse sets; the oracle.
pub(crate) fn restricted_scan(levels: &[Level], k: usize, h: usize, q: &Point) -> PairResult {
    let r = levels[h].d;
    let mut best = PairResult::INFINITE;
    for j in initiators(h, k) {
        for id in &levels[j].sparse {
            if *id == q.id {
                continue;
            }
            let x = levels[j].s.get(*id).expect("sparse points are stored");
            let pr = PairResult::of(q, x);
            if pr.dist <= r {
                best = best.min(pr);
            }
        }
    }
    best
}

fn entry_for(view: View<'_>, k: usize, h: usize, q: &Point) -> HeapEntry<PairResult> {
    let r = restricted_in(view, k, h, q);
    HeapEntry::new(r, q.id, witness_of(&r, q.id))
}

pub(crate) fn build_heap(levels: &[Level], k: usize, h: usize, mode: HeapifyMode) -> Result<BatchHeap<PairResult>> {
    let lv = &levels[h];
    let view = View::new(0, levels);
    let owners: Vec<&Point> = lv.sparse.iter().map(|id| lv.s.get(*id).expect("sparse points are stored")).collect();
    let entries: Vec<HeapEntry<PairResult>> = if owners.len() >= PAR_MIN {
        owners.par_iter().map(|q| entry_for(view, k, h, q)).collect()
    } else {
        owners.iter().map(|q| entry_for(view, k, h, q)).collect()
    };
    BatchHeap::build_with_mode(entries, mode)
}

/// Owners in `index` (radius `r`) whose stored entry is invalidated by the
/// removals and additions in `delta`. `skip` owners are handled elsewhere.
fn affected_by(
    index: &Engine,
    r: f64,
    heap: &BatchHeap<PairResult>,
    delta: &Delta,
    skip: &IdSet,
    out: &mut Vec<u64>,
) {
    for p in delta.removed() {
        index.visit_ball(&p.coords, r, p.id, |q| {
            if !skip.contains(&q.id) && heap.get(q.id).is_some_and(|e| e.witness == p.id) {
                out.push(q.id);
            }
            true
        });
    }
    for p in delta.added() {
        index.visit_ball(&p.coords, r, p.id, |q| {
            if !skip.contains(&q.id) && heap.get(q.id).is_some_and(|e| PairResult::of(q, p) < e.key) {
                out.push(q.id);
            }
            true
        });
    }
}

/// Brings `H_h` up to date with the deltas of initiators `from`. With `own`,
/// the receptor's own delta is also applied: removed owners lose their entry
/// and added owners get a fresh one.
pub(crate) fn refresh(
    view: View<'_>,
    k: usize,
    h: usize,
    heap: &mut BatchHeap<PairResult>,
    from: RangeInclusive<usize>,
    own: bool,
) -> Result<()> {
    let lv = view.at(h);
    let index = lv.coarse.as_ref().expect("theoretical levels keep a sparse index");
    let mut fresh_ids = IdSet::default();
    if own {
        let gone: Vec<u64> = lv.delta.removed().map(|p| p.id).filter(|id| heap.contains(*id)).collect();
        heap.batch_delete(&gone)?;
        fresh_ids.extend(lv.delta.added().map(|p| p.id));
    }
    let mut hit = Vec::new();
    for j in from {
        affected_by(index, lv.d, heap, &view.at(j).delta, &fresh_ids, &mut hit);
    }
    hit.sort_unstable();
    hit.dedup();
    if own {
        let added: Vec<&Point> = lv.delta.added().collect();
        let fresh: Vec<HeapEntry<PairResult>> = if added.len() >= PAR_MIN {
            added.par_iter().map(|q| entry_for(view, k, h, q)).collect()
        } else {
            added.iter().map(|q| entry_for(view, k, h, q)).collect()
        };
        heap.batch_insert(fresh)?;
    }
    let recompute = |id: &u64| {
        let q = lv.s.get(*id).expect("receptor owners are stored");
        let r = restricted_in(view, k, h, q);
        (*id, r, witness_of(&r, *id))
    };
    let changes: Vec<(u64, PairResult, u64)> = if hit.len() >= PAR_MIN {
        hit.par_iter().map(recompute).collect()
    } else {
        hit.iter().map(recompute).collect()
    };
    heap.update_keys(&changes)
}

/// Pull protocol: receptor `h` reads all of its initiators.
pub(crate) fn pull(view: View<'_>, k: usize, h: usize, heap: &mut BatchHeap<PairResult>) -> Result<()> {
    refresh(view, k, h, heap, initiators(h, k), true)
}

/// Naive protocol: initiator `i` pushes to every receptor `i..=i+k`.
pub(crate) fn push(levels: &[Level], k: usize, i: usize, heaps: &mut [BatchHeap<PairResult>]) -> Result<()> {
    let view = View::new(0, levels);
    let last = (i + k).min(levels.len() - 1);
    for h in i..=last {
        refresh(view, k, h, &mut heaps[h], i..=i, h == i)?;
    }
    Ok(())
}

// ---- simplified mode ---------------------------------------------------

fn star_entry(index: &Engine, r: f64, q: &Point) -> HeapEntry<PairResult> {
    let mut best = PairResult::INFINITE;
    index.visit_ball(&q.coords, r, q.id, |x| {
        best = best.min(PairResult::of(q, x));
        true
    });
    HeapEntry::new(best, q.id, witness_of(&best, q.id))
}

pub(crate) fn build_star(sp: &SparsePartition, j: usize) -> Result<Star> {
    let lv = &sp.levels[j];
    let pts: Vec<Point> = lv.s.points().cloned().collect();
    let index = Engine::build(&pts, lv.d, sp.k, sp.use_kd())?;
    let entries: Vec<HeapEntry<PairResult>> = if pts.len() >= PAR_MIN {
        pts.par_iter().map(|q| star_entry(&index, lv.d, q)).collect()
    } else {
        pts.iter().map(|q| star_entry(&index, lv.d, q)).collect()
    };
    let heap = BatchHeap::build_with_mode(entries, sp.cfg.heapify)?;
    Ok(Star { j, index, heap, delta: Delta::default() })
}

/// Applies the pending changes to `S_j` recorded in the star's delta.
pub(crate) fn update_star(star: &mut Star, d: f64) -> Result<()> {
    let removed: Vec<u64> = star.delta.removed().map(|p| p.id).collect();
    let added: Vec<Point> = star.delta.added().cloned().collect();
    star.index.delete(&removed)?;
    star.index.insert(&added)?;
    let gone: Vec<u64> = removed.iter().copied().filter(|id| star.heap.contains(*id)).collect();
    star.heap.batch_delete(&gone)?;
    let fresh_ids: IdSet = added.iter().map(|p| p.id).collect();
    let mut hit = Vec::new();
    affected_by(&star.index, d, &star.heap, &star.delta, &fresh_ids, &mut hit);
    hit.sort_unstable();
    hit.dedup();
    let index = &star.index;
    let fresh: Vec<HeapEntry<PairResult>> = added.iter().map(|q| star_entry(index, d, q)).collect();
    star.heap.batch_insert(fresh)?;
    let changes: Vec<(u64, PairResult, u64)> = hit
        .iter()
        .map(|id| {
            let q = index.get(*id).expect("star owners are stored");
            let e = star_entry(index, d, q);
            (*id, e.key, e.witness)
        })
        .collect();
    star.heap.update_keys(&changes)?;
    star.delta.clear();
    Ok(())
}

// ---- validation --------------------------------------------------------

fn check_heap(heap: &BatchHeap<PairResult>, owners: usize, tag: &str, rep: &mut ValidationReport) {
    if let Err(e) = heap.check() {
        rep.push(format!("{tag}: {e}"));
    }
    if heap.len() != owners {
        rep.push(format!("{tag}: {} entries for {} owners", heap.len(), owners));
    }
}

pub(crate) fn validate_heaps(sp: &SparsePartition, rep: &mut ValidationReport) {
    if sp.heaps.len() != sp.levels.len() {
        rep.push(format!("{} heaps for {} levels", sp.heaps.len(), sp.levels.len()));
        return;
    }
    for (h, lv) in sp.levels.iter().enumerate() {
        let tag = format!("heap {h}");
        let heap = &sp.heaps[h];
        check_heap(heap, lv.sparse.len(), &tag, rep);
        for id in &lv.sparse {
            let q = lv.s.get(*id).expect("sparse points are stored");
            let want = restricted(&sp.levels, sp.k, h, q);
            match heap.get(*id) {
                None => rep.push(format!("{tag}: owner {id} has no entry")),
                Some(e) if e.key != want || e.witness != witness_of(&want, *id) => {
                    rep.push(format!("{tag}: owner {id} stores {:?}, restricted distance is {:?}", e.key, want))
                }
                Some(_) => {}
            }
        }
    }
}

pub(crate) fn validate_star(sp: &SparsePartition, rep: &mut ValidationReport) {
    let Some(star) = &sp.star else {
        rep.push("simplified mode without a star heap".into());
        return;
    };
    debug_assert_eq!(sp.cfg.mode, Mode::Simplified);
    let want_j = sp.cutoff_for(sp.levels.len());
    if star.j != want_j {
        rep.push(format!("star level {} but cutoff is {}", star.j, want_j));
        return;
    }
    let lv = &sp.levels[star.j];
    check_heap(&star.heap, lv.s.len(), "star heap", rep);
    if star.index.len() != lv.s.len() || star.index.side() != lv.d {
        rep.push("star index out of sync with S_j".into());
    }
    if let Err(e) = star.index.audit() {
        rep.push(format!("star index audit: {e}"));
    }
    for q in lv.s.points() {
        if !star.index.contains(q.id) {
            rep.push(format!("star index lacks {}", q.id));
            continue;
        }
        let want = star_entry(&star.index, lv.d, q);
        match star.heap.get(q.id) {
            None => rep.push(format!("star heap: owner {} has no entry", q.id)),
            Some(e) if e.key != want.key || e.witness != want.witness => {
                rep.push(format!("star heap: owner {} stores {:?}, nearest is {:?}", q.id, e.key, want.key))
            }
            Some(_) => {}
        }
    }
    if !star.delta.is_empty() {
        rep.push("star scratch not cleared".into());
    }
}
