//! Array-backed binary min-heap with batched key changes.
//!
//! Entries live in an arena; the implicit tree is a vector of arena indices
//! and each arena slot remembers where it sits, so owners can be addressed
//! after any number of swaps. Slots are atomics so that the asynchronous
//! heapify can move entries from many workers without locks; the sequential
//! paths pay only relaxed loads for that.
//!
//! Order is on `(key, owner)`, which makes `find_min` deterministic.

use std::cmp::Ordering as Cmp;
use std::fmt::Debug;
use std::sync::atomic::{AtomicU32, AtomicU64, AtomicU8, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::PairResult;
use crate::ids::{IdMap, IdSet};

const PAR_ROUND: usize = 512;
const MIN_CAP: usize = 16;

const LEFT: u8 = 1;
const RIGHT: u8 = 2;
const SELF: u8 = 4;

pub trait HeapKey: Copy + Send + Sync + Debug + PartialEq {
    fn key_cmp(&self, other: &Self) -> Cmp;
    fn infinity() -> Self;
}

impl HeapKey for f64 {
    fn key_cmp(&self, other: &Self) -> Cmp {
        self.total_cmp(other)
    }
    fn infinity() -> Self {
        f64::INFINITY
    }
}

impl HeapKey for PairResult {
    fn key_cmp(&self, other: &Self) -> Cmp {
        self.cmp(other)
    }
    fn infinity() -> Self {
        PairResult::INFINITE
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeapEntry<K> {
    pub key: K,
    pub owner: u64,
    pub witness: u64,
}

impl<K> HeapEntry<K> {
    pub fn new(key: K, owner: u64, witness: u64) -> Self {
        HeapEntry { key, owner, witness }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KeyUpdate<K> {
    pub owner: u64,
    pub old: K,
    pub new: K,
    /// witness to store with the new key
    pub witness: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum HeapifyMode {
    #[default]
    Sync,
    Async,
}

struct Item<K> {
    entry: HeapEntry<K>,
    /// tie-break rank; `u64::MAX` marks an infinite placeholder during insertion
    rank: u64,
    slot: AtomicU32,
}

pub struct BatchHeap<K: HeapKey> {
    items: Vec<Item<K>>,
    free: Vec<u32>,
    slots: Vec<AtomicU32>,
    len: usize,
    flags: Vec<AtomicU8>,
    wait: Vec<AtomicU8>,
    marks: Vec<AtomicU8>,
    handles: IdMap<u32>,
    swaps: AtomicU64,
    mode: HeapifyMode,
}

#[inline]
fn parent(v: usize) -> usize {
    (v - 1) / 2
}

#[inline]
fn level_of(v: usize) -> usize {
    (usize::BITS - 1 - (v + 1).leading_zeros()) as usize
}

impl<K: HeapKey> Default for BatchHeap<K> {
    fn default() -> Self {
        BatchHeap::new()
    }
}

impl<K: HeapKey> BatchHeap<K> {
    pub fn new() -> Self {
        let mut h = BatchHeap {
            items: Vec::new(),
            free: Vec::new(),
            slots: Vec::new(),
            len: 0,
            flags: Vec::new(),
            wait: Vec::new(),
            marks: Vec::new(),
            handles: IdMap::default(),
            swaps: AtomicU64::new(0),
            mode: HeapifyMode::Sync,
        };
        h.resize_arrays(MIN_CAP);
        h
    }

    pub fn with_mode(mode: HeapifyMode) -> Self {
        let mut h = Self::new();
        h.mode = mode;
        h
    }

    pub fn build(entries: Vec<HeapEntry<K>>) -> Result<Self> {
        let mut h = Self::new();
        h.build_into(entries)?;
        Ok(h)
    }

    pub fn build_with_mode(entries: Vec<HeapEntry<K>>, mode: HeapifyMode) -> Result<Self> {
        let mut h = Self::with_mode(mode);
        h.build_into(entries)?;
        Ok(h)
    }

    fn build_into(&mut self, entries: Vec<HeapEntry<K>>) -> Result<()> {
        let mut seen = IdSet::default();
        for e in &entries {
            if !seen.insert(e.owner) {
                return Err(Error::DuplicateId(e.owner));
            }
        }
        self.ensure_capacity(entries.len());
        for (i, e) in entries.into_iter().enumerate() {
            let it = self.alloc(e, i);
            self.slots[i].store(it, Ordering::Relaxed);
        }
        self.len = self.handles.len();
        // bottom-up heap construction
        if self.len > 1 {
            for v in (0..self.len / 2).rev() {
                self.sift_down(v);
            }
        }
        Ok(())
    }

    pub fn mode(&self) -> HeapifyMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: HeapifyMode) {
        self.mode = mode;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn swaps(&self) -> u64 {
        self.swaps.load(Ordering::Relaxed)
    }

    pub fn reset_swaps(&self) {
        self.swaps.store(0, Ordering::Relaxed);
    }

    pub fn contains(&self, owner: u64) -> bool {
        self.handles.contains_key(&owner)
    }

    pub fn get(&self, owner: u64) -> Option<&HeapEntry<K>> {
        self.handles.get(&owner).map(|&i| &self.items[i as usize].entry)
    }

    /// Slot currently holding `owner`.
    pub fn slot_of(&self, owner: u64) -> Option<usize> {
        self.handles.get(&owner).map(|&i| self.items[i as usize].slot.load(Ordering::Relaxed) as usize)
    }

    pub fn entries(&self) -> impl Iterator<Item = &HeapEntry<K>> {
        (0..self.len).map(move |s| &self.items[self.item_at(s)].entry)
    }

    pub fn find_min(&self) -> Result<&HeapEntry<K>> {
        if self.len == 0 {
            Err(Error::EmptyHeap)
        } else {
            Ok(&self.items[self.item_at(0)].entry)
        }
    }

    pub fn clear(&mut self) {
        self.items.clear();
        self.free.clear();
        self.handles.clear();
        self.len = 0;
        self.resize_arrays(MIN_CAP);
    }

    // ---- storage -------------------------------------------------------

    fn resize_arrays(&mut self, cap: usize) {
        let cur = self.slots.len();
        if cap > cur {
            self.slots.extend((cur..cap).map(|_| AtomicU32::new(u32::MAX)));
            self.flags.extend((cur..cap).map(|_| AtomicU8::new(0)));
            self.wait.extend((cur..cap).map(|_| AtomicU8::new(0)));
            self.marks.extend((cur..cap).map(|_| AtomicU8::new(0)));
        } else if cap < cur {
            self.slots.truncate(cap);
            self.flags.truncate(cap);
            self.wait.truncate(cap);
            self.marks.truncate(cap);
            self.slots.shrink_to_fit();
            self.flags.shrink_to_fit();
            self.wait.shrink_to_fit();
            self.marks.shrink_to_fit();
        }
    }

    fn ensure_capacity(&mut self, need: usize) {
        let mut cap = self.slots.len().max(MIN_CAP);
        while cap < need {
            cap *= 2;
        }
        if cap != self.slots.len() {
            self.resize_arrays(cap);
        }
    }

    fn maybe_shrink(&mut self) {
        let mut cap = self.slots.len();
        while cap > MIN_CAP && self.len < cap / 4 {
            cap /= 2;
        }
        if cap != self.slots.len() {
            self.resize_arrays(cap);
        }
        if self.free.len() > 64 && self.free.len() > self.handles.len() * 3 {
            self.compact_arena();
        }
    }

    fn compact_arena(&mut self) {
        let mut items = Vec::with_capacity(self.len);
        for s in 0..self.len {
            let old = &self.items[self.item_at(s)];
            let idx = items.len() as u32;
            items.push(Item { entry: old.entry, rank: old.rank, slot: AtomicU32::new(s as u32) });
            self.slots[s].store(idx, Ordering::Relaxed);
            self.handles.insert(old.entry.owner, idx);
        }
        self.items = items;
        self.free.clear();
    }

    fn alloc(&mut self, e: HeapEntry<K>, slot: usize) -> u32 {
        let item = Item { entry: e, rank: e.owner, slot: AtomicU32::new(slot as u32) };
        let idx = if let Some(i) = self.free.pop() {
            self.items[i as usize] = item;
            i
        } else {
            self.items.push(item);
            (self.items.len() - 1) as u32
        };
        self.handles.insert(e.owner, idx);
        idx
    }

    #[inline]
    fn item_at(&self, s: usize) -> usize {
        self.slots[s].load(Ordering::Relaxed) as usize
    }

    /// Strict `(key, rank)` order between the entries at two slots.
    #[inline]
    fn less(&self, a: usize, b: usize) -> bool {
        let x = &self.items[self.item_at(a)];
        let y = &self.items[self.item_at(b)];
        match x.entry.key.key_cmp(&y.entry.key) {
            Cmp::Less => true,
            Cmp::Greater => false,
            Cmp::Equal => x.rank < y.rank,
        }
    }

    #[inline]
    fn swap_slots(&self, a: usize, b: usize) {
        let ia = self.slots[a].load(Ordering::Relaxed);
        let ib = self.slots[b].load(Ordering::Relaxed);
        self.slots[a].store(ib, Ordering::Relaxed);
        self.slots[b].store(ia, Ordering::Relaxed);
        self.items[ib as usize].slot.store(a as u32, Ordering::Relaxed);
        self.items[ia as usize].slot.store(b as u32, Ordering::Relaxed);
        self.swaps.fetch_add(1, Ordering::Relaxed);
    }

    #[inline]
    fn min_child(&self, v: usize) -> Option<usize> {
        let l = 2 * v + 1;
        if l >= self.len {
            return None;
        }
        let r = l + 1;
        if r < self.len && self.less(r, l) {
            Some(r)
        } else {
            Some(l)
        }
    }

    fn sift_down(&self, mut v: usize) {
        while let Some(c) = self.min_child(v) {
            if self.less(c, v) {
                self.swap_slots(v, c);
                v = c;
            } else {
                break;
            }
        }
    }

    // ---- public batch operations --------------------------------------

    pub fn heapify(&mut self, updates: &[KeyUpdate<K>]) -> Result<()> {
        let (plus, minus) = self.apply_updates(updates)?;
        self.fix_sync(plus, minus);
        Ok(())
    }

    pub fn async_heapify(&mut self, updates: &[KeyUpdate<K>]) -> Result<()> {
        let (plus, minus) = self.apply_updates(updates)?;
        self.fix_async(plus, minus);
        Ok(())
    }

    /// Heapify in the configured mode.
    pub fn update(&mut self, updates: &[KeyUpdate<K>]) -> Result<()> {
        match self.mode {
            HeapifyMode::Sync => self.heapify(updates),
            HeapifyMode::Async => self.async_heapify(updates),
        }
    }

    /// Convenience for callers that only know the new key.
    pub fn update_keys(&mut self, changes: &[(u64, K, u64)]) -> Result<()> {
        let mut ups = Vec::with_capacity(changes.len());
        for &(owner, new, witness) in changes {
            let old = self.get(owner).ok_or(Error::UnknownId(owner))?.key;
            ups.push(KeyUpdate { owner, old, new, witness });
        }
        self.update(&ups)
    }

    /// Validates, writes the new keys, and splits the touched items into
    /// increased and decreased sets.
    fn apply_updates(&mut self, updates: &[KeyUpdate<K>]) -> Result<(Vec<u32>, Vec<u32>)> {
        let mut dir: IdMap<Cmp> = IdMap::default();
        for u in updates {
            let it = *self.handles.get(&u.owner).ok_or(Error::UnknownId(u.owner))?;
            let item = &self.items[it as usize];
            if item.entry.key.key_cmp(&u.old) != Cmp::Equal {
                return Err(Error::StaleKey { owner: u.owner });
            }
            let d = u.new.key_cmp(&u.old);
            if let Some(prev) = dir.insert(u.owner, d) {
                return Err(if prev != d { Error::MixedUpdate(u.owner) } else { Error::DuplicateId(u.owner) });
            }
        }
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for u in updates {
            let it = self.handles[&u.owner];
            let item = &mut self.items[it as usize];
            item.entry.key = u.new;
            item.entry.witness = u.witness;
            match dir[&u.owner] {
                Cmp::Greater => plus.push(it),
                Cmp::Less => minus.push(it),
                Cmp::Equal => {}
            }
        }
        Ok((plus, minus))
    }

    pub fn batch_insert(&mut self, entries: Vec<HeapEntry<K>>) -> Result<()> {
        let mut seen = IdSet::default();
        for e in &entries {
            if self.handles.contains_key(&e.owner) || !seen.insert(e.owner) {
                return Err(Error::DuplicateId(e.owner));
            }
        }
        if entries.is_empty() {
            return Ok(());
        }
        self.ensure_capacity(self.len + entries.len());
        let mut minus = Vec::with_capacity(entries.len());
        for e in entries {
            // placeholders sit at the tail as (inf, max) so the tree stays a valid heap
            let s = self.len;
            let idx = self.alloc(e, s);
            self.items[idx as usize].rank = u64::MAX;
            self.slots[s].store(idx, Ordering::Relaxed);
            self.len += 1;
            minus.push(idx);
        }
        for &it in &minus {
            let item = &mut self.items[it as usize];
            item.rank = item.entry.owner;
        }
        match self.mode {
            HeapifyMode::Sync => self.fix_sync(Vec::new(), minus),
            HeapifyMode::Async => self.fix_async(Vec::new(), minus),
        }
        Ok(())
    }

    pub fn batch_delete(&mut self, owners: &[u64]) -> Result<()> {
        let mut del = IdSet::default();
        for &o in owners {
            if !self.handles.contains_key(&o) || !del.insert(o) {
                return Err(Error::UnknownId(o));
            }
        }
        let m = owners.len();
        if m == 0 {
            return Ok(());
        }
        let n = self.len;
        let new_len = n - m;
        // survivors in the tail fill holes in the prefix
        let fillers: Vec<u32> = (new_len..n)
            .map(|s| self.item_at(s) as u32)
            .filter(|&it| !del.contains(&self.items[it as usize].entry.owner))
            .collect();
        let holes: Vec<(usize, u32)> = owners
            .iter()
            .map(|o| self.handles[o])
            .map(|it| (self.items[it as usize].slot.load(Ordering::Relaxed) as usize, it))
            .filter(|&(s, _)| s < new_len)
            .collect();
        debug_assert_eq!(fillers.len(), holes.len());
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (&(s, dead), &f) in holes.iter().zip(&fillers) {
            self.slots[s].store(f, Ordering::Relaxed);
            self.items[f as usize].slot.store(s as u32, Ordering::Relaxed);
            let fe = &self.items[f as usize];
            let de = &self.items[dead as usize];
            let c = fe.entry.key.key_cmp(&de.entry.key).then(fe.rank.cmp(&de.rank));
            if c == Cmp::Greater {
                plus.push(f);
            } else {
                minus.push(f);
            }
        }
        for &o in owners {
            let it = self.handles.remove(&o).expect("checked");
            self.free.push(it);
        }
        for s in new_len..n {
            self.slots[s].store(u32::MAX, Ordering::Relaxed);
        }
        self.len = new_len;
        match self.mode {
            HeapifyMode::Sync => self.fix_sync(plus, minus),
            HeapifyMode::Async => self.fix_async(plus, minus),
        }
        self.maybe_shrink();
        Ok(())
    }

    /// Removes and returns the minimum.
    pub fn pop_min(&mut self) -> Option<HeapEntry<K>> {
        let e = *self.find_min().ok()?;
        self.batch_delete(&[e.owner]).expect("min exists");
        Some(e)
    }

    /// Empties the heap in order.
    pub fn drain_sorted(&mut self) -> Vec<HeapEntry<K>> {
        let mut out = Vec::with_capacity(self.len);
        while let Some(e) = self.pop_min() {
            out.push(e);
        }
        out
    }

    // ---- level-synchronous heapify ------------------------------------

    fn group_by_level(&self, items: &[u32]) -> Vec<Vec<usize>> {
        let slots: Vec<usize> = items.iter().map(|&i| self.items[i as usize].slot.load(Ordering::Relaxed) as usize).collect();
        self.group_slots(&slots)
    }

    /// Counting sort of slots by tree level.
    fn group_slots(&self, slots: &[usize]) -> Vec<Vec<usize>> {
        if slots.is_empty() {
            return Vec::new();
        }
        let levels = level_of(self.len.max(1) - 1) + 1;
        let mut count = vec![0usize; levels + 1];
        for &s in slots {
            count[level_of(s) + 1] += 1;
        }
        for l in 0..levels {
            count[l + 1] += count[l];
        }
        let mut sorted = vec![0usize; slots.len()];
        let mut next = count.clone();
        for &s in slots {
            let l = level_of(s);
            sorted[next[l]] = s;
            next[l] += 1;
        }
        (0..levels).map(|l| sorted[count[l]..count[l + 1]].to_vec()).collect()
    }

    fn fix_sync(&mut self, plus: Vec<u32>, minus: Vec<u32>) {
        // increases: Down-Heap level by level from the deepest
        let groups = self.group_by_level(&plus);
        for g in groups.iter().rev() {
            if g.len() >= PAR_ROUND {
                let this = &*self;
                g.par_iter().for_each(|&v| this.sift_down(v));
            } else {
                for &v in g {
                    self.sift_down(v);
                }
            }
        }
        // decreases: settle the union of their root paths bottom-up; each
        // node is repaired with a sift-down once both child subtrees are heaps
        let starts: Vec<usize> = minus.iter().map(|&i| self.items[i as usize].slot.load(Ordering::Relaxed) as usize).collect();
        let mut union = Vec::new();
        for &v in &starts {
            let mut u = v;
            loop {
                if self.marks[u].swap(SELF, Ordering::Relaxed) != 0 {
                    break;
                }
                union.push(u);
                if u == 0 {
                    break;
                }
                u = parent(u);
            }
        }
        let groups = self.group_slots(&union);
        for g in groups.iter().rev() {
            if g.len() >= PAR_ROUND {
                let this = &*self;
                g.par_iter().for_each(|&v| this.sift_down(v));
            } else {
                for &v in g {
                    self.sift_down(v);
                }
            }
        }
        for &u in &union {
            self.marks[u].store(0, Ordering::Relaxed);
        }
    }

    // ---- asynchronous heapify ----------------------------------------

    fn fix_async(&mut self, plus: Vec<u32>, minus: Vec<u32>) {
        let this = &*self;
        if !plus.is_empty() {
            let starts: Vec<usize> =
                plus.iter().map(|&i| this.items[i as usize].slot.load(Ordering::Relaxed) as usize).collect();
            for &v in &starts {
                this.flags[v].store(1, Ordering::SeqCst);
            }
            rayon::scope(|s| {
                for &v in &starts {
                    s.spawn(move |s| this.down_task(s, v));
                }
            });
        }
        if !minus.is_empty() {
            let starts: Vec<usize> =
                minus.iter().map(|&i| this.items[i as usize].slot.load(Ordering::Relaxed) as usize).collect();
            let touched: Vec<Vec<usize>> = if starts.len() >= PAR_ROUND {
                starts.par_iter().map(|&v| this.mark_path(v)).collect()
            } else {
                starts.iter().map(|&v| this.mark_path(v)).collect()
            };
            rayon::scope(|s| {
                for &v in &starts {
                    if this.marks[v].load(Ordering::SeqCst) & (LEFT | RIGHT) == 0 {
                        s.spawn(move |_| this.up_stream(v));
                    }
                }
            });
            for t in touched {
                for v in t {
                    this.marks[v].store(0, Ordering::Relaxed);
                    debug_assert_eq!(this.wait[v].load(Ordering::Relaxed), 0);
                }
            }
        }
        debug_assert!(self.flags_clear());
    }

    fn flags_clear(&self) -> bool {
        (0..self.len).all(|v| {
            self.flags[v].load(Ordering::Relaxed) == 0
                && self.wait[v].load(Ordering::Relaxed) == 0
                && self.marks[v].load(Ordering::Relaxed) == 0
        })
    }

    /// Down-Heap with per-slot flags: 0 idle, 1 owned by a pending task,
    /// 2 owned and a parent task parked on it. A task yields to an active
    /// child by parking on it; the child resumes the parent when done.
    fn down_task<'s>(&'s self, s: &rayon::Scope<'s>, mut v: usize) {
        loop {
            let l = 2 * v + 1;
            if l >= self.len {
                // leaf: release, resuming a parked parent if any
                if self.flags[v].compare_exchange(1, 0, Ordering::SeqCst, Ordering::SeqCst).is_err() {
                    self.flags[v].store(0, Ordering::SeqCst);
                    v = parent(v);
                    continue;
                }
                return;
            }
            if self.flags[l].compare_exchange(1, 2, Ordering::SeqCst, Ordering::SeqCst).is_ok() {
                return;
            }
            let r = l + 1;
            if r < self.len && self.flags[r].compare_exchange(1, 2, Ordering::SeqCst, Ordering::SeqCst).is_ok() {
                return;
            }
            let c = if r < self.len && self.less(r, l) { r } else { l };
            if self.less(c, v) {
                self.swap_slots(v, c);
                self.flags[c].store(1, Ordering::SeqCst);
                if self.flags[v].compare_exchange(1, 0, Ordering::SeqCst, Ordering::SeqCst).is_err() {
                    self.flags[v].store(0, Ordering::SeqCst);
                    let p = parent(v);
                    s.spawn(move |s| self.down_task(s, p));
                }
                v = c;
            } else {
                if self.flags[v].compare_exchange(1, 0, Ordering::SeqCst, Ordering::SeqCst).is_err() {
                    self.flags[v].store(0, Ordering::SeqCst);
                    v = parent(v);
                    continue;
                }
                return;
            }
        }
    }

    /// Marks the path from `v` towards the root, recording for each node which
    /// child subtrees hold decreased keys. A node reached from both sides gets
    /// its wait-flag set. Returns the nodes marked by this walk.
    fn mark_path(&self, v: usize) -> Vec<usize> {
        let mut touched = vec![v];
        if self.marks[v].fetch_or(SELF, Ordering::SeqCst) != 0 {
            return touched;
        }
        let mut u = v;
        while u > 0 {
            let p = parent(u);
            let bit = if u % 2 == 1 { LEFT } else { RIGHT };
            let other = (LEFT | RIGHT) ^ bit;
            let old = self.marks[p].fetch_or(bit, Ordering::SeqCst);
            touched.push(p);
            if old & other != 0 {
                self.wait[p].store(1, Ordering::SeqCst);
                break;
            }
            if old != 0 {
                break;
            }
            u = p;
        }
        touched
    }

    /// Up-Heap stream: repairs the subtree at `u` (whose marked children are
    /// already settled), then moves to the parent. At a node whose two
    /// subtrees both carry updates the first stream to arrive clears the
    /// wait-flag and quits; the second re-reads both children and proceeds.
    fn up_stream(&self, mut u: usize) {
        loop {
            self.sift_down(u);
            if u == 0 {
                return;
            }
            let p = parent(u);
            if self.marks[p].load(Ordering::SeqCst) & (LEFT | RIGHT) == LEFT | RIGHT
                && self.wait[p].compare_exchange(1, 0, Ordering::SeqCst, Ordering::SeqCst).is_ok()
            {
                return;
            }
            u = p;
        }
    }

    // ---- checks --------------------------------------------------------

    /// Heap order, handle round trip, and idle flags.
    pub fn check(&self) -> std::result::Result<(), String> {
        for v in 1..self.len {
            if self.less(v, parent(v)) {
                return Err(format!("heap order violated at slot {v}"));
            }
        }
        if self.handles.len() != self.len {
            return Err(format!("{} handles for {} slots", self.handles.len(), self.len));
        }
        for (&o, &it) in &self.handles {
            let s = self.items[it as usize].slot.load(Ordering::Relaxed) as usize;
            if s >= self.len || self.item_at(s) != it as usize || self.items[it as usize].entry.owner != o {
                return Err(format!("handle for owner {o} is stale"));
            }
            if self.items[it as usize].rank != o {
                return Err(format!("owner {o} still carries a placeholder rank"));
            }
        }
        if !self.flags_clear() {
            return Err("flags left set after heapify".into());
        }
        Ok(())
    }
}

impl<K: HeapKey> Debug for BatchHeap<K> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BatchHeap").field("len", &self.len).field("mode", &self.mode).finish()
    }
}
