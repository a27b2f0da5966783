//! Dynamic kd-tree used where a `3^k` box probe gets expensive.
//!
//! Splits are at the spatial median of the widest bounding-box dimension,
//! leaves hold at most [`LEAF_SIZE`] points. Deletions only mark points
//! invalid; once more than half the stored points are invalid the tree is
//! rebuilt from the survivors. Bounding boxes grow on insertion and never
//! shrink on deletion, so they stay conservative.

use crate::error::{Error, Result};
use crate::geometry::{cell_into, cell_of, cells_adjacent, check_side, dist, Cell, Point};
use crate::ids::{IdMap, IdSet};

pub const LEAF_SIZE: usize = 16;

const PAR_BUILD: usize = 4096;

#[derive(Clone, Debug)]
enum Kind {
    Leaf(Vec<u32>),
    Inner { dim: usize, split: f64, left: u32, right: u32 },
}

#[derive(Clone, Debug)]
struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// valid points below this node
    count: usize,
    kind: Kind,
}

#[derive(Clone, Debug)]
pub struct DynKdTree {
    dim: usize,
    pts: Vec<Point>,
    valid: Vec<bool>,
    index: IdMap<u32>,
    invalid: usize,
    nodes: Vec<Node>,
}

fn bbox(pts: &[Point], idx: &[u32], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for &i in idx {
        for (j, &c) in pts[i as usize].coords.iter().enumerate() {
            lo[j] = lo[j].min(c);
            hi[j] = hi[j].max(c);
        }
    }
    (lo, hi)
}

/// Subtree over `idx` as a node list rooted at index 0, children numbered
/// locally. Large halves are built in parallel and spliced.
fn build_nodes(pts: &[Point], idx: Vec<u32>, dim: usize) -> Vec<Node> {
    let (lo, hi) = bbox(pts, &idx, dim);
    let (axis, extent) = (0..dim).map(|j| (j, hi[j] - lo[j])).fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
    let count = idx.len();
    if idx.len() <= LEAF_SIZE || extent <= 0.0 {
        return vec![Node { lo, hi, count, kind: Kind::Leaf(idx) }];
    }
    let mut split = lo[axis] + extent / 2.0;
    if split <= lo[axis] || split >= hi[axis] {
        // extent below float resolution at this magnitude; fall back to the max
        split = hi[axis];
    }
    let (l, r): (Vec<u32>, Vec<u32>) = idx.into_iter().partition(|&i| pts[i as usize].coords[axis] < split);
    let (left, right) = if count >= PAR_BUILD {
        rayon::join(|| build_nodes(pts, l, dim), || build_nodes(pts, r, dim))
    } else {
        (build_nodes(pts, l, dim), build_nodes(pts, r, dim))
    };
    let off_l = 1u32;
    let off_r = 1 + left.len() as u32;
    let mut out = Vec::with_capacity(1 + left.len() + right.len());
    out.push(Node { lo, hi, count, kind: Kind::Inner { dim: axis, split, left: off_l, right: off_r } });
    for (nodes, off) in [(left, off_l), (right, off_r)] {
        out.extend(nodes.into_iter().map(|mut n| {
            if let Kind::Inner { left, right, .. } = &mut n.kind {
                *left += off;
                *right += off;
            }
            n
        }));
    }
    out
}

impl DynKdTree {
    pub fn new(dim: usize) -> Self {
        DynKdTree { dim, pts: Vec::new(), valid: Vec::new(), index: IdMap::default(), invalid: 0, nodes: Vec::new() }
    }

    pub fn build(dim: usize, points: Vec<Point>) -> Result<Self> {
        let mut t = DynKdTree::new(dim);
        t.check_new(&points)?;
        t.rebuild_from(points);
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.index.contains_key(&id)
    }

    pub fn get(&self, id: u64) -> Option<&Point> {
        self.index.get(&id).map(|&i| &self.pts[i as usize])
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.pts.iter().zip(&self.valid).filter(|(_, &v)| v).map(|(p, _)| p)
    }

    /// Fraction of stored slots that are tombstones.
    pub fn invalid_ratio(&self) -> f64 {
        if self.pts.is_empty() {
            0.0
        } else {
            self.invalid as f64 / self.pts.len() as f64
        }
    }

    fn check_new(&self, points: &[Point]) -> Result<()> {
        let mut seen = IdSet::default();
        for p in points {
            if p.dim() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: p.dim() });
            }
            if p.coords.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite(p.id));
            }
            if self.index.contains_key(&p.id) || !seen.insert(p.id) {
                return Err(Error::DuplicateId(p.id));
            }
        }
        Ok(())
    }

    fn rebuild_from(&mut self, points: Vec<Point>) {
        self.pts = points;
        self.valid = vec![true; self.pts.len()];
        self.invalid = 0;
        self.index = self.pts.iter().enumerate().map(|(i, p)| (p.id, i as u32)).collect();
        self.nodes.clear();
        if !self.pts.is_empty() {
            let idx: Vec<u32> = (0..self.pts.len() as u32).collect();
            self.nodes = build_nodes(&self.pts, idx, self.dim);
        }
    }

    /// Replaces the leaf `n` by a subtree over its valid points, appending
    /// the new descendants. The leaf's box is kept, since ancestors were
    /// grown to it.
    fn split_leaf(&mut self, n: usize) {
        let idx = match &mut self.nodes[n].kind {
            Kind::Leaf(v) => std::mem::take(v),
            Kind::Inner { .. } => unreachable!("split of an inner node"),
        };
        let idx: Vec<u32> = idx.into_iter().filter(|&i| self.valid[i as usize]).collect();
        let mut sub = build_nodes(&self.pts, idx, self.dim);
        let off = self.nodes.len() as u32 - 1;
        for node in sub.iter_mut().skip(1) {
            if let Kind::Inner { left, right, .. } = &mut node.kind {
                *left += off;
                *right += off;
            }
        }
        let mut rest = sub.drain(1..).collect::<Vec<_>>();
        let mut root = sub.pop().expect("subtree root");
        if let Kind::Inner { left, right, .. } = &mut root.kind {
            *left += off;
            *right += off;
        }
        root.lo = std::mem::take(&mut self.nodes[n].lo);
        root.hi = std::mem::take(&mut self.nodes[n].hi);
        self.nodes[n] = root;
        self.nodes.append(&mut rest);
    }

    /// Routes the batch from the root, splitting it by each stored split
    /// value; boxes and counts are updated once per node for the whole group.
    pub fn insert_batch(&mut self, points: Vec<Point>) -> Result<()> {
        self.check_new(&points)?;
        if points.is_empty() {
            return Ok(());
        }
        if self.nodes.is_empty() {
            let mut all: Vec<Point> = self.points().cloned().collect();
            all.extend(points);
            self.rebuild_from(all);
            return Ok(());
        }
        let first = self.pts.len() as u32;
        for p in points {
            self.index.insert(p.id, self.pts.len() as u32);
            self.pts.push(p);
            self.valid.push(true);
        }
        let idx: Vec<u32> = (first..self.pts.len() as u32).collect();
        let mut work = vec![(0usize, idx)];
        while let Some((n, idx)) = work.pop() {
            let (lo, hi) = bbox(&self.pts, &idx, self.dim);
            let node = &mut self.nodes[n];
            for j in 0..self.dim {
                node.lo[j] = node.lo[j].min(lo[j]);
                node.hi[j] = node.hi[j].max(hi[j]);
            }
            node.count += idx.len();
            match &mut node.kind {
                Kind::Inner { dim, split, left, right } => {
                    let (d, s, l, r) = (*dim, *split, *left as usize, *right as usize);
                    let (a, b): (Vec<u32>, Vec<u32>) =
                        idx.into_iter().partition(|&i| self.pts[i as usize].coords[d] < s);
                    if !a.is_empty() {
                        work.push((l, a));
                    }
                    if !b.is_empty() {
                        work.push((r, b));
                    }
                }
                Kind::Leaf(v) => {
                    v.extend(idx);
                    if v.len() > LEAF_SIZE {
                        self.split_leaf(n);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn delete_batch(&mut self, ids: &[u64]) -> Result<()> {
        let mut seen = IdSet::default();
        for &id in ids {
            if !self.index.contains_key(&id) || !seen.insert(id) {
                return Err(Error::UnknownId(id));
            }
        }
        for id in ids {
            let i = self.index.remove(id).expect("checked") as usize;
            self.valid[i] = false;
            self.invalid += 1;
            // every stored point satisfies its ancestors' split predicates
            let c = &self.pts[i].coords;
            let mut n = 0usize;
            loop {
                let node = &mut self.nodes[n];
                node.count -= 1;
                match node.kind {
                    Kind::Inner { dim, split, left, right } => {
                        n = if c[dim] < split { left } else { right } as usize;
                    }
                    Kind::Leaf(_) => break,
                }
            }
        }
        if self.invalid * 2 > self.pts.len() {
            let survivors: Vec<Point> = self.points().cloned().collect();
            self.rebuild_from(survivors);
        }
        Ok(())
    }

    /// Visits each valid point passing `inside`, pruning subtrees whose
    /// bounding box fails `overlaps`. Stops early when `f` returns false.
    fn visit<'a, O, I, F>(&'a self, overlaps: O, inside: I, mut f: F)
    where
        O: Fn(&[f64], &[f64]) -> bool,
        I: Fn(&Point) -> bool,
        F: FnMut(&'a Point) -> bool,
    {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if node.count == 0 || !overlaps(&node.lo, &node.hi) {
                continue;
            }
            match &node.kind {
                Kind::Inner { left, right, .. } => {
                    stack.push(*right);
                    stack.push(*left);
                }
                Kind::Leaf(v) => {
                    for &i in v {
                        if self.valid[i as usize] {
                            let p = &self.pts[i as usize];
                            if inside(p) && !f(p) {
                                return;
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn visit_ball<'a, F: FnMut(&'a Point) -> bool>(&'a self, center: &[f64], r: f64, exclude: Option<u64>, f: F) {
        let overlaps = |lo: &[f64], hi: &[f64]| {
            let mut s = 0.0;
            for j in 0..center.len() {
                let d = if center[j] < lo[j] {
                    lo[j] - center[j]
                } else if center[j] > hi[j] {
                    center[j] - hi[j]
                } else {
                    0.0
                };
                s += d * d;
            }
            // slack so float rounding in the box bound never prunes a boundary point
            s.sqrt() <= r * (1.0 + 1e-12) + f64::MIN_POSITIVE
        };
        let inside = |p: &Point| Some(p.id) != exclude && dist(&p.coords, center) <= r;
        self.visit(overlaps, inside, f);
    }

    /// Points at distance at most `r` from `center`, excluding `exclude`.
    pub fn range_query(&self, center: &[f64], r: f64, exclude: Option<u64>) -> Result<Vec<Point>> {
        if center.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: center.len() });
        }
        if r.is_nan() || r < 0.0 {
            return Err(Error::NegativeRadius(r));
        }
        let mut out = Vec::new();
        self.visit_ball(center, r, exclude, |p| {
            out.push(p.clone());
            true
        });
        Ok(out)
    }

    /// Same membership as a grid probe: points whose cell at `side` is within
    /// one of the cell of `coords` along every axis.
    pub fn visit_box_neighborhood<'a, F: FnMut(&'a Point) -> bool>(
        &'a self,
        coords: &[f64],
        side: f64,
        exclude: Option<u64>,
        f: F,
    ) {
        let center = cell_of(coords, side);
        let overlaps = |lo: &[f64], hi: &[f64]| {
            (0..center.len()).all(|j| {
                let a = (lo[j] / side).floor() as i64;
                let b = (hi[j] / side).floor() as i64;
                a <= center[j] + 1 && b >= center[j] - 1
            })
        };
        let inside = |p: &Point| {
            if Some(p.id) == exclude {
                return false;
            }
            let mut c = Cell::new();
            cell_into(&p.coords, side, &mut c);
            cells_adjacent(&c, &center)
        };
        self.visit(overlaps, inside, f);
    }

    pub fn box_neighborhood(&self, coords: &[f64], side: f64, exclude: Option<u64>) -> Result<Vec<Point>> {
        check_side(side)?;
        if coords.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: coords.len() });
        }
        let mut out = Vec::new();
        self.visit_box_neighborhood(coords, side, exclude, |p| {
            out.push(p.clone());
            true
        });
        Ok(out)
    }

    /// No other point shares the box neighborhood of `p` at `side`.
    pub fn is_sparse_at(&self, p: &Point, side: f64) -> bool {
        let mut lone = true;
        self.visit_box_neighborhood(&p.coords, side, Some(p.id), |_| {
            lone = false;
            false
        });
        lone
    }

    /// Recomputes counts bottom-up and checks boxes, split predicates and
    /// reachability.
    pub fn audit(&self) -> std::result::Result<(), String> {
        let live = self.valid.iter().filter(|&&v| v).count();
        if live != self.index.len() || self.invalid != self.pts.len() - live {
            return Err(format!("tombstone count {} disagrees with {} live of {}", self.invalid, live, self.pts.len()));
        }
        if self.invalid * 2 > self.pts.len() {
            return Err("invalid ratio above one half".into());
        }
        let mut reached = vec![false; self.pts.len()];
        if !self.nodes.is_empty() {
            let total = self.audit_node(0, &mut Vec::new(), &mut reached)?;
            if total != live {
                return Err(format!("root counts {total} of {live} live points"));
            }
        }
        for (i, &v) in self.valid.iter().enumerate() {
            if v && !reached[i] {
                return Err(format!("point {} unreachable", self.pts[i].id));
            }
        }
        Ok(())
    }

    /// Returns the valid count below `n`; `path` holds the ancestors'
    /// `(dim, split, went_left)`.
    fn audit_node(
        &self,
        n: usize,
        path: &mut Vec<(usize, f64, bool)>,
        reached: &mut [bool],
    ) -> std::result::Result<usize, String> {
        let node = &self.nodes[n];
        let count = match &node.kind {
            Kind::Inner { dim, split, left, right } => {
                path.push((*dim, *split, true));
                let a = self.audit_node(*left as usize, path, reached)?;
                path.last_mut().expect("pushed").2 = false;
                let b = self.audit_node(*right as usize, path, reached);
                path.pop();
                for child in [*left, *right] {
                    let c = &self.nodes[child as usize];
                    if c.count > 0 && (0..self.dim).any(|j| c.lo[j] < node.lo[j] || c.hi[j] > node.hi[j]) {
                        return Err(format!("node {child} box escapes its parent"));
                    }
                }
                a + b?
            }
            Kind::Leaf(v) => {
                let mut live = 0;
                for &i in v {
                    let p = &self.pts[i as usize];
                    if !self.valid[i as usize] {
                        continue;
                    }
                    live += 1;
                    if (0..self.dim).any(|j| p.coords[j] < node.lo[j] || p.coords[j] > node.hi[j]) {
                        return Err(format!("point {} outside its leaf box", p.id));
                    }
                    if path.iter().any(|&(d, s, l)| (p.coords[d] < s) != l) {
                        return Err(format!("point {} on the wrong side of a split", p.id));
                    }
                    reached[i as usize] = true;
                }
                live
            }
        };
        if count != node.count {
            return Err(format!("node {n} counts {} but holds {count}", node.count));
        }
        Ok(count)
    }
}
