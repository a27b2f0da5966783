//! One neighborhood index, backed by a grid or by a kd-tree. Both answer
//! box-neighborhood queries with identical membership; the kd-tree avoids
//! enumerating `3^k` cells in higher dimensions.

use crate::error::Result;
use crate::geometry::{check_coords, check_side, dist, Point};
use crate::grid::{GridDict, Stamp};
use crate::ids::IdSet;
use crate::kdtree::DynKdTree;

#[derive(Debug)]
pub(crate) enum Engine {
    Grid(GridDict),
    Kd { tree: DynKdTree, side: f64 },
}

impl Engine {
    pub fn build(points: &[Point], side: f64, k: usize, kd: bool) -> Result<Engine> {
        check_side(side)?;
        if kd {
            for p in points {
                check_coords(&p.coords, side)?;
            }
            Ok(Engine::Kd { tree: DynKdTree::build(k, points.to_vec())?, side })
        } else {
            Ok(Engine::Grid(GridDict::build(points, side)?))
        }
    }

    pub fn side(&self) -> f64 {
        match self {
            Engine::Grid(g) => g.side(),
            Engine::Kd { side, .. } => *side,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Engine::Grid(g) => g.len(),
            Engine::Kd { tree, .. } => tree.len(),
        }
    }

    pub fn contains(&self, id: u64) -> bool {
        match self {
            Engine::Grid(g) => g.contains(id),
            Engine::Kd { tree, .. } => tree.contains(id),
        }
    }

    pub fn get(&self, id: u64) -> Option<&Point> {
        match self {
            Engine::Grid(g) => g.get(id),
            Engine::Kd { tree, .. } => tree.get(id),
        }
    }

    pub fn points(&self) -> Box<dyn Iterator<Item = &Point> + '_> {
        match self {
            Engine::Grid(g) => Box::new(g.points()),
            Engine::Kd { tree, .. } => Box::new(tree.points()),
        }
    }

    pub fn insert(&mut self, pts: &[Point]) -> Result<()> {
        match self {
            Engine::Grid(g) => g.insert_batch(pts),
            Engine::Kd { tree, side } => {
                for p in pts {
                    check_coords(&p.coords, *side)?;
                }
                tree.insert_batch(pts.to_vec())
            }
        }
    }

    pub fn delete(&mut self, ids: &[u64]) -> Result<()> {
        match self {
            Engine::Grid(g) => g.delete_batch(ids),
            Engine::Kd { tree, .. } => tree.delete_batch(ids),
        }
    }

    /// Box neighborhood of `coords` at this index's side, minus `exclude`.
    #[inline]
    pub fn visit_nbrs<'a, F: FnMut(&'a Point) -> bool>(&'a self, coords: &[f64], exclude: u64, f: F) {
        match self {
            Engine::Grid(g) => g.visit_neighborhood(coords, exclude, f),
            Engine::Kd { tree, side } => tree.visit_box_neighborhood(coords, *side, Some(exclude), f),
        }
    }

    #[inline]
    pub fn is_sparse(&self, p: &Point) -> bool {
        match self {
            Engine::Grid(g) => g.is_sparse(p),
            Engine::Kd { tree, side } => tree.is_sparse_at(p, *side),
        }
    }

    /// Closed ball of radius `r` around `coords`, minus `exclude`. On a grid
    /// this is exact only for `r <= side`.
    #[inline]
    pub fn visit_ball<'a, F: FnMut(&'a Point) -> bool>(&'a self, coords: &[f64], r: f64, exclude: u64, mut f: F) {
        match self {
            Engine::Grid(g) => {
                debug_assert!(r <= g.side());
                g.visit_neighborhood(coords, exclude, |p| if dist(&p.coords, coords) <= r { f(p) } else { true })
            }
            Engine::Kd { tree, .. } => tree.visit_ball(coords, r, Some(exclude), f),
        }
    }

    /// Points of this index that would become sparse if every id in `gone`
    /// were removed, among those within the neighborhoods of `gone`.
    /// `keep` filters which freed points are reported.
    pub fn freed_by<K: Fn(&Point) -> bool + Sync>(&self, gone: &[Point], gone_set: &IdSet, keep: K) -> Vec<Point> {
        let mut out: Vec<Point> = Vec::new();
        let mut seen = IdSet::default();
        match self {
            Engine::Grid(g) => {
                let ids: Vec<u64> = gone.iter().map(|p| p.id).collect();
                let stamp: Stamp = g.stamp_members(&ids);
                for x in gone {
                    g.visit_neighbor_boxes(&x.coords, |cell, members| {
                        // two survivors in one box keep each other non-sparse
                        if g.box_outsiders(cell, stamp) != 1 {
                            return;
                        }
                        let Some(r) = members.iter().find(|m| !gone_set.contains(&m.id)) else { return };
                        if seen.contains(&r.id) || !keep(r) {
                            return;
                        }
                        seen.insert(r.id);
                        let mut lone = true;
                        g.visit_neighbor_boxes(&r.coords, |c2, _| {
                            let own = usize::from(c2 == cell);
                            if g.box_outsiders(c2, stamp) > own {
                                lone = false;
                            }
                        });
                        if lone {
                            out.push(r.clone());
                        }
                    });
                }
            }
            Engine::Kd { tree, side } => {
                for x in gone {
                    tree.visit_box_neighborhood(&x.coords, *side, Some(x.id), |r| {
                        if gone_set.contains(&r.id) || seen.contains(&r.id) || !keep(r) {
                            return true;
                        }
                        seen.insert(r.id);
                        let mut lone = true;
                        tree.visit_box_neighborhood(&r.coords, *side, Some(r.id), |y| {
                            if gone_set.contains(&y.id) {
                                true
                            } else {
                                lone = false;
                                false
                            }
                        });
                        if lone {
                            out.push(r.clone());
                        }
                        true
                    });
                }
            }
        }
        out
    }

    pub fn audit(&self) -> std::result::Result<(), String> {
        match self {
            Engine::Grid(g) => g.audit(),
            Engine::Kd { tree, .. } => tree.audit(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn freed_matches_direct_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Point> =
            (0..3000).map(|i| Point::new(i, vec![rng.random_range(0.0..30.0), rng.random_range(0.0..30.0)])).collect();
        for kd in [false, true] {
            let e = Engine::build(&pts, 0.7, 2, kd).unwrap();
            let gone: Vec<Point> = pts.iter().filter(|p| p.id % 3 == 0).cloned().collect();
            let gone_set: IdSet = gone.iter().map(|p| p.id).collect();
            let mut got: Vec<u64> = e.freed_by(&gone, &gone_set, |_| true).into_iter().map(|p| p.id).collect();
            got.sort_unstable();
            let mut want: Vec<u64> = pts
                .iter()
                .filter(|r| !gone_set.contains(&r.id))
                .filter(|r| {
                    let mut had = false;
                    let mut all_gone = true;
                    e.visit_nbrs(&r.coords, r.id, |y| {
                        had = true;
                        all_gone &= gone_set.contains(&y.id);
                        true
                    });
                    had && all_gone
                })
                .map(|r| r.id)
                .collect();
            want.sort_unstable();
            assert_eq!(got, want, "kd={kd}");
        }
    }
}
