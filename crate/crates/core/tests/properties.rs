use pairgrid::statics::brute_force;
use pairgrid::{BatchHeap, Config, DynKdTree, GridDict, HeapEntry, HeapProtocol, Mode, Point, SparsePartition, StaticAlgo};
use proptest::prelude::*;

fn points(k: usize, max: usize) -> impl Strategy<Value = Vec<Point>> {
    // a coarse lattice makes ties and shared boxes common
    proptest::collection::hash_set(proptest::collection::vec(0i32..40, k), 2..max).prop_map(|set| {
        set.into_iter()
            .enumerate()
            .map(|(i, c)| Point::new(i as u64, c.into_iter().map(|x| x as f64 * 0.25).collect()))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn static_algorithms_match_brute(pts in points(2, 300), seed in 0u64..1000) {
        let want = brute_force(&pts).unwrap();
        for algo in StaticAlgo::ALL {
            prop_assert_eq!(algo.run(&pts, seed).unwrap(), want, "{}", algo);
        }
    }

    #[test]
    fn static_algorithms_match_brute_3d(pts in points(3, 200), seed in 0u64..1000) {
        let want = brute_force(&pts).unwrap();
        for algo in StaticAlgo::ALL {
            prop_assert_eq!(algo.run(&pts, seed).unwrap(), want, "{}", algo);
        }
    }

    #[test]
    fn grid_neighborhood_is_box_rule(pts in points(2, 200), side in 0.1f64..3.0) {
        let g = GridDict::build(&pts, side).unwrap();
        g.audit().unwrap();
        for p in pts.iter().take(20) {
            let mut got: Vec<u64> = g.neighborhood(p).into_iter().map(|q| q.id).collect();
            got.sort_unstable();
            let cp: Vec<i64> = p.coords.iter().map(|c| (c / side).floor() as i64).collect();
            let want: Vec<u64> = pts
                .iter()
                .filter(|q| q.id != p.id)
                .filter(|q| q.coords.iter().zip(&cp).all(|(c, &b)| ((c / side).floor() as i64 - b).abs() <= 1))
                .map(|q| q.id)
                .collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn kd_range_matches_scan(pts in points(3, 300), r in 0.0f64..4.0, cuts in 0usize..200) {
        let mut t = DynKdTree::build(3, pts[..pts.len() / 2].to_vec()).unwrap();
        t.insert_batch(pts[pts.len() / 2..].to_vec()).unwrap();
        let gone: Vec<u64> = pts.iter().take(cuts.min(pts.len())).map(|p| p.id).collect();
        t.delete_batch(&gone).unwrap();
        t.audit().unwrap();
        let live: Vec<&Point> = pts.iter().filter(|p| !gone.contains(&p.id)).collect();
        for q in pts.iter().step_by(17) {
            let mut got: Vec<u64> = t.range_query(&q.coords, r, Some(q.id)).unwrap().into_iter().map(|p| p.id).collect();
            got.sort_unstable();
            let mut want: Vec<u64> = live
                .iter()
                .filter(|p| p.id != q.id && pairgrid::distance(p, q).unwrap() <= r)
                .map(|p| p.id)
                .collect();
            want.sort_unstable();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn heap_matches_sorted_model(keys in proptest::collection::vec(0u32..50, 1..300), ops in proptest::collection::vec((0usize..300, 0u32..50), 0..200)) {
        let mut h = BatchHeap::<f64>::build(keys.iter().enumerate().map(|(i, &k)| HeapEntry::new(k as f64, i as u64, 0)).collect()).unwrap();
        let mut model: Vec<f64> = keys.iter().map(|&k| k as f64).collect();
        for chunk in ops.chunks(7) {
            let mut seen = std::collections::HashSet::new();
            let upd: Vec<(u64, f64, u64)> = chunk
                .iter()
                .filter(|(i, _)| *i < model.len() && seen.insert(*i))
                .map(|&(i, k)| (i as u64, k as f64, 0))
                .collect();
            h.update_keys(&upd).unwrap();
            for &(i, k, _) in &upd {
                model[i as usize] = k;
            }
            prop_assert!(h.check().is_ok());
            let min = model.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(h.find_min().unwrap().key, min);
        }
        let drained: Vec<f64> = h.drain_sorted().into_iter().map(|e| e.key).collect();
        model.sort_by(f64::total_cmp);
        prop_assert_eq!(drained, model);
    }

    #[test]
    fn partition_tracks_brute_force(
        pts in points(2, 250),
        steps in proptest::collection::vec((any::<bool>(), 1usize..40), 1..12),
        seed in 0u64..100,
        simplified in any::<bool>(),
    ) {
        let mode = if simplified { Mode::Simplified } else { Mode::Theoretical };
        let half = (pts.len() / 2).max(2);
        let (base, mut pool) = (pts[..half].to_vec(), pts[half..].to_vec());
        let mut sp = SparsePartition::build(base, mode, seed).unwrap();
        for (insert, m) in steps {
            if insert && !pool.is_empty() {
                let take = m.min(pool.len());
                sp.batch_insert(pool.drain(..take).collect()).unwrap();
            } else if sp.len() > 2 {
                let mut live = sp.points();
                live.sort_by_key(|p| p.id);
                let take = m.min(live.len() - 2);
                let ids: Vec<u64> = live.iter().take(take).map(|p| p.id).collect();
                sp.batch_delete(&ids).unwrap();
                pool.extend(live.into_iter().take(take));
            }
            let rep = sp.validate();
            prop_assert!(rep.is_clean(), "{}", rep);
            prop_assert_eq!(sp.closest_pair().unwrap(), brute_force(&sp.points()).unwrap());
            prop_assert!(sp.last_batch().packing_ok());
        }
    }

    #[test]
    fn protocols_agree(pts in points(2, 200), seed in 0u64..100) {
        let half = (pts.len() / 2).max(2);
        let mut a = SparsePartition::build_with(pts[..half].to_vec(), Config::default(), seed).unwrap();
        let naive = Config { protocol: HeapProtocol::Naive, ..Config::default() };
        let mut b = SparsePartition::build_with(pts[..half].to_vec(), naive, seed).unwrap();
        a.batch_insert(pts[half..].to_vec()).unwrap();
        b.batch_insert(pts[half..].to_vec()).unwrap();
        prop_assert_eq!(a.closest_pair().unwrap(), b.closest_pair().unwrap());
        prop_assert_eq!(a.level_info(), b.level_info());
        prop_assert!(b.validate().is_clean());
    }
}
