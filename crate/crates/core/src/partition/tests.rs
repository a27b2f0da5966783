use super::*;
use crate::statics::brute_force;

fn cloud(n: usize, k: usize, seed: u64, first_id: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (n as f64).sqrt();
    (0..n).map(|i| Point::new(first_id + i as u64, (0..k).map(|_| rng.random_range(0.0..side)).collect())).collect()
}

fn check(sp: &SparsePartition, ctx: &str) {
    let rep = sp.validate();
    assert!(rep.is_clean(), "{ctx}: {rep}");
    if sp.len() >= 2 {
        let want = brute_force(&sp.points()).unwrap();
        assert_eq!(sp.closest_pair().unwrap(), want, "{ctx}");
    }
}

fn cfg(mode: Mode, protocol: HeapProtocol, kd: bool) -> Config {
    Config { mode, protocol, kd_threshold: if kd { 1 } else { 64 }, heapify: HeapifyMode::Sync }
}

/// Alternating insert/delete batches against brute force.
fn churn(k: usize, c: Config, seed: u64, rounds: usize) -> SparsePartition {
    let mut sp = SparsePartition::build_with(cloud(400, k, seed, 0), c, seed).unwrap();
    check(&sp, "build");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let mut next = 10_000u64;
    for r in 0..rounds {
        let m = rng.random_range(1..80);
        if r % 2 == 0 {
            let pts = cloud(m, k, seed * 1000 + r as u64, next);
            next += m as u64;
            sp.batch_insert(pts).unwrap();
        } else {
            let mut ids: Vec<u64> = sp.points().iter().map(|p| p.id).collect();
            ids.sort_unstable();
            let take = m.min(ids.len().saturating_sub(2));
            let pick: Vec<u64> =
                rand::seq::index::sample(&mut rng, ids.len(), take).into_iter().map(|i| ids[i]).collect();
            sp.batch_delete(&pick).unwrap();
        }
        assert!(sp.last_batch().packing_ok(), "{:?}", sp.last_batch());
        check(&sp, &format!("k={k} {:?} round {r}", c.mode));
    }
    sp
}

#[test]
fn build_matches_brute_force() {
    for k in [1, 2, 3, 5] {
        for mode in [Mode::Theoretical, Mode::Simplified] {
            for seed in 0..5 {
                let sp = SparsePartition::build(cloud(700, k, seed, 0), mode, seed).unwrap();
                check(&sp, &format!("k={k} {mode:?} seed={seed}"));
            }
        }
    }
}

#[test]
fn churn_theoretical_grid() {
    for k in [2, 3] {
        churn(k, cfg(Mode::Theoretical, HeapProtocol::Pull, false), k as u64, 30);
    }
}

#[test]
fn churn_theoretical_kd() {
    churn(5, cfg(Mode::Theoretical, HeapProtocol::Pull, true), 5, 20);
    churn(2, cfg(Mode::Theoretical, HeapProtocol::Pull, true), 6, 20);
}

#[test]
fn churn_simplified() {
    for k in [2, 3, 5] {
        churn(k, cfg(Mode::Simplified, HeapProtocol::Pull, k >= 5), 10 + k as u64, 30);
    }
}

#[test]
fn churn_async_heapify() {
    let c = Config { heapify: HeapifyMode::Async, ..cfg(Mode::Theoretical, HeapProtocol::Pull, false) };
    churn(2, c, 77, 20);
}

#[test]
fn naive_and_pull_heaps_agree() {
    for seed in 0..4 {
        let a = churn(2, cfg(Mode::Theoretical, HeapProtocol::Pull, false), seed, 16);
        let b = churn(2, cfg(Mode::Theoretical, HeapProtocol::Naive, false), seed, 16);
        assert_eq!(a.num_levels(), b.num_levels());
        for (ha, hb) in a.heaps.iter().zip(&b.heaps) {
            let mut ea: Vec<_> = ha.entries().map(|e| (e.owner, e.key)).collect();
            let mut eb: Vec<_> = hb.entries().map(|e| (e.owner, e.key)).collect();
            ea.sort_by_key(|x| x.0);
            eb.sort_by_key(|x| x.0);
            assert_eq!(ea, eb, "seed {seed}");
        }
    }
}

#[test]
fn restricted_matches_scan() {
    for k in [2, 5] {
        let sp = churn(k, cfg(Mode::Theoretical, HeapProtocol::Pull, k >= 5), 40 + k as u64, 8);
        for h in 0..sp.num_levels() {
            for &id in &sp.levels[h].sparse {
                let p = sp.get(id).unwrap();
                assert_eq!(heaps::restricted(&sp.levels, k, h, p), heaps::restricted_scan(&sp.levels, k, h, p));
            }
        }
    }
}

#[test]
fn simplified_star_covers_pairs() {
    // every pair at distance <= closest pair has both ends at or below the cutoff
    for seed in 0..6 {
        let sp = SparsePartition::build(cloud(900, 3, seed, 0), Mode::Simplified, seed).unwrap();
        let j = sp.cutoff_level().unwrap();
        let best = sp.closest_pair().unwrap();
        assert_eq!(best, brute_force(&sp.points()).unwrap());
        assert!(sp.level_of(best.a).unwrap() >= j && sp.level_of(best.b).unwrap() >= j);
    }
}

#[test]
fn rejects_duplicate_coordinates() {
    let mut pts = cloud(50, 2, 1, 0);
    pts.push(Point::new(99, pts[7].coords.to_vec()));
    assert!(matches!(SparsePartition::build(pts, Mode::Theoretical, 0), Err(Error::DuplicateCoordinates(..))));

    let mut sp = SparsePartition::build(cloud(50, 2, 1, 0), Mode::Theoretical, 0).unwrap();
    let before = sp.points().len();
    let clash = Point::new(500, sp.points()[3].coords.to_vec());
    assert!(matches!(sp.batch_insert(vec![clash]), Err(Error::DuplicateCoordinates(..))));
    assert_eq!(sp.len(), before);
    let neg_zero = Point::new(501, vec![-0.0, 0.25]);
    let pos_zero = Point::new(502, vec![0.0, 0.25]);
    assert!(matches!(sp.batch_insert(vec![neg_zero, pos_zero]), Err(Error::DuplicateCoordinates(..))));
}

#[test]
fn rejects_overflowing_coordinates() {
    let pts = vec![Point::new(0, vec![0.0, 0.0]), Point::new(1, vec![1.0, 0.0]), Point::new(2, vec![1e30, 0.0])];
    assert!(SparsePartition::build(pts, Mode::Theoretical, 0).is_err());

    let mut sp = SparsePartition::build(cloud(20, 2, 2, 0), Mode::Theoretical, 0).unwrap();
    assert!(sp.batch_insert(vec![Point::new(100, vec![1e25, 1.0])]).is_err());
    assert!(sp.batch_insert(vec![Point::new(101, vec![f64::NAN, 1.0])]).is_err());
    check(&sp, "after rejected inserts");
}

#[test]
fn empty_batches_are_no_ops() {
    let mut sp = SparsePartition::build(cloud(200, 2, 3, 0), Mode::Theoretical, 0).unwrap();
    let before = sp.closest_pair().unwrap();
    sp.batch_insert(Vec::new()).unwrap();
    sp.batch_delete(&[]).unwrap();
    assert_eq!(sp.closest_pair().unwrap(), before);
    assert_eq!(sp.last_batch().moved, 0);
    check(&sp, "empty");
}

#[test]
fn delete_undoes_insert() {
    for mode in [Mode::Theoretical, Mode::Simplified] {
        let mut sp = SparsePartition::build(cloud(300, 2, 4, 0), mode, 4).unwrap();
        let before = sp.closest_pair().unwrap();
        let extra = cloud(120, 2, 5, 1000);
        let ids: Vec<u64> = extra.iter().map(|p| p.id).collect();
        sp.batch_insert(extra).unwrap();
        check(&sp, "inserted");
        sp.batch_delete(&ids).unwrap();
        check(&sp, "deleted");
        assert_eq!(sp.closest_pair().unwrap(), before);
    }
}

#[test]
fn drain_to_two_then_idle_and_back() {
    let mut sp = SparsePartition::build(cloud(60, 2, 6, 0), Mode::Theoretical, 6).unwrap();
    let mut ids: Vec<u64> = sp.points().iter().map(|p| p.id).collect();
    ids.sort_unstable();
    for chunk in ids[..58].chunks(7) {
        sp.batch_delete(chunk).unwrap();
        check(&sp, "draining");
    }
    assert_eq!(sp.len(), 2);
    assert_eq!(sp.num_levels(), 1);
    sp.batch_delete(&ids[58..59]).unwrap();
    assert_eq!(sp.len(), 1);
    assert!(sp.closest_pair().is_err());
    check(&sp, "idle");
    sp.batch_insert(vec![Point::new(900, vec![0.5, 0.5])]).unwrap();
    check(&sp, "revived");
    assert!(matches!(sp.batch_delete(&[12345]), Err(Error::UnknownId(12345))));
    assert!(matches!(sp.batch_delete(&[900, 900]), Err(Error::UnknownId(900))));
}

#[test]
fn two_points_make_one_level() {
    let sp = SparsePartition::build(
        vec![Point::new(0, vec![0.0, 0.0]), Point::new(1, vec![3.0, 4.0])],
        Mode::Theoretical,
        0,
    )
    .unwrap();
    assert_eq!(sp.num_levels(), 1);
    assert_eq!(sp.grid_side(0), Some(5.0 / 12.0));
    assert_eq!(sp.closest_pair().unwrap(), PairResult::new(0, 1, 5.0));
}

#[test]
fn geometric_shrink_and_level_bound() {
    let sp = SparsePartition::build(cloud(5000, 2, 9, 0), Mode::Theoretical, 9).unwrap();
    let info = sp.level_info();
    for w in info.windows(2) {
        assert!(w[1].d <= w[0].d / 3.0);
    }
    assert!(info.len() as f64 <= 8.0 * (5000f64).log2());
}

#[test]
fn validate_detects_corrupted_sparse_set() {
    let mut sp = SparsePartition::build(cloud(300, 2, 7, 0), Mode::Theoretical, 7).unwrap();
    assert!(sp.validate().is_clean());
    let victim = *sp.levels[0].sparse.iter().next().unwrap();
    sp.levels[0].sparse.remove(&victim);
    let rep = sp.validate();
    assert!(!rep.is_clean());
    assert!(rep.to_string().contains(&victim.to_string()));
}

#[test]
fn validate_detects_stale_heap_key() {
    let mut sp = SparsePartition::build(cloud(300, 2, 8, 0), Mode::Theoretical, 8).unwrap();
    let h = sp.num_levels() - 1;
    let e = sp.heaps[h].entries().next().unwrap().clone();
    let bumped = PairResult::new(e.key.a, e.key.b, e.key.dist + 1.0);
    sp.heaps[h].update_keys(&[(e.owner, bumped, e.witness)]).unwrap();
    assert!(!sp.validate().is_clean());
}

#[test]
fn same_seed_same_structure() {
    let a = churn(3, cfg(Mode::Theoretical, HeapProtocol::Pull, false), 21, 10);
    let b = churn(3, cfg(Mode::Theoretical, HeapProtocol::Pull, false), 21, 10);
    assert_eq!(a.level_info(), b.level_info());
}
