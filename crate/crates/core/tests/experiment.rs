use pairgrid::experiment::{
    generate_uniform, generate_varden, run_dynamic, run_static, DynamicConfig, DynamicOp, StaticConfig,
};
use pairgrid::geometry::dist;
use pairgrid::{DynKdTree, Mode, Point, StaticAlgo};

fn nn_distances(pts: &[Point]) -> Vec<f64> {
    let tree = DynKdTree::build(pts[0].dim(), pts.to_vec()).unwrap();
    pts.iter()
        .map(|p| {
            let mut r = 1.0;
            loop {
                let near = tree.range_query(&p.coords, r, Some(p.id)).unwrap();
                if let Some(d) = near.iter().map(|q| dist(&p.coords, &q.coords)).reduce(f64::min) {
                    return d;
                }
                r *= 2.0;
            }
        })
        .collect()
}

// squared coefficient of variation, so clusters of any scale compare
fn spread(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var / (mean * mean)
}

#[test]
fn uniform_mean_is_half_the_side() {
    let n = 100_000;
    let ds = generate_uniform(n, 2, 4).unwrap();
    let half = (n as f64).sqrt() / 2.0;
    for axis in 0..2 {
        let mean = ds.points.iter().map(|p| p.coords[axis]).sum::<f64>() / n as f64;
        assert!((mean - half).abs() < 0.05 * half, "axis {axis}: {mean} vs {half}");
    }
}

#[test]
fn varden_neighbor_distances_are_heavier_tailed() {
    let u = spread(&nn_distances(&generate_uniform(5000, 2, 1).unwrap().points));
    let v = spread(&nn_distances(&generate_varden(5000, 2, 1).unwrap().points));
    assert!(v > 2.0 * u, "varden {v} vs uniform {u}");
}

#[test]
fn rabin_and_divide_conquer_agree_on_a_million_points() {
    let ds = generate_uniform(1_000_000, 2, 6).unwrap();
    let cfg = StaticConfig { seed: 1, verify_cutoff: 0 };
    let a = run_static(StaticAlgo::Rabin, &ds, &cfg).unwrap();
    let b = run_static(StaticAlgo::DivideConquer, &ds, &cfg).unwrap();
    assert_eq!((a.result.dist.to_bits(), a.result.a, a.result.b), (b.result.dist.to_bits(), b.result.a, b.result.b));
    assert!(!a.checked && !b.checked);
}

#[test]
fn insert_all_then_delete_all_verified() {
    let ds = generate_uniform(10_000, 2, 7).unwrap();
    for mode in [Mode::Theoretical, Mode::Simplified] {
        for op in [DynamicOp::Insert, DynamicOp::Delete] {
            let reps = run_dynamic(&ds, &DynamicConfig::new(op, 1000, mode)).unwrap();
            assert_eq!(reps.len(), 10);
            assert!(reps.iter().all(|r| r.checked && r.verified), "{mode} {op}");
        }
    }
}

#[test]
fn reports_are_deterministic_apart_from_time() {
    let ds = generate_varden(3000, 3, 2).unwrap();
    let cfg = DynamicConfig::new(DynamicOp::Insert, 250, Mode::Theoretical);
    let strip = |r: &pairgrid::experiment::RunReport| (r.algorithm.clone(), r.points, r.result, r.verified);
    let a: Vec<_> = run_dynamic(&ds, &cfg).unwrap().iter().map(strip).collect();
    let b: Vec<_> = run_dynamic(&ds, &cfg).unwrap().iter().map(strip).collect();
    assert_eq!(a, b);
}
