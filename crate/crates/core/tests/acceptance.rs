//! Acceptance criteria, run in sequence so timed criteria do not compete
//! with each other. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use pairgrid::experiment::{
    crossover, generate_uniform, generate_varden, run_dynamic, DynamicConfig, DynamicOp, RunReport,
};
use pairgrid::statics::brute_force;
use pairgrid::{BatchHeap, Config, HeapEntry, HeapifyMode, KeyUpdate, Mode, PairResult, Point, SparsePartition, StaticAlgo};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn same(a: &PairResult, b: &PairResult) -> bool {
    a.dist.to_bits() == b.dist.to_bits() && a.a == b.a && a.b == b.b
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}

fn max_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get()).max(8)
}

// 1 ------------------------------------------------------------------------

fn static_oracle() -> Outcome {
    let t = Instant::now();
    let mut sets = 0;
    let mut bad = Vec::new();
    for k in [2, 3, 5, 7] {
        for varden in [false, true] {
            for seed in 0..50u64 {
                let ds = if varden { generate_varden(2000, k, seed) } else { generate_uniform(2000, k, seed) }.unwrap();
                let want = brute_force(&ds.points).unwrap();
                for algo in StaticAlgo::ALL {
                    let got = algo.run(&ds.points, seed).unwrap();
                    if !same(&got, &want) {
                        bad.push(format!("{algo} on {} seed {seed}", ds.name));
                    }
                }
                sets += 1;
            }
        }
    }
    let secs = t.elapsed();
    let ok = bad.is_empty() && secs < Duration::from_secs(120);
    outcome(ok, format!("{sets} sets x {} algorithms, {} mismatches, {:.1}s (budget 120s){}", StaticAlgo::ALL.len(), bad.len(), secs.as_secs_f64(), bad.first().map(|b| format!(", first: {b}")).unwrap_or_default()))
}

// 2, 3, 4, 10 -----------------------------------------------------------------

#[derive(Default)]
struct DynamicLog {
    batches: usize,
    oracle_mismatch: Vec<String>,
    invalid: Vec<String>,
    packing: Vec<String>,
    mode_mismatch: Vec<String>,
    seconds: f64,
}

fn dynamic_suite() -> DynamicLog {
    let t = Instant::now();
    let mut log = DynamicLog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut pool: Vec<Point> = generate_uniform(60_000, 2, 11).unwrap().points;
    pool.shuffle(&mut rng);
    let base: Vec<Point> = pool.drain(..10_000).collect();
    let mut theo = SparsePartition::build(base.clone(), Mode::Theoretical, 1).unwrap();
    let mut simp = SparsePartition::build(base, Mode::Simplified, 2).unwrap();
    let mut ops: Vec<bool> = (0..200).map(|i| i % 2 == 0).collect();
    ops.shuffle(&mut rng);
    let check = |log: &mut DynamicLog, theo: &SparsePartition, simp: &SparsePartition, tag: &str| {
        for (name, sp) in [("theoretical", theo), ("simplified", simp)] {
            let rep = sp.validate();
            if !rep.is_clean() {
                log.invalid.push(format!("{name} {tag}: {}", rep.violations[0]));
            }
            if !sp.last_batch().packing_ok() {
                log.packing.push(format!("{name} {tag}: {:?}", sp.last_batch()));
            }
        }
        let want = brute_force(&theo.points()).unwrap();
        let a = theo.closest_pair().unwrap();
        let b = simp.closest_pair().unwrap();
        if !same(&a, &want) || !same(&b, &want) {
            log.oracle_mismatch.push(format!("{tag}: {a:?} / {b:?} vs {want:?}"));
        }
        if !same(&a, &b) {
            log.mode_mismatch.push(tag.to_string());
        }
    };
    check(&mut log, &theo, &simp, "build");
    for (b, insert) in ops.into_iter().enumerate() {
        let m = rng.random_range(1..=500);
        if insert {
            let add: Vec<Point> = pool.drain(pool.len() - m..).collect();
            theo.batch_insert(add.clone()).unwrap();
            simp.batch_insert(add).unwrap();
        } else {
            let mut live = theo.points();
            live.sort_by_key(|p| p.id);
            let ids: Vec<u64> =
                rand::seq::index::sample(&mut rng, live.len(), m).into_iter().map(|i| live[i].id).collect();
            theo.batch_delete(&ids).unwrap();
            simp.batch_delete(&ids).unwrap();
        }
        check(&mut log, &theo, &simp, &format!("batch {b}"));
        log.batches += 1;
    }
    if theo.packing_violations() + simp.packing_violations() > 0 {
        log.packing.push(format!("counters: {} / {}", theo.packing_violations(), simp.packing_violations()));
    }
    log.seconds = t.elapsed().as_secs_f64();
    log
}

// 5 ------------------------------------------------------------------------

/// One fuzz run: the same batches applied to a synchronous and an
/// asynchronous heap. Returns an error on the first divergence.
fn heap_fuzz(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n0 = rng.random_range(100..2000);
    let mut next = 0u64;
    let mut entries = Vec::new();
    for _ in 0..n0 {
        entries.push(HeapEntry::new(rng.random_range(0..500) as f64, next, 0));
        next += 1;
    }
    let mut sync = BatchHeap::build_with_mode(entries.clone(), HeapifyMode::Sync).map_err(|e| e.to_string())?;
    let mut asyn = BatchHeap::build_with_mode(entries, HeapifyMode::Async).map_err(|e| e.to_string())?;
    let mut live: Vec<u64> = (0..next).collect();
    let mut done = 0usize;
    let checked = |h: &BatchHeap<f64>, what: &str| h.check().map_err(|e| format!("seed {seed} {what}: {e}"));
    while done < 10_000 {
        let m = rng.random_range(1..=64);
        match rng.random_range(0..4) {
            0 => {
                let batch: Vec<HeapEntry<f64>> = (0..m)
                    .map(|_| {
                        next += 1;
                        HeapEntry::new(rng.random_range(0..500) as f64, next, 0)
                    })
                    .collect();
                live.extend(batch.iter().map(|e| e.owner));
                sync.batch_insert(batch.clone()).map_err(|e| e.to_string())?;
                asyn.batch_insert(batch).map_err(|e| e.to_string())?;
            }
            1 if live.len() > m => {
                live.shuffle(&mut rng);
                let gone: Vec<u64> = live.drain(..m).collect();
                sync.batch_delete(&gone).map_err(|e| e.to_string())?;
                asyn.batch_delete(&gone).map_err(|e| e.to_string())?;
            }
            _ => {
                // mixed increases and decreases, each owner once
                let picks = rand::seq::index::sample(&mut rng, live.len(), m.min(live.len()));
                let ups: Vec<KeyUpdate<f64>> = picks
                    .into_iter()
                    .map(|i| {
                        let owner = live[i];
                        let old = sync.get(owner).expect("live").key;
                        KeyUpdate { owner, old, new: rng.random_range(0..500) as f64, witness: 0 }
                    })
                    .filter(|u| u.new != u.old)
                    .collect();
                let (dec, inc): (Vec<_>, Vec<_>) = ups.into_iter().partition(|u| u.new < u.old);
                for part in [dec, inc] {
                    sync.heapify(&part).map_err(|e| e.to_string())?;
                    asyn.async_heapify(&part).map_err(|e| e.to_string())?;
                }
            }
        }
        done += m;
        checked(&sync, "sync")?;
        checked(&asyn, "async")?;
        if sync.find_min().ok().map(|e| (e.key, e.owner)) != asyn.find_min().ok().map(|e| (e.key, e.owner)) {
            return Err(format!("seed {seed}: minima differ"));
        }
    }
    let a: Vec<(f64, u64)> = sync.drain_sorted().into_iter().map(|e| (e.key, e.owner)).collect();
    let b: Vec<(f64, u64)> = asyn.drain_sorted().into_iter().map(|e| (e.key, e.owner)).collect();
    if a != b {
        return Err(format!("seed {seed}: drained sequences differ"));
    }
    Ok(())
}

fn heap_equivalence() -> Outcome {
    let workers = max_workers();
    let errors: Vec<String> = pool(workers).install(|| (0..100u64).filter_map(|s| heap_fuzz(s).err()).collect());
    outcome(errors.is_empty(), format!("100 runs x 10^4 element ops on {workers} workers, {} failures{}", errors.len(), errors.first().map(|e| format!(", first: {e}")).unwrap_or_default()))
}

// 6 ------------------------------------------------------------------------

fn heap_swaps() -> Outcome {
    let n = 100_000usize;
    let mut lines = Vec::new();
    let mut ok = true;
    for m in [16usize, 256, 4096] {
        let bound = 4.0 * m as f64 * (((n + m) as f64 / m as f64).log2() + 2.0);
        for mode in [HeapifyMode::Sync, HeapifyMode::Async] {
            let mut total = 0u64;
            for seed in 0..20u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let entries: Vec<HeapEntry<f64>> =
                    (0..n as u64).map(|i| HeapEntry::new(rng.random::<f64>(), i, 0)).collect();
                let mut h = BatchHeap::build_with_mode(entries, mode).unwrap();
                let owners = rand::seq::index::sample(&mut rng, n, m);
                let mut changes: Vec<(u64, f64, u64)> =
                    owners.into_iter().map(|o| (o as u64, rng.random::<f64>(), 0)).collect();
                changes.sort_by_key(|c| c.0);
                h.reset_swaps();
                h.update_keys(&changes).unwrap();
                total += h.swaps();
                assert!(h.check().is_ok());
            }
            let avg = total as f64 / 20.0;
            ok &= avg <= bound;
            lines.push(format!("m={m} {mode:?} avg {avg:.0} <= {bound:.0}"));
        }
    }
    outcome(ok, lines.join("; "))
}

// 7 ------------------------------------------------------------------------

fn level_bound() -> Outcome {
    let n = 100_000usize;
    let bound = 8.0 * (n as f64).log2();
    let mut worst = [0usize; 2];
    for (w, k) in [2usize, 7].into_iter().enumerate() {
        let pts = generate_uniform(n, k, 77).unwrap().points;
        for seed in 0..20u64 {
            let sp = SparsePartition::build(pts.clone(), Mode::Simplified, seed).unwrap();
            worst[w] = worst[w].max(sp.num_levels());
        }
    }
    let ok = worst.iter().all(|&l| l as f64 <= bound);
    outcome(ok, format!("max L: k=2 {}, k=7 {} (bound {bound:.1})", worst[0], worst[1]))
}

// 8 ------------------------------------------------------------------------

fn throughput_trend() -> Outcome {
    let t = Instant::now();
    let workers = max_workers();
    let ds = generate_uniform(1_000_000, 2, 8).unwrap();
    let run = |batch: usize| -> RunReport {
        let cfg = DynamicConfig { verify_cutoff: 0, ..DynamicConfig::new(DynamicOp::Insert, batch, Mode::Theoretical) };
        RunReport::total(&run_dynamic(&ds, &cfg).unwrap()).unwrap()
    };
    let (small, large) = pool(workers).install(|| (run(100), run(10_000)));
    let ratio = large.throughput / small.throughput;
    let secs = t.elapsed().as_secs_f64();
    let ok = ratio >= 2.0 && secs < 300.0;
    outcome(
        ok,
        format!(
            "{workers} workers: batch 1e2 {:.0} pts/s, batch 1e4 {:.0} pts/s, ratio {ratio:.2} (need 2), {secs:.0}s (budget 300s)",
            small.throughput, large.throughput
        ),
    )
}

// 9 ------------------------------------------------------------------------

fn crossover_exists() -> Outcome {
    let ds = generate_uniform(100_000, 5, 9).unwrap();
    let base = 40_000;
    let sizes = [10, 100, 1_000, 10_000, 60_000];
    let rows = crossover(&ds, base, &sizes, Config::default(), 3).unwrap();
    let win = rows.iter().position(|r| r.dynamic_wins());
    let lose = win.and_then(|w| rows[w + 1..].iter().find(|r| !r.dynamic_wins()));
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("b={} dyn {:.4}s vs {} {:.4}s", r.batch, r.dynamic_seconds, r.static_algo, r.static_seconds))
        .collect();
    let found = match (win, lose) {
        (Some(w), Some(l)) => format!("dynamic wins at {}, static wins at {}", rows[w].batch, l.batch),
        _ => "no crossover".into(),
    };
    outcome(win.is_some() && lose.is_some(), format!("{found} [{}]", table.join(", ")))
}

// --------------------------------------------------------------------------

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        }
    }
}

type Results = Vec<(u32, Outcome)>;

fn report(results: &mut Results, n: u32, name: &str, o: Outcome, t: Instant) {
    let tag = if o.ok { "PASS" } else { "FAIL" };
    println!("criterion {n:>2} [{tag}] {name}: {} ({:.1}s)", o.detail, t.elapsed().as_secs_f64());
    results.push((n, o));
}

fn dynamic_criteria(results: &mut Results, wanted: &dyn Fn(u32) -> bool) {
    let t = Instant::now();
    let names = [(2, "dynamic oracle equivalence"), (3, "structural invariants"), (4, "packing bounds"), (10, "mode equivalence")];
    let Ok(log) = catch_unwind(dynamic_suite) else {
        for (n, name) in names {
            if wanted(n) {
                report(results, n, name, outcome(false, "dynamic suite panicked"), t);
            }
        }
        return;
    };
    let first = |v: &Vec<String>| v.first().cloned().unwrap_or_default();
    let outcomes = [
        outcome(
            log.oracle_mismatch.is_empty() && log.seconds < 300.0,
            format!(
                "{} batches in both modes, {} mismatches, {:.0}s (budget 300s) {}",
                log.batches,
                log.oracle_mismatch.len(),
                log.seconds,
                first(&log.oracle_mismatch)
            ),
        ),
        outcome(log.invalid.is_empty(), format!("{} violations {}", log.invalid.len(), first(&log.invalid))),
        outcome(log.packing.is_empty(), format!("{} violations {}", log.packing.len(), first(&log.packing))),
        outcome(log.mode_mismatch.is_empty(), format!("{} disagreements {}", log.mode_mismatch.len(), first(&log.mode_mismatch))),
    ];
    for ((n, name), o) in names.into_iter().zip(outcomes) {
        if wanted(n) {
            report(results, n, name, o, t);
        }
    }
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |n: u32| filter.is_empty() || filter.iter().any(|f| f == &n.to_string());
    let mut results: Results = Vec::new();
    let singles: [(u32, &str, fn() -> Outcome); 6] = [
        (1, "static oracle equivalence", static_oracle),
        (5, "heap equivalence", heap_equivalence),
        (6, "heap swap bound", heap_swaps),
        (7, "level-count bound", level_bound),
        (8, "throughput trend", throughput_trend),
        (9, "crossover existence", crossover_exists),
    ];
    for (i, (n, name, f)) in singles.into_iter().enumerate() {
        if i == 1 && [2, 3, 4, 10].into_iter().any(wanted) {
            dynamic_criteria(&mut results, &wanted);
        }
        if wanted(n) {
            let t = Instant::now();
            report(&mut results, n, name, guarded(f), t);
        }
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.1.ok).map(|r| r.0).collect();
    println!("acceptance: {} passed, {} failed {:?}", results.len() - failed.len(), failed.len(), failed);
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
