//! Timed runs of the static algorithms and of the dynamic structure.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use super::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{PairResult, Point};
use crate::ids::IdSet;
use crate::partition::{Config, Mode, SparsePartition};
use crate::statics::{brute_force, StaticAlgo};

pub const DEFAULT_VERIFY_CUTOFF: usize = 20_000;

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub algorithm: String,
    pub dataset: String,
    pub batch: usize,
    /// points processed by this run
    pub points: usize,
    pub seconds: f64,
    pub throughput: f64,
    pub result: PairResult,
    /// the oracle ran
    pub checked: bool,
    /// the oracle ran and agreed
    pub verified: bool,
}

impl RunReport {
    /// Failed iff the oracle ran and disagreed.
    pub fn failed(&self) -> bool {
        self.checked && !self.verified
    }

    /// Totals over the batches of one dynamic run. Verified only if every
    /// batch was checked and agreed.
    pub fn total(reports: &[RunReport]) -> Option<RunReport> {
        let last = reports.last()?;
        let points: usize = reports.iter().map(|r| r.points).sum();
        let seconds: f64 = reports.iter().map(|r| r.seconds).sum();
        let checked = reports.iter().all(|r| r.checked);
        Some(RunReport {
            algorithm: last.algorithm.clone(),
            dataset: last.dataset.clone(),
            batch: last.batch,
            points,
            seconds,
            throughput: points as f64 / seconds,
            result: last.result,
            checked,
            verified: checked && reports.iter().all(|r| r.verified),
        })
    }
}

fn same(a: &PairResult, b: &PairResult) -> bool {
    a.dist.to_bits() == b.dist.to_bits() && a.a == b.a && a.b == b.b
}

#[derive(Clone, Copy, Debug)]
pub struct StaticConfig {
    pub seed: u64,
    pub verify_cutoff: usize,
}

impl Default for StaticConfig {
    fn default() -> Self {
        StaticConfig { seed: 0, verify_cutoff: DEFAULT_VERIFY_CUTOFF }
    }
}

/// One untimed warm-up, one timed run, then the brute-force check when the
/// input is small enough.
pub fn run_static(algo: StaticAlgo, ds: &Dataset, cfg: &StaticConfig) -> Result<RunReport> {
    algo.run(&ds.points, cfg.seed)?;
    let t = Instant::now();
    let result = algo.run(&ds.points, cfg.seed)?;
    let seconds = t.elapsed().as_secs_f64();
    let checked = ds.len() <= cfg.verify_cutoff;
    let verified = checked && (algo == StaticAlgo::BruteForce || same(&result, &brute_force(&ds.points)?));
    Ok(RunReport {
        algorithm: algo.name().to_string(),
        dataset: ds.name.clone(),
        batch: ds.len(),
        points: ds.len(),
        seconds,
        throughput: ds.len() as f64 / seconds,
        result,
        checked,
        verified,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DynamicOp {
    Insert,
    Delete,
}

impl fmt::Display for DynamicOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DynamicOp::Insert => "insert",
            DynamicOp::Delete => "delete",
        })
    }
}

impl FromStr for DynamicOp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "insert" => Ok(DynamicOp::Insert),
            "delete" => Ok(DynamicOp::Delete),
            _ => Err(Error::Invalid(format!("unknown operation '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DynamicConfig {
    pub op: DynamicOp,
    pub batch: usize,
    pub structure: Config,
    pub seed: u64,
    pub verify_cutoff: usize,
}

impl DynamicConfig {
    pub fn new(op: DynamicOp, batch: usize, mode: Mode) -> Self {
        DynamicConfig { op, batch, structure: Config::with_mode(mode), seed: 0, verify_cutoff: DEFAULT_VERIFY_CUTOFF }
    }
}

fn closest_or_inf(sp: &SparsePartition) -> Result<PairResult> {
    if sp.len() < 2 {
        Ok(PairResult::INFINITE)
    } else {
        sp.closest_pair()
    }
}

/// Insertion: start from the first batch, insert equal batches until the set
/// is exhausted. Deletion: build on the whole set (untimed), delete equal
/// batches in dataset order. Each batch is timed together with the closest
/// pair query that follows it. One report per batch; see
/// [`RunReport::total`].
pub fn run_dynamic(ds: &Dataset, cfg: &DynamicConfig) -> Result<Vec<RunReport>> {
    if cfg.batch == 0 {
        return Err(Error::Invalid("batch size must be at least 1".into()));
    }
    let verify = ds.len() <= cfg.verify_cutoff;
    let name = format!("{}-{}", cfg.structure.mode, cfg.op);
    let mut reports = Vec::new();
    let mut live: Vec<Point> = Vec::new();
    let mut report = |chunk: usize, seconds: f64, result: PairResult, live: &[Point]| -> Result<()> {
        let verified = verify && {
            let want = if live.len() < 2 { PairResult::INFINITE } else { brute_force(live)? };
            same(&want, &result)
        };
        reports.push(RunReport {
            algorithm: name.clone(),
            dataset: ds.name.clone(),
            batch: cfg.batch,
            points: chunk,
            seconds,
            throughput: chunk as f64 / seconds,
            result,
            checked: verify,
            verified,
        });
        Ok(())
    };
    match cfg.op {
        DynamicOp::Insert => {
            let mut sp: Option<SparsePartition> = None;
            for chunk in ds.points.chunks(cfg.batch) {
                let t = Instant::now();
                let s = match sp.as_mut() {
                    Some(s) => {
                        s.batch_insert(chunk.to_vec())?;
                        s
                    }
                    None if chunk.len() >= 2 => {
                        sp.insert(SparsePartition::build_with(chunk.to_vec(), cfg.structure, cfg.seed)?)
                    }
                    None => {
                        let mut s = SparsePartition::new(ds.k, cfg.structure, cfg.seed)?;
                        s.batch_insert(chunk.to_vec())?;
                        sp.insert(s)
                    }
                };
                let result = closest_or_inf(s)?;
                let seconds = t.elapsed().as_secs_f64();
                if verify {
                    live.extend_from_slice(chunk);
                }
                report(chunk.len(), seconds, result, &live)?;
            }
        }
        DynamicOp::Delete => {
            let mut sp = SparsePartition::build_with(ds.points.clone(), cfg.structure, cfg.seed)?;
            let mut gone = IdSet::default();
            for chunk in ds.points.chunks(cfg.batch) {
                let ids: Vec<u64> = chunk.iter().map(|p| p.id).collect();
                let t = Instant::now();
                sp.batch_delete(&ids)?;
                let result = closest_or_inf(&sp)?;
                let seconds = t.elapsed().as_secs_f64();
                if verify {
                    gone.extend(ids);
                    live = ds.points.iter().filter(|p| !gone.contains(&p.id)).cloned().collect();
                }
                report(chunk.len(), seconds, result, &live)?;
            }
        }
    }
    Ok(reports)
}

/// One row of a static-versus-dynamic comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossoverRow {
    pub batch: usize,
    pub dynamic_seconds: f64,
    pub static_seconds: f64,
    pub static_algo: StaticAlgo,
}

impl CrossoverRow {
    pub fn dynamic_wins(&self) -> bool {
        self.dynamic_seconds < self.static_seconds
    }
}

/// Builds on the first `base` points, then for each batch size times one
/// insertion of the next `b` points plus the query, against the fastest
/// static algorithm recomputing from scratch on the same `base + b` points.
pub fn crossover(
    ds: &Dataset,
    base: usize,
    batches: &[usize],
    structure: Config,
    seed: u64,
) -> Result<Vec<CrossoverRow>> {
    if base < 2 || base >= ds.len() {
        return Err(Error::Invalid(format!("base {base} must be in 2..{}", ds.len())));
    }
    let algos = [StaticAlgo::DivideConquer, StaticAlgo::Rabin, StaticAlgo::Sieve, StaticAlgo::Incremental];
    let mut rows = Vec::new();
    for &b in batches {
        if b == 0 || base + b > ds.len() {
            return Err(Error::Invalid(format!("batch {b} does not fit after base {base}")));
        }
        let mut sp = SparsePartition::build_with(ds.points[..base].to_vec(), structure, seed)?;
        let t = Instant::now();
        sp.batch_insert(ds.points[base..base + b].to_vec())?;
        let dynamic = sp.closest_pair()?;
        let dynamic_seconds = t.elapsed().as_secs_f64();
        let all = &ds.points[..base + b];
        let mut fastest = (f64::INFINITY, StaticAlgo::DivideConquer);
        for algo in algos {
            algo.run(all, seed)?;
            let t = Instant::now();
            let r = algo.run(all, seed)?;
            let s = t.elapsed().as_secs_f64();
            if !same(&r, &dynamic) {
                return Err(Error::Invalid(format!("{algo} disagrees with the dynamic structure")));
            }
            if s < fastest.0 {
                fastest = (s, algo);
            }
        }
        rows.push(CrossoverRow { batch: b, dynamic_seconds, static_seconds: fastest.0, static_algo: fastest.1 });
    }
    Ok(rows)
}
