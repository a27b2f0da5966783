//! Fixtures shared by the benchmarks.

use pairgrid::experiment::{generate_uniform, generate_varden, Dataset};
use pairgrid::{HeapEntry, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn uniform(n: usize, k: usize) -> Dataset {
    generate_uniform(n, k, 1).expect("valid generator arguments")
}

pub fn varden(n: usize, k: usize) -> Dataset {
    generate_varden(n, k, 1).expect("valid generator arguments")
}

/// Splits `pts` into a base of `base` points and the next `batch` points.
pub fn split(pts: &[Point], base: usize, batch: usize) -> (Vec<Point>, Vec<Point>) {
    (pts[..base].to_vec(), pts[base..base + batch].to_vec())
}

/// `n` heap entries with random keys and owners `0..n`.
pub fn heap_entries(n: usize, seed: u64) -> Vec<HeapEntry<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n as u64).map(|o| HeapEntry::new(rng.random::<f64>(), o, o)).collect()
}

/// `m` distinct owners below `n` with fresh random keys.
pub fn key_changes(n: usize, m: usize, seed: u64) -> Vec<(u64, f64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, n, m).into_iter().map(|o| (o as u64, rng.random::<f64>(), o as u64)).collect()
}
