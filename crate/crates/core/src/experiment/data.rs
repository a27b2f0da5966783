//! Datasets: seeded generators and the plain-text point format.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Restart probability of the varden walker.
pub const VARDEN_RESTART: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    Generated { dist: Distribution, seed: u64 },
    Loaded { path: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Distribution {
    Uniform,
    Varden,
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distribution::Uniform => "uniform",
            Distribution::Varden => "varden",
        })
    }
}

impl FromStr for Distribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "u" => Ok(Distribution::Uniform),
            "varden" | "v" => Ok(Distribution::Varden),
            _ => Err(Error::Invalid(format!("unknown distribution '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub k: usize,
    pub points: Vec<Point>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn generate(dist: Distribution, n: usize, k: usize, seed: u64) -> Result<Dataset> {
        match dist {
            Distribution::Uniform => generate_uniform(n, k, seed),
            Distribution::Varden => generate_varden(n, k, seed),
        }
    }
}

fn bits(c: &[f64]) -> Vec<u64> {
    c.iter().map(|x| (x + 0.0).to_bits()).collect()
}

fn check_size(n: usize, k: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::TooFewPoints { need: 2, got: n });
    }
    if k == 0 {
        return Err(Error::Invalid("dimension must be positive".into()));
    }
    Ok(())
}

fn short_name(tag: &str, n: usize, k: usize) -> String {
    let size = match n {
        n if n >= 1_000_000 && n % 1_000_000 == 0 => format!("{}M", n / 1_000_000),
        n if n >= 1_000 && n % 1_000 == 0 => format!("{}K", n / 1_000),
        n => n.to_string(),
    };
    format!("{k}D-{tag}-{size}")
}

/// `n` distinct points drawn uniformly from `[0, sqrt n]^k`.
pub fn generate_uniform(n: usize, k: usize, seed: u64) -> Result<Dataset> {
    check_size(n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (n as f64).sqrt();
    let mut seen = HashSet::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let c: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..=side)).collect();
        if seen.insert(bits(&c)) {
            points.push(Point::new(points.len() as u64, c));
        }
    }
    Ok(Dataset {
        name: short_name("U", n, k),
        k,
        points,
        provenance: Provenance::Generated { dist: Distribution::Uniform, seed },
    })
}

fn reflect(x: f64, side: f64) -> f64 {
    let y = x.rem_euclid(2.0 * side);
    if y > side {
        2.0 * side - y
    } else {
        y
    }
}

/// Variable-density clusters in `[0, sqrt n]^k`: a walker takes Gaussian
/// steps and jumps to a uniform location with probability
/// [`VARDEN_RESTART`]. Each jump draws a new step scale between 1/1000 and
/// 1/10 of the uniform spacing, so clusters differ in density.
pub fn generate_varden(n: usize, k: usize, seed: u64) -> Result<Dataset> {
    check_size(n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (n as f64).sqrt();
    let spacing = side / (n as f64).powf(1.0 / k as f64);
    let jump = |rng: &mut ChaCha8Rng| {
        let at: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..=side)).collect();
        let sigma = spacing * 10f64.powf(rng.random_range(-3.0..-1.0));
        (at, sigma)
    };
    let (mut at, mut sigma) = jump(&mut rng);
    let mut seen = HashSet::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    let mut first = true;
    while points.len() < n {
        if !first {
            if rng.random::<f64>() < VARDEN_RESTART {
                (at, sigma) = jump(&mut rng);
            } else {
                for c in at.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *c = reflect(*c + sigma * z, side);
                }
            }
        }
        first = false;
        if seen.insert(bits(&at)) {
            points.push(Point::new(points.len() as u64, at.clone()));
        }
    }
    Ok(Dataset {
        name: short_name("V", n, k),
        k,
        points,
        provenance: Provenance::Generated { dist: Distribution::Varden, seed },
    })
}

/// Parses the point format: one point per line, fields separated by
/// whitespace or commas, `#` comments and blank lines skipped. Ids follow
/// line order.
pub fn parse_points(text: &str) -> Result<Vec<Point>> {
    let mut points: Vec<Point> = Vec::new();
    let mut seen: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
    let mut k = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut coords = Vec::new();
        for field in body.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()) {
            let v: f64 =
                field.parse().map_err(|_| Error::Parse { line, msg: format!("'{field}' is not a number") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, msg: format!("'{field}' is not finite") });
            }
            coords.push(v);
        }
        match k {
            None => k = Some(coords.len()),
            Some(k) if k != coords.len() => {
                return Err(Error::Parse { line, msg: format!("expected {k} fields, found {}", coords.len()) })
            }
            _ => {}
        }
        if let Some(prev) = seen.insert(bits(&coords), line) {
            return Err(Error::Parse { line, msg: format!("same coordinates as line {prev}") });
        }
        points.push(Point::new(points.len() as u64, coords));
    }
    if points.len() < 2 {
        return Err(Error::TooFewPoints { need: 2, got: points.len() });
    }
    Ok(points)
}

pub fn load_points(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let points = parse_points(&text)?;
    let name = path.file_stem().map_or_else(|| "points".to_string(), |s| s.to_string_lossy().into_owned());
    Ok(Dataset {
        name,
        k: points[0].dim(),
        points,
        provenance: Provenance::Loaded { path: path.display().to_string() },
    })
}

/// Writes one line per point with 17 significant digits, enough to read
/// back the identical doubles.
pub fn write_points(ds: &Dataset, mut w: impl Write) -> Result<()> {
    writeln!(w, "# {} n={} k={}", ds.name, ds.len(), ds.k)?;
    for p in &ds.points {
        let mut sep = "";
        for c in p.coords.iter() {
            write!(w, "{sep}{c:.16e}")?;
            sep = " ";
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_points(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_points(ds, BufWriter::new(fs::File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_small_and_deterministic() {
        let d = generate_uniform(2, 1, 3).unwrap();
        assert_eq!(d.len(), 2);
        assert_ne!(d.points[0].coords, d.points[1].coords);
        assert!(d.points.iter().all(|p| (0.0..=2f64.sqrt()).contains(&p.coords[0])));
        let a = generate_uniform(500, 3, 9).unwrap();
        let b = generate_uniform(500, 3, 9).unwrap();
        assert_eq!(a.points, b.points);
        assert!(generate_uniform(1, 2, 0).is_err());
        assert!(generate_uniform(5, 0, 0).is_err());
    }

    #[test]
    fn varden_distinct_and_deterministic() {
        let d = generate_varden(2, 2, 1).unwrap();
        assert_ne!(d.points[0].coords, d.points[1].coords);
        let a = generate_varden(3000, 2, 4).unwrap();
        let b = generate_varden(3000, 2, 4).unwrap();
        assert_eq!(a.points, b.points);
        let side = 3000f64.sqrt();
        assert!(a.points.iter().all(|p| p.coords.iter().all(|c| (0.0..=side).contains(c))));
    }

    #[test]
    fn parse_basic_and_errors() {
        let pts = parse_points("0 0\n3 4\n").unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].coords[..], [3.0, 4.0]);
        let pts = parse_points("# header\n\n1,2, 3\n  4 5 6\n").unwrap();
        assert_eq!(pts[0].coords[..], [1.0, 2.0, 3.0]);
        assert_eq!(pts[1].id, 1);
        assert_eq!(parse_points("0 0\n1 1\n2 x\n").unwrap_err(), Error::Parse { line: 3, msg: "'x' is not a number".into() });
        assert!(matches!(parse_points("0 0\n1 1 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_points("0 0\n"), Err(Error::TooFewPoints { .. })));
        assert!(matches!(parse_points("0 0\n1 1\n0 0\n"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn save_load_round_trip() {
        let ds = generate_varden(400, 3, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.txt");
        save_points(&ds, &path).unwrap();
        let back = load_points(&path).unwrap();
        assert_eq!(back.k, 3);
        assert_eq!(back.points, ds.points);
        assert_eq!(back.name, "pts");
    }
}
