//! Aligned text table and CSV output for run reports.

use std::path::Path;

use pairgrid::experiment::RunReport;

const HEADER: [&str; 11] =
    ["algorithm", "dataset", "batch", "points", "seconds", "throughput", "dist", "a", "b", "checked", "verified"];

fn row(r: &RunReport) -> [String; 11] {
    let id = |x: u64| if r.result.is_finite() { x.to_string() } else { "-".into() };
    [
        r.algorithm.clone(),
        r.dataset.clone(),
        r.batch.to_string(),
        r.points.to_string(),
        format!("{:.6}", r.seconds),
        format!("{:.1}", r.throughput),
        format!("{}", r.result.dist),
        id(r.result.a),
        id(r.result.b),
        r.checked.to_string(),
        r.verified.to_string(),
    ]
}

pub fn render(reports: &[RunReport]) -> String {
    let rows: Vec<[String; 11]> = reports.iter().map(row).collect();
    let mut width: Vec<usize> = HEADER.iter().map(|h| h.len()).collect();
    for r in &rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells.zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&mut HEADER.iter().copied());
    for r in &rows {
        line(&mut r.iter().map(String::as_str));
    }
    out
}

pub fn write_csv(reports: &[RunReport], path: &Path) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for r in reports {
        w.write_record(row(r))?;
    }
    w.flush()?;
    Ok(())
}
