//! Sample and table files.
//!
//! Sample CSV: header `x1,...,xd,y`, one row per simulation, plain decimal
//! numbers. Floats are written in shortest round-trip form.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use gsa2_core::densities::UnivariateDensity;
use gsa2_core::engine::{DrawRecord, Gsa2Result, QuantityOfInterest};
use gsa2_core::hsic::SampleSet;

use crate::error::{AppError, Result};

/// Smallest sample the weighted Gamma test accepts.
pub const MIN_ROWS: usize = 6;

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    File::create(path).map_err(|e| AppError::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> AppError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => AppError::io(path, io),
        other => AppError::format(path, format!("{other:?}")),
    }
}

/// Reads a sample CSV. With `dim` given, the header must have exactly that
/// many input columns.
pub fn load_sample_csv(path: &Path, dim: Option<usize>) -> Result<SampleSet> {
    let file = File::open(path).map_err(|e| AppError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = rdr.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_owned).collect();
    if header.last().map(String::as_str) != Some("y") {
        if header.iter().any(|h| h == "y") {
            return Err(AppError::format(path, "column y must come last"));
        }
        return Err(AppError::format(path, "missing output column y"));
    }
    let d = header.len() - 1;
    if d == 0 {
        return Err(AppError::format(path, "no input columns"));
    }
    for (k, h) in header[..d].iter().enumerate() {
        if *h != format!("x{}", k + 1) {
            return Err(AppError::format(path, format!("column {} must be named x{}, found {h:?}", k + 1, k + 1)));
        }
    }
    if let Some(want) = dim {
        if want != d {
            return Err(AppError::format(path, format!("expected {want} input columns, found {d}")));
        }
    }
    let mut cols = vec![Vec::new(); d];
    let mut y = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != d + 1 {
            return Err(AppError::format(path, format!("row {row}: expected {} fields, found {}", d + 1, rec.len())));
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| AppError::format(path, format!("row {row}: {:?} is not a number", cell)))?;
            if !v.is_finite() {
                return Err(AppError::format(path, format!("row {row}: non-finite value {cell:?}")));
            }
            if c < d {
                cols[c].push(v);
            } else {
                y.push(v);
            }
        }
    }
    if y.len() < MIN_ROWS {
        return Err(AppError::format(path, format!("need at least {MIN_ROWS} rows, found {}", y.len())));
    }
    Ok(SampleSet::new(cols, y)?)
}

pub fn write_sample_csv(path: &Path, sample: &SampleSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header: Vec<String> = (1..=sample.dim()).map(|k| format!("x{k}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for i in 0..sample.n() {
        let mut row: Vec<String> = sample.row(i).iter().map(|v| format!("{v:?}")).collect();
        row.push(format!("{:?}", sample.outputs()[i]));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// `x,pdf,cdf` rows: the grid nodes of a tabulated density, or `points`
/// equally spaced nodes over the support of an analytic one.
pub fn write_density_csv(path: &Path, density: &UnivariateDensity, points: usize) -> Result<()> {
    let mut f = create(path)?;
    let mut out = String::from("x,pdf,cdf\n");
    match density.tabulated() {
        Some(t) => {
            for (x, p, c) in t.rows() {
                out.push_str(&format!("{x:?},{p:?},{c:?}\n"));
            }
        }
        None => {
            let (a, b) = density.support();
            let m = points.max(2);
            for i in 0..m {
                let x = a + (b - a) * i as f64 / (m - 1) as f64;
                out.push_str(&format!("{x:?},{:?},{:?}\n", density.pdf(x), density.cdf(x)));
            }
        }
    }
    f.write_all(out.as_bytes()).map_err(|e| AppError::io(path, e))
}

/// Per-draw table: what was drawn for each input and the draw's QoI.
/// Ranking QoIs are written as 1-based input labels in rank order.
pub fn write_qoi_csv(path: &Path, result: &Gsa2Result) -> Result<()> {
    let d = result.indices.len();
    let mut out = String::from("draw");
    for k in 1..=d {
        out.push_str(&format!(",law_{k}"));
    }
    for k in 1..=d {
        out.push_str(&format!(",qoi_{k}"));
    }
    out.push('\n');
    for (t, (draw, q)) in result.draws.iter().zip(&result.qois).enumerate() {
        out.push_str(&(t + 1).to_string());
        for r in &draw.records {
            match r {
                DrawRecord::Candidate(c) => out.push_str(&format!(",{}", c + 1)),
                DrawRecord::Parameter(p) => out.push_str(&format!(",{p:?}")),
            }
        }
        match q {
            QuantityOfInterest::Ranking(r) => {
                for l in r.one_based() {
                    out.push_str(&format!(",{l}"));
                }
            }
            _ => {
                for v in q.as_vector().unwrap_or_default() {
                    out.push_str(&format!(",{v:?}"));
                }
            }
        }
        out.push('\n');
    }
    create(path)?.write_all(out.as_bytes()).map_err(|e| AppError::io(path, e))
}
