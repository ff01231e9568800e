//! CSV formats: designs (`x1..xd`), convergence curves and path ensembles.
//!
//! Reals are written with 17 significant digits, which round-trips every
//! finite `f64` (and NaN) exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use kriglab_core::experiments::CurveRecord;
use kriglab_core::gp::{MartingaleRecord, PathEnsemble};
use kriglab_core::Design;

use crate::error::{CliError, Result};

pub const CURVE_HEADER: [&str; 8] = [
    "n",
    "sigma2",
    "lebesgue",
    "prediction",
    "abs_error",
    "effective_rank",
    "condition_estimate",
    "preclamp_sigma2",
];

pub const MARTINGALE_HEADER: [&str; 6] = ["n", "sigma2", "mse", "second_moment", "exceed_coarse", "exceed_fine"];

pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_owned(),
        source,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

fn format_err(path: &Path, message: String) -> CliError {
    CliError::Format {
        path: path.to_owned(),
        message,
    }
}

fn parse_real(path: &Path, field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| format_err(path, format!("`{field}` is not a real number")))
}

fn parse_int(path: &Path, field: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| format_err(path, format!("`{field}` is not a non-negative integer")))
}

/// Reads one point per row under the header `x1,...,xd`.
pub fn read_design(path: &Path) -> Result<Design> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    let header = reader.headers().map_err(csv_err(path))?.clone();
    let dim = header.len();
    let expected: Vec<String> = (1..=dim).map(|j| format!("x{j}")).collect();
    if dim == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(format_err(
            path,
            format!("design header must be x1..xd, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut coords = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_err(path))?;
        for field in row.iter() {
            coords.push(parse_real(path, field)?);
        }
    }
    if coords.is_empty() {
        return Err(format_err(path, "design has no points".into()));
    }
    Ok(Design::from_coords(dim, coords)?)
}

pub fn write_design(design: &Design, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = (1..=design.dim()).map(|j| format!("x{j}")).collect();
    w.write_record(&header).map_err(csv_err(path))?;
    for p in design.points() {
        w.write_record(p.iter().map(|v| real(*v))).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn curve_row(r: &CurveRecord) -> [String; 8] {
    [
        r.n.to_string(),
        real(r.sigma2),
        real(r.lebesgue),
        real(r.prediction),
        real(r.abs_error),
        r.effective_rank.to_string(),
        real(r.condition_estimate),
        real(r.preclamp_sigma2),
    ]
}

pub fn write_curve_to<W: Write>(records: &[CurveRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_HEADER)?;
    for r in records {
        w.write_record(curve_row(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Fails without touching the filesystem when `records` is empty.
pub fn write_curve(records: &[CurveRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(CliError::Config("refusing to write an empty curve".into()));
    }
    let file = File::create(path).map_err(io_err(path))?;
    write_curve_to(records, BufWriter::new(file)).map_err(csv_err(path))
}

pub fn read_curve(path: &Path) -> Result<Vec<CurveRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = reader.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(CURVE_HEADER) {
        return Err(format_err(path, "unexpected curve header".into()));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_err(path))?;
        let f = |i: usize| parse_real(path, &row[i]);
        out.push(CurveRecord {
            n: parse_int(path, &row[0])?,
            sigma2: f(1)?,
            lebesgue: f(2)?,
            prediction: f(3)?,
            abs_error: f(4)?,
            effective_rank: parse_int(path, &row[5])?,
            condition_estimate: f(6)?,
            preclamp_sigma2: f(7)?,
        });
    }
    Ok(out)
}

pub fn write_martingale_to<W: Write>(records: &[MartingaleRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MARTINGALE_HEADER)?;
    for r in records {
        w.write_record([
            r.n.to_string(),
            real(r.sigma2),
            real(r.mse),
            real(r.second_moment),
            real(r.exceed_coarse),
            real(r.exceed_fine),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: `path_id,point_id,value`.
pub fn write_ensemble(ensemble: &PathEnsemble, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["path_id", "point_id", "value"]).map_err(csv_err(path))?;
    for p in 0..ensemble.n_paths {
        for (j, v) in ensemble.path(p).iter().enumerate() {
            w.write_record([p.to_string(), j.to_string(), real(*v)])
                .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}
