//! CSV ingestion and output of numeric matrices.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;

use crate::error::{Error, Result};
use crate::model::RegressionData;
use crate::rng::RngHandle;

/// A numeric table with optional column names.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub values: DMatrix<f64>,
}

impl Table {
    /// Column names, falling back to `prefix1, prefix2, ...`.
    pub fn names(&self, prefix: &str) -> Vec<String> {
        self.header.clone().unwrap_or_else(|| {
            (1..=self.values.ncols())
                .map(|i| format!("{prefix}{i}"))
                .collect()
        })
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Reads a numeric CSV. Lines starting with `#` are skipped. The first row
/// is treated as a header when any of its cells fails to parse as a number.
pub fn read_matrix_csv(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| parse_err(path, 0, format!("cannot open: {e}")))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> =
            record.iter().map(str::parse::<f64>).collect();
        if std::mem::take(&mut first) && parsed.iter().any(|p| p.is_err()) {
            header = Some(record.iter().map(str::to_string).collect::<Vec<_>>());
            width = Some(record.len());
            continue;
        }
        match width {
            Some(w) if w != record.len() => {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected {w} fields, found {}", record.len()),
                ))
            }
            _ => width = Some(record.len()),
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, (cell, value)) in record.iter().zip(parsed).enumerate() {
            match value {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(parse_err(
                        path,
                        line,
                        format!("column {}: '{cell}' is not a finite number", col + 1),
                    ))
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "no numeric rows"));
    }
    let ncols = width.unwrap_or(0);
    let values = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
    Ok(Table { header, values })
}

/// Writes a matrix as CSV with shortest round-trip float formatting.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>, header: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if let Some(h) = header {
        if h.len() != m.ncols() {
            return Err(Error::Dimension(format!(
                "{} header names for {} columns",
                h.len(),
                m.ncols()
            )));
        }
        w.write_record(h)?;
    }
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `# key: value` comment lines followed by CSV rows.
pub fn write_csv_with_comments(
    path: &Path,
    comments: &[String],
    header: &[String],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut file = File::create(path)?;
    for c in comments {
        writeln!(file, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadOptions {
    /// Subtract the column means of the responses.
    pub center: bool,
    /// Append a column of ones to the design.
    pub intercept: bool,
    /// Keep a random subset of this many rows, drawn with `seed`.
    pub subsample: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub data: RegressionData,
    pub response_names: Vec<String>,
    pub covariate_names: Vec<String>,
    /// Rows kept when subsampling, zero-based.
    pub rows: Option<Vec<usize>>,
}

pub fn load_dataset(y_path: &Path, x_path: &Path, opts: &LoadOptions) -> Result<Dataset> {
    let y = read_matrix_csv(y_path)?;
    let x = read_matrix_csv(x_path)?;
    if y.values.nrows() != x.values.nrows() {
        return Err(Error::Data(format!(
            "{} has {} rows but {} has {}",
            y_path.display(),
            y.values.nrows(),
            x_path.display(),
            x.values.nrows()
        )));
    }
    let response_names = y.names("y");
    let mut covariate_names = x.names("x");
    let (mut yv, mut xv) = (y.values, x.values);

    let rows = match opts.subsample {
        Some(m) if m < yv.nrows() => {
            let mut rng = RngHandle::new(opts.seed);
            let mut idx = sample_indices(&mut rng, yv.nrows(), m).into_vec();
            idx.sort_unstable();
            yv = yv.select_rows(&idx);
            xv = xv.select_rows(&idx);
            Some(idx)
        }
        _ => None,
    };
    if opts.intercept {
        let p = xv.ncols();
        xv = xv.insert_column(p, 1.0);
        covariate_names.push("intercept".to_string());
    }
    if yv.ncols() > xv.ncols() {
        return Err(Error::Data(format!(
            "{}: q = {} responses exceed p = {} covariates",
            y_path.display(),
            yv.ncols(),
            xv.ncols()
        )));
    }
    if opts.center {
        for mut col in yv.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
    }
    let data = RegressionData::with_flags(yv, xv, opts.center, opts.intercept)?;
    log::info!(
        "loaded n = {}, q = {}, p = {} from {} and {}",
        data.n(),
        data.q(),
        data.p(),
        y_path.display(),
        x_path.display()
    );
    Ok(Dataset {
        data,
        response_names,
        covariate_names,
        rows,
    })
}
