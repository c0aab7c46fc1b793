use anyhow::{anyhow, bail, Context, Result};
use coxset::data::DataSet;
use nalgebra::{DMatrix, DVector};
use std::path::Path;

/// Marker for data-class failures (exit code 3).
#[derive(Debug)]
pub struct DataError(pub String);

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for DataError {}

fn data_err(msg: String) -> anyhow::Error {
    anyhow!(DataError(msg))
}

/// Read a rectangular numeric CSV with a header row into a centred dataset.
/// The response column is taken by name, or the first column by default.
pub fn ingest(path: &Path, response: Option<&str>) -> Result<DataSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| data_err(format!("cannot open {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| data_err(format!("bad header row: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.len() < 2 {
        bail!(data_err(
            "need at least a response column and one covariate".into()
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            bail!(data_err(format!("duplicate column name '{h}'")));
        }
    }
    let response_name = response.unwrap_or(&headers[0]).to_string();
    let response_idx = headers
        .iter()
        .position(|h| *h == response_name)
        .ok_or_else(|| data_err(format!("response column '{response_name}' not found")))?;

    let mut y = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| data_err(format!("row {}: {e}", row_idx + 1)))?;
        if record.len() != headers.len() {
            bail!(data_err(format!(
                "row {}: expected {} fields, found {}",
                row_idx + 1,
                headers.len(),
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (col_idx, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                data_err(format!(
                    "row {}, column '{}': cannot parse '{}' as a number",
                    row_idx + 1,
                    headers[col_idx],
                    cell.trim()
                ))
            })?;
            if !value.is_finite() {
                bail!(data_err(format!(
                    "row {}, column '{}': non-finite value",
                    row_idx + 1,
                    headers[col_idx]
                )));
            }
            if col_idx == response_idx {
                y.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        bail!(data_err("need at least two data rows".into()));
    }
    let n = rows.len();
    let p = headers.len() - 1;
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != response_idx)
        .map(|(_, h)| h.clone())
        .collect();
    DataSet::from_raw(&DVector::from_vec(y), &x, response_name, names)
        .map_err(|e| data_err(format!("{e}")))
        .context("ingestion failed")
}

/// Write a dataset as CSV with round-trippable float formatting.
pub fn write_csv(
    path: &Path,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    response_name: &str,
    names: &[String],
) -> Result<()> {
    use std::io::Write;
    let mut file = std::fs::File::create(path)
        .map_err(|e| data_err(format!("cannot create {}: {e}", path.display())))?;
    let mut header = vec![response_name.to_string()];
    header.extend(names.iter().cloned());
    writeln!(file, "{}", header.join(","))?;
    for i in 0..y.nrows() {
        let mut cells = vec![format!("{}", y[i])];
        for j in 0..x.ncols() {
            cells.push(format!("{}", x[(i, j)]));
        }
        writeln!(file, "{}", cells.join(","))?;
    }
    Ok(())
}
