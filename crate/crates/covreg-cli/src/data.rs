//! Input file readers. All readers report the offending location on failure.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use nalgebra::DMatrix;

use crate::CliError;

/// A numeric CSV with a header row: rows are periods/subjects, columns are
/// named series.
#[derive(Debug)]
pub struct NamedPanel {
    pub names: Vec<String>,
    pub data: DMatrix<f64>,
}

/// Read a rectangular numeric CSV with a mandatory header row.
pub fn load_panel(path: &Path) -> Result<NamedPanel, CliError> {
    let file = File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.is_empty() {
        return Err(CliError::data(format!("{}: empty header", path.display())));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ridx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        if record.len() != names.len() {
            return Err(CliError::data(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                ridx + 2,
                record.len(),
                names.len()
            )));
        }
        let mut row = Vec::with_capacity(names.len());
        for (cidx, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                CliError::data(format!(
                    "{}: non-numeric value `{}` at row {}, column {} ({})",
                    path.display(),
                    field,
                    ridx + 2,
                    cidx + 1,
                    names[cidx]
                ))
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::data(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let data = DMatrix::from_fn(rows.len(), names.len(), |i, j| rows[i][j]);
    Ok(NamedPanel { names, data })
}

/// Read a `subject,label` CSV; rows must follow the panel's column order.
pub fn load_labels(path: &Path, expected: usize) -> Result<Vec<String>, CliError> {
    let file = File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        match record.get(1) {
            Some(label) => labels.push(label.to_string()),
            None => {
                return Err(CliError::data(format!(
                    "{}: expected `subject,label` rows",
                    path.display()
                )))
            }
        }
    }
    if labels.len() != expected {
        return Err(CliError::data(format!(
            "{}: {} label rows for {} subjects",
            path.display(),
            labels.len(),
            expected
        )));
    }
    Ok(labels)
}

/// Read an `i j` edge list (0-based, `#` comments).
pub fn load_edges(path: &Path) -> Result<Vec<(usize, usize)>, CliError> {
    let file = File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut edges = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut fields = content.split_whitespace();
        let parse = |f: Option<&str>| -> Result<usize, CliError> {
            f.ok_or_else(|| {
                CliError::data(format!(
                    "{}: line {}: expected `i j`",
                    path.display(),
                    lineno + 1
                ))
            })?
            .parse()
            .map_err(|e| {
                CliError::data(format!(
                    "{}: line {}: bad index: {e}",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        let i = parse(fields.next())?;
        let j = parse(fields.next())?;
        edges.push((i, j));
    }
    Ok(edges)
}

/// Read an `asset,cap` CSV aligned with the panel's column order.
pub fn load_marketcaps(path: &Path, expected: usize) -> Result<Vec<f64>, CliError> {
    let panel = load_single_column(path)?;
    if panel.len() != expected {
        return Err(CliError::data(format!(
            "{}: {} capitalization rows for {} assets",
            path.display(),
            panel.len(),
            expected
        )));
    }
    Ok(panel)
}

fn load_single_column(path: &Path) -> Result<Vec<f64>, CliError> {
    let file = File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut values = Vec::new();
    for (ridx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let field = record.get(record.len().saturating_sub(1)).unwrap_or("");
        let value: f64 = field.parse().map_err(|_| {
            CliError::data(format!(
                "{}: non-numeric value `{}` at row {}",
                path.display(),
                field,
                ridx + 2
            ))
        })?;
        values.push(value);
    }
    Ok(values)
}
