//! CSV ingestion. A header line is optional and recognised by failing to
//! parse as numbers.

use std::path::Path;

use nsp_core::{Design, NspError};

fn parse_rows(path: &Path) -> Result<Vec<Vec<f64>>, NspError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => NspError::Io(io),
            other => NspError::Parse(format!("{}: {other:?}", path.display())),
        })?;
    let mut rows = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| NspError::Parse(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if rows.is_empty() && i == 0 => continue,
            Err(_) => {
                return Err(NspError::Parse(format!(
                    "{} line {line}: non-numeric value in {:?}",
                    path.display(),
                    record.iter().collect::<Vec<_>>()
                )))
            }
        };
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(NspError::Parse(format!(
                "{} line {line}: non-finite value {v}",
                path.display()
            )));
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(NspError::Parse(format!(
                    "{} line {line}: expected {w} columns, found {}",
                    path.display(),
                    row.len()
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(NspError::Parse(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

/// Single-column response series.
pub fn read_series(path: &Path) -> Result<Vec<f64>, NspError> {
    let rows = parse_rows(path)?;
    if rows[0].len() != 1 {
        return Err(NspError::Parse(format!(
            "{}: expected one response column, found {}",
            path.display(),
            rows[0].len()
        )));
    }
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

/// Numeric design matrix, one row per time point.
pub fn read_design(path: &Path, expected_rows: usize) -> Result<Design, NspError> {
    let rows = parse_rows(path)?;
    if rows.len() != expected_rows {
        return Err(NspError::Dimension(format!(
            "design {} has {} rows, response has {expected_rows}",
            path.display(),
            rows.len()
        )));
    }
    let p = rows[0].len();
    Ok(Design::from_fn(rows.len(), p, |i, j| rows[i][j]))
}
