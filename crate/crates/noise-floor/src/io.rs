//! Numeric CSV ingestion.

use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CsvError, Error, Result};

/// Parses a rectangular numeric CSV table.
///
/// A first row with any non-numeric cell is taken as a header and skipped.
/// Row numbers in errors count physical records from 1, header included.
pub fn parse_matrix_csv(reader: impl Read) -> std::result::Result<DMatrix<f64>, CsvError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CsvError::Parse(e.to_string()))?;
        let row = idx + 1;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse::<f64>().ok()).collect();
        if idx == 0 && parsed.iter().any(Option::is_none) {
            // Header row.
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(CsvError::Ragged { row, expected, found: record.len() });
        }
        let mut values = Vec::with_capacity(expected);
        for (col, (cell, value)) in record.iter().zip(parsed).enumerate() {
            match value {
                Some(v) => values.push(v),
                None => return Err(CsvError::NonNumeric { row, column: col + 1, value: cell.to_string() }),
            }
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(CsvError::Empty);
    }
    let cols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_matrix_csv(std::io::BufReader::new(file)).map_err(|kind| Error::Csv { path: path.to_path_buf(), kind })
}

/// Reads a single column (or a single row) as a vector.
pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix_csv(path)?;
    if m.ncols() == 1 || m.nrows() == 1 {
        Ok(m.iter().copied().collect())
    } else {
        Err(Error::Csv { path: path.to_path_buf(), kind: CsvError::NotAVector { rows: m.nrows(), cols: m.ncols() } })
    }
}
