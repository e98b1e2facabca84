//! Dense matrices as header-less CSV, one row per line.

use std::path::Path;

use rankadapt::DenseMatrix;

use crate::error::{BenchError, BenchResult};
use crate::output::write_bytes;

pub fn matrix_to_csv(m: &DenseMatrix) -> Vec<u8> {
    let mut text = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    text.into_bytes()
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> BenchResult<()> {
    write_bytes(path, &matrix_to_csv(m))
}

/// Reads a matrix; `cols` is needed only for a zero-row file.
pub fn read_matrix(path: &Path, cols: usize) -> BenchResult<DenseMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path).map_err(|e| BenchError::io(path, e))?;
    let mut data = Vec::new();
    let mut rows = 0;
    let mut width = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| BenchError::io(path, e))?;
        if *width.get_or_insert(rec.len()) != rec.len() {
            return Err(BenchError::io(path, format!("row {} has {} cells, expected {}", rows + 1, rec.len(), width.unwrap())));
        }
        for cell in rec.iter() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|e| BenchError::io(path, format!("row {}: `{cell}`: {e}", rows + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    Ok(DenseMatrix::from_row_slice(rows, width.unwrap_or(cols), &data))
}
