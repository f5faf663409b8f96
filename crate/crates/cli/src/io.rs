//! Design CSV, curve CSV and JSON file handling.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use signsieve::recovery::CurvePoint;
use signsieve::Design;

use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Parses a headerless design CSV whose entries are exactly `1` or `-1`
/// (surrounding spaces allowed). Any other token is rejected.
pub fn parse_design(bytes: &[u8]) -> CliResult<Design> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Input(format!("design row {}: {e}", r + 1)))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, tok)| match tok {
                "1" => Ok(1i8),
                "-1" => Ok(-1i8),
                other => Err(CliError::Input(format!(
                    "design row {}, column {}: expected 1 or -1, found {other:?}",
                    r + 1,
                    j + 1
                ))),
            })
            .collect::<CliResult<Vec<i8>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input("design file has no rows".into()));
    }
    Design::from_rows(&rows).map_err(|e| CliError::Input(format!("design: {e}")))
}

/// Reads a design and returns it with the SHA-256 of the file contents.
pub fn read_design(path: &Path) -> CliResult<(Design, String)> {
    let bytes = read_bytes(path)?;
    let design = parse_design(&bytes).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok((design, sha256_hex(&bytes)))
}

pub fn design_csv(design: &Design) -> Vec<u8> {
    let mut out = String::with_capacity(design.n() * design.p() * 3);
    for row in design.rows() {
        let line: Vec<&str> = row.iter().map(|&v| if v > 0 { "1" } else { "-1" }).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> CliResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Serialize)]
struct CurveRow {
    log_lambda: f64,
    value: f64,
    p_s: Option<f64>,
    p_i: Option<f64>,
}

/// Columns `log_lambda, value, p_s, p_i`; a missing probability is an empty cell.
pub fn curve_csv(curve: &[CurvePoint]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in curve {
        w.serialize(CurveRow {
            log_lambda: p.log_lambda,
            value: p.value.value,
            p_s: p.value.p_s,
            p_i: p.value.p_i,
        })
        .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

/// Rows of any serializable record type with a header from its field names.
pub fn records_csv<T: Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_other_tokens() {
        assert!(parse_design(b"1,-1\n-1,1\n").is_ok());
        assert!(parse_design(b" 1 , -1\n-1,1\n").is_ok());
        for bad in [&b"1,+1\n-1,1\n"[..], b"1,0\n1,1\n", b"1,1.0\n1,1\n", b"1,-1\n1\n", b""] {
            assert!(matches!(parse_design(bad), Err(CliError::Input(_))), "{:?}", String::from_utf8_lossy(bad));
        }
    }

    #[test]
    fn design_round_trip() {
        let d = Design::from_rows(&[vec![1, -1, 1], vec![-1, -1, 1]]).unwrap();
        let bytes = design_csv(&d);
        assert_eq!(bytes, b"1,-1,1\n-1,-1,1\n");
        assert_eq!(parse_design(&bytes).unwrap(), d);
    }
}
