//! CSV and JSON file formats. Every write goes to a temporary file in the
//! destination directory and is renamed into place.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tangled_core::ingest::AngleTargets;
use tangled_core::{FeatureMatrix, Matrix};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    Rad,
    Deg,
}

fn open_reader(path: &Path) -> CliResult<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Header row plus numeric rows; empty cells are rejected, not imputed.
fn read_numeric(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = open_reader(path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CliError::data(format!("{}: missing header row", path.display())));
    }
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let line = r + 2;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if cell.is_empty() {
                    return Err(CliError::data(format!(
                        "{}: missing value at line {line}, column {}",
                        path.display(),
                        header[c]
                    )));
                }
                cell.parse::<f64>().map_err(|_| {
                    CliError::data(format!(
                        "{}: non-numeric cell {cell:?} at line {line}, column {}",
                        path.display(),
                        header[c]
                    ))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn load_features(path: &Path) -> CliResult<FeatureMatrix> {
    let (names, rows) = read_numeric(path)?;
    if rows.is_empty() {
        return Err(CliError::data(format!("{}: no data rows", path.display())));
    }
    let values = Matrix::from_rows(&rows)?;
    Ok(FeatureMatrix::new(names, values)?)
}

pub fn load_angles(path: &Path, unit: AngleUnit) -> CliResult<AngleTargets> {
    let (header, rows) = read_numeric(path)?;
    if header != ["phi", "psi"] {
        return Err(CliError::data(format!(
            "{}: angle header must be exactly phi,psi, found {}",
            path.display(),
            header.join(",")
        )));
    }
    let phi: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let psi: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    Ok(match unit {
        AngleUnit::Rad => AngleTargets::from_radians(&phi, &psi)?,
        AngleUnit::Deg => AngleTargets::from_degrees(&phi, &psi)?,
    })
}

/// Features and angles with matching row counts.
pub fn load_csv(features: &Path, angles: &Path, unit: AngleUnit) -> CliResult<(FeatureMatrix, AngleTargets)> {
    let d = load_features(features)?;
    let a = load_angles(angles, unit)?;
    if d.n() != a.len() {
        return Err(CliError::data(format!(
            "row count mismatch: {} has {} rows, {} has {}",
            features.display(),
            d.n(),
            angles.display(),
            a.len()
        )));
    }
    Ok((d, a))
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::internal(format!("writing {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::internal(format!("serializing {}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn csv_bytes<F>(header: &[&str], rows: usize, mut row: F) -> CliResult<Vec<u8>>
where
    F: FnMut(usize) -> Vec<String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::internal(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for i in 0..rows {
        w.write_record(row(i)).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::internal(format!("csv: {e}")))
}

/// Writes a numeric table; `f64` Display is the shortest exact round trip.
pub fn write_table(path: &Path, header: &[&str], columns: &[Vec<f64>]) -> CliResult<()> {
    let n = columns.first().map_or(0, Vec::len);
    let bytes = csv_bytes(header, n, |i| columns.iter().map(|c| c[i].to_string()).collect())?;
    write_atomic(path, &bytes)
}

pub fn write_features(path: &Path, d: &FeatureMatrix) -> CliResult<()> {
    let names: Vec<&str> = d.names().iter().map(String::as_str).collect();
    let bytes = csv_bytes(&names, d.n(), |i| d.values().row(i).iter().map(f64::to_string).collect())?;
    write_atomic(path, &bytes)
}

pub fn write_angles(path: &Path, a: &AngleTargets, unit: AngleUnit) -> CliResult<()> {
    let conv = |v: &[f64]| -> Vec<f64> {
        match unit {
            AngleUnit::Rad => v.to_vec(),
            AngleUnit::Deg => v.iter().map(|x| x.to_degrees()).collect(),
        }
    };
    write_table(path, &["phi", "psi"], &[conv(a.phi()), conv(a.psi())])
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = std::fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(CliError::data(format!("{}: empty file", path.display())));
    }
    serde_json::from_slice(&bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}
