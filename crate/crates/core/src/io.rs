//! CSV and JSON file contracts.
//!
//! | file            | header                                                            |
//! |-----------------|-------------------------------------------------------------------|
//! | record          | `t,mean_z,mean_p,var_z,var_p,norm`                                |
//! | distribution    | `coord,density`                                                   |
//! | sweep           | `lambda,classical_varp,quantum_varp,window_class,fit_verdict,fit_r2` (+ trailing-mean and error columns) |
//! | Poincaré        | `k,z,p`                                                           |
//! | Lyapunov        | `z0,p0,lambda,L`                                                  |
//! | convergence     | `t,L_t`                                                           |
//! | map MSD         | `n,msd`                                                           |
//!
//! Floats are written with Rust's shortest round-trip formatting, so identical
//! values always produce identical bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::{Histogram, Moments, TimeSeriesRecord};
use crate::{Error, Result};

pub const RECORD_HEADER: [&str; 6] = ["t", "mean_z", "mean_p", "var_z", "var_p", "norm"];
pub const DISTRIBUTION_HEADER: [&str; 2] = ["coord", "density"];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path.display().to_string(), io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

/// Write rows of displayable cells under `header`.
pub fn write_rows<R, C>(path: &Path, header: &[&str], rows: R) -> Result<()>
where
    R: IntoIterator<Item = Vec<C>>,
    C: ToString,
{
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|c| c.to_string()))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// Read a numeric CSV, checking that the header starts with `expected`.
pub fn read_numeric(path: &Path, expected: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    for (i, name) in expected.iter().enumerate() {
        if header.get(i) != Some(*name) {
            return Err(Error::Config(format!(
                "{}: column {} should be `{name}`, found {:?}",
                path.display(),
                i + 1,
                header.get(i)
            )));
        }
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = expected
            .iter()
            .enumerate()
            .map(|(i, name)| {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("{}: row {}: bad `{name}`", path.display(), line + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_record_csv(path: &Path, rec: &TimeSeriesRecord) -> Result<()> {
    write_rows(
        path,
        &RECORD_HEADER,
        (0..rec.len()).map(|i| {
            vec![
                rec.times[i],
                rec.mean_z[i],
                rec.mean_p[i],
                rec.var_z[i],
                rec.var_p[i],
                rec.norm[i],
            ]
        }),
    )
}

pub fn read_record_csv(path: &Path) -> Result<TimeSeriesRecord> {
    let mut rec = TimeSeriesRecord::default();
    for row in read_numeric(path, &RECORD_HEADER)? {
        rec.push(
            row[0],
            Moments {
                mean_z: row[1],
                mean_p: row[2],
                var_z: row[3],
                var_p: row[4],
                norm: row[5],
            },
        );
    }
    rec.validate()?;
    Ok(rec)
}

pub fn write_distribution_csv(path: &Path, h: &Histogram) -> Result<()> {
    write_rows(
        path,
        &DISTRIBUTION_HEADER,
        h.centers.iter().zip(&h.density).map(|(x, d)| vec![*x, *d]),
    )
}

/// Read a distribution; the bin width is the spacing of the first two centers.
/// `samples` restores the count-based density floor of counted histograms.
pub fn read_distribution_csv(path: &Path, samples: usize) -> Result<Histogram> {
    let rows = read_numeric(path, &DISTRIBUTION_HEADER)?;
    if rows.len() < 2 {
        return Err(Error::Config(format!("{}: need at least two bins", path.display())));
    }
    let centers: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let density: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let h = Histogram {
        bin_width: centers[1] - centers[0],
        centers,
        density,
        samples,
    };
    h.validate()?;
    Ok(h)
}

/// Pretty JSON written to a temporary file and renamed into place.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    let body = serde_json::to_vec_pretty(value)?;
    fs::write(&tmp, &body).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Write `bytes` through a buffered file handle.
pub fn write_bytes(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.csv");
        let mut rec = TimeSeriesRecord::default();
        for k in 0..4 {
            rec.push(
                k as f64 * std::f64::consts::TAU,
                Moments {
                    mean_z: 20.0 + 0.1 * k as f64,
                    mean_p: -0.3,
                    var_z: 4.0,
                    var_p: 1.0 / 3.0,
                    norm: 1.0,
                },
            );
        }
        write_record_csv(&path, &rec).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,mean_z,mean_p,var_z,var_p,norm\n"));
        assert_eq!(read_record_csv(&path).unwrap(), rec);
    }

    #[test]
    fn bad_header_names_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(&path, "coord,dens\n0,1\n1,0.5\n").unwrap();
        let err = read_distribution_csv(&path, 0).unwrap_err().to_string();
        assert!(err.contains("density"), "{err}");
    }
}
