//! CSV and JSON input/output.
//!
//! All floating-point output is printed with 17 significant digits so that
//! emitted files round-trip to the exact in-memory values.

use crate::additive::AdditiveFit;
use crate::error::{Error, Result};
use crate::simulate::{ReplicateRecord, StudyResult};
use crate::survival::CensoredSample;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// 17-significant-digit formatting; round-trips every finite `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads a data file with header `z,delta,x1,...,xd`. Malformed rows are
/// reported with their line number.
pub fn read_data_csv(path: &Path) -> Result<CensoredSample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Config(format!("bad header: {e}")))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 3 || cols[0] != "z" || cols[1] != "delta" {
        return Err(Error::Config(
            "data header must be z,delta,x1,...,xd".into(),
        ));
    }
    let d = cols.len() - 2;
    for (i, name) in cols[2..].iter().enumerate() {
        let expected = format!("x{}", i + 1);
        if *name != expected {
            return Err(Error::Config(format!(
                "covariate column {} must be named {expected}, got {name}",
                i + 3
            )));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Config(format!("csv: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != cols.len() {
            return Err(Error::CsvRow {
                line,
                message: format!("expected {} fields, got {}", cols.len(), record.len()),
            });
        }
        let parse = |idx: usize, name: &str| -> Result<f64> {
            record[idx].parse::<f64>().map_err(|_| Error::CsvRow {
                line,
                message: format!("field {name} is not a number: {:?}", &record[idx]),
            })
        };
        let z = parse(0, "z")?;
        let delta_raw = parse(1, "delta")?;
        if delta_raw != 0.0 && delta_raw != 1.0 {
            return Err(Error::CsvRow {
                line,
                message: format!("delta must be 0 or 1, got {delta_raw}"),
            });
        }
        let mut x = Vec::with_capacity(d);
        for i in 0..d {
            x.push(parse(2 + i, &format!("x{}", i + 1))?);
        }
        rows.push((z, delta_raw as u8, x));
    }
    if rows.is_empty() {
        return Err(Error::EmptySample);
    }
    CensoredSample::from_rows(rows, d)
}

/// Writes a generated sample in the `z,delta,x1,...,xd` layout read back by
/// [`read_data_csv`].
pub fn write_sample_csv(path: &Path, sample: &CensoredSample) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let mut header = String::from("z,delta");
    for i in 0..sample.dim() {
        header.push_str(&format!(",x{}", i + 1));
    }
    writeln!(out, "{header}")?;
    for row in 0..sample.n() {
        let mut line = format!("{},{}", fmt_float(sample.z()[row]), sample.delta()[row]);
        for axis in 0..sample.dim() {
            line.push(',');
            line.push_str(&fmt_float(sample.x_col(axis)[row]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Per-axis band table: one row per grid point with estimate, standard
/// deviation, interval bounds and the true component when known. Axes are
/// numbered from one; unknown fields stay empty.
pub fn write_bands_csv(path: &Path, fit: &AdditiveFit) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "axis,x,eta_hat,sigma_hat,ci_lo,ci_hi,eta_true")?;
    for comp in &fit.components {
        for (i, &x) in comp.grid.iter().enumerate() {
            let opt = |v: &Option<Vec<f64>>| v.as_ref().map_or(String::new(), |v| fmt_float(v[i]));
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                comp.axis + 1,
                fmt_float(x),
                fmt_float(comp.eta[i]),
                opt(&comp.sigma),
                opt(&comp.ci_lo),
                opt(&comp.ci_hi),
                opt(&comp.eta_true),
            )?;
        }
    }
    Ok(())
}

/// One parsed band row.
#[derive(Debug, Clone, PartialEq)]
pub struct BandRow {
    pub axis: usize,
    pub x: f64,
    pub eta_hat: f64,
    pub sigma_hat: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub eta_true: Option<f64>,
}

/// Reads a band table back; used by the round-trip checks.
pub fn read_bands_csv(path: &Path) -> Result<Vec<BandRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Config(format!("csv: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let req = |idx: usize| -> Result<f64> {
            record[idx].parse().map_err(|_| Error::CsvRow {
                line,
                message: format!("bad float {:?}", &record[idx]),
            })
        };
        let opt = |idx: usize| -> Result<Option<f64>> {
            if record[idx].is_empty() {
                Ok(None)
            } else {
                req(idx).map(Some)
            }
        };
        rows.push(BandRow {
            axis: record[0].parse().map_err(|_| Error::CsvRow {
                line,
                message: "bad axis".into(),
            })?,
            x: req(1)?,
            eta_hat: req(2)?,
            sigma_hat: opt(3)?,
            ci_lo: opt(4)?,
            ci_hi: opt(5)?,
            eta_true: opt(6)?,
        });
    }
    Ok(rows)
}

/// Per-replicate study table: estimates and statistics per probe.
pub fn write_replicates_csv(path: &Path, result: &StudyResult) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let p = result.probes.len();
    let mut header = String::from("replicate,uncensored_rate");
    for i in 0..p {
        header.push_str(&format!(",eta_hat_{}", i + 1));
    }
    for i in 0..p {
        header.push_str(&format!(",stat_{}", i + 1));
    }
    for i in 0..p {
        header.push_str(&format!(",covered_{}", i + 1));
    }
    writeln!(out, "{header}")?;
    for rec in &result.per_replicate {
        let mut line = format!("{},{}", rec.replicate, fmt_float(rec.uncensored_rate));
        push_record_fields(&mut line, rec, p);
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn push_record_fields(line: &mut String, rec: &ReplicateRecord, probes: usize) {
    for i in 0..probes {
        line.push(',');
        if let Some(v) = rec.eta_hat.get(i) {
            line.push_str(&fmt_float(*v));
        }
    }
    for i in 0..probes {
        line.push(',');
        if let Some(v) = rec.stat.get(i) {
            line.push_str(&fmt_float(*v));
        }
    }
    for i in 0..probes {
        line.push(',');
        if let Some(v) = rec.covered.get(i) {
            line.push_str(if *v { "1" } else { "0" });
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::additive::{AdditiveFit, AxisComponent};

    #[test]
    fn float_formatting_round_trips() {
        for v in [
            0.1,
            -0.30000000000000004,
            1.0 / 3.0,
            2.2250738585072014e-308,
            123456.789012345,
            -0.0,
        ] {
            let s = fmt_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} -> {s}");
        }
    }

    #[test]
    fn sample_csv_round_trip() {
        let dir = std::env::temp_dir().join("censadd_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sample.csv");
        let sample = CensoredSample::from_columns(
            vec![0.25, 0.5, 0.125],
            vec![1, 0, 1],
            vec![vec![0.1, 0.2, 0.3], vec![-0.5, 0.0, 0.5]],
        )
        .unwrap();
        write_sample_csv(&path, &sample).unwrap();
        let back = read_data_csv(&path).unwrap();
        assert_eq!(back.z(), sample.z());
        assert_eq!(back.delta(), sample.delta());
        assert_eq!(back.x_col(1), sample.x_col(1));
    }

    #[test]
    fn data_csv_rejects_bad_delta_with_line_number() {
        let dir = std::env::temp_dir().join("censadd_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad_delta.csv");
        std::fs::write(&path, "z,delta,x1\n0.5,1,0.1\n0.25,2,0.2\n").unwrap();
        let err = read_data_csv(&path).unwrap_err();
        match err {
            Error::CsvRow { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("delta"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn data_csv_rejects_wrong_header() {
        let dir = std::env::temp_dir().join("censadd_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad_header.csv");
        std::fs::write(&path, "time,delta,x1\n0.5,1,0.1\n").unwrap();
        assert!(read_data_csv(&path).is_err());
    }

    #[test]
    fn bands_round_trip_exactly() {
        let dir = std::env::temp_dir().join("censadd_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bands.csv");
        let fit = AdditiveFit {
            components: vec![AxisComponent {
                axis: 0,
                grid: vec![-0.9, 0.0, 0.9],
                eta: vec![0.1, -0.30000000000000004, 1.0 / 3.0],
                sigma: Some(vec![1.5, 2.5, 3.5]),
                ci_lo: Some(vec![-1.0, -2.0, -3.0]),
                ci_hi: Some(vec![1.0, 2.0, 3.0]),
                eta_true: None,
            }],
            constant: 0.25,
        };
        write_bands_csv(&path, &fit).unwrap();
        let rows = read_bands_csv(&path).unwrap();
        assert_eq!(rows.len(), 3);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.axis, 1);
            assert_eq!(row.x.to_bits(), fit.components[0].grid[i].to_bits());
            assert_eq!(row.eta_hat.to_bits(), fit.components[0].eta[i].to_bits());
            assert_eq!(
                row.sigma_hat.unwrap().to_bits(),
                fit.components[0].sigma.as_ref().unwrap()[i].to_bits()
            );
            assert_eq!(row.eta_true, None);
        }
    }
}
