//! CSV data products. Floats are written with 17 significant digits so every
//! value round-trips exactly.

use std::path::Path;

use ale_core::diagnostics::DeviationRecord;
use ale_core::growth::Attachment;
use ale_core::ou::CovarianceRow;
use ale_core::spectral::CoefficientProcess;
use ale_core::Complex64;

use crate::error::{CliError, CliResult};

pub const ANGLES: &str = "angles.csv";
pub const COEFFS: &str = "coeffs.csv";
pub const DEVIATION: &str = "deviation.csv";
pub const OU_REFERENCE: &str = "ou_reference.csv";
pub const DEVIATION_SUMMARY: &str = "deviation_summary.csv";

pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path, header: &[&str]) -> CliResult<csv::Writer<std::fs::File>> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

pub fn write_angles(path: &Path, history: &[Attachment<f64>]) -> CliResult<()> {
    let mut w = writer(path, &["j", "theta", "c_j"])?;
    for (j, a) in history.iter().enumerate() {
        w.write_record([(j + 1).to_string(), fmt17(a.theta), fmt17(a.c)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_coeffs(path: &Path, process: &CoefficientProcess<f64>) -> CliResult<()> {
    let mut w = writer(path, &["t", "k", "re", "im"])?;
    for (t, row) in process.times.iter().zip(&process.coeffs) {
        for (k, a) in row.iter().enumerate() {
            w.write_record([fmt17(*t), k.to_string(), fmt17(a.re), fmt17(a.im)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_deviation(path: &Path, records: &[DeviationRecord<f64>]) -> CliResult<()> {
    let mut w = writer(path, &["t", "r", "sup_dev", "norm2_dev"])?;
    for r in records {
        w.write_record([fmt17(r.t), fmt17(r.r), fmt17(r.sup_dev), fmt17(r.norm2_dev)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ou_table(path: &Path, rows: &[CovarianceRow<f64>]) -> CliResult<()> {
    let mut w = writer(path, &["s", "t", "k", "eta", "value"])?;
    for r in rows {
        w.write_record([fmt17(r.s), fmt17(r.t), r.k.to_string(), fmt17(r.eta), fmt17(r.value)])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `(t, r, median sup_dev, median norm2_dev, runs)`.
pub fn write_deviation_summary(path: &Path, rows: &[(f64, f64, f64, f64, usize)]) -> CliResult<()> {
    let mut w = writer(path, &["t", "r", "median_sup_dev", "median_norm2_dev", "runs"])?;
    for &(t, r, s, n, count) in rows {
        w.write_record([fmt17(t), fmt17(r), fmt17(s), fmt17(n), count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn records(path: &Path, header: &[&str]) -> CliResult<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let found = r.headers()?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(CliError::Validation(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            header,
            found
        )));
    }
    Ok(r.records().collect::<Result<_, _>>()?)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> CliResult<T> {
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| CliError::Validation(format!("{}: bad field {i} in {:?}", path.display(), rec)))
}

pub fn read_angles(path: &Path) -> CliResult<Vec<Attachment<f64>>> {
    records(path, &["j", "theta", "c_j"])?
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let j: usize = field(rec, 0, path)?;
            if j != i + 1 {
                return Err(CliError::Validation(format!("{}: row {} has j = {j}", path.display(), i + 1)));
            }
            Ok(Attachment {
                theta: field(rec, 1, path)?,
                c: field(rec, 2, path)?,
            })
        })
        .collect()
}

/// Reads coeffs.csv back into per-time coefficient rows.
pub fn read_coeffs(path: &Path, radius: f64) -> CliResult<CoefficientProcess<f64>> {
    let mut times: Vec<f64> = Vec::new();
    let mut coeffs: Vec<Vec<Complex64>> = Vec::new();
    for rec in records(path, &["t", "k", "re", "im"])? {
        let t: f64 = field(&rec, 0, path)?;
        let k: usize = field(&rec, 1, path)?;
        let a = Complex64::new(field(&rec, 2, path)?, field(&rec, 3, path)?);
        if times.last() != Some(&t) {
            times.push(t);
            coeffs.push(Vec::new());
        }
        let row = coeffs.last_mut().expect("row pushed above");
        if k != row.len() {
            return Err(CliError::Validation(format!("{}: modes out of order at t = {t}", path.display())));
        }
        row.push(a);
    }
    Ok(CoefficientProcess {
        steps: vec![0; times.len()],
        times,
        radius,
        coeffs,
    })
}

pub fn read_deviation(path: &Path) -> CliResult<Vec<DeviationRecord<f64>>> {
    records(path, &["t", "r", "sup_dev", "norm2_dev"])?
        .iter()
        .map(|rec| {
            Ok(DeviationRecord {
                t: field(rec, 0, path)?,
                r: field(rec, 1, path)?,
                sup_dev: field(rec, 2, path)?,
                norm2_dev: field(rec, 3, path)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [std::f64::consts::PI, 1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
        }
    }

    #[test]
    fn angles_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(ANGLES);
        let h = vec![
            Attachment { theta: 0.1, c: 0.01 },
            Attachment {
                theta: 6.2831853,
                c: 1.0 / 3.0,
            },
        ];
        write_angles(&p, &h).unwrap();
        assert_eq!(read_angles(&p).unwrap(), h);
    }

    #[test]
    fn coeffs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(COEFFS);
        let proc_ = CoefficientProcess {
            times: vec![0.0, 0.5],
            steps: vec![0, 0],
            radius: 1.5,
            coeffs: vec![
                vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, -2.0)],
                vec![Complex64::new(0.25, 1e-17), Complex64::new(-3.0, 0.1)],
            ],
        };
        write_coeffs(&p, &proc_).unwrap();
        assert_eq!(read_coeffs(&p, 1.5).unwrap(), proc_);
    }
}
