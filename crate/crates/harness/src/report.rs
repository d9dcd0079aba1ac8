//! CSV files of a run. Every file has a header row, comma separators, LF
//! line endings and floats with 17 significant digits.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use fsi_core::driver::TimeseriesRow;
use fsi_core::metrics::{FieldErrors, ProfileRow};

use crate::{HarnessError, Result};

pub const PROFILE_HEADER: [&str; 6] = ["x", "rho", "u", "T", "E", "beta"];
pub const TIMESERIES_HEADER: [&str; 5] = ["t", "n_particles", "mass", "momentum", "energy"];
pub const ERRORS_HEADER: [&str; 2] = ["field", "l1_error"];

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_owned(),
        source,
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_owned(),
        source,
    }
}

fn write_records<const N: usize>(path: &Path, header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> Result<()> {
    let file = File::create(path).map_err(io_error(path))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record(header).map_err(csv_error(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_error(path))?;
    }
    let mut file = w.into_inner().map_err(|e| io_error(path)(e.into_error()))?;
    file.flush().map_err(io_error(path))
}

fn read_records(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let found = r.headers().map_err(csv_error(path))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(HarnessError::Config {
            line: 1,
            message: format!("{}: unexpected header {:?}", path.display(), found),
        });
    }
    r.records().collect::<Result<_, _>>().map_err(csv_error(path))
}

fn parse_f64(path: &Path, record: &csv::StringRecord, k: usize) -> Result<f64> {
    record
        .get(k)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| HarnessError::Config {
            line: record.position().map_or(0, |p| p.line() as usize),
            message: format!("{}: bad number in column {k}", path.display()),
        })
}

pub fn write_profile(path: &Path, rows: &[ProfileRow]) -> Result<()> {
    write_records(
        path,
        PROFILE_HEADER,
        rows.iter()
            .map(|r| [r.x, r.rho, r.u, r.temperature, r.energy, r.beta].map(format_float)),
    )
}

pub fn read_profile(path: &Path) -> Result<Vec<ProfileRow>> {
    read_records(path, &PROFILE_HEADER)?
        .iter()
        .map(|rec| {
            let f = |k| parse_f64(path, rec, k);
            Ok(ProfileRow {
                x: f(0)?,
                rho: f(1)?,
                u: f(2)?,
                temperature: f(3)?,
                energy: f(4)?,
                beta: f(5)?,
            })
        })
        .collect()
}

pub fn write_timeseries(path: &Path, rows: &[TimeseriesRow]) -> Result<()> {
    write_records(
        path,
        TIMESERIES_HEADER,
        rows.iter().map(|r| {
            [
                format_float(r.t),
                r.n_particles.to_string(),
                format_float(r.mass),
                format_float(r.momentum),
                format_float(r.energy),
            ]
        }),
    )
}

pub fn read_timeseries(path: &Path) -> Result<Vec<TimeseriesRow>> {
    read_records(path, &TIMESERIES_HEADER)?
        .iter()
        .map(|rec| {
            let f = |k| parse_f64(path, rec, k);
            Ok(TimeseriesRow {
                t: f(0)?,
                n_particles: f(1)? as usize,
                mass: f(2)?,
                momentum: f(3)?,
                energy: f(4)?,
            })
        })
        .collect()
}

pub fn write_errors(path: &Path, errors: &FieldErrors) -> Result<()> {
    write_records(
        path,
        ERRORS_HEADER,
        errors.as_array().into_iter().map(|(name, v)| [name.to_owned(), format_float(v)]),
    )
}

pub fn read_errors(path: &Path) -> Result<FieldErrors> {
    let mut e = FieldErrors::default();
    for rec in read_records(path, &ERRORS_HEADER)? {
        let v = parse_f64(path, &rec, 1)?;
        match rec.get(0) {
            Some("rho") => e.rho = v,
            Some("u") => e.u = v,
            Some("T") => e.temperature = v,
            other => {
                return Err(HarnessError::Config {
                    line: 0,
                    message: format!("{}: unknown field {other:?}", path.display()),
                })
            }
        }
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.csv");
        let rows = vec![
            ProfileRow { x: 0.1, rho: 1.0 / 3.0, u: -2.5e-17, temperature: 1e300, energy: 0.0, beta: 0.999 },
            ProfileRow { x: 0.3, rho: f64::MIN_POSITIVE, u: 1.5, temperature: 2.0, energy: 3.0, beta: 0.0 },
        ];
        write_profile(&path, &rows).unwrap();
        assert_eq!(read_profile(&path).unwrap(), rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,rho,u,T,E,beta\n"));
        assert!(!text.contains('\r'));
        assert!(text.contains("3.3333333333333331e-1"));
    }

    #[test]
    fn errors_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("errors.csv");
        let e = FieldErrors { rho: 0.1, u: 0.2, temperature: 0.3 };
        write_errors(&path, &e).unwrap();
        assert_eq!(read_errors(&path).unwrap(), e);
        assert_eq!(
            std::fs::read_to_string(&path).unwrap().lines().next(),
            Some("field,l1_error")
        );
    }
}
