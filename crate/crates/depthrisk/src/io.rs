//! Input files and atomic output.

use std::fs;
use std::io::Write;
use std::path::Path;

use depthrisk_core::{DepthModel, Sample};
use serde::Serialize;

use crate::config::read_json;
use crate::error::{Error, Result};

/// Numeric CSV rows with their 1-based line numbers.
///
/// A first row that does not parse as numbers is taken as a header and
/// skipped. Every data row must have the same number of columns, which
/// must equal `expected` when given.
pub fn read_rows(path: &Path, expected: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    let mut width = expected;
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let parsed: Option<Vec<f64>> = record.iter().map(|f| f.parse::<f64>().ok()).collect();
        let Some(values) = parsed else {
            if index == 0 {
                continue;
            }
            let bad = record.iter().find(|f| f.parse::<f64>().is_err()).unwrap_or_default();
            return Err(Error::Parse {
                path: path.into(),
                line,
                message: format!("not a number: {bad:?}"),
            });
        };
        if let Some(w) = width {
            if values.len() != w {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    message: format!("row has {} columns, expected {w}", values.len()),
                });
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                path: path.into(),
                line,
                message: String::from("values must be finite"),
            });
        }
        width = Some(values.len());
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: String::from("no data rows"),
        });
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Parse {
            path: path.into(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Points without costs.
pub fn read_points(path: &Path, dim: Option<usize>) -> Result<Sample> {
    Ok(Sample::from_rows(&read_rows(path, dim)?)?)
}

/// Points whose last column is the cost.
pub fn read_costed(path: &Path, dim: Option<usize>) -> Result<Sample> {
    let rows = read_rows(path, dim.map(|d| d + 1))?;
    if rows[0].len() < 2 {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: String::from("need coordinates and a cost column"),
        });
    }
    let costs = rows.iter().map(|r| r[r.len() - 1]).collect();
    let points: Vec<Vec<f64>> = rows
        .into_iter()
        .map(|mut r| {
            r.pop();
            r
        })
        .collect();
    Ok(Sample::from_rows(&points)?.with_costs(costs)?)
}

pub fn read_model(path: &Path) -> Result<DepthModel> {
    serde_json::from_value(read_json(path)?).map_err(|e| Error::Parse {
        path: path.into(),
        line: 1,
        message: e.to_string(),
    })
}

/// Parses `"x0:x1:nx,y0:y1:ny,..."` into the row-major product grid.
pub fn parse_grid(spec: &str) -> Result<Vec<Vec<f64>>> {
    let axes = spec
        .split(',')
        .map(|axis| {
            let parts: Vec<&str> = axis.trim().split(':').collect();
            let bad = || Error::Usage(format!("bad grid axis {axis:?}, expected lo:hi:count"));
            if parts.len() != 3 {
                return Err(bad());
            }
            let lo: f64 = parts[0].parse().map_err(|_| bad())?;
            let hi: f64 = parts[1].parse().map_err(|_| bad())?;
            let count: usize = parts[2].parse().map_err(|_| bad())?;
            if count == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
                return Err(bad());
            }
            Ok((0..count)
                .map(|k| {
                    if count == 1 {
                        lo
                    } else {
                        lo + (hi - lo) * k as f64 / (count - 1) as f64
                    }
                })
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut points = vec![Vec::new()];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

/// Writes through a temporary file in the same directory, then renames, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
