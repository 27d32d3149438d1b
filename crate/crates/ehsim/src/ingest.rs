//! Measured-trace CSV reader.
//!
//! Accepts a bare two-column `t, v_c` file, or any file with a header naming
//! `t_s` and `v_c_V` (so simulator CSV output reads back directly). Row numbers
//! in errors are file line numbers.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use ehsim_core::validation::TraceMetadata;
use ehsim_core::MeasuredTrace;

use crate::error::{Error, Result};

const TIME_COLUMNS: [&str; 3] = ["t_s", "t", "time"];
const VOLTAGE_COLUMNS: [&str; 3] = ["v_c_V", "v_c", "v"];

fn find(header: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    header
        .iter()
        .position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
}

pub fn ingest<R: Read>(source: R, metadata: TraceMetadata) -> Result<MeasuredTrace> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);

    let mut columns: Option<(usize, usize)> = None;
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let mut last_row = 0;
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let (tc, vc) = match columns {
            Some(c) => c,
            None => {
                let numeric = rec.iter().all(|f| f.parse::<f64>().is_ok());
                let c = if numeric {
                    (0, 1)
                } else {
                    match (find(&rec, &TIME_COLUMNS), find(&rec, &VOLTAGE_COLUMNS)) {
                        (Some(t), Some(v)) => (t, v),
                        _ if rec.len() == 2 => (0, 1),
                        _ => {
                            return Err(Error::Parse {
                                row,
                                column: 1,
                                message: "header names no `t_s` / `v_c_V` columns".into(),
                            })
                        }
                    }
                };
                columns = Some(c);
                if !numeric {
                    continue;
                }
                c
            }
        };
        let field = |idx: usize| -> Result<f64> {
            let raw = rec.get(idx).ok_or_else(|| Error::Parse {
                row,
                column: idx + 1,
                message: "missing field".into(),
            })?;
            raw.parse().map_err(|_| Error::Parse {
                row,
                column: idx + 1,
                message: format!("`{raw}` is not a number"),
            })
        };
        let (t, v) = (field(tc)?, field(vc)?);
        if !t.is_finite() || !v.is_finite() {
            return Err(Error::InvalidRow {
                row,
                reason: "non-finite value".into(),
            });
        }
        if v < 0.0 {
            return Err(Error::InvalidRow {
                row,
                reason: format!("negative voltage {v}"),
            });
        }
        if let Some(&(prev, _)) = samples.last() {
            if !(t > prev) {
                return Err(Error::InvalidRow {
                    row,
                    reason: format!("time {t} does not increase (previous {prev} on row {last_row})"),
                });
            }
        }
        samples.push((t, v));
        last_row = row;
    }
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    Ok(MeasuredTrace::new(samples, metadata)?)
}

pub fn ingest_path(path: &Path) -> Result<MeasuredTrace> {
    let file = File::open(path).map_err(Error::file(path))?;
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    ingest(
        file,
        TraceMetadata {
            label: label.unwrap_or_default(),
            ..TraceMetadata::default()
        },
    )
}
