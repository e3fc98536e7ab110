//! Sample and price-series ingestion.

use std::path::PathBuf;

use dragonking_core::distributions::pareto_to_exp;
use dragonking_core::drawdowns::resample_last_price;
use dragonking_core::OrderedSample;

use crate::cli::{IngestArgs, Transform};
use crate::error::CliError;

#[derive(Debug)]
pub struct IngestedSample {
    pub sample: OrderedSample,
    pub rows_read: usize,
    pub rows_skipped: usize,
    pub rows_filtered: usize,
    pub warnings: Vec<String>,
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Reads a numeric column, skipping unparseable rows (headers), applying
/// the optional lower-threshold filter and the Pareto-to-Exponential log
/// transform.
pub fn ingest_sample(args: &IngestArgs) -> Result<IngestedSample, CliError> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.input.display())))?;
    let mut values = Vec::new();
    let mut row_numbers = Vec::new();
    let mut rows_read = 0;
    let mut rows_skipped = 0;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        rows_read += 1;
        let fields = split_fields(line);
        match fields.get(args.column).and_then(|f| f.parse::<f64>().ok()) {
            Some(v) if v.is_finite() => {
                values.push(v);
                row_numbers.push(line_no + 1);
            }
            _ => rows_skipped += 1,
        }
    }
    if values.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no numeric values in column {}",
            args.input.display(),
            args.column
        )));
    }

    let mut rows_filtered = 0;
    if let Some(u) = args.u {
        let kept: Vec<(f64, usize)> = values
            .iter()
            .zip(&row_numbers)
            .filter(|(v, _)| **v >= u)
            .map(|(v, r)| (*v, *r))
            .collect();
        rows_filtered = values.len() - kept.len();
        values = kept.iter().map(|(v, _)| *v).collect();
        row_numbers = kept.iter().map(|(_, r)| *r).collect();
        if values.is_empty() {
            return Err(CliError::Input(format!(
                "no values at or above the threshold {u}"
            )));
        }
    }

    let mut warnings = Vec::new();
    let sample = match args.transform {
        Transform::None => OrderedSample::new(values)
            .map_err(|e| CliError::Input(e.to_string()))?,
        Transform::Log => {
            let base = args.u.unwrap_or(1.0);
            if base <= 0.0 {
                return Err(CliError::Usage(format!(
                    "--transform log needs a positive base, got --u {base}"
                )));
            }
            let offending: Vec<usize> = values
                .iter()
                .zip(&row_numbers)
                .filter(|(v, _)| **v < base)
                .map(|(_, r)| *r)
                .collect();
            if !offending.is_empty() {
                return Err(CliError::Input(format!(
                    "log transform with base {base} hit smaller values at rows {offending:?}"
                )));
            }
            if args.u.is_none() {
                warnings.push("log transform with default base u = 1".to_string());
            }
            let raw = OrderedSample::new(values)
                .map_err(|e| CliError::Input(e.to_string()))?;
            pareto_to_exp(&raw, base).map_err(|e| CliError::Input(e.to_string()))?
        }
    };

    Ok(IngestedSample { sample, rows_read, rows_skipped, rows_filtered, warnings })
}

pub struct IngestedPrices {
    /// One entry per day, in input order: (day id, resampled prices).
    pub days: Vec<(String, Vec<f64>)>,
    pub rows_read: usize,
    pub rows_skipped: usize,
}

fn day_of(fields: &[&str], day_col: usize, timestamp: f64) -> String {
    fields
        .get(day_col)
        .filter(|f| !f.is_empty())
        .map(|f| f.to_string())
        .unwrap_or_else(|| format!("day-{}", (timestamp / 86_400.0).floor() as i64))
}

/// Reads tick prices and resamples them onto the delta grid, one series per
/// day. A single file uses its third column (or the timestamp) as the day
/// identifier; multiple files are one day each, in argument order.
pub fn ingest_prices(
    paths: &[PathBuf],
    delta: f64,
) -> Result<IngestedPrices, CliError> {
    if !(delta > 0.0) {
        return Err(CliError::Usage(format!(
            "--delta must be positive, got {delta}"
        )));
    }
    let mut days: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut rows_read = 0;
    let mut rows_skipped = 0;
    let single_file = paths.len() == 1;
    for path in paths {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            rows_read += 1;
            let fields = split_fields(line);
            let parsed = fields
                .first()
                .and_then(|f| f.parse::<f64>().ok())
                .zip(fields.get(1).and_then(|f| f.parse::<f64>().ok()));
            let Some((t, p)) = parsed else {
                rows_skipped += 1;
                continue;
            };
            if !(p > 0.0) {
                rows_skipped += 1;
                continue;
            }
            let day = if single_file {
                day_of(&fields, 2, t)
            } else {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string())
            };
            match days.last_mut() {
                Some((last_day, ticks)) if *last_day == day => ticks.push((t, p)),
                _ => days.push((day, vec![(t, p)])),
            }
        }
    }
    if days.is_empty() {
        return Err(CliError::Input("no usable price rows".into()));
    }

    let mut out = Vec::with_capacity(days.len());
    for (day, mut ticks) in days {
        ticks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (ts, ps): (Vec<f64>, Vec<f64>) = ticks.into_iter().unzip();
        let (_, prices) = resample_last_price(&ts, &ps, delta);
        if prices.len() < 2 {
            rows_skipped += prices.len();
            continue;
        }
        out.push((day, prices));
    }
    if out.is_empty() {
        return Err(CliError::Input(
            "no day has at least two resampled prices".into(),
        ));
    }
    Ok(IngestedPrices { days: out, rows_read, rows_skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn args(path: &Path) -> IngestArgs {
        IngestArgs {
            input: path.to_path_buf(),
            column: 0,
            u: None,
            transform: Transform::None,
        }
    }

    #[test]
    fn plain_values_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("in.csv");
        std::fs::write(&path, "value\n4\n2\n1\n1\n").unwrap();
        let out = ingest_sample(&args(&path)).unwrap();
        assert_eq!(out.sample.values(), &[4.0, 2.0, 1.0, 1.0]);
        assert_eq!(out.rows_skipped, 1);
        assert_eq!(out.rows_read, 5);
    }

    #[test]
    fn column_selection_and_filter() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("in.csv");
        std::fs::write(&path, "t,v\n1,5.0\n2,0.5\n3,2.5\n").unwrap();
        let mut a = args(&path);
        a.column = 1;
        a.u = Some(1.0);
        let out = ingest_sample(&a).unwrap();
        assert_eq!(out.sample.values(), &[5.0, 2.5]);
        assert_eq!(out.rows_filtered, 1);
    }

    #[test]
    fn log_transform_reports_offending_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("in.csv");
        std::fs::write(&path, "2.0\n-3.0\n4.0\n").unwrap();
        let mut a = args(&path);
        a.transform = Transform::Log;
        let err = ingest_sample(&a).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("rows [2]"), "message: {msg}");
    }

    #[test]
    fn empty_input_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("in.csv");
        std::fs::write(&path, "header only\n").unwrap();
        assert!(matches!(
            ingest_sample(&args(&path)),
            Err(CliError::Input(_))
        ));
    }

    #[test]
    fn prices_by_day_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("px.csv");
        std::fs::write(
            &path,
            "ts,price,day\n0,100,d1\n30,99,d1\n60,98,d1\n0,50,d2\n30,51,d2\n60,52,d2\n",
        )
        .unwrap();
        let out = ingest_prices(&[path], 30.0).unwrap();
        assert_eq!(out.days.len(), 2);
        assert_eq!(out.days[0].0, "d1");
        assert_eq!(out.days[0].1.len(), 3);
    }
}
