//! Real-data pipeline: CSV ingestion, day-splitting of a time series into
//! functional observations, log transforms, Tukey outlier removal and
//! leave-one-out cross-validation of the adaptively selected estimator.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{FunctionalSample, Grid, GridFunction};
use crate::selection::{select_m1, SelectionConfig};
use crate::stats::{quartiles, Quartiles};

/// A scalar time series together with the number of readings per day.
#[derive(Debug, Clone)]
pub struct SeriesTable {
    pub values: Vec<f64>,
    pub points_per_day: usize,
    /// Trailing readings that do not fill a day (dropped by `split_days`).
    pub dropped_points: usize,
    pub timestamps: Option<Vec<String>>,
}

impl SeriesTable {
    pub fn full_days(&self) -> usize {
        self.values.len() / self.points_per_day
    }
}

/// Pointwise transform applied to a series before day-splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LogMode {
    None,
    /// log(x); fails on x <= 0.
    Log,
    /// log(x + 1), the transform used for price-like data; fails on x <= -1.
    Log1p,
}

impl LogMode {
    fn apply(&self, index: usize, value: f64) -> Result<f64> {
        let out = match self {
            LogMode::None => value,
            LogMode::Log => value.ln(),
            LogMode::Log1p => (value + 1.0).ln(),
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::LogDomain { index, value })
        }
    }
}

/// Declarative description of the preprocessing applied to a dataset; the
/// pipeline functions below realize the individual steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PreprocessSpec {
    pub log: LogMode,
    pub center: bool,
    pub outlier_filter: bool,
    /// Pair day i-1 as covariate with day i as response; the alternative is
    /// two separate series (paired-columns mode).
    pub lag_pairing: bool,
}

/// Read one numeric column from a headered, comma-separated CSV file. See
/// [`load_series_with_delimiter`] for other separators.
pub fn load_series(path: &Path, column: &str, points_per_day: usize) -> Result<SeriesTable> {
    load_series_with_delimiter(path, column, points_per_day, b',')
}

/// Read one numeric column from a headered CSV file. The column is matched by
/// header name first, then parsed as a 0-based index. Data rows are numbered
/// from 1 in error messages. A trailing partial day is kept in the table and
/// counted in `dropped_points`.
pub fn load_series_with_delimiter(
    path: &Path,
    column: &str,
    points_per_day: usize,
    delimiter: u8,
) -> Result<SeriesTable> {
    assert!(points_per_day > 0, "points_per_day must be positive");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .delimiter(delimiter)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.display().to_string(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => Error::Csv(e),
        })?;
    let headers = reader.headers()?.clone();
    let col_idx = headers
        .iter()
        .position(|h| h == column)
        .or_else(|| column.parse::<usize>().ok().filter(|&i| i < headers.len()))
        .ok_or_else(|| Error::MissingColumn {
            column: column.to_string(),
        })?;

    let mut values = Vec::new();
    for (row_0, record) in reader.records().enumerate() {
        let record = record?;
        let cell = record.get(col_idx).unwrap_or("");
        let parsed: f64 = cell.trim().parse().map_err(|_| Error::NonNumericCell {
            row: row_0 + 1,
            column: headers.get(col_idx).unwrap_or(column).to_string(),
            value: cell.to_string(),
        })?;
        if !parsed.is_finite() {
            return Err(Error::NonNumericCell {
                row: row_0 + 1,
                column: headers.get(col_idx).unwrap_or(column).to_string(),
                value: cell.to_string(),
            });
        }
        values.push(parsed);
    }

    if values.len() < points_per_day {
        return Err(Error::NoFullDays {
            len: values.len(),
            points_per_day,
        });
    }
    let dropped_points = values.len() % points_per_day;
    Ok(SeriesTable {
        values,
        points_per_day,
        dropped_points,
        timestamps: None,
    })
}

/// Apply a log transform to every reading of the series.
pub fn apply_log(series: &SeriesTable, mode: LogMode) -> Result<SeriesTable> {
    let values = series
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| mode.apply(i, v))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SeriesTable {
        values,
        ..series.clone()
    })
}

/// Split the series day by day: reading (d-1)*q + k becomes the value of day
/// d at node k of the q-point midpoint grid. The trailing partial day is
/// dropped.
pub fn split_days(series: &SeriesTable) -> Result<FunctionalSample> {
    let q = series.points_per_day;
    let n_days = series.values.len() / q;
    if n_days == 0 {
        return Err(Error::NoFullDays {
            len: series.values.len(),
            points_per_day: q,
        });
    }
    let grid = Grid::new(q);
    let functions = (0..n_days)
        .map(|d| GridFunction::new(grid, series.values[d * q..(d + 1) * q].to_vec()))
        .collect::<Result<Vec<_>>>()?;
    FunctionalSample::new(functions)
}

/// Lagged pairing: covariates are days 1..n-1, responses days 2..n.
pub fn lag_pairs(sample: &FunctionalSample) -> Result<(FunctionalSample, FunctionalSample)> {
    if sample.n() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            found: sample.n(),
        });
    }
    let xs = sample.functions()[..sample.n() - 1].to_vec();
    let ys = sample.functions()[1..].to_vec();
    Ok((FunctionalSample::new(xs)?, FunctionalSample::new(ys)?))
}

/// Remove days whose maximum exceeds the Tukey fence Q3 + 1.5 (Q3 - Q1) of
/// the per-day maxima (quartiles by linear interpolation of order
/// statistics). The fence is computed once from all days before any removal.
/// Returns the kept sample and the removed day indices (0-based).
pub fn filter_outliers(sample: &FunctionalSample) -> Result<(FunctionalSample, Vec<usize>)> {
    if sample.n() < 4 {
        return Err(Error::TooFewObservations {
            needed: 4,
            found: sample.n(),
        });
    }
    let maxima: Vec<f64> = sample
        .functions()
        .iter()
        .map(|f| f.values().iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)))
        .collect();
    let q = quartiles(&maxima).expect("nonempty");
    let fence = q.upper_fence();
    let removed: Vec<usize> = maxima
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > fence)
        .map(|(i, _)| i)
        .collect();
    let kept: Vec<GridFunction> = sample
        .functions()
        .iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, f)| f.clone())
        .collect();
    Ok((FunctionalSample::new(kept)?, removed))
}

/// Where fold centering happens during cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CenteringMode {
    /// Center each held-in fold with its own mean (no leakage; the default).
    PerFold,
    /// Center every fold with the full-sample mean, for exact comparisons
    /// with protocols that center once globally.
    Global,
}

/// One cross-validated observation.
#[derive(Debug, Clone, Serialize)]
pub struct CvRow {
    pub index: usize,
    pub m1_hat: usize,
    pub l2_error: f64,
}

/// A fold whose fit failed.
#[derive(Debug, Clone, Serialize)]
pub struct FoldFailure {
    pub index: usize,
    pub message: String,
}

/// Leave-one-out cross-validation report.
#[derive(Debug, Clone, Serialize)]
pub struct CvReport {
    pub rows: Vec<CvRow>,
    pub failures: Vec<FoldFailure>,
    /// (selected dimension, count) over the successful folds.
    pub dim_histogram: Vec<(usize, usize)>,
    pub error_quartiles: Quartiles,
    pub best_index: usize,
    pub median_index: usize,
    pub worst_index: usize,
}

impl CvReport {
    /// Per-observation rows as CSV (columns index, m1_hat, l2_error).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "m1_hat", "l2_error"])?;
        for r in &self.rows {
            w.write_record(&[
                r.index.to_string(),
                r.m1_hat.to_string(),
                r.l2_error.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<csv writer>".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Leave-one-out cross-validation: for each observation i, select and fit on
/// the remaining n-1 pairs, predict Y_i from X_i (de-centered) and record the
/// L2 error ||Y_i - Yhat_i||. Inputs are raw (uncentered) samples; centering
/// happens inside each fold according to `centering`.
pub fn loo_cv(
    xs: &FunctionalSample,
    ys: &FunctionalSample,
    config: &SelectionConfig,
    centering: CenteringMode,
) -> Result<CvReport> {
    if xs.n() != ys.n() {
        return Err(Error::SampleSizeMismatch {
            left: xs.n(),
            right: ys.n(),
        });
    }
    if xs.n() < 3 {
        return Err(Error::TooFewObservations {
            needed: 3,
            found: xs.n(),
        });
    }
    let n = xs.n();

    // Global mode centers once with the full-sample means; folds then keep
    // those means (and the centered flag) when dropping an observation.
    let (xs_global, ys_global) = match centering {
        CenteringMode::Global => (Some(xs.center()), Some(ys.center())),
        CenteringMode::PerFold => (None, None),
    };

    type FoldOutcome = (usize, std::result::Result<(usize, f64), String>);
    let outcomes: Vec<FoldOutcome> = (0..n)
        .into_par_iter()
        .map(|i| {
            let run = || -> Result<(usize, f64)> {
                let (fold_xs, fold_ys) = match centering {
                    CenteringMode::PerFold => {
                        (xs.without_index(i).center(), ys.without_index(i).center())
                    }
                    CenteringMode::Global => (
                        xs_global.as_ref().unwrap().without_index(i),
                        ys_global.as_ref().unwrap().without_index(i),
                    ),
                };
                let (result, model) = select_m1(&fold_xs, &fold_ys, config)?;
                let y_hat = model.predict(xs.function(i), true)?;
                let err = ys.function(i).sub(&y_hat)?.norm();
                Ok((result.m1_hat, err))
            };
            (i, run().map_err(|e| e.to_string()))
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in outcomes {
        match outcome {
            Ok((m1_hat, l2_error)) => rows.push(CvRow {
                index: i,
                m1_hat,
                l2_error,
            }),
            Err(message) => failures.push(FoldFailure { index: i, message }),
        }
    }
    if rows.is_empty() {
        return Err(Error::DegenerateSample);
    }

    let mut histogram: Vec<(usize, usize)> = Vec::new();
    for r in &rows {
        match histogram.iter_mut().find(|(dim, _)| *dim == r.m1_hat) {
            Some((_, count)) => *count += 1,
            None => histogram.push((r.m1_hat, 1)),
        }
    }
    histogram.sort_by_key(|&(dim, _)| dim);

    let errors: Vec<f64> = rows.iter().map(|r| r.l2_error).collect();
    let error_quartiles = quartiles(&errors).expect("nonempty");

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].l2_error.partial_cmp(&rows[b].l2_error).unwrap());
    let best_index = rows[order[0]].index;
    let worst_index = rows[order[order.len() - 1]].index;
    // Lower median for even counts.
    let median_index = rows[order[(order.len() - 1) / 2]].index;

    Ok(CvReport {
        rows,
        failures,
        dim_histogram: histogram,
        error_quartiles,
        best_index,
        median_index,
        worst_index,
    })
}

/// Write curves as CSV: an index column followed by one column per grid node.
pub fn write_curves_csv<W: Write>(functions: &[GridFunction], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let p = functions.first().map(|f| f.grid().p()).unwrap_or(0);
    let mut header = vec!["index".to_string()];
    header.extend((1..=p).map(|k| format!("v{k}")));
    w.write_record(&header)?;
    for (i, f) in functions.iter().enumerate() {
        let mut record = vec![i.to_string()];
        record.extend(f.values().iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv writer>".into(),
        source: e,
    })?;
    Ok(())
}

/// Read curves from CSV: a header row, an optional leading `index` column,
/// then one numeric column per grid node. When `expected_p` is given, a
/// mismatching width is an error naming the expected grid size.
pub fn read_curves_csv(path: &Path, expected_p: Option<usize>) -> Result<Vec<GridFunction>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.display().to_string(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => Error::Csv(e),
        })?;
    let headers = reader.headers()?.clone();
    let skip = usize::from(headers.get(0) == Some("index"));
    let p = headers.len() - skip;
    if let Some(expected) = expected_p {
        if p != expected {
            return Err(Error::GridMismatch { expected, found: p });
        }
    }
    let grid = Grid::new(p);
    let mut out = Vec::new();
    for (row_0, record) in reader.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .skip(skip)
            .enumerate()
            .map(|(c, cell)| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::NonNumericCell {
                        row: row_0 + 1,
                        column: headers.get(c + skip).unwrap_or("").to_string(),
                        value: cell.to_string(),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(GridFunction::new(grid, values)?);
    }
    Ok(out)
}
