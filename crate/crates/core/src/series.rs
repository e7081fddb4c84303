//! Time-series data model, CSV ingestion, scenario splitting and rolling-origin windows.
//!
//! Timestamps are carried as metadata only. Every algorithm downstream works on
//! index positions, so a [`TimeSeries`] is essentially a start time, a fixed
//! step and a vector of finite values.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seasonal period used for hourly data.
pub const HOURLY_SEASON: usize = 24;
/// One week of hourly context.
pub const DEFAULT_LOOKBACK: usize = 168;
pub const DEFAULT_VAL_RATIO: f64 = 0.2;

/// The standard decile grid {0.1, ..., 0.9}.
pub fn default_quantiles() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub start: DateTime<Utc>,
    /// Step between consecutive observations, in seconds.
    pub step_secs: i64,
    pub values: Vec<f64>,
    #[serde(default)]
    pub unit: String,
}

impl TimeSeries {
    /// Hourly series starting at `start`.
    pub fn hourly(id: impl Into<String>, start: DateTime<Utc>, values: Vec<f64>) -> Result<Self> {
        Self::new(id, start, Duration::hours(1), values)
    }

    pub fn new(
        id: impl Into<String>,
        start: DateTime<Utc>,
        step: Duration,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if step <= Duration::zero() {
            return Err(Error::InvalidConfig("step must be positive".into()));
        }
        let id = id.into();
        let missing = values.iter().filter(|v| !v.is_finite()).count();
        if missing > 0 {
            return Err(Error::MissingValue { series: id, missing });
        }
        Ok(Self {
            id,
            start,
            step_secs: step.num_seconds(),
            values,
            unit: String::new(),
        })
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> Duration {
        Duration::seconds(self.step_secs)
    }

    pub fn timestamp(&self, index: usize) -> DateTime<Utc> {
        self.start + Duration::seconds(self.step_secs * index as i64)
    }

    /// Index of the first observation at or after `t`, saturating at `len()`.
    pub fn index_at_or_after(&self, t: DateTime<Utc>) -> usize {
        let offset = (t - self.start).num_seconds();
        if offset <= 0 {
            return 0;
        }
        let idx = (offset + self.step_secs - 1) / self.step_secs;
        (idx as usize).min(self.len())
    }

    /// Sub-series over index range `[from, to)`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.len() {
            return Err(Error::EmptySegment("slice"));
        }
        Ok(Self {
            id: self.id.clone(),
            start: self.timestamp(from),
            step_secs: self.step_secs,
            values: self.values[from..to].to_vec(),
            unit: self.unit.clone(),
        })
    }
}

/// Contiguous train / validation / test segments of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSplit {
    pub train: TimeSeries,
    pub validation: TimeSeries,
    pub test: TimeSeries,
}

impl ScenarioSplit {
    /// Values of all three segments, concatenated in order.
    pub fn concatenated(&self) -> Vec<f64> {
        let mut out = self.train.values.clone();
        out.extend_from_slice(&self.validation.values);
        out.extend_from_slice(&self.test.values);
        out
    }
}

/// Horizon, lookback and quantile grid of a forecasting problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastTask {
    pub horizon: usize,
    pub lookback: usize,
    pub quantiles: Vec<f64>,
}

impl ForecastTask {
    pub fn new(horizon: usize, lookback: usize) -> Result<Self> {
        Self::with_quantiles(horizon, lookback, default_quantiles())
    }

    pub fn with_quantiles(horizon: usize, lookback: usize, quantiles: Vec<f64>) -> Result<Self> {
        let task = Self {
            horizon,
            lookback,
            quantiles,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.lookback == 0 {
            return Err(Error::InvalidConfig(
                "horizon and lookback must be at least 1".into(),
            ));
        }
        validate_quantile_grid(&self.quantiles)
    }
}

/// A quantile grid must be non-empty, strictly increasing and inside (0, 1).
pub fn validate_quantile_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("quantile grid is empty".into()));
    }
    if grid.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
        return Err(Error::InvalidConfig(
            "quantile levels must lie in (0, 1)".into(),
        ));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "quantile grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Column names of the long-format CSV input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub id: String,
    pub timestamp: String,
    pub value: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            id: "series_id".into(),
            timestamp: "timestamp".into(),
            value: "value".into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub schema: CsvSchema,
    /// Fill gaps and missing cells by linear interpolation instead of failing.
    pub impute: bool,
    /// Expected step; inferred as the smallest positive timestamp difference when absent.
    pub step: Option<Duration>,
    pub unit: String,
}

#[derive(Debug, Clone)]
pub struct LoadedSeries {
    pub series: TimeSeries,
    /// Number of values filled by interpolation.
    pub filled: usize,
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Vec<LoadedSeries>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    read_csv(std::fs::File::open(path)?, options)
}

struct RawSeries {
    id: String,
    rows: Vec<(usize, DateTime<Utc>, Option<f64>)>,
}

/// Parse long-format CSV from any reader. One file may hold many series.
pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<Vec<LoadedSeries>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MalformedRow {
                line: 1,
                reason: format!("missing column `{name}`"),
            })
    };
    let (id_col, ts_col, val_col) = (
        column(&options.schema.id)?,
        column(&options.schema.timestamp)?,
        column(&options.schema.value)?,
    );

    let mut order: Vec<RawSeries> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let id = field(id_col).to_string();
        let ts = DateTime::parse_from_rfc3339(field(ts_col))
            .map_err(|e| Error::MalformedRow {
                line,
                reason: format!("bad timestamp `{}`: {e}", field(ts_col)),
            })?
            .with_timezone(&Utc);
        let raw = field(val_col);
        let value = if raw.is_empty() || raw.eq_ignore_ascii_case("nan") || raw.eq_ignore_ascii_case("na") {
            None
        } else {
            let v: f64 = raw.parse().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("bad value `{raw}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("non-finite value `{raw}`"),
                });
            }
            Some(v)
        };
        let slot = *by_id.entry(id.clone()).or_insert_with(|| {
            order.push(RawSeries {
                id: id.clone(),
                rows: Vec::new(),
            });
            order.len() - 1
        });
        let rows = &mut order[slot].rows;
        if let Some(&(_, prev, _)) = rows.last() {
            if ts <= prev {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("timestamp {ts} is not strictly increasing for series `{id}`"),
                });
            }
        }
        rows.push((line, ts, value));
    }

    order
        .into_iter()
        .map(|raw| assemble(raw, options))
        .collect()
}

fn assemble(raw: RawSeries, options: &CsvOptions) -> Result<LoadedSeries> {
    let step = match options.step {
        Some(s) => s.num_seconds(),
        None => raw
            .rows
            .windows(2)
            .map(|w| (w[1].1 - w[0].1).num_seconds())
            .min()
            .unwrap_or(3600),
    };
    if step <= 0 {
        return Err(Error::InvalidConfig("step must be positive".into()));
    }

    let start = raw.rows[0].1;
    let mut cells: Vec<Option<f64>> = Vec::with_capacity(raw.rows.len());
    for (i, &(_, ts, value)) in raw.rows.iter().enumerate() {
        if i > 0 {
            let diff = (ts - raw.rows[i - 1].1).num_seconds();
            if diff % step != 0 || (diff != step && !options.impute) {
                return Err(Error::NonUniformStep {
                    series: raw.id,
                    index: i,
                    expected_secs: step,
                    found_secs: diff,
                });
            }
            for _ in 1..diff / step {
                cells.push(None);
            }
        }
        cells.push(value);
    }

    let missing = cells.iter().filter(|c| c.is_none()).count();
    if missing > 0 && !options.impute {
        return Err(Error::MissingValue {
            series: raw.id,
            missing,
        });
    }
    let values = impute_linear(&cells)?;
    Ok(LoadedSeries {
        series: TimeSeries {
            id: raw.id,
            start,
            step_secs: step,
            values,
            unit: options.unit.clone(),
        },
        filled: missing,
    })
}

/// Fill interior gaps by linear interpolation between the bounding observations.
pub fn impute_linear(values: &[Option<f64>]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = Vec::with_capacity(values.len());
    let mut last_seen: Option<usize> = None;
    let mut i = 0;
    while i < values.len() {
        match values[i] {
            Some(v) => {
                out.push(v);
                last_seen = Some(i);
                i += 1;
            }
            None => {
                let left = last_seen.ok_or(Error::UnboundedGap { index: i })?;
                let right = (i..values.len())
                    .find(|&j| values[j].is_some())
                    .ok_or(Error::UnboundedGap { index: i })?;
                let (a, b) = (out[left], values[right].unwrap());
                let span = (right - left) as f64;
                for j in i..right {
                    let w = (j - left) as f64 / span;
                    out.push(a + (b - a) * w);
                }
                i = right;
            }
        }
    }
    Ok(out)
}

/// Write series in the long `series_id,timestamp,value` format.
pub fn write_csv<W: Write>(writer: W, series: &[TimeSeries]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["series_id", "timestamp", "value"])?;
    for ts in series {
        for (i, v) in ts.values.iter().enumerate() {
            wtr.write_record([
                ts.id.as_str(),
                &ts.timestamp(i).to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                &v.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(path: impl AsRef<Path>, series: &[TimeSeries]) -> Result<()> {
    write_csv(std::fs::File::create(path)?, series)
}

/// Split at `train_end`: everything strictly before it is train + validation
/// (the last `val_ratio` share becomes validation), the remainder is test.
pub fn split_scenario(ts: &TimeSeries, train_end: DateTime<Utc>, val_ratio: f64) -> Result<ScenarioSplit> {
    split_scenario_at(ts, ts.index_at_or_after(train_end), val_ratio)
}

/// Index-based form of [`split_scenario`]; `boundary` is the first test index.
pub fn split_scenario_at(ts: &TimeSeries, boundary: usize, val_ratio: f64) -> Result<ScenarioSplit> {
    if !(val_ratio > 0.0 && val_ratio < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "validation ratio {val_ratio} must lie in (0, 1)"
        )));
    }
    let n_val = (boundary as f64 * val_ratio).round() as usize;
    let n_train = boundary.saturating_sub(n_val);
    if n_train == 0 {
        return Err(Error::EmptySegment("train"));
    }
    if n_val == 0 {
        return Err(Error::EmptySegment("validation"));
    }
    if boundary >= ts.len() {
        return Err(Error::EmptySegment("test"));
    }
    Ok(ScenarioSplit {
        train: ts.slice(0, n_train)?,
        validation: ts.slice(n_train, boundary)?,
        test: ts.slice(boundary, ts.len())?,
    })
}

/// One backtest window: `context` ends just before `origin`, `actuals` start at it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<'a> {
    pub origin: usize,
    pub context: &'a [f64],
    pub actuals: &'a [f64],
}

/// Number of windows [`rolling_origins`] yields for a series of length `len`.
pub fn window_count(len: usize, lookback: usize, horizon: usize, stride: usize) -> usize {
    if stride == 0 || len < lookback + horizon {
        0
    } else {
        (len - lookback - horizon) / stride + 1
    }
}

pub fn rolling_origins<'a>(values: &'a [f64], task: &ForecastTask, stride: usize) -> Result<Vec<Window<'a>>> {
    if stride == 0 {
        return Err(Error::InvalidConfig("stride must be at least 1".into()));
    }
    let (n, h) = (task.lookback, task.horizon);
    if values.len() < n + h {
        return Err(Error::SeriesTooShort {
            needed: n + h,
            actual: values.len(),
        });
    }
    Ok((n..=values.len() - h)
        .step_by(stride)
        .map(|origin| Window {
            origin,
            context: &values[origin - n..origin],
            actuals: &values[origin..origin + h],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2012, 1, 1, 0, 0, 0).unwrap()
    }

    fn series(n: usize) -> TimeSeries {
        TimeSeries::hourly("s", t0(), (0..n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn three_row_file() {
        let csv = "series_id,timestamp,value\n\
                   a,2012-01-01T00:00:00Z,1.0\n\
                   a,2012-01-01T01:00:00Z,2.0\n\
                   a,2012-01-01T02:00:00Z,3.0\n";
        let out = read_csv(csv.as_bytes(), &CsvOptions::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].series.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(out[0].series.step(), Duration::hours(1));
        assert_eq!(out[0].filled, 0);
    }

    const GAPPY: &str = "series_id,timestamp,value\n\
                         a,2012-01-01T00:00:00Z,1.0\n\
                         a,2012-01-01T01:00:00Z,2.0\n\
                         a,2012-01-01T03:00:00Z,4.0\n";

    #[test]
    fn gap_without_imputation_is_non_uniform() {
        let err = read_csv(GAPPY.as_bytes(), &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonUniformStep { index: 2, .. }), "{err}");
    }

    #[test]
    fn gap_with_imputation_is_interpolated() {
        let opts = CsvOptions {
            impute: true,
            ..Default::default()
        };
        let out = read_csv(GAPPY.as_bytes(), &opts).unwrap();
        // midpoint of the neighbours 2.0 and 4.0
        assert_eq!(out[0].series.values, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(out[0].filled, 1);
    }

    #[test]
    fn missing_cell_is_reported() {
        let csv = "series_id,timestamp,value\n\
                   a,2012-01-01T00:00:00Z,1.0\n\
                   a,2012-01-01T01:00:00Z,\n\
                   a,2012-01-01T02:00:00Z,3.0\n";
        let err = read_csv(csv.as_bytes(), &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingValue { missing: 1, .. }));
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = "series_id,timestamp,value\n\
                   a,2012-01-01T00:00:00Z,1.0\n\
                   a,2012-01-01T01:00:00Z,abc\n";
        match read_csv(csv.as_bytes(), &CsvOptions::default()).unwrap_err() {
            Error::MalformedRow { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn decreasing_timestamps_rejected() {
        let csv = "series_id,timestamp,value\n\
                   a,2012-01-01T01:00:00Z,1.0\n\
                   a,2012-01-01T00:00:00Z,2.0\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &CsvOptions::default()),
            Err(Error::MalformedRow { line: 3, .. })
        ));
    }

    #[test]
    fn many_series_in_one_file() {
        let csv = "series_id,timestamp,value\n\
                   a,2012-01-01T00:00:00Z,1\n\
                   b,2012-01-01T00:00:00Z,10\n\
                   a,2012-01-01T01:00:00Z,2\n\
                   b,2012-01-01T01:00:00Z,20\n";
        let out = read_csv(csv.as_bytes(), &CsvOptions::default()).unwrap();
        let ids: Vec<_> = out.iter().map(|s| s.series.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(out[1].series.values, vec![10.0, 20.0]);
    }

    #[test]
    fn impute_cases() {
        assert_eq!(impute_linear(&[Some(1.0), None, Some(3.0)]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            impute_linear(&[None, Some(2.0), Some(3.0)]),
            Err(Error::UnboundedGap { index: 0 })
        ));
        assert!(matches!(
            impute_linear(&[Some(2.0), None]),
            Err(Error::UnboundedGap { index: 1 })
        ));
        let filled = impute_linear(&[Some(0.0), None, None, Some(3.0)]).unwrap();
        // 0 + 3 * 1/3 and 0 + 3 * 2/3
        assert!((filled[1] - 1.0).abs() < 1e-15 && (filled[2] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn split_arithmetic() {
        let ts = series(100);
        let split = split_scenario(&ts, ts.timestamp(50), 0.2).unwrap();
        assert_eq!(
            (split.train.len(), split.validation.len(), split.test.len()),
            (40, 10, 50)
        );
        assert_eq!(split.validation.start, ts.timestamp(40));
        assert_eq!(split.concatenated(), ts.values);
    }

    #[test]
    fn split_fifteen_days() {
        let ts = series(360 + 24);
        let split = split_scenario_at(&ts, 360, 0.2).unwrap();
        assert_eq!((split.train.len(), split.validation.len()), (288, 72));
    }

    #[test]
    fn split_at_start_is_empty() {
        let ts = series(100);
        assert!(matches!(
            split_scenario(&ts, ts.start, 0.2),
            Err(Error::EmptySegment("train"))
        ));
        assert!(matches!(
            split_scenario_at(&ts, 100, 0.2),
            Err(Error::EmptySegment("test"))
        ));
    }

    #[test]
    fn rolling_origin_positions() {
        let v: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let task = ForecastTask::new(5, 10).unwrap();
        let w = rolling_origins(&v, &task, 5).unwrap();
        let origins: Vec<_> = w.iter().map(|w| w.origin).collect();
        assert_eq!(origins, [10, 15, 20, 25]);
        assert_eq!(w[0].context, &v[0..10]);
        assert_eq!(w[3].actuals, &v[25..30]);
    }

    #[test]
    fn rolling_origin_boundaries() {
        let v = vec![1.0; 15];
        let task = ForecastTask::new(5, 10).unwrap();
        assert_eq!(rolling_origins(&v, &task, 1).unwrap().len(), 1);
        assert!(matches!(
            rolling_origins(&v[..14], &task, 1),
            Err(Error::SeriesTooShort { needed: 15, actual: 14 })
        ));
    }

    #[test]
    fn task_validation() {
        assert!(ForecastTask::new(0, 5).is_err());
        assert!(ForecastTask::with_quantiles(1, 5, vec![0.5, 0.1]).is_err());
        assert!(ForecastTask::with_quantiles(1, 5, vec![0.0, 0.5]).is_err());
        assert_eq!(ForecastTask::new(1, 1).unwrap().quantiles.len(), 9);
    }
}
