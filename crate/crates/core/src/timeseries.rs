//! Time-series data model, CSV ingestion, min–max scaling and detrending.

use std::fmt;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A time stamp attached to one observation. Only used as metadata; every
/// algorithm works on integer sample index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Timestamp {
    Index(i64),
    DateTime(NaiveDateTime),
}

impl Timestamp {
    /// Parses an integer or an ISO-8601 date / date-time.
    pub fn parse(raw: &str) -> Option<Self> {
        let raw = raw.trim();
        if let Ok(i) = raw.parse::<i64>() {
            return Some(Timestamp::Index(i));
        }
        Self::parse_datetime(raw).map(Timestamp::DateTime)
    }

    fn parse_datetime(raw: &str) -> Option<NaiveDateTime> {
        if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
            return Some(dt.naive_utc());
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
            if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
                return Some(dt);
            }
        }
        if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
            return d.and_hms_opt(0, 0, 0);
        }
        // Year-month, as in monthly climate and sunspot records.
        NaiveDate::parse_from_str(&format!("{raw}-01"), "%Y-%m-%d")
            .ok()
            .and_then(|d| d.and_hms_opt(0, 0, 0))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timestamp::Index(i) => write!(f, "{i}"),
            Timestamp::DateTime(dt) => write!(f, "{}", dt.format("%Y-%m-%dT%H:%M:%S")),
        }
    }
}

/// `T×D` matrix of observations, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: DMatrix<f64>,
    timestamps: Option<Vec<Timestamp>>,
    channel_names: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        Self::with_metadata(values, None, None)
    }

    pub fn with_metadata(
        values: DMatrix<f64>,
        timestamps: Option<Vec<Timestamp>>,
        channel_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let (t, d) = values.shape();
        if t == 0 || d == 0 {
            return Err(Error::InvalidSeries(format!(
                "need at least one row and one channel, got {t}x{d}"
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            // column-major storage
            return Err(Error::InvalidSeries(format!(
                "non-finite value at row {}, channel {}",
                pos % t,
                pos / t
            )));
        }
        if let Some(ts) = &timestamps {
            if ts.len() != t {
                return Err(Error::DimensionMismatch(format!(
                    "{} timestamps for {t} rows",
                    ts.len()
                )));
            }
            if let Some(i) = ts.windows(2).position(|w| w[0] >= w[1]) {
                return Err(Error::InvalidSeries(format!(
                    "timestamps not strictly increasing at row {}",
                    i + 1
                )));
            }
        }
        if let Some(names) = &channel_names {
            if names.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "{} channel names for {d} channels",
                    names.len()
                )));
            }
        }
        Ok(Self {
            values,
            timestamps,
            channel_names,
        })
    }

    /// Single-channel series from a slice.
    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(values.len(), 1, values))
    }

    /// Series from row-major data with `d` channels.
    pub fn from_row_slice(d: usize, data: &[f64]) -> Result<Self> {
        if d == 0 || data.len() % d != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not split into rows of {d}",
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(data.len() / d, d, data))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Number of channels `D`.
    pub fn channels(&self) -> usize {
        self.values.ncols()
    }

    pub fn timestamps(&self) -> Option<&[Timestamp]> {
        self.timestamps.as_deref()
    }

    pub fn channel_names(&self) -> Option<&[String]> {
        self.channel_names.as_deref()
    }

    /// Channel names, falling back to `y1..yD`.
    pub fn resolved_channel_names(&self) -> Vec<String> {
        self.channel_names
            .clone()
            .unwrap_or_else(|| (1..=self.channels()).map(|i| format!("y{i}")).collect())
    }

    /// Observation `y_t` as a column vector.
    pub fn observation(&self, t: usize) -> DVector<f64> {
        self.values.row(t).transpose()
    }

    /// Rows `[start, end)` as a new series, metadata included.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::InvalidParameter(format!(
                "slice [{start}, {end}) out of range for length {}",
                self.len()
            )));
        }
        Self::with_metadata(
            self.values.rows(start, end - start).into_owned(),
            self.timestamps.as_ref().map(|ts| ts[start..end].to_vec()),
            self.channel_names.clone(),
        )
    }

    /// Replaces the values keeping channel names; timestamps are kept when
    /// the length is unchanged.
    fn with_values(&self, values: DMatrix<f64>) -> Result<Self> {
        let timestamps = if values.nrows() == self.len() {
            self.timestamps.clone()
        } else {
            None
        };
        Self::with_metadata(values, timestamps, self.channel_names.clone())
    }

    /// Writes the series as CSV with a header row. A `time` column leads
    /// when timestamps are present.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = Vec::with_capacity(self.channels() + 1);
        if self.timestamps.is_some() {
            header.push("time".to_string());
        }
        header.extend(self.resolved_channel_names());
        w.write_record(&header).map_err(csv_io)?;
        for t in 0..self.len() {
            let mut rec = Vec::with_capacity(header.len());
            if let Some(ts) = &self.timestamps {
                rec.push(ts[t].to_string());
            }
            rec.extend(self.values.row(t).iter().map(|v| format!("{v:?}")));
            w.write_record(&rec).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// CSV ingestion options.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvConfig {
    pub has_header: bool,
    /// 0-based column holding timestamps; excluded from the channels.
    pub timestamp_column: Option<usize>,
}

impl CsvConfig {
    /// Guesses the layout from the first two records: a header is assumed
    /// when the first record has a cell that is neither a number nor a
    /// timestamp, and column 0 is taken as time when it holds dates.
    pub fn infer(data: &[u8]) -> Self {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(data);
        let mut records = rdr.records().filter_map(|r| r.ok());
        let Some(first) = records.next() else {
            return Self::default();
        };
        let has_header = first
            .iter()
            .any(|c| c.trim().parse::<f64>().is_err() && Timestamp::parse(c).is_none());
        let probe = if has_header { records.next() } else { Some(first) };
        let timestamp_column = probe.and_then(|rec| {
            let cell = rec.get(0)?;
            (cell.trim().parse::<f64>().is_err()
                && matches!(Timestamp::parse(cell), Some(Timestamp::DateTime(_))))
            .then_some(0)
        });
        Self {
            has_header,
            timestamp_column,
        }
    }
}

/// Reads a numeric CSV into a [`TimeSeries`]. Line numbers in errors are
/// 1-based file lines; column numbers are 1-based fields.
pub fn load_csv<R: Read>(source: R, config: &CsvConfig) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut names: Option<Vec<String>> = None;
    let mut timestamps: Vec<Timestamp> = Vec::new();
    let mut data: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;

    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(idx as u64 + 1);
            Error::Parse {
                line,
                column: 0,
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(idx as u64 + 1);
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::Ragged {
                    line,
                    found: rec.len(),
                    expected: w,
                })
            }
            _ => {}
        }
        if let Some(tc) = config.timestamp_column {
            if tc >= rec.len() {
                return Err(Error::InvalidParameter(format!(
                    "timestamp column {tc} but only {} fields",
                    rec.len()
                )));
            }
        }
        if config.has_header && names.is_none() {
            names = Some(
                rec.iter()
                    .enumerate()
                    .filter(|(j, _)| Some(*j) != config.timestamp_column)
                    .map(|(_, c)| c.to_string())
                    .collect(),
            );
            continue;
        }
        for (j, cell) in rec.iter().enumerate() {
            if Some(j) == config.timestamp_column {
                let ts = Timestamp::parse(cell).ok_or_else(|| Error::Parse {
                    line,
                    column: j + 1,
                    message: format!("cannot parse timestamp {cell:?}"),
                })?;
                timestamps.push(ts);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                column: j + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: j + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            data.push(v);
        }
        rows += 1;
    }

    let width = width.ok_or(Error::EmptyInput)?;
    let d = width - usize::from(config.timestamp_column.is_some());
    if rows == 0 || d == 0 {
        return Err(Error::EmptyInput);
    }
    let values = DMatrix::from_row_slice(rows, d, &data);
    let timestamps = config.timestamp_column.map(|_| timestamps);
    if let Some(ts) = &timestamps {
        let kinds_mixed = ts
            .windows(2)
            .any(|w| matches!(w[0], Timestamp::Index(_)) != matches!(w[1], Timestamp::Index(_)));
        if kinds_mixed {
            return Err(Error::InvalidSeries("mixed integer and date timestamps".into()));
        }
    }
    TimeSeries::with_metadata(values, timestamps, names)
}

/// Per-channel `(min, max)` recorded by [`minmax_scale`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub ranges: Vec<(f64, f64)>,
}

impl ScalingParams {
    pub fn identity(channels: usize) -> Self {
        Self {
            ranges: vec![(0.0, 1.0); channels],
        }
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Multiplicative factor from scaled to original units for one channel.
    pub fn span(&self, channel: usize) -> f64 {
        let (lo, hi) = self.ranges[channel];
        hi - lo
    }
}

/// Maps each channel affinely onto `[0, 1]`. Constant channels map to zeros.
pub fn minmax_scale(ts: &TimeSeries) -> (TimeSeries, ScalingParams) {
    let mut values = ts.values.clone();
    let mut ranges = Vec::with_capacity(ts.channels());
    for mut col in values.column_iter_mut() {
        let lo = col.min();
        let hi = col.max();
        let span = hi - lo;
        if span > 0.0 {
            col.apply(|v| *v = (*v - lo) / span);
        } else {
            col.fill(0.0);
        }
        ranges.push((lo, hi));
    }
    let scaled = ts
        .with_values(values)
        .expect("scaling preserves shape and finiteness");
    (scaled, ScalingParams { ranges })
}

/// Undoes [`minmax_scale`].
pub fn inverse_scale(ts: &TimeSeries, params: &ScalingParams) -> Result<TimeSeries> {
    if ts.channels() != params.len() {
        return Err(Error::DimensionMismatch(format!(
            "series has {} channels, scaling params {}",
            ts.channels(),
            params.len()
        )));
    }
    let mut values = ts.values.clone();
    for (mut col, &(lo, hi)) in values.column_iter_mut().zip(&params.ranges) {
        let span = hi - lo;
        col.apply(|v| *v = lo + *v * span);
    }
    ts.with_values(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method", content = "degree")]
pub enum DetrendMethod {
    #[default]
    Linear,
    Polynomial(usize),
    Difference,
}

/// Removes a per-channel trend in sample index `t`.
///
/// Linear and polynomial methods subtract the least-squares polynomial fit;
/// `Difference` returns first differences (one row shorter).
pub fn detrend(ts: &TimeSeries, method: DetrendMethod) -> Result<TimeSeries> {
    let t = ts.len();
    match method {
        DetrendMethod::Difference => {
            if t < 2 {
                return Err(Error::InvalidParameter(
                    "differencing needs at least 2 samples".into(),
                ));
            }
            let v = &ts.values;
            let diff = v.rows(1, t - 1) - v.rows(0, t - 1);
            TimeSeries::with_metadata(
                diff,
                ts.timestamps.as_ref().map(|s| s[1..].to_vec()),
                ts.channel_names.clone(),
            )
        }
        DetrendMethod::Linear => detrend(ts, DetrendMethod::Polynomial(1)),
        DetrendMethod::Polynomial(degree) => {
            if t < degree + 2 {
                return Err(Error::InvalidParameter(format!(
                    "degree-{degree} detrend needs at least {} samples, got {t}",
                    degree + 2
                )));
            }
            let fit = polynomial_fit(t, degree, &ts.values)?;
            ts.with_values(&ts.values - fit)
        }
    }
}

/// Least-squares polynomial fit of every column against index; abscissa
/// rescaled to `[-1, 1]` for conditioning.
fn polynomial_fit(t: usize, degree: usize, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = if t > 1 { 2.0 / (t - 1) as f64 } else { 0.0 };
    let vander = DMatrix::from_fn(t, degree + 1, |i, k| (i as f64 * scale - 1.0).powi(k as i32));
    let coeffs = vander
        .clone()
        .svd(true, true)
        .solve(y, f64::EPSILON)
        .map_err(|_| Error::SvdFailed)?;
    Ok(vander * coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PAPER_CSV: &str = "1,10\n2,20\n3,30\n4,40\n";

    fn paper_series() -> TimeSeries {
        TimeSeries::from_row_slice(2, &[1., 10., 2., 20., 3., 30., 4., 40.]).unwrap()
    }

    #[test]
    fn loads_worked_example() {
        let ts = load_csv(PAPER_CSV.as_bytes(), &CsvConfig::default()).unwrap();
        assert_eq!(ts, paper_series());
        assert_eq!(ts.len(), 4);
        assert_eq!(ts.channels(), 2);
    }

    #[test]
    fn single_cell() {
        let ts = load_csv("5\n".as_bytes(), &CsvConfig::default()).unwrap();
        assert_eq!((ts.len(), ts.channels()), (1, 1));
        assert_eq!(ts.values()[(0, 0)], 5.0);
    }

    #[test]
    fn non_numeric_cell_names_row() {
        let err = load_csv("1,2\n3,4\n5,x\n".as_bytes(), &CsvConfig::default()).unwrap_err();
        match err {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (3, 2)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_string("1,2\n3,4\n5,x\n").contains("line 3"));
    }

    fn err_string(s: &str) -> String {
        load_csv(s.as_bytes(), &CsvConfig::default())
            .unwrap_err()
            .to_string()
    }

    #[test]
    fn ragged_and_empty() {
        assert!(matches!(
            load_csv("1,2\n3\n".as_bytes(), &CsvConfig::default()),
            Err(Error::Ragged { line: 2, found: 1, expected: 2 })
        ));
        assert!(matches!(
            load_csv("".as_bytes(), &CsvConfig::default()),
            Err(Error::EmptyInput)
        ));
        let header_only = CsvConfig {
            has_header: true,
            timestamp_column: None,
        };
        assert!(matches!(
            load_csv("a,b\n".as_bytes(), &header_only),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn header_and_timestamps() {
        let src = "date,co2\n1958-03,315.7\n1958-04,317.45\n1958-05,317.5\n";
        let cfg = CsvConfig::infer(src.as_bytes());
        assert_eq!(
            cfg,
            CsvConfig {
                has_header: true,
                timestamp_column: Some(0)
            }
        );
        let ts = load_csv(src.as_bytes(), &cfg).unwrap();
        assert_eq!(ts.channels(), 1);
        assert_eq!(ts.channel_names().unwrap(), &["co2".to_string()]);
        assert_eq!(ts.timestamps().unwrap().len(), 3);

        let ints = "t,y\n0,1.5\n1,2.5\n";
        let cfg = CsvConfig {
            has_header: true,
            timestamp_column: Some(0),
        };
        let ts = load_csv(ints.as_bytes(), &cfg).unwrap();
        assert_eq!(ts.timestamps().unwrap(), &[Timestamp::Index(0), Timestamp::Index(1)]);

        let backwards = "t,y\n1,1.5\n0,2.5\n";
        assert!(load_csv(backwards.as_bytes(), &cfg).is_err());
    }

    #[test]
    fn infer_plain_numeric() {
        assert_eq!(CsvConfig::infer(PAPER_CSV.as_bytes()), CsvConfig::default());
    }

    #[test]
    fn csv_round_trip() {
        let ts = paper_series();
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        let back = load_csv(
            buf.as_slice(),
            &CsvConfig {
                has_header: true,
                timestamp_column: None,
            },
        )
        .unwrap();
        assert_eq!(back.values(), ts.values());
    }

    #[test]
    fn scale_worked_example() {
        let (scaled, params) = minmax_scale(&paper_series());
        let col: Vec<f64> = scaled.values().column(0).iter().copied().collect();
        let expect = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (a, b) in col.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(params.ranges, vec![(1.0, 4.0), (10.0, 40.0)]);
        let back = inverse_scale(&scaled, &params).unwrap();
        assert!((back.values() - paper_series().values()).amax() < 1e-12);
    }

    #[test]
    fn constant_channel_scales_to_zero() {
        let ts = TimeSeries::from_column(&[7.0, 7.0, 7.0]).unwrap();
        let (scaled, params) = minmax_scale(&ts);
        assert!(scaled.values().iter().all(|&v| v == 0.0));
        let back = inverse_scale(&scaled, &params).unwrap();
        assert!(back.values().iter().all(|&v| v == 7.0));
    }

    #[test]
    fn identity_params_and_mismatch() {
        let ts = paper_series();
        let same = inverse_scale(&ts, &ScalingParams::identity(2)).unwrap();
        assert_eq!(same.values(), ts.values());
        assert!(matches!(
            inverse_scale(&ts, &ScalingParams::identity(3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn random_channel_hits_bounds() {
        let mut rng = crate::rng::NoiseStream::new(11);
        let xs: Vec<f64> = (0..100).map(|_| rng.uniform() * 40.0 - 3.0).collect();
        let (scaled, _) = minmax_scale(&TimeSeries::from_column(&xs).unwrap());
        let out = scaled.values().column(0);
        // oracle: locate the extremes independently and check they land on 0 and 1
        let (imin, imax) = xs.iter().enumerate().fold((0, 0), |(lo, hi), (i, &x)| {
            (if x < xs[lo] { i } else { lo }, if x > xs[hi] { i } else { hi })
        });
        assert_eq!(out[imin], 0.0);
        assert_eq!(out[imax], 1.0);
        assert_eq!(out.min(), 0.0);
        assert_eq!(out.max(), 1.0);
    }

    #[test]
    fn random_round_trip_50x3() {
        let mut rng = crate::rng::NoiseStream::new(5);
        let data: Vec<f64> = (0..150).map(|_| rng.normal() * 10.0 + 3.0).collect();
        let ts = TimeSeries::from_row_slice(3, &data).unwrap();
        let (scaled, params) = minmax_scale(&ts);
        let back = inverse_scale(&scaled, &params).unwrap();
        assert!((back.values() - ts.values()).amax() < 1e-12);
    }

    #[test]
    fn linear_detrend_exact_line() {
        let xs: Vec<f64> = (0..50).map(|t| 2.0 * t as f64 + 3.0).collect();
        let out = detrend(&TimeSeries::from_column(&xs).unwrap(), DetrendMethod::Linear).unwrap();
        assert!(out.values().amax() < 1e-9);
    }

    #[test]
    fn linear_detrend_recovers_seasonal() {
        let n = 240;
        let season: Vec<f64> = (0..n)
            .map(|t| (std::f64::consts::TAU * t as f64 / 12.0).sin())
            .collect();
        let xs: Vec<f64> = season.iter().enumerate().map(|(t, s)| s + 0.5 * t as f64).collect();
        let out = detrend(&TimeSeries::from_column(&xs).unwrap(), DetrendMethod::Linear).unwrap();
        let resid: Vec<f64> = out.values().column(0).iter().copied().collect();

        // oracle: closed-form simple regression on raw index
        let tm = (n as f64 - 1.0) / 2.0;
        let ym = xs.iter().sum::<f64>() / n as f64;
        let sxy: f64 = xs.iter().enumerate().map(|(t, y)| (t as f64 - tm) * (y - ym)).sum();
        let sxx: f64 = (0..n).map(|t| (t as f64 - tm).powi(2)).sum();
        let slope = sxy / sxx;
        let oracle: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(t, y)| y - (ym + slope * (t as f64 - tm)))
            .collect();
        for (a, b) in resid.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(correlation(&resid, &season) > 0.99);
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn polynomial_detrend_quadratic() {
        let xs: Vec<f64> = (0..30).map(|t| 0.1 * (t * t) as f64 - t as f64 + 4.0).collect();
        let ts = TimeSeries::from_column(&xs).unwrap();
        let out = detrend(&ts, DetrendMethod::Polynomial(2)).unwrap();
        assert!(out.values().amax() < 1e-9);
        assert!(detrend(&TimeSeries::from_column(&[1.0, 2.0, 3.0]).unwrap(), DetrendMethod::Polynomial(2)).is_err());
    }

    #[test]
    fn difference_detrend() {
        let out = detrend(&TimeSeries::from_column(&[1.0, 2.0, 4.0]).unwrap(), DetrendMethod::Difference).unwrap();
        assert_eq!(out.values().column(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0]);
        assert!(detrend(&TimeSeries::from_column(&[1.0]).unwrap(), DetrendMethod::Difference).is_err());
    }

    #[test]
    fn rejects_bad_series() {
        assert!(TimeSeries::new(DMatrix::zeros(0, 1)).is_err());
        assert!(TimeSeries::from_column(&[1.0, f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn scaling_bounds_and_round_trip(
            data in proptest::collection::vec(-1e3f64..1e3, 2..60),
        ) {
            let ts = TimeSeries::from_column(&data).unwrap();
            let (scaled, params) = minmax_scale(&ts);
            prop_assert!(scaled.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
            let back = inverse_scale(&scaled, &params).unwrap();
            let (lo, hi) = params.ranges[0];
            for (a, b) in back.values().iter().zip(ts.values().iter()) {
                if hi > lo {
                    prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(hi.abs()).max(1.0));
                } else {
                    prop_assert_eq!(*a, lo);
                }
            }
        }

        #[test]
        fn linear_detrend_leaves_no_slope(
            data in proptest::collection::vec(-100f64..100.0, 3..80),
        ) {
            let ts = TimeSeries::from_column(&data).unwrap();
            let out = detrend(&ts, DetrendMethod::Linear).unwrap();
            let r: Vec<f64> = out.values().column(0).iter().copied().collect();
            let n = r.len() as f64;
            let tm = (n - 1.0) / 2.0;
            let sxy: f64 = r.iter().enumerate().map(|(t, y)| (t as f64 - tm) * y).sum();
            let sxx: f64 = (0..r.len()).map(|t| (t as f64 - tm).powi(2)).sum();
            prop_assert!((sxy / sxx).abs() < 1e-9);
        }
    }
}
