//! Univariate series ingestion, min-max normalization and the sliding
//! three-column window used as the supervised training set.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Monthly international airline passengers, Jan 1949 to Dec 1960.
pub const AIRLINE_PASSENGERS_CSV: &str = include_str!("../data/airline-passengers.csv");

/// Number of observations in the canonical series.
pub const CANONICAL_LEN: usize = 144;

/// Default number of trailing rows held out for testing.
pub const DEFAULT_TEST_COUNT: usize = 45;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read dataset '{path}': {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: cannot parse '{content}' as an observation")]
    ParseFailure { line: usize, content: String },
    #[error("line {line}: observation {value} must be positive and finite")]
    NonPositive { line: usize, value: f64 },
    #[error("series is empty")]
    EmptySeries,
    #[error("series is constant (min = max = {0}); cannot normalize")]
    ConstantSeries(f64),
    #[error("series of length {0} is too short to window (need at least 3)")]
    TooShort(usize),
    #[error("test_count {test_count} must be positive and below the row count {rows}")]
    InvalidSplit { test_count: usize, rows: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub values: Vec<f64>,
    /// Month identifiers when the file carried a label column. Not used in
    /// any computation.
    pub labels: Option<Vec<String>>,
}

impl RawSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(DatasetError::EmptySeries);
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(DatasetError::NonPositive { line: i + 1, value: v });
            }
        }
        Ok(Self { values, labels: None })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The bundled 144-point airline passengers series.
pub fn airline_passengers() -> RawSeries {
    parse_series(AIRLINE_PASSENGERS_CSV).expect("bundled dataset is well-formed")
}

pub fn load_series(path: &Path) -> Result<RawSeries> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let series = parse_series(&text)?;
    log::info!("loaded {} observations from {}", series.len(), path.display());
    Ok(series)
}

/// Parses one observation per line. A non-numeric first line is taken as a
/// header; with two or more fields the first is a month label and the last
/// is the value.
pub fn parse_series(text: &str) -> Result<RawSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut has_labels = false;

    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| DatasetError::ParseFailure {
            line,
            content: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let field = record.get(record.len() - 1).unwrap_or_default();
        let value = match field.parse::<f64>() {
            Ok(v) => v,
            Err(_) if line == 1 => continue,
            Err(_) => {
                return Err(DatasetError::ParseFailure {
                    line,
                    content: field.to_string(),
                })
            }
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(DatasetError::NonPositive { line, value });
        }
        if record.len() >= 2 {
            has_labels = true;
            labels.push(record.get(0).unwrap_or_default().to_string());
        } else {
            labels.push(String::new());
        }
        values.push(value);
    }

    if values.is_empty() {
        return Err(DatasetError::EmptySeries);
    }
    Ok(RawSeries {
        values,
        labels: has_labels.then_some(labels),
    })
}

/// Min-max scaler onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    pub min: f64,
    pub max: f64,
}

impl Normalizer {
    /// Fits on the full series.
    pub fn fit(series: &RawSeries) -> Result<Self> {
        if series.is_empty() {
            return Err(DatasetError::EmptySeries);
        }
        let min = series.values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = series.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= min {
            return Err(DatasetError::ConstantSeries(min));
        }
        Ok(Self { min, max })
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    pub fn normalize_value(&self, v: f64) -> f64 {
        (v - self.min) / self.span()
    }

    /// Values outside the fitted range are passed through (and land outside
    /// [0, 1]) with a warning.
    pub fn normalize(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .map(|&v| {
                let n = self.normalize_value(v);
                if !(0.0..=1.0).contains(&n) {
                    log::warn!("value {v} lies outside the fitted range [{}, {}]", self.min, self.max);
                }
                n
            })
            .collect()
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        v * self.span() + self.min
    }
}

/// One supervised example: two consecutive inputs and the next value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub x_prev: f64,
    pub x_curr: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SupervisedSet {
    pub rows: Vec<Row>,
}

impl SupervisedSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }
}

/// Look-back window of 2: row k = (s[k], s[k+1], s[k+2]).
pub fn window(series: &[f64]) -> Result<SupervisedSet> {
    if series.len() < 3 {
        return Err(DatasetError::TooShort(series.len()));
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(DatasetError::NonFinite(i));
    }
    let rows = series
        .windows(3)
        .map(|w| Row {
            x_prev: w[0],
            x_curr: w[1],
            target: w[2],
        })
        .collect();
    Ok(SupervisedSet { rows })
}

/// The last `test_count` rows become the test set; no shuffling.
pub fn split(set: &SupervisedSet, test_count: usize) -> Result<(SupervisedSet, SupervisedSet)> {
    if test_count == 0 || test_count >= set.len() {
        return Err(DatasetError::InvalidSplit {
            test_count,
            rows: set.len(),
        });
    }
    let cut = set.len() - test_count;
    Ok((
        SupervisedSet {
            rows: set.rows[..cut].to_vec(),
        },
        SupervisedSet {
            rows: set.rows[cut..].to_vec(),
        },
    ))
}

/// Everything downstream needs from a series: the fitted scaler plus the
/// train/test partitions on the normalized scale.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub normalizer: Normalizer,
    pub normalized: Vec<f64>,
    pub train: SupervisedSet,
    pub test: SupervisedSet,
}

pub fn prepare(series: &RawSeries, test_count: usize) -> Result<Prepared> {
    let normalizer = Normalizer::fit(series)?;
    let normalized = normalizer.normalize(&series.values);
    let rows = window(&normalized)?;
    let (train, test) = split(&rows, test_count)?;
    Ok(Prepared {
        normalizer,
        normalized,
        train,
        test,
    })
}

/// "index,value" CSV with 6-decimal fixed point.
pub fn series_to_csv(values: &[f64]) -> String {
    let mut out = String::from("index,value\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{i},{v:.6}");
    }
    out
}

/// Reads back the output of [`series_to_csv`].
pub fn series_from_csv(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || (line_no == 1 && line == "index,value") {
            continue;
        }
        let value = line
            .split(',')
            .nth(1)
            .and_then(|f| f.trim().parse::<f64>().ok())
            .ok_or_else(|| DatasetError::ParseFailure {
                line: line_no,
                content: line.to_string(),
            })?;
        values.push(value);
    }
    if values.is_empty() {
        return Err(DatasetError::EmptySeries);
    }
    Ok(values)
}
