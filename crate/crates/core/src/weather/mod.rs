//! Weather feature tables: loading, validation, standardization and clustering.

mod cluster;
mod histogram;
mod standardize;

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cluster::{cluster_weather, cluster_weather_with, ClusterAssignment, KMeansOptions};
pub use histogram::{conditional_error_histogram, ErrorHistograms};
pub use standardize::{encode_direction, standardize, StandardizedTable};

/// Heights (m) of the multi-level wind speed and direction features.
pub const PROFILE_HEIGHTS_M: [f64; 9] = [40.0, 60.0, 80.0, 100.0, 120.0, 140.0, 160.0, 180.0, 200.0];

#[derive(Debug, Error)]
pub enum WeatherError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("row {row}: cannot parse timestamp `{value}`")]
    Timestamp { row: usize, value: String },
    #[error("row {row}: timestamps are not strictly increasing")]
    NonMonotoneTimestamps { row: usize },
    #[error("row {row}: feature `{feature}` value {value} outside its physical range")]
    OutOfRange { feature: String, row: usize, value: f64 },
    #[error("feature `{feature}` has {got} values, expected {expected}")]
    LengthMismatch { feature: String, expected: usize, got: usize },
    #[error("feature `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("k = {k} exceeds the {distinct} distinct points")]
    TooManyClusters { k: usize, distinct: usize },
    #[error("condition label {0} has no observations")]
    EmptyLabelGroup(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Physical role of a feature; drives range validation and direction encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Pressure,
    Humidity,
    Temperature,
    Direction,
    Speed,
    Other,
}

impl FeatureKind {
    fn admits(self, v: f64) -> bool {
        match self {
            FeatureKind::Pressure => v > 0.0,
            FeatureKind::Humidity => (0.0..=100.0).contains(&v),
            FeatureKind::Temperature => v > -100.0 && v < 100.0,
            FeatureKind::Direction => (0.0..=360.0).contains(&v),
            FeatureKind::Speed => v >= 0.0,
            FeatureKind::Other => v.is_finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub id: String,
    pub unit: String,
    pub kind: FeatureKind,
    pub height_m: Option<f64>,
    pub values: Vec<f64>,
}

/// Time-indexed matrix of weather features.
///
/// Timestamps are strictly increasing; `resolution_secs` is the most common step.
/// Direction features are kept in degrees here; the sine encoding happens in
/// [`standardize`] and in scenario construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    timestamps: Vec<NaiveDateTime>,
    resolution_secs: i64,
    features: Vec<Feature>,
}

impl FeatureTable {
    /// Validates and assembles a table. Row numbers in errors are 1-based.
    pub fn new(timestamps: Vec<NaiveDateTime>, features: Vec<Feature>) -> Result<Self, WeatherError> {
        let h = timestamps.len();
        for (i, w) in timestamps.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(WeatherError::NonMonotoneTimestamps { row: i + 2 });
            }
        }
        for f in &features {
            if f.values.len() != h {
                return Err(WeatherError::LengthMismatch {
                    feature: f.id.clone(),
                    expected: h,
                    got: f.values.len(),
                });
            }
            if let Some((row, &value)) = f
                .values
                .iter()
                .enumerate()
                .find(|(_, v)| v.is_nan() || !f.kind.admits(**v))
            {
                return Err(WeatherError::OutOfRange {
                    feature: f.id.clone(),
                    row: row + 1,
                    value,
                });
            }
        }
        let resolution_secs = modal_step(&timestamps);
        Ok(Self {
            timestamps,
            resolution_secs,
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn resolution_secs(&self) -> i64 {
        self.resolution_secs
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature_ids(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.id.as_str()).collect()
    }

    pub fn feature(&self, id: &str) -> Option<&Feature> {
        self.features.iter().find(|f| f.id == id)
    }

    pub fn column(&self, id: &str) -> Result<&[f64], WeatherError> {
        self.feature(id)
            .map(|f| f.values.as_slice())
            .ok_or_else(|| WeatherError::UnknownFeature(id.to_string()))
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.features.iter().position(|f| f.id == id)
    }

    /// Values of every feature at row `t`, in feature order.
    pub fn row(&self, t: usize) -> Vec<f64> {
        self.features.iter().map(|f| f.values[t]).collect()
    }

    /// Keeps only the listed features, in the listed order.
    pub fn select(&self, ids: &[&str]) -> Result<Self, WeatherError> {
        let features = ids
            .iter()
            .map(|id| {
                self.feature(id)
                    .cloned()
                    .ok_or_else(|| WeatherError::UnknownFeature(id.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            timestamps: self.timestamps.clone(),
            resolution_secs: self.resolution_secs,
            features,
        })
    }

    /// Rows `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let end = end.min(self.len());
        let timestamps = self.timestamps[start..end].to_vec();
        let features = self
            .features
            .iter()
            .map(|f| Feature {
                values: f.values[start..end].to_vec(),
                ..f.clone()
            })
            .collect();
        Self {
            resolution_secs: if end - start >= 2 {
                modal_step(&timestamps)
            } else {
                self.resolution_secs
            },
            timestamps,
            features,
        }
    }

    /// Splits into consecutive chunks of `steps` rows (the last may be shorter).
    pub fn chunks(&self, steps: usize) -> Vec<Self> {
        (0..self.len())
            .step_by(steps.max(1))
            .map(|s| self.slice(s, s + steps))
            .collect()
    }
}

fn modal_step(timestamps: &[NaiveDateTime]) -> i64 {
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for w in timestamps.windows(2) {
        *counts.entry((w[1] - w[0]).num_seconds()).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(step, _)| step)
        .unwrap_or(0)
}

/// Maps a feature id to its column in a delimited file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub id: String,
    pub column: String,
    pub kind: FeatureKind,
    pub unit: String,
    #[serde(default)]
    pub height_m: Option<f64>,
}

impl FeatureSpec {
    pub fn new(id: &str, kind: FeatureKind, unit: &str, height_m: Option<f64>) -> Self {
        Self {
            id: id.to_string(),
            column: id.to_string(),
            kind,
            unit: unit.to_string(),
            height_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub timestamp_column: String,
    pub features: Vec<FeatureSpec>,
}

impl FeatureSchema {
    /// The 21 standard features, named after the WIND Toolkit export convention:
    /// `pressure_100m`, `relativehumidity_2m`, `temperature_100m`,
    /// `winddirection_{h}m` and `windspeed_{h}m` for h = 40, 60, ..., 200.
    pub fn standard() -> Self {
        let mut features = vec![
            FeatureSpec::new("pressure_100m", FeatureKind::Pressure, "Pa", Some(100.0)),
            FeatureSpec::new("relativehumidity_2m", FeatureKind::Humidity, "%", Some(2.0)),
            FeatureSpec::new("temperature_100m", FeatureKind::Temperature, "C", Some(100.0)),
        ];
        for h in PROFILE_HEIGHTS_M {
            features.push(FeatureSpec::new(
                &direction_id(h),
                FeatureKind::Direction,
                "deg",
                Some(h),
            ));
        }
        for h in PROFILE_HEIGHTS_M {
            features.push(FeatureSpec::new(&speed_id(h), FeatureKind::Speed, "m/s", Some(h)));
        }
        Self {
            timestamp_column: "timestamp".to_string(),
            features,
        }
    }

    /// Adds one more feature (e.g. a forecast speed column in a history file).
    pub fn with(mut self, spec: FeatureSpec) -> Self {
        self.features.push(spec);
        self
    }
}

pub fn speed_id(height_m: f64) -> String {
    format!("windspeed_{}m", height_m as i64)
}

pub fn direction_id(height_m: f64) -> String {
    format!("winddirection_{}m", height_m as i64)
}

/// A loaded table plus the 1-based data rows that were dropped for missing values.
#[derive(Debug, Clone)]
pub struct LoadedTable {
    pub table: FeatureTable,
    pub dropped_rows: Vec<usize>,
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
}

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format("%Y-%m-%dT%H:%M:%S").to_string()
}

fn parse_cell(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Loads a delimited table with a header row. Rows with a missing required value
/// are dropped and reported; present values are range-checked.
pub fn load_feature_table(path: &Path, schema: &FeatureSchema) -> Result<LoadedTable, WeatherError> {
    let file = std::fs::File::open(path)?;
    read_feature_table(file, schema)
}

pub fn read_feature_table<R: Read>(reader: R, schema: &FeatureSchema) -> Result<LoadedTable, WeatherError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| WeatherError::MissingColumn(name.to_string()))
    };
    let ts_col = find(&schema.timestamp_column)?;
    let cols = schema
        .features
        .iter()
        .map(|f| find(&f.column))
        .collect::<Result<Vec<_>, _>>()?;

    let mut timestamps = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); schema.features.len()];
    let mut dropped_rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let raw_ts = record.get(ts_col).unwrap_or("");
        let ts = parse_timestamp(raw_ts).ok_or_else(|| WeatherError::Timestamp {
            row,
            value: raw_ts.to_string(),
        })?;
        let cells: Vec<Option<f64>> = cols
            .iter()
            .map(|&c| record.get(c).and_then(parse_cell))
            .collect();
        if cells.iter().any(Option::is_none) {
            dropped_rows.push(row);
            continue;
        }
        for ((spec, cell), out) in schema.features.iter().zip(&cells).zip(values.iter_mut()) {
            let v = cell.expect("checked above");
            if !spec.kind.admits(v) {
                return Err(WeatherError::OutOfRange {
                    feature: spec.id.clone(),
                    row,
                    value: v,
                });
            }
            out.push(v);
        }
        if let Some(prev) = timestamps.last() {
            if ts <= *prev {
                return Err(WeatherError::NonMonotoneTimestamps { row });
            }
        }
        timestamps.push(ts);
    }
    let features = schema
        .features
        .iter()
        .zip(values)
        .map(|(spec, values)| Feature {
            id: spec.id.clone(),
            unit: spec.unit.clone(),
            kind: spec.kind,
            height_m: spec.height_m,
            values,
        })
        .collect();
    Ok(LoadedTable {
        table: FeatureTable::new(timestamps, features)?,
        dropped_rows,
    })
}

/// Writes a table with the feature ids as column names.
pub fn write_feature_table<W: std::io::Write>(table: &FeatureTable, writer: W) -> Result<(), WeatherError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp".to_string()];
    header.extend(table.features.iter().map(|f| f.id.clone()));
    wtr.write_record(&header)?;
    for t in 0..table.len() {
        let mut rec = vec![format_timestamp(&table.timestamps[t])];
        rec.extend(table.features.iter().map(|f| f.values[t].to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
