//! Stressed wind speed and weather scenarios, their power mapping, and the
//! weather-ignorant benchmark.

mod benchmark;
mod coupling;
mod scenarios;
mod transition;

use std::io::{Read, Write};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::StatsError;
use crate::turbine::TurbineError;
use crate::weather::{format_timestamp, parse_timestamp, WeatherError};

pub use benchmark::{benchmark_power_scenarios, BenchmarkModel};
pub use coupling::{pca_feature_coupling, CouplingCoefficients};
pub use scenarios::{
    confidence_envelope, scenarios_to_power, stress_weather_scenarios, table_power, RecordLayout, WeatherScenarioSet,
};
pub use transition::{
    allocate_largest_remainder, build_transition_matrix, default_interval_edges, fit_conditional_error_distributions,
    merge_empty_intervals, sample_speed_errors, sample_speed_errors_at, stressed_speed_scenarios, Placeholders,
    TransitionMatrix, TransitionModel,
};

/// Version written into every serialized model document.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StressorError {
    #[error("forecast-speed intervals without observations: {0:?}")]
    EmptyIntervals(Vec<usize>),
    #[error("invalid interval edges: {0}")]
    InvalidEdges(String),
    #[error("speed {0} m/s outside the interval span")]
    OutsideSpan(f64),
    #[error("interval {0} has Region II mass but no fitted error distribution")]
    MissingDistribution(usize),
    #[error("placeholder {speed} m/s does not lie in Region {region}")]
    BadPlaceholder { region: &'static str, speed: f64 },
    #[error("key stressor `{0}` not found")]
    UnknownKeyStressor(String),
    #[error("key stressor loading {0:e} too small; coupling undefined")]
    DegenerateKeyLoading(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("power {value} MW outside [0, {capacity}] MW")]
    PowerOutOfRange { value: f64, capacity: f64 },
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Turbine(#[from] TurbineError),
    #[error(transparent)]
    Weather(#[from] WeatherError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// What the scalar values of a [`ScenarioSet`] measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "quantity", rename_all = "snake_case")]
pub enum Quantity {
    /// Key-stressor wind speed, m/s.
    WindSpeed,
    /// Farm output, MW, for a farm of the given capacity.
    Power { capacity_mw: f64 },
}

/// N equally likely trajectories of one scalar quantity over T periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub quantity: Quantity,
    pub timestamps: Vec<NaiveDateTime>,
    pub forecast: Vec<f64>,
    /// `values[i][t]` is scenario i at period t.
    pub values: Vec<Vec<f64>>,
    pub seed: u64,
}

impl ScenarioSet {
    pub fn new(
        quantity: Quantity,
        timestamps: Vec<NaiveDateTime>,
        forecast: Vec<f64>,
        values: Vec<Vec<f64>>,
        seed: u64,
    ) -> Result<Self, StressorError> {
        let s = Self {
            quantity,
            timestamps,
            forecast,
            values,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), StressorError> {
        let t = self.timestamps.len();
        if self.values.is_empty() {
            return Err(StressorError::Dimension("a scenario set needs N >= 1".into()));
        }
        if self.forecast.len() != t || self.values.iter().any(|v| v.len() != t) {
            return Err(StressorError::Dimension(format!(
                "forecast and every scenario must have {t} periods"
            )));
        }
        Ok(())
    }

    pub fn n_scenarios(&self) -> usize {
        self.values.len()
    }

    pub fn n_periods(&self) -> usize {
        self.timestamps.len()
    }

    /// Uniform scenario weight 1/N.
    pub fn probability(&self) -> f64 {
        1.0 / self.n_scenarios() as f64
    }

    /// All scenario values at period `t`.
    pub fn column(&self, t: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[t]).collect()
    }

    pub fn capacity_mw(&self) -> Option<f64> {
        match self.quantity {
            Quantity::Power { capacity_mw } => Some(capacity_mw),
            Quantity::WindSpeed => None,
        }
    }

    /// Values divided by farm capacity (power sets only).
    pub fn normalized(&self) -> Option<Vec<Vec<f64>>> {
        let cap = self.capacity_mw()?;
        Some(self.values.iter().map(|v| v.iter().map(|x| x / cap).collect()).collect())
    }

    /// Long-format table `scenario,timestamp,value`; the forecast is written
    /// with scenario id `forecast`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), StressorError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["scenario", "timestamp", "value"])?;
        for (t, ts) in self.timestamps.iter().enumerate() {
            w.write_record(["forecast", &format_timestamp(ts), &self.forecast[t].to_string()])?;
        }
        for (i, row) in self.values.iter().enumerate() {
            for (t, ts) in self.timestamps.iter().enumerate() {
                w.write_record([&i.to_string(), &format_timestamp(ts), &row[t].to_string()])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a table written by [`ScenarioSet::write_csv`].
    pub fn read_csv<R: Read>(reader: R, quantity: Quantity, seed: u64) -> Result<Self, StressorError> {
        let mut r = csv::Reader::from_reader(reader);
        let mut timestamps: Vec<NaiveDateTime> = Vec::new();
        let mut forecast = Vec::new();
        let mut values: Vec<Vec<f64>> = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |m: &str| StressorError::InvalidArgument(format!("scenario table line {}: {m}", line + 2));
            let ts = parse_timestamp(rec.get(1).unwrap_or("")).ok_or_else(|| bad("bad timestamp"))?;
            let v: f64 = rec.get(2).unwrap_or("").parse().map_err(|_| bad("bad value"))?;
            match rec.get(0).unwrap_or("") {
                "forecast" => {
                    timestamps.push(ts);
                    forecast.push(v);
                }
                id => {
                    let i: usize = id.parse().map_err(|_| bad("bad scenario id"))?;
                    if i == values.len() {
                        values.push(Vec::with_capacity(timestamps.len()));
                    }
                    let row = values.get_mut(i).ok_or_else(|| bad("scenario ids out of order"))?;
                    if timestamps.get(row.len()) != Some(&ts) {
                        return Err(bad("timestamp does not match the forecast rows"));
                    }
                    row.push(v);
                }
            }
        }
        Self::new(quantity, timestamps, forecast, values, seed)
    }
}
