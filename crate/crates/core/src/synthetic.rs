//! Reproducible synthetic weather with forecast errors that depend on the weather.
//!
//! A latent hub-height forecast speed follows an AR(1) process with a diurnal
//! cycle; the other features respond linearly to it. Realized weather adds a
//! hub-speed error whose spread grows with the forecast speed, propagated to the
//! other features with fixed slopes.

use chrono::{NaiveDateTime, Timelike};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{substream, Stream};
use crate::weather::{direction_id, speed_id, Feature, FeatureKind, FeatureTable, WeatherError, PROFILE_HEIGHTS_M};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub start: NaiveDateTime,
    pub hours: usize,
    pub seed: u64,
    /// Mean and spread of the hub-height forecast speed, m/s.
    pub mean_speed: f64,
    pub speed_sd: f64,
    /// Hourly AR(1) persistence of the speed anomaly.
    pub persistence: f64,
    /// Hub-speed error sd = base + slope × forecast speed.
    pub error_sd_base: f64,
    pub error_sd_slope: f64,
    pub shear_exponent: f64,
    /// Direction change per 100 m of height, degrees.
    pub veer_deg_per_100m: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            start: chrono::NaiveDate::from_ymd_opt(2013, 1, 1)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
            hours: 24,
            seed: 0,
            mean_speed: 9.0,
            speed_sd: 4.0,
            persistence: 0.9,
            error_sd_base: 0.4,
            error_sd_slope: 0.12,
            shear_exponent: 0.14,
            veer_deg_per_100m: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWeather {
    pub forecast: FeatureTable,
    pub actual: FeatureTable,
}

impl SyntheticWeather {
    /// Hub-height (forecast, actual) speed pairs.
    pub fn hub_pairs(&self) -> Vec<(f64, f64)> {
        let id = speed_id(100.0);
        let f = self.forecast.column(&id).expect("hub speed");
        let a = self.actual.column(&id).expect("hub speed");
        f.iter().copied().zip(a.iter().copied()).collect()
    }
}

struct Row {
    pressure: f64,
    humidity: f64,
    temperature: f64,
    directions: Vec<f64>,
    speeds: Vec<f64>,
}

fn table(start: NaiveDateTime, rows: &[Row]) -> Result<FeatureTable, WeatherError> {
    let ts = (0..rows.len()).map(|h| start + chrono::Duration::hours(h as i64)).collect();
    let col = |id: String, unit: &str, kind, height, f: &dyn Fn(&Row) -> f64| Feature {
        id,
        unit: unit.into(),
        kind,
        height_m: Some(height),
        values: rows.iter().map(f).collect(),
    };
    let mut features = vec![
        col("pressure_100m".into(), "Pa", FeatureKind::Pressure, 100.0, &|r| r.pressure),
        col("relativehumidity_2m".into(), "%", FeatureKind::Humidity, 2.0, &|r| r.humidity),
        col("temperature_100m".into(), "C", FeatureKind::Temperature, 100.0, &|r| r.temperature),
    ];
    for (k, &h) in PROFILE_HEIGHTS_M.iter().enumerate() {
        features.push(col(direction_id(h), "deg", FeatureKind::Direction, h, &move |r| r.directions[k]));
    }
    for (k, &h) in PROFILE_HEIGHTS_M.iter().enumerate() {
        features.push(col(speed_id(h), "m/s", FeatureKind::Speed, h, &move |r| r.speeds[k]));
    }
    FeatureTable::new(ts, features)
}

/// Generates `cfg.hours` hourly forecast and realized rows.
pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticWeather, WeatherError> {
    if cfg.hours < 2 {
        return Err(WeatherError::TooFewRows { needed: 2, got: cfg.hours });
    }
    let mut rng = substream(cfg.seed, Stream::Synthetic, 0);
    let mut z = || -> f64 { rng.sample(StandardNormal) };
    let phi = cfg.persistence;
    let mut anomaly = z();
    let mut hub_dir: f64 = 240.0 + 30.0 * z();
    let mut forecast = Vec::with_capacity(cfg.hours);
    let mut actual = Vec::with_capacity(cfg.hours);
    for h in 0..cfg.hours {
        let ts = cfg.start + chrono::Duration::hours(h as i64);
        let hour = ts.hour() as f64;
        let diurnal = (2.0 * std::f64::consts::PI * (hour - 15.0) / 24.0).cos();
        anomaly = phi * anomaly + (1.0 - phi * phi).sqrt() * z();
        hub_dir = (hub_dir + 4.0 * z()).rem_euclid(360.0);
        let v = (cfg.mean_speed + cfg.speed_sd * anomaly + 0.8 * diurnal).max(0.3);
        let dv = v - cfg.mean_speed;
        let f = Row {
            pressure: 101_000.0 - 16.0 * dv + 40.0 * z(),
            humidity: (72.0 + 0.8 * dv - 6.0 * diurnal + 2.0 * z()).clamp(1.0, 99.0),
            temperature: 6.0 + 3.0 * diurnal - 0.05 * dv + 0.3 * z(),
            directions: PROFILE_HEIGHTS_M
                .iter()
                .map(|&ht| (hub_dir + cfg.veer_deg_per_100m * (ht - 100.0) / 100.0).rem_euclid(360.0))
                .collect(),
            speeds: PROFILE_HEIGHTS_M
                .iter()
                .map(|&ht| v * (ht / 100.0).powf(cfg.shear_exponent))
                .collect(),
        };
        let sd = cfg.error_sd_base + cfg.error_sd_slope * v;
        let v_a = (v + sd * z()).max(0.0);
        let e = v_a - v;
        let dir_err = 3.0 * z();
        let a = Row {
            pressure: f.pressure - 16.0 * e + 10.0 * z(),
            humidity: (f.humidity + 0.8 * e + 0.5 * z()).clamp(0.0, 100.0),
            temperature: f.temperature - 0.05 * e + 0.1 * z(),
            directions: f.directions.iter().map(|d| (d + dir_err).rem_euclid(360.0)).collect(),
            speeds: PROFILE_HEIGHTS_M
                .iter()
                .map(|&ht| v_a * (ht / 100.0).powf(cfg.shear_exponent))
                .collect(),
        };
        forecast.push(f);
        actual.push(a);
    }
    Ok(SyntheticWeather {
        forecast: table(cfg.start, &forecast)?,
        actual: table(cfg.start, &actual)?,
    })
}
