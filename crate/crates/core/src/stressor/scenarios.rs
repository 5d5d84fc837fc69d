use std::io::Write;

use chrono::NaiveDateTime;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CouplingCoefficients, Quantity, ScenarioSet, StressorError};
use crate::turbine::{farm_power, ProfileLevel, TurbineSpec, WeatherRecord, WindProfile};
use crate::weather::{direction_id, format_timestamp, speed_id, FeatureKind, FeatureTable, PROFILE_HEIGHTS_M};

/// N full weather trajectories over T periods. Directions are in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherScenarioSet {
    pub timestamps: Vec<NaiveDateTime>,
    pub feature_ids: Vec<String>,
    pub kinds: Vec<FeatureKind>,
    /// `forecast[t][j]`.
    pub forecast: Vec<Vec<f64>>,
    /// `values[i][t][j]`.
    pub values: Vec<Vec<Vec<f64>>>,
    pub seed: u64,
}

impl WeatherScenarioSet {
    pub fn n_scenarios(&self) -> usize {
        self.values.len()
    }

    pub fn n_periods(&self) -> usize {
        self.timestamps.len()
    }

    pub fn feature_index(&self, id: &str) -> Option<usize> {
        self.feature_ids.iter().position(|f| f == id)
    }

    /// Wide table `scenario,timestamp,<features...>`; the forecast uses scenario id `forecast`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), StressorError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["scenario".to_string(), "timestamp".to_string()];
        header.extend(self.feature_ids.iter().cloned());
        w.write_record(&header)?;
        let mut emit = |id: String, t: usize, row: &[f64]| -> Result<(), csv::Error> {
            let mut rec = vec![id, format_timestamp(&self.timestamps[t])];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)
        };
        for (t, row) in self.forecast.iter().enumerate() {
            emit("forecast".into(), t, row)?;
        }
        for (i, scen) in self.values.iter().enumerate() {
            for (t, row) in scen.iter().enumerate() {
                emit(i.to_string(), t, row)?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn stress_cell(kind: FeatureKind, forecast: f64, shift: f64) -> f64 {
    if shift == 0.0 {
        return forecast;
    }
    match kind {
        FeatureKind::Direction => {
            // the coefficient acts on the sine; recover the angle on the forecast's branch
            let rad = forecast.to_radians();
            let s = (rad.sin() + shift).clamp(-1.0, 1.0);
            let a = s.asin().to_degrees();
            if rad.cos() >= 0.0 {
                a.rem_euclid(360.0)
            } else {
                180.0 - a
            }
        }
        FeatureKind::Humidity => (forecast + shift).clamp(0.0, 100.0),
        FeatureKind::Speed => (forecast + shift).max(0.0),
        FeatureKind::Pressure => (forecast + shift).max(f64::MIN_POSITIVE),
        FeatureKind::Temperature | FeatureKind::Other => forecast + shift,
    }
}

/// Perturbs every forecast feature by `coeff_j × (stressed key speed − forecast key speed)`.
/// The key stressor itself takes the stressed speed.
pub fn stress_weather_scenarios(
    forecast_day: &FeatureTable,
    coeffs: &CouplingCoefficients,
    stressed_speeds: &ScenarioSet,
) -> Result<WeatherScenarioSet, StressorError> {
    if stressed_speeds.timestamps != forecast_day.timestamps() {
        return Err(StressorError::Dimension(
            "stressed speeds are not aligned with the forecast timestamps".into(),
        ));
    }
    let key = forecast_day
        .index_of(&coeffs.key_stressor)
        .ok_or_else(|| StressorError::UnknownKeyStressor(coeffs.key_stressor.clone()))?;
    let features = forecast_day.features();
    let slopes: Vec<f64> = features
        .iter()
        .map(|f| {
            coeffs
                .get(&f.id)
                .ok_or_else(|| StressorError::Dimension(format!("no coupling coefficient for `{}`", f.id)))
        })
        .collect::<Result<_, _>>()?;
    let kinds: Vec<FeatureKind> = features.iter().map(|f| f.kind).collect();
    let t_len = forecast_day.len();
    let forecast: Vec<Vec<f64>> = (0..t_len).map(|t| forecast_day.row(t)).collect();

    let values = stressed_speeds
        .values
        .par_iter()
        .map(|speeds| {
            (0..t_len)
                .map(|t| {
                    let delta = speeds[t] - forecast[t][key];
                    (0..features.len())
                        .map(|j| {
                            if j == key {
                                speeds[t]
                            } else {
                                stress_cell(kinds[j], forecast[t][j], slopes[j] * delta)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    Ok(WeatherScenarioSet {
        timestamps: forecast_day.timestamps().to_vec(),
        feature_ids: features.iter().map(|f| f.id.clone()).collect(),
        kinds,
        forecast,
        values,
        seed: stressed_speeds.seed,
    })
}

/// Which features feed the turbine model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLayout {
    pub pressure: String,
    pub humidity: String,
    pub temperature: String,
    /// (height m, speed feature, direction feature), ascending height.
    pub levels: Vec<(f64, String, String)>,
}

impl Default for RecordLayout {
    fn default() -> Self {
        Self {
            pressure: "pressure_100m".into(),
            humidity: "relativehumidity_2m".into(),
            temperature: "temperature_100m".into(),
            levels: PROFILE_HEIGHTS_M
                .iter()
                .map(|&h| (h, speed_id(h), direction_id(h)))
                .collect(),
        }
    }
}

struct ResolvedLayout {
    pressure: usize,
    humidity: usize,
    temperature: usize,
    levels: Vec<(f64, usize, usize)>,
}

impl RecordLayout {
    fn resolve(&self, ids: &[String]) -> Result<ResolvedLayout, StressorError> {
        let find = |id: &str| {
            ids.iter()
                .position(|f| f == id)
                .ok_or_else(|| StressorError::Dimension(format!("turbine input `{id}` missing from the scenarios")))
        };
        Ok(ResolvedLayout {
            pressure: find(&self.pressure)?,
            humidity: find(&self.humidity)?,
            temperature: find(&self.temperature)?,
            levels: self
                .levels
                .iter()
                .map(|(h, s, d)| Ok((*h, find(s)?, find(d)?)))
                .collect::<Result<_, StressorError>>()?,
        })
    }
}

impl ResolvedLayout {
    fn record(&self, row: &[f64], spec: &TurbineSpec) -> Result<WeatherRecord, StressorError> {
        let levels = self
            .levels
            .iter()
            .map(|&(h, s, d)| ProfileLevel {
                height_m: h,
                speed_mps: row[s],
                direction_deg: row[d],
            })
            .collect();
        Ok(WeatherRecord {
            pressure_pa: row[self.pressure],
            humidity_pct: row[self.humidity],
            temperature_c: row[self.temperature],
            profile: WindProfile::new(levels, spec.hub_height_m)?,
        })
    }
}

/// Farm output for every scenario cell and for the forecast.
pub fn scenarios_to_power(
    weather: &WeatherScenarioSet,
    spec: &TurbineSpec,
    farm_capacity_mw: f64,
    layout: &RecordLayout,
) -> Result<ScenarioSet, StressorError> {
    spec.validate()?;
    if !(farm_capacity_mw > 0.0) {
        return Err(StressorError::InvalidArgument(format!("farm capacity {farm_capacity_mw} MW")));
    }
    let resolved = layout.resolve(&weather.feature_ids)?;
    let power = |row: &Vec<f64>| -> Result<f64, StressorError> {
        Ok(farm_power(&resolved.record(row, spec)?, spec, farm_capacity_mw)?)
    };
    let forecast = weather.forecast.iter().map(power).collect::<Result<Vec<_>, _>>()?;
    let values = weather
        .values
        .par_iter()
        .map(|scen| scen.iter().map(power).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    ScenarioSet::new(
        Quantity::Power {
            capacity_mw: farm_capacity_mw,
        },
        weather.timestamps.clone(),
        forecast,
        values,
        weather.seed,
    )
}

/// Farm output for every row of a weather table (forecast or realized).
pub fn table_power(
    table: &FeatureTable,
    spec: &TurbineSpec,
    farm_capacity_mw: f64,
    layout: &RecordLayout,
) -> Result<Vec<f64>, StressorError> {
    let ids: Vec<String> = table.features().iter().map(|f| f.id.clone()).collect();
    let resolved = layout.resolve(&ids)?;
    (0..table.len())
        .map(|t| Ok(farm_power(&resolved.record(&table.row(t), spec)?, spec, farm_capacity_mw)?))
        .collect()
}

/// Per-period (lower, upper) after dropping the `round((1 − ci)·N)` scenarios with
/// the largest absolute error (ties dropped in index order).
pub fn confidence_envelope(set: &ScenarioSet, ci: f64) -> Result<Vec<(f64, f64)>, StressorError> {
    if !(ci > 0.0 && ci <= 1.0) {
        return Err(StressorError::InvalidArgument(format!("confidence level {ci} not in (0, 1]")));
    }
    let n = set.n_scenarios();
    let drop = (((1.0 - ci) * n as f64).round() as usize).min(n - 1);
    Ok((0..set.n_periods())
        .map(|t| {
            let f = set.forecast[t];
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| {
                let ea = (set.values[a][t] - f).abs();
                let eb = (set.values[b][t] - f).abs();
                eb.total_cmp(&ea).then(a.cmp(&b))
            });
            idx[drop..].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = set.values[i][t];
                (lo.min(v), hi.max(v))
            })
        })
        .collect())
}
