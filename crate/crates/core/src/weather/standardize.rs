use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureTable, WeatherError};

/// Sine encoding of a compass direction in degrees; removes the 359°/0° jump.
pub fn encode_direction(degrees: f64) -> f64 {
    degrees.to_radians().sin()
}

/// Column-standardized feature matrix (h rows × p columns).
///
/// Direction columns are sine-encoded before centering; `sine_encoded` records
/// which columns were. De-standardization returns the encoded values, which are
/// the canonical representation of directions from here on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedTable {
    pub feature_ids: Vec<String>,
    pub kinds: Vec<FeatureKind>,
    pub values: DMatrix<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub sine_encoded: Vec<bool>,
}

impl StandardizedTable {
    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.feature_ids.iter().position(|f| f == id)
    }

    /// Inverse of the centering/scaling step, column by column (encoded units).
    pub fn destandardize(&self) -> Vec<Vec<f64>> {
        (0..self.cols())
            .map(|j| {
                self.values
                    .column(j)
                    .iter()
                    .map(|z| z * self.stds[j] + self.means[j])
                    .collect()
            })
            .collect()
    }
}

/// Sine-encodes direction columns, then centers each column and scales it to unit
/// sample standard deviation (n − 1 denominator).
pub fn standardize(table: &FeatureTable) -> Result<StandardizedTable, WeatherError> {
    let h = table.len();
    if h < 2 {
        return Err(WeatherError::TooFewRows { needed: 2, got: h });
    }
    let p = table.features().len();
    let mut values = DMatrix::zeros(h, p);
    let mut means = Vec::with_capacity(p);
    let mut stds = Vec::with_capacity(p);
    let mut sine_encoded = Vec::with_capacity(p);
    for (j, f) in table.features().iter().enumerate() {
        let encode = f.kind == FeatureKind::Direction;
        let col: Vec<f64> = if encode {
            f.values.iter().map(|&d| encode_direction(d)).collect()
        } else {
            f.values.clone()
        };
        let mean = col.iter().sum::<f64>() / h as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (h - 1) as f64;
        let std = var.sqrt();
        if !(std > 1e-12 * mean.abs().max(1.0)) {
            return Err(WeatherError::ZeroVariance(f.id.clone()));
        }
        for (i, x) in col.iter().enumerate() {
            values[(i, j)] = (x - mean) / std;
        }
        means.push(mean);
        stds.push(std);
        sine_encoded.push(encode);
    }
    Ok(StandardizedTable {
        feature_ids: table.features().iter().map(|f| f.id.clone()).collect(),
        kinds: table.features().iter().map(|f| f.kind).collect(),
        values,
        means,
        stds,
        sine_encoded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weather::Feature;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn stamps(n: usize) -> Vec<chrono::NaiveDateTime> {
        let start = NaiveDate::from_ymd_opt(2013, 1, 30).unwrap().and_hms_opt(0, 0, 0).unwrap();
        (0..n).map(|i| start + chrono::Duration::hours(i as i64)).collect()
    }

    fn feature(id: &str, kind: FeatureKind, values: Vec<f64>) -> Feature {
        Feature {
            id: id.into(),
            unit: String::new(),
            kind,
            height_m: None,
            values,
        }
    }

    #[test]
    fn constant_column_is_rejected() {
        let t = FeatureTable::new(
            stamps(4),
            vec![feature("windspeed_100m", FeatureKind::Speed, vec![7.0; 4])],
        )
        .unwrap();
        assert!(matches!(standardize(&t), Err(WeatherError::ZeroVariance(id)) if id == "windspeed_100m"));
    }

    #[test]
    fn cardinal_directions_encode_to_sine() {
        let enc: Vec<f64> = [0.0, 90.0, 180.0, 270.0].iter().map(|&d| encode_direction(d)).collect();
        for (got, want) in enc.iter().zip([0.0, 1.0, 0.0, -1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let t = FeatureTable::new(
            stamps(4),
            vec![feature("d", FeatureKind::Direction, vec![0.0, 90.0, 180.0, 270.0])],
        )
        .unwrap();
        let s = standardize(&t).unwrap();
        assert!(s.sine_encoded[0]);
        assert!(s.means[0].abs() < 1e-12);
        let back = s.destandardize();
        for (got, want) in back[0].iter().zip([0.0, 1.0, 0.0, -1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn columns_have_zero_mean_unit_std_and_round_trip(
            rows in prop::collection::vec((0.0f64..30.0, 0.0f64..360.0, 90_000.0f64..105_000.0), 3..40)
        ) {
            let n = rows.len();
            let speed: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let dir: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let pres: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let t = FeatureTable::new(stamps(n), vec![
                feature("s", FeatureKind::Speed, speed.clone()),
                feature("d", FeatureKind::Direction, dir.clone()),
                feature("p", FeatureKind::Pressure, pres.clone()),
            ]).unwrap();
            let s = match standardize(&t) { Ok(s) => s, Err(_) => return Ok(()) };
            for j in 0..3 {
                let col = s.values.column(j);
                let mean = col.iter().sum::<f64>() / n as f64;
                let sd = (col.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((sd - 1.0).abs() < 1e-9);
            }
            let back = s.destandardize();
            for i in 0..n {
                prop_assert!((back[0][i] - speed[i]).abs() < 1e-9);
                prop_assert!((back[1][i] - encode_direction(dir[i])).abs() < 1e-9);
                prop_assert!((back[2][i] - pres[i]).abs() < 1e-9 * 1e5);
            }
        }
    }
}
