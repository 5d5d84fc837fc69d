use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::WeatherError;

/// Normalized histograms of `actual − forecast` per condition label, on shared edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistograms {
    pub edges: Vec<f64>,
    pub mass: BTreeMap<usize, Vec<f64>>,
    pub counts: BTreeMap<usize, usize>,
}

impl ErrorHistograms {
    pub fn bin_of(&self, x: f64) -> usize {
        bin_index(&self.edges, x)
    }
}

fn bin_index(edges: &[f64], x: f64) -> usize {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let i = ((x - lo) / (hi - lo) * bins as f64).floor();
    (i.max(0.0) as usize).min(bins - 1)
}

/// Labels are expected to be `0..=max`; a label in that range without
/// observations is an error.
pub fn conditional_error_histogram(
    forecast: &[f64],
    actual: &[f64],
    condition_labels: &[usize],
    bins: usize,
) -> Result<ErrorHistograms, WeatherError> {
    if bins < 2 {
        return Err(WeatherError::InvalidArgument("bins must be at least 2".into()));
    }
    if forecast.len() != actual.len() || forecast.len() != condition_labels.len() {
        return Err(WeatherError::InvalidArgument(
            "forecast, actual and labels must have equal lengths".into(),
        ));
    }
    let Some(&max_label) = condition_labels.iter().max() else {
        return Err(WeatherError::InvalidArgument("empty series".into()));
    };
    let errors: Vec<f64> = actual.iter().zip(forecast).map(|(a, f)| a - f).collect();
    let lo = errors.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = errors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi - lo > 0.0 { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let edges: Vec<f64> = (0..=bins)
        .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
        .collect();

    let mut raw: BTreeMap<usize, Vec<usize>> = (0..=max_label).map(|l| (l, vec![0; bins])).collect();
    for (&e, &l) in errors.iter().zip(condition_labels) {
        raw.get_mut(&l).expect("label in range")[bin_index(&edges, e)] += 1;
    }
    let mut mass = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for (l, c) in raw {
        let n: usize = c.iter().sum();
        if n == 0 {
            return Err(WeatherError::EmptyLabelGroup(l));
        }
        mass.insert(l, c.iter().map(|&x| x as f64 / n as f64).collect());
        counts.insert(l, n);
    }
    Ok(ErrorHistograms { edges, mass, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use rand::Rng;

    #[test]
    fn perfect_forecast_puts_all_mass_at_zero() {
        let f = vec![3.0, 5.0, 7.0, 9.0];
        let h = conditional_error_histogram(&f, &f, &[0, 1, 0, 1], 5).unwrap();
        let zero_bin = h.bin_of(0.0);
        for m in h.mass.values() {
            assert_eq!(m[zero_bin], 1.0);
        }
    }

    #[test]
    fn disjoint_error_signs_separate() {
        let f = vec![5.0; 6];
        let a = vec![6.0, 7.0, 6.5, 3.0, 4.0, 2.0];
        let labels = [0, 0, 0, 1, 1, 1];
        let h = conditional_error_histogram(&f, &a, &labels, 10).unwrap();
        let centers: Vec<f64> = h.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        for (b, &c) in centers.iter().enumerate() {
            if h.mass[&0][b] > 0.0 {
                assert!(c > 0.0);
            }
            if h.mass[&1][b] > 0.0 {
                assert!(c < 0.0);
            }
        }
    }

    #[test]
    fn uniform_errors_spread_evenly() {
        let n = 100_000;
        let bins = 20;
        let mut rng = substream(1, Stream::Synthetic, 0);
        let f = vec![0.0; n];
        let mut a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // pin the range so bins align with the uniform support
        a[0] = -1.0;
        a[1] = 1.0;
        let h = conditional_error_histogram(&f, &a, &vec![0; n], bins).unwrap();
        // counting oracle: multinomial per-bin sd = sqrt(p(1-p)/n)
        let p = 1.0 / bins as f64;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        for m in &h.mass[&0] {
            assert!((m - p).abs() < 3.0 * sd + 2.0 / n as f64, "{m}");
        }
        assert!((h.mass[&0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_label_group_is_an_error() {
        let f = vec![1.0, 2.0];
        let err = conditional_error_histogram(&f, &f, &[0, 2], 4).unwrap_err();
        assert!(matches!(err, WeatherError::EmptyLabelGroup(1)));
    }
}
