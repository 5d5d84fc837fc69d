use chrono::NaiveDateTime;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Quantity, ScenarioSet, StressorError, FORMAT_VERSION};
use crate::rng::{cell_index, open_unit, substream, Stream};
use crate::stats::{select_distribution, FitOptions, FittedDistribution};

/// Weather-ignorant error model: one error law per equal-width forecast-power bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkModel {
    pub version: u32,
    pub capacity_mw: f64,
    /// `None` for bins without history; sampling uses the nearest populated bin.
    pub fits: Vec<Option<FittedDistribution>>,
}

fn check_power(p: f64, capacity: f64) -> Result<(), StressorError> {
    if (0.0..=capacity).contains(&p) {
        Ok(())
    } else {
        Err(StressorError::PowerOutOfRange { value: p, capacity })
    }
}

impl BenchmarkModel {
    pub fn fit(
        history: &[(f64, f64)],
        n_bins: usize,
        capacity_mw: f64,
        opts: &FitOptions,
    ) -> Result<Self, StressorError> {
        if n_bins == 0 {
            return Err(StressorError::InvalidArgument("K must be at least 1".into()));
        }
        if !(capacity_mw > 0.0) {
            return Err(StressorError::InvalidArgument(format!("capacity {capacity_mw} MW")));
        }
        let mut errors = vec![Vec::new(); n_bins];
        for &(f, a) in history {
            check_power(f, capacity_mw)?;
            check_power(a, capacity_mw)?;
            errors[bin_of(f, n_bins, capacity_mw)].push(a - f);
        }
        if errors.iter().all(Vec::is_empty) {
            return Err(StressorError::InvalidArgument("empty power history".into()));
        }
        let fits = errors
            .iter()
            .map(|e| if e.is_empty() { Ok(None) } else { select_distribution(e, opts).map(Some) })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            version: FORMAT_VERSION,
            capacity_mw,
            fits,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.fits.len()
    }

    pub fn bin_of(&self, p: f64) -> usize {
        bin_of(p, self.n_bins(), self.capacity_mw)
    }

    /// Fit of `bin`, or of the nearest populated bin (lower bin on ties).
    pub fn law_for(&self, bin: usize) -> &FittedDistribution {
        (0..self.n_bins())
            .filter_map(|k| self.fits[k].as_ref().map(|f| (bin.abs_diff(k), k, f)))
            .min_by_key(|&(d, k, _)| (d, k))
            .map(|(_, _, f)| f)
            .expect("at least one populated bin")
    }

    /// N scenarios: forecast plus an error drawn from the forecast's bin, clamped to [0, capacity].
    pub fn sample(
        &self,
        forecast_power: &[f64],
        timestamps: &[NaiveDateTime],
        n: usize,
        seed: u64,
    ) -> Result<ScenarioSet, StressorError> {
        if forecast_power.len() != timestamps.len() {
            return Err(StressorError::Dimension("forecast and timestamps differ in length".into()));
        }
        if n == 0 {
            return Err(StressorError::InvalidArgument("N must be at least 1".into()));
        }
        for &p in forecast_power {
            check_power(p, self.capacity_mw)?;
        }
        let laws: Vec<&FittedDistribution> = forecast_power.iter().map(|&p| self.law_for(self.bin_of(p))).collect();
        let values = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..forecast_power.len())
                    .map(|t| {
                        let u = open_unit(&mut substream(seed, Stream::Benchmark, cell_index(i, t)));
                        (forecast_power[t] + laws[t].dist.inverse_cdf(u)).clamp(0.0, self.capacity_mw)
                    })
                    .collect()
            })
            .collect();
        ScenarioSet::new(
            Quantity::Power {
                capacity_mw: self.capacity_mw,
            },
            timestamps.to_vec(),
            forecast_power.to_vec(),
            values,
            seed,
        )
    }
}

fn bin_of(p: f64, k: usize, capacity: f64) -> usize {
    ((p / capacity * k as f64).floor().max(0.0) as usize).min(k - 1)
}

/// Weather-ignorant scenarios from a (forecast, actual) power history.
#[allow(clippy::too_many_arguments)]
pub fn benchmark_power_scenarios(
    power_history: &[(f64, f64)],
    n_bins: usize,
    capacity_mw: f64,
    forecast_power: &[f64],
    timestamps: &[NaiveDateTime],
    n: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<ScenarioSet, StressorError> {
    BenchmarkModel::fit(power_history, n_bins, capacity_mw, opts)?.sample(forecast_power, timestamps, n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Distribution;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand::Rng;

    fn stamps(n: usize) -> Vec<NaiveDateTime> {
        let start = NaiveDate::from_ymd_opt(2013, 2, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        (0..n).map(|h| start + chrono::Duration::hours(h as i64)).collect()
    }

    #[test]
    fn zero_error_history_reproduces_forecast() {
        let hist: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, i as f64)).collect();
        let f = vec![3.0, 50.0, 99.0];
        let s = benchmark_power_scenarios(&hist, 4, 100.0, &f, &stamps(3), 20, 1, &FitOptions::default()).unwrap();
        assert!(s.values.iter().all(|v| *v == f));
    }

    #[test]
    fn single_bin_normal_error_std() {
        let sigma = 4.0;
        let err = Distribution::Normal { mu: 0.0, sigma };
        let mut rng = substream(5, Stream::Synthetic, 0);
        let hist: Vec<(f64, f64)> = (0..20_000)
            .map(|_| (500.0, 500.0 + err.sample(&mut rng)))
            .collect();
        let n = 100_000;
        let s = benchmark_power_scenarios(&hist, 1, 1000.0, &[500.0], &stamps(1), n, 2, &FitOptions::default()).unwrap();
        let col = s.column(0);
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((sd - sigma).abs() < 0.05 * sigma, "sd {sd}");
    }

    #[test]
    fn forecast_outside_capacity_is_rejected() {
        let hist = vec![(10.0, 12.0); 40];
        let r = benchmark_power_scenarios(&hist, 2, 100.0, &[120.0], &stamps(1), 5, 0, &FitOptions::default());
        assert!(matches!(r, Err(StressorError::PowerOutOfRange { .. })));
    }

    #[test]
    fn empty_bins_borrow_the_nearest_law() {
        let hist = vec![(10.0, 12.0), (90.0, 80.0)];
        let m = BenchmarkModel::fit(&hist, 10, 100.0, &FitOptions::default()).unwrap();
        assert_eq!(m.law_for(3).dist.mean(), m.fits[1].as_ref().unwrap().dist.mean());
        assert_eq!(m.law_for(7).dist.mean(), m.fits[9].as_ref().unwrap().dist.mean());
    }

    proptest! {
        #[test]
        fn scenarios_respect_capacity(seed in 0u64..200, k in 1usize..6) {
            let mut rng = substream(seed, Stream::Synthetic, 0);
            let hist: Vec<(f64, f64)> = (0..300).map(|_| {
                let f: f64 = rng.gen_range(0.0..100.0);
                (f, (f + rng.gen_range(-40.0..40.0)).clamp(0.0, 100.0))
            }).collect();
            let f: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..=100.0)).collect();
            let s = benchmark_power_scenarios(&hist, k, 100.0, &f, &stamps(4), 50, seed, &FitOptions::default()).unwrap();
            prop_assert!(s.values.iter().flatten().all(|&v| (0.0..=100.0).contains(&v)));
        }
    }
}
