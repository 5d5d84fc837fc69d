//! Envelope coverage of weather-driven versus weather-ignorant scenarios on
//! synthetic weather whose forecast errors depend on the weather.

use serde::{Deserialize, Serialize};
use windflex_core::stats::FitOptions;
use windflex_core::stressor::{
    benchmark_power_scenarios, confidence_envelope, default_interval_edges, merge_empty_intervals,
    pca_feature_coupling, scenarios_to_power, stress_weather_scenarios, stressed_speed_scenarios, table_power,
    Placeholders, RecordLayout, ScenarioSet, TransitionModel,
};
use windflex_core::synthetic::{generate, SyntheticConfig, SyntheticWeather};
use windflex_core::weather::{speed_id, standardize};
use windflex_core::TurbineSpec;

use crate::error::{AtStage, Result, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSetup {
    /// Weather used to fit both models.
    pub train: SyntheticConfig,
    /// Held-out weather the envelopes are scored on.
    pub test: SyntheticConfig,
    pub turbine: TurbineSpec,
    pub capacity_mw: f64,
    pub scenarios: usize,
    pub ci: f64,
    /// Power bins of the weather-ignorant model.
    pub benchmark_bins: usize,
    pub seed: u64,
    /// Test periods handled per batch, bounding memory.
    pub batch: usize,
    pub fit: FitOptions,
}

impl Default for CoverageSetup {
    fn default() -> Self {
        let base = SyntheticConfig::default();
        Self {
            train: SyntheticConfig {
                hours: 2 * 8760,
                seed: 101,
                ..base.clone()
            },
            test: SyntheticConfig {
                hours: 10_000,
                seed: 202,
                ..base
            },
            turbine: TurbineSpec::default(),
            capacity_mw: 100.0,
            scenarios: 100,
            ci: 0.8,
            benchmark_bins: 10,
            seed: 7,
            batch: 500,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// Share of periods whose realized output lies inside the envelope.
    pub rate: f64,
    /// Mean envelope width, MW.
    pub mean_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub periods: usize,
    pub weather_driven: Coverage,
    pub benchmark: Coverage,
}

fn score(sets: &[ScenarioSet], realized: &[f64], ci: f64) -> Result<Coverage> {
    let mut hits = 0usize;
    let mut width = 0.0;
    let mut t0 = 0;
    for s in sets {
        for (t, (lo, hi)) in confidence_envelope(s, ci).at(Stage::Evaluate)?.into_iter().enumerate() {
            let r = realized[t0 + t];
            if r >= lo - 1e-9 && r <= hi + 1e-9 {
                hits += 1;
            }
            width += hi - lo;
        }
        t0 += s.n_periods();
    }
    Ok(Coverage {
        rate: hits as f64 / t0 as f64,
        mean_width: width / t0 as f64,
    })
}

pub fn compare_coverage(setup: &CoverageSetup) -> Result<CoverageResult> {
    let layout = RecordLayout::default();
    let cap = setup.capacity_mw;
    let train: SyntheticWeather = generate(&setup.train).at(Stage::Ingest)?;
    let test: SyntheticWeather = generate(&setup.test).at(Stage::Ingest)?;

    let pairs = train.hub_pairs();
    let edges = merge_empty_intervals(&pairs, &default_interval_edges(&setup.turbine)).at(Stage::Fit)?;
    let model = TransitionModel::build(&pairs, &edges, &setup.turbine, Placeholders::default(), &setup.fit)
        .at(Stage::Fit)?;
    let coupling = pca_feature_coupling(&standardize(&train.actual).at(Stage::Fit)?, &speed_id(100.0)).at(Stage::Fit)?;

    let p_train_f = table_power(&train.forecast, &setup.turbine, cap, &layout).at(Stage::Fit)?;
    let p_train_a = table_power(&train.actual, &setup.turbine, cap, &layout).at(Stage::Fit)?;
    let history: Vec<(f64, f64)> = p_train_f.into_iter().zip(p_train_a).collect();
    let realized = table_power(&test.actual, &setup.turbine, cap, &layout).at(Stage::Stress)?;

    let mut driven = Vec::new();
    let mut bench = Vec::new();
    for day in test.forecast.chunks(setup.batch.max(1)) {
        let hub = day.column(&speed_id(100.0)).at(Stage::Stress)?;
        let speeds = stressed_speed_scenarios(hub, day.timestamps(), setup.scenarios, &model, setup.seed, true)
            .at(Stage::Stress)?;
        let weather = stress_weather_scenarios(&day, &coupling, &speeds).at(Stage::Stress)?;
        let wd = scenarios_to_power(&weather, &setup.turbine, cap, &layout).at(Stage::Stress)?;
        let bm = benchmark_power_scenarios(
            &history,
            setup.benchmark_bins,
            cap,
            &wd.forecast,
            day.timestamps(),
            setup.scenarios,
            setup.seed,
            &setup.fit,
        )
        .at(Stage::Stress)?;
        driven.push(wd);
        bench.push(bm);
    }
    Ok(CoverageResult {
        periods: realized.len(),
        weather_driven: score(&driven, &realized, setup.ci)?,
        benchmark: score(&bench, &realized, setup.ci)?,
    })
}
