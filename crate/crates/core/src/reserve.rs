//! Upward and downward flexibility reserve requirements from forecasts and
//! scenario sets, and their aggregation to nodes, zones or the system.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stressor::ScenarioSet;
use crate::weather::format_timestamp;

#[derive(Debug, Error)]
pub enum ReserveError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("period {t}: forecast {forecast} MW outside [0, {rated}] MW")]
    ForecastOutOfRange { t: usize, forecast: f64, rated: f64 },
    #[error("farm `{0}` has no entity in the mapping")]
    Unmapped(String),
    #[error("schedules disagree on {0}")]
    Mismatch(&'static str),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Downward-side weighting inside the risk-based rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskVariant {
    /// `devi⁻ = s_N − s_{N−i}`, `risk⁻ = devi⁻·((N−i)−1)/N`.
    #[default]
    Printed,
    /// Exact mirror of the upward side: `devi⁻ = s_N − s_{N−i+1}`, `risk⁻ = devi⁻·(i−1)/N`.
    Mirrored,
}

/// Sizing rule with its level parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ReserveMethod {
    Extent { epsilon: f64 },
    Probability { ci: f64 },
    Risk { rho_mw: f64, variant: RiskVariant },
}

impl ReserveMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ReserveMethod::Extent { .. } => "extent",
            ReserveMethod::Probability { .. } => "probability",
            ReserveMethod::Risk { .. } => "risk",
        }
    }

    pub fn level(&self) -> f64 {
        match *self {
            ReserveMethod::Extent { epsilon } => epsilon,
            ReserveMethod::Probability { ci } => ci,
            ReserveMethod::Risk { rho_mw, .. } => rho_mw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Extent,
    Probability,
    Risk,
}

impl MethodKind {
    pub const ALL: [MethodKind; 3] = [MethodKind::Extent, MethodKind::Probability, MethodKind::Risk];
}

/// Expected-shortfall cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RiskLevel {
    Mw { rho_mw: f64 },
    FractionOfRated { rho_fraction: f64 },
}

impl RiskLevel {
    pub fn to_mw(self, rated_mw: f64) -> Result<f64, ReserveError> {
        let rho = match self {
            RiskLevel::Mw { rho_mw } => rho_mw,
            RiskLevel::FractionOfRated { rho_fraction } => rho_fraction * rated_mw,
        };
        if !(rho >= 0.0) {
            return Err(ReserveError::InvalidArgument(format!("risk cap {rho} MW")));
        }
        Ok(rho)
    }
}

/// Five-level presets: ε 5–25 %, CI 20/40/60/80/99.9 %, ρ 0.1–0.5 of rated power.
pub fn level_preset(kind: MethodKind, level: usize, rated_mw: f64) -> Result<ReserveMethod, ReserveError> {
    if !(1..=5).contains(&level) {
        return Err(ReserveError::InvalidArgument(format!("level {level} not in 1..=5")));
    }
    let k = level - 1;
    Ok(match kind {
        MethodKind::Extent => ReserveMethod::Extent {
            epsilon: [0.05, 0.10, 0.15, 0.20, 0.25][k],
        },
        MethodKind::Probability => ReserveMethod::Probability {
            ci: [0.20, 0.40, 0.60, 0.80, 0.999][k],
        },
        MethodKind::Risk => ReserveMethod::Risk {
            rho_mw: [0.1, 0.2, 0.3, 0.4, 0.5][k] * rated_mw,
            variant: RiskVariant::Printed,
        },
    })
}

/// Per-period upward and downward requirements of one entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReserveSchedule {
    pub entity: String,
    pub timestamps: Vec<NaiveDateTime>,
    pub up_mw: Vec<f64>,
    pub down_mw: Vec<f64>,
    pub method: ReserveMethod,
}

impl ReserveSchedule {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Long table `entity,timestamp,R_up,R_down,method,level`.
    pub fn write_csv<W: Write>(schedules: &[ReserveSchedule], writer: W) -> Result<(), ReserveError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["entity", "timestamp", "R_up", "R_down", "method", "level"])?;
        for s in schedules {
            for t in 0..s.len() {
                w.write_record([
                    s.entity.clone(),
                    format_timestamp(&s.timestamps[t]),
                    s.up_mw[t].to_string(),
                    s.down_mw[t].to_string(),
                    s.method.name().to_string(),
                    s.method.level().to_string(),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn check_forecast(forecast: &[f64], rated: f64) -> Result<(), ReserveError> {
    for (t, &f) in forecast.iter().enumerate() {
        if !(0.0..=rated).contains(&f) {
            return Err(ReserveError::ForecastOutOfRange { t, forecast: f, rated });
        }
    }
    Ok(())
}

/// `R⁺ = ε·P^F`, `R⁻ = min(P^R − P^F, ε·P^F)`.
pub fn extent_reserve(
    entity: &str,
    timestamps: &[NaiveDateTime],
    forecast: &[f64],
    rated_mw: f64,
    epsilon: f64,
) -> Result<ReserveSchedule, ReserveError> {
    if !(epsilon >= 0.0) {
        return Err(ReserveError::InvalidArgument(format!("epsilon {epsilon}")));
    }
    if timestamps.len() != forecast.len() {
        return Err(ReserveError::Mismatch("length"));
    }
    check_forecast(forecast, rated_mw)?;
    Ok(ReserveSchedule {
        entity: entity.to_string(),
        timestamps: timestamps.to_vec(),
        up_mw: forecast.iter().map(|f| epsilon * f).collect(),
        down_mw: forecast.iter().map(|f| (rated_mw - f).min(epsilon * f)).collect(),
        method: ReserveMethod::Extent { epsilon },
    })
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

/// 1-based (lower, upper) sorted-scenario indices for confidence level `ci`.
pub fn probability_indices(n: usize, ci: f64) -> (usize, usize) {
    let lower = round_half_up(0.5 * n as f64 * (1.0 - ci)).max(1);
    let upper = round_half_up(0.5 * n as f64 * (1.0 + ci)).min(n);
    (lower, upper)
}

fn sorted_columns(scenarios: &ScenarioSet) -> Vec<Vec<f64>> {
    (0..scenarios.n_periods())
        .map(|t| {
            let mut c = scenarios.column(t);
            c.sort_by(f64::total_cmp);
            c
        })
        .collect()
}

fn check_scenarios(scenarios: &ScenarioSet, forecast: &[f64]) -> Result<(), ReserveError> {
    if scenarios.n_scenarios() < 2 {
        return Err(ReserveError::InvalidArgument("need at least 2 scenarios".into()));
    }
    if forecast.len() != scenarios.n_periods() {
        return Err(ReserveError::Mismatch("length"));
    }
    Ok(())
}

/// Quantile band of the sorted scenarios around the forecast.
pub fn probability_reserve(
    entity: &str,
    scenarios: &ScenarioSet,
    forecast: &[f64],
    ci: f64,
) -> Result<ReserveSchedule, ReserveError> {
    if !(0.0..=1.0).contains(&ci) {
        return Err(ReserveError::InvalidArgument(format!("ci {ci} not in [0, 1]")));
    }
    check_scenarios(scenarios, forecast)?;
    let (lo, hi) = probability_indices(scenarios.n_scenarios(), ci);
    let cols = sorted_columns(scenarios);
    Ok(ReserveSchedule {
        entity: entity.to_string(),
        timestamps: scenarios.timestamps.clone(),
        up_mw: cols.iter().zip(forecast).map(|(c, f)| (f - c[lo - 1]).max(0.0)).collect(),
        down_mw: cols.iter().zip(forecast).map(|(c, f)| (c[hi - 1] - f).max(0.0)).collect(),
        method: ReserveMethod::Probability { ci },
    })
}

/// Risk-based sizing of one period on ascending scenarios `s`.
///
/// Walks i = 1..N, keeping the last i whose risk is within `rho` on each side,
/// and stops once both sides exceed it. A side with no admissible i keeps the
/// full envelope.
pub fn risk_reserve_period(s: &[f64], forecast: f64, rho: f64, variant: RiskVariant) -> (f64, f64) {
    let n = s.len();
    let nf = n as f64;
    let at = |i: usize| s[i - 1];
    let mut up = (forecast - at(1)).max(0.0);
    let mut down = (at(n) - forecast).max(0.0);
    for i in 1..=n {
        let devi_up = at(i) - at(1);
        let up_ok = devi_up * (i - 1) as f64 / nf <= rho;
        if up_ok {
            up = (forecast - at(i)).max(0.0);
        }
        let down_ok = match variant {
            RiskVariant::Printed if i < n => {
                let devi_down = at(n) - at(n - i);
                let ok = devi_down * ((n - i) as f64 - 1.0) / nf <= rho;
                if ok {
                    down = (at(n - i) - forecast).max(0.0);
                }
                ok
            }
            RiskVariant::Printed => false,
            RiskVariant::Mirrored => {
                let devi_down = at(n) - at(n - i + 1);
                let ok = devi_down * (i - 1) as f64 / nf <= rho;
                if ok {
                    down = (at(n - i + 1) - forecast).max(0.0);
                }
                ok
            }
        };
        if !up_ok && !down_ok {
            break;
        }
    }
    (up, down)
}

pub fn risk_reserve(
    entity: &str,
    scenarios: &ScenarioSet,
    forecast: &[f64],
    rho_mw: f64,
    variant: RiskVariant,
) -> Result<ReserveSchedule, ReserveError> {
    if !(rho_mw >= 0.0) {
        return Err(ReserveError::InvalidArgument(format!("risk cap {rho_mw} MW")));
    }
    check_scenarios(scenarios, forecast)?;
    let (up_mw, down_mw) = sorted_columns(scenarios)
        .iter()
        .zip(forecast)
        .map(|(c, &f)| risk_reserve_period(c, f, rho_mw, variant))
        .unzip();
    Ok(ReserveSchedule {
        entity: entity.to_string(),
        timestamps: scenarios.timestamps.clone(),
        up_mw,
        down_mw,
        method: ReserveMethod::Risk { rho_mw, variant },
    })
}

/// Dispatches on `method`; extent sizing uses the scenario set's forecast only.
pub fn size_reserve(
    entity: &str,
    scenarios: &ScenarioSet,
    rated_mw: f64,
    method: ReserveMethod,
) -> Result<ReserveSchedule, ReserveError> {
    let f = &scenarios.forecast;
    match method {
        ReserveMethod::Extent { epsilon } => extent_reserve(entity, &scenarios.timestamps, f, rated_mw, epsilon),
        ReserveMethod::Probability { ci } => probability_reserve(entity, scenarios, f, ci),
        ReserveMethod::Risk { rho_mw, variant } => risk_reserve(entity, scenarios, f, rho_mw, variant),
    }
}

/// Sums member schedules per mapped entity; output is ordered by entity id.
pub fn aggregate_reserve(
    schedules: &[ReserveSchedule],
    mapping: &BTreeMap<String, String>,
) -> Result<Vec<ReserveSchedule>, ReserveError> {
    let Some(first) = schedules.first() else {
        return Ok(Vec::new());
    };
    let mut out: BTreeMap<String, ReserveSchedule> = BTreeMap::new();
    for s in schedules {
        if s.timestamps != first.timestamps {
            return Err(ReserveError::Mismatch("timestamps"));
        }
        if s.method != first.method {
            return Err(ReserveError::Mismatch("sizing method"));
        }
        let entity = mapping.get(&s.entity).ok_or_else(|| ReserveError::Unmapped(s.entity.clone()))?;
        let agg = out.entry(entity.clone()).or_insert_with(|| ReserveSchedule {
            entity: entity.clone(),
            timestamps: s.timestamps.clone(),
            up_mw: vec![0.0; s.len()],
            down_mw: vec![0.0; s.len()],
            method: s.method,
        });
        for t in 0..s.len() {
            agg.up_mw[t] += s.up_mw[t];
            agg.down_mw[t] += s.down_mw[t];
        }
    }
    Ok(out.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use crate::stressor::Quantity;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand::Rng;

    fn stamps(n: usize) -> Vec<NaiveDateTime> {
        let start = NaiveDate::from_ymd_opt(2013, 2, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        (0..n).map(|h| start + chrono::Duration::hours(h as i64)).collect()
    }

    fn set(forecast: Vec<f64>, values: Vec<Vec<f64>>) -> ScenarioSet {
        let t = forecast.len();
        ScenarioSet::new(Quantity::Power { capacity_mw: 100.0 }, stamps(t), forecast, values, 0).unwrap()
    }

    fn random_set(seed: u64, n: usize, t: usize) -> ScenarioSet {
        let mut rng = substream(seed, Stream::Synthetic, 0);
        let f: Vec<f64> = (0..t).map(|_| rng.gen_range(0.0..100.0)).collect();
        let v = (0..n)
            .map(|_| f.iter().map(|x| (x + rng.gen_range(-25.0..25.0)).clamp(0.0, 100.0)).collect())
            .collect();
        set(f, v)
    }

    #[test]
    fn extent_examples() {
        let s = extent_reserve("f", &stamps(3), &[0.0, 1260.0, 100.0], 1260.0, 0.15).unwrap();
        assert_eq!((s.up_mw[0], s.down_mw[0]), (0.0, 0.0));
        assert_eq!(s.up_mw[1], 0.15 * 1260.0);
        assert_eq!(s.down_mw[1], 0.0);
        assert!((s.up_mw[2] - 15.0).abs() < 1e-12 && (s.down_mw[2] - 15.0).abs() < 1e-12);
    }

    #[test]
    fn probability_index_arithmetic() {
        assert_eq!(probability_indices(1000, 0.8), (100, 900));
        assert_eq!(probability_indices(1000, 1.0), (1, 1000));
        assert_eq!(probability_indices(5, 0.0), (3, 3));
    }

    #[test]
    fn full_confidence_is_the_envelope() {
        let s = random_set(1, 30, 4);
        let r = probability_reserve("f", &s, &s.forecast, 1.0).unwrap();
        for t in 0..4 {
            let c = s.column(t);
            let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(r.up_mw[t], (s.forecast[t] - lo).max(0.0));
            assert_eq!(r.down_mw[t], (hi - s.forecast[t]).max(0.0));
        }
    }

    #[test]
    fn zero_confidence_on_symmetric_set_is_median_distance() {
        let s = set(vec![50.0], vec![vec![40.0], vec![45.0], vec![50.0], vec![55.0], vec![60.0]]);
        let r = probability_reserve("f", &s, &s.forecast, 0.0).unwrap();
        assert_eq!((r.up_mw[0], r.down_mw[0]), (0.0, 0.0));
    }

    #[test]
    fn risk_trace_on_five_scenarios() {
        // i=1: risk⁺ 0 → R⁺ 40; risk⁻ 10·3/5 = 6 > 4
        // i=2: risk⁺ 10·1/5 = 2 → R⁺ 30; risk⁻ 20·2/5 = 8 > 4
        // i=3: risk⁺ 20·2/5 = 8 > 4; risk⁻ 30·1/5 = 6 > 4 → stop
        let (up, down) = risk_reserve_period(&[0.0, 10.0, 20.0, 30.0, 40.0], 40.0, 4.0, RiskVariant::Printed);
        assert_eq!((up, down), (30.0, 0.0));
    }

    #[test]
    fn degenerate_scenarios_need_no_reserve() {
        let s = set(vec![30.0, 70.0], vec![vec![30.0, 70.0]; 10]);
        for v in [RiskVariant::Printed, RiskVariant::Mirrored] {
            let r = risk_reserve("f", &s, &s.forecast, 5.0, v).unwrap();
            assert!(r.up_mw.iter().chain(&r.down_mw).all(|&x| x == 0.0));
        }
    }

    #[test]
    fn zero_risk_keeps_envelope_for_distinct_scenarios() {
        let s = random_set(4, 20, 3);
        let r = risk_reserve("f", &s, &s.forecast, 0.0, RiskVariant::Mirrored).unwrap();
        let p = probability_reserve("f", &s, &s.forecast, 1.0).unwrap();
        assert_eq!(r.up_mw, p.up_mw);
        assert_eq!(r.down_mw, p.down_mw);
    }

    #[test]
    fn aggregation_sums_members() {
        let s = random_set(2, 10, 3);
        let a = probability_reserve("a", &s, &s.forecast, 0.8).unwrap();
        let b = ReserveSchedule { entity: "b".into(), ..a.clone() };
        let map: BTreeMap<String, String> = [("a".into(), "z1".into()), ("b".into(), "z1".into())].into();
        let z = aggregate_reserve(&[a.clone(), b], &map).unwrap();
        assert_eq!(z.len(), 1);
        for t in 0..3 {
            assert_eq!(z[0].up_mw[t], 2.0 * a.up_mw[t]);
        }
        let single: BTreeMap<String, String> = [("a".into(), "z9".into())].into();
        assert_eq!(aggregate_reserve(&[a.clone()], &single).unwrap()[0].up_mw, a.up_mw);
        assert!(matches!(aggregate_reserve(&[a], &BTreeMap::new()), Err(ReserveError::Unmapped(_))));
    }

    #[test]
    fn presets_follow_the_level_table() {
        assert_eq!(level_preset(MethodKind::Probability, 5, 100.0).unwrap(), ReserveMethod::Probability { ci: 0.999 });
        assert_eq!(level_preset(MethodKind::Extent, 3, 100.0).unwrap(), ReserveMethod::Extent { epsilon: 0.15 });
        assert!(level_preset(MethodKind::Risk, 6, 100.0).is_err());
        assert_eq!(RiskLevel::FractionOfRated { rho_fraction: 0.3 }.to_mw(200.0).unwrap(), 60.0);
    }

    proptest! {
        #[test]
        fn levels_order_requirements(seed in 0u64..500, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let s = random_set(seed, 25, 4);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let f = &s.forecast;
            let e1 = extent_reserve("f", &s.timestamps, f, 100.0, lo).unwrap();
            let e2 = extent_reserve("f", &s.timestamps, f, 100.0, hi).unwrap();
            let p1 = probability_reserve("f", &s, f, lo).unwrap();
            let p2 = probability_reserve("f", &s, f, hi).unwrap();
            let r1 = risk_reserve("f", &s, f, 20.0 * lo, RiskVariant::Printed).unwrap();
            let r2 = risk_reserve("f", &s, f, 20.0 * hi, RiskVariant::Printed).unwrap();
            let full = probability_reserve("f", &s, f, 1.0).unwrap();
            for t in 0..4 {
                prop_assert!(e1.up_mw[t] <= e2.up_mw[t] && e1.down_mw[t] <= e2.down_mw[t]);
                prop_assert!(p1.up_mw[t] <= p2.up_mw[t] && p1.down_mw[t] <= p2.down_mw[t]);
                prop_assert!(r1.up_mw[t] >= r2.up_mw[t] && r1.down_mw[t] >= r2.down_mw[t]);
                prop_assert!(full.up_mw[t] >= r2.up_mw[t] && full.down_mw[t] >= r2.down_mw[t]);
                for x in [e1.up_mw[t], e1.down_mw[t], p1.up_mw[t], p1.down_mw[t], r1.up_mw[t], r1.down_mw[t]] {
                    prop_assert!(x >= 0.0);
                }
                prop_assert!(e1.down_mw[t] <= 100.0 - f[t] && e1.up_mw[t] <= f[t]);
            }
        }
    }
}
