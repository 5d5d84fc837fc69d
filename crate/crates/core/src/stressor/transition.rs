use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Quantity, ScenarioSet, StressorError, FORMAT_VERSION};
use crate::rng::{cell_index, open_unit, substream, Stream};
use crate::stats::{select_distribution, FitOptions, FittedDistribution};
use crate::turbine::{classify_region, Region, TurbineSpec};
use chrono::NaiveDateTime;

/// Representative stressed speeds for samples allocated to Regions I, III and IV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placeholders {
    pub region_i: f64,
    pub region_iii: f64,
    pub region_iv: f64,
}

impl Default for Placeholders {
    fn default() -> Self {
        Self {
            region_i: 1.0,
            region_iii: 20.0,
            region_iv: 30.0,
        }
    }
}

impl Placeholders {
    pub fn validate(&self, spec: &TurbineSpec) -> Result<(), StressorError> {
        for (region, want, speed) in [
            ("I", Region::I, self.region_i),
            ("III", Region::III, self.region_iii),
            ("IV", Region::IV, self.region_iv),
        ] {
            if !(speed >= 0.0) || classify_region(speed, spec) != want {
                return Err(StressorError::BadPlaceholder { region, speed });
            }
        }
        Ok(())
    }

    fn get(&self, r: Region) -> f64 {
        match r {
            Region::I => self.region_i,
            Region::III => self.region_iii,
            Region::IV => self.region_iv,
            Region::II => unreachable!("Region II is sampled"),
        }
    }
}

/// Breakpoints 0, 2, 4, ... below the cut-out, then the cut-out itself.
/// The last interval, starting at the cut-out, is open-ended.
pub fn default_interval_edges(spec: &TurbineSpec) -> Vec<f64> {
    let mut edges: Vec<f64> = (0..).map(|k| 2.0 * k as f64).take_while(|&e| e < spec.cut_out_mps).collect();
    edges.push(spec.cut_out_mps);
    edges
}

/// Breakpoints `b_0 < ... < b_m`; interval j is `[b_j, b_{j+1})` and the last
/// one is `[b_m, ∞)`.
fn validate_edges(edges: &[f64]) -> Result<(), StressorError> {
    if edges.is_empty() {
        return Err(StressorError::InvalidEdges("no breakpoints".into()));
    }
    if edges.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(StressorError::InvalidEdges("breakpoints must be finite and non-negative".into()));
    }
    if edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(StressorError::InvalidEdges("breakpoints must be strictly increasing".into()));
    }
    Ok(())
}

fn interval_of(edges: &[f64], v: f64) -> Option<usize> {
    if !(v >= edges[0]) {
        return None;
    }
    Some(edges.partition_point(|&e| e <= v) - 1)
}

fn check_pairs(pairs: &[(f64, f64)]) -> Result<(), StressorError> {
    if let Some(p) = pairs.iter().find(|(f, a)| !(*f >= 0.0 && *a >= 0.0)) {
        return Err(StressorError::InvalidArgument(format!("negative or missing speed in pair {p:?}")));
    }
    Ok(())
}

/// Transition counts and row-normalized probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub interval_edges: Vec<f64>,
    pub counts: Vec<[usize; 4]>,
    pub matrix: Vec<[f64; 4]>,
}

/// Counts (forecast interval, actual region) pairs and normalizes each row.
pub fn build_transition_matrix(
    pairs: &[(f64, f64)],
    edges: &[f64],
    spec: &TurbineSpec,
) -> Result<TransitionMatrix, StressorError> {
    validate_edges(edges)?;
    check_pairs(pairs)?;
    let mut counts = vec![[0usize; 4]; edges.len()];
    for &(f, a) in pairs {
        let m = interval_of(edges, f).ok_or(StressorError::OutsideSpan(f))?;
        counts[m][classify_region(a, spec).index()] += 1;
    }
    let empty: Vec<usize> = (0..counts.len()).filter(|&m| counts[m].iter().sum::<usize>() == 0).collect();
    if !empty.is_empty() {
        return Err(StressorError::EmptyIntervals(empty));
    }
    let matrix = counts
        .iter()
        .map(|c| {
            let total: usize = c.iter().sum();
            c.map(|x| x as f64 / total as f64)
        })
        .collect();
    Ok(TransitionMatrix {
        interval_edges: edges.to_vec(),
        counts,
        matrix,
    })
}

/// Removes breakpoints until every interval holds at least one forecast.
/// An empty interval joins its lower neighbour; an empty first interval joins the next.
pub fn merge_empty_intervals(pairs: &[(f64, f64)], edges: &[f64]) -> Result<Vec<f64>, StressorError> {
    validate_edges(edges)?;
    check_pairs(pairs)?;
    let mut edges = edges.to_vec();
    loop {
        let mut n = vec![0usize; edges.len()];
        for &(f, _) in pairs {
            if let Some(m) = interval_of(&edges, f) {
                n[m] += 1;
            }
        }
        let Some(m) = n.iter().position(|&c| c == 0) else {
            return Ok(edges);
        };
        if edges.len() == 1 {
            return Err(StressorError::EmptyIntervals(vec![0]));
        }
        edges.remove(if m == 0 { 1 } else { m });
    }
}

/// Per-interval error law of `V^A − V^F` over pairs that land in Region II.
/// Intervals without Region II outcomes get `None`.
pub fn fit_conditional_error_distributions(
    pairs: &[(f64, f64)],
    edges: &[f64],
    spec: &TurbineSpec,
    opts: &FitOptions,
) -> Result<Vec<Option<FittedDistribution>>, StressorError> {
    validate_edges(edges)?;
    check_pairs(pairs)?;
    let mut errors = vec![Vec::new(); edges.len()];
    for &(f, a) in pairs {
        let m = interval_of(edges, f).ok_or(StressorError::OutsideSpan(f))?;
        if classify_region(a, spec) == Region::II {
            errors[m].push(a - f);
        }
    }
    errors
        .iter()
        .map(|e| {
            if e.is_empty() {
                Ok(None)
            } else {
                Ok(Some(select_distribution(e, opts)?))
            }
        })
        .collect()
}

/// Everything needed to draw stressed key-stressor speeds for a forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    pub version: u32,
    pub interval_edges: Vec<f64>,
    pub counts: Vec<[usize; 4]>,
    pub matrix: Vec<[f64; 4]>,
    pub region_placeholders: Placeholders,
    pub conditional_dists: Vec<Option<FittedDistribution>>,
    pub cut_in_mps: f64,
    pub rated_speed_mps: f64,
    pub cut_out_mps: f64,
}

impl TransitionModel {
    pub fn build(
        pairs: &[(f64, f64)],
        edges: &[f64],
        spec: &TurbineSpec,
        placeholders: Placeholders,
        opts: &FitOptions,
    ) -> Result<Self, StressorError> {
        placeholders.validate(spec)?;
        let tm = build_transition_matrix(pairs, edges, spec)?;
        let conditional_dists = fit_conditional_error_distributions(pairs, edges, spec, opts)?;
        let model = Self {
            version: FORMAT_VERSION,
            interval_edges: tm.interval_edges,
            counts: tm.counts,
            matrix: tm.matrix,
            region_placeholders: placeholders,
            conditional_dists,
            cut_in_mps: spec.cut_in_mps,
            rated_speed_mps: spec.rated_speed_mps,
            cut_out_mps: spec.cut_out_mps,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), StressorError> {
        if self.version != FORMAT_VERSION {
            return Err(StressorError::Version(self.version));
        }
        validate_edges(&self.interval_edges)?;
        let m = self.interval_edges.len();
        if self.matrix.len() != m || self.counts.len() != m || self.conditional_dists.len() != m {
            return Err(StressorError::Dimension("one matrix row and distribution slot per interval".into()));
        }
        for (j, row) in self.matrix.iter().enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(StressorError::InvalidArgument(format!("row {j} is not stochastic")));
            }
            if row[Region::II.index()] > 0.0 && self.conditional_dists[j].is_none() {
                return Err(StressorError::MissingDistribution(j));
            }
        }
        for d in self.conditional_dists.iter().flatten() {
            d.dist.validate()?;
        }
        Ok(())
    }

    pub fn interval_of(&self, v_forecast: f64) -> Result<usize, StressorError> {
        interval_of(&self.interval_edges, v_forecast).ok_or(StressorError::OutsideSpan(v_forecast))
    }

    pub fn to_json(&self) -> Result<String, StressorError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, StressorError> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    /// Region II bounds as a closed interval `[cut_in, rated)`.
    fn clamp_region_two(&self, v: f64) -> f64 {
        v.clamp(self.cut_in_mps, self.rated_speed_mps.next_down())
    }
}

/// Splits `n` into integer counts proportional to `probs` by largest remainders;
/// ties go to the lower index.
pub fn allocate_largest_remainder(probs: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = probs.iter().sum();
    let exact: Vec<f64> = probs.iter().map(|p| p / total * n as f64).collect();
    // snap products like 956.9999999999999 before flooring
    let mut counts: Vec<usize> = exact.iter().map(|x| (x + 1e-9).floor().max(0.0) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &j in order.iter().take(n.saturating_sub(assigned)) {
        counts[j] += 1;
    }
    counts
}

/// Region of each scenario at period `t`: allocation counts shuffled by the
/// period's own substream.
fn region_assignment(model: &TransitionModel, m: usize, n: usize, seed: u64, t: usize) -> Vec<Region> {
    let counts = allocate_largest_remainder(&model.matrix[m], n);
    let mut labels: Vec<Region> = Region::ALL
        .iter()
        .zip(&counts)
        .flat_map(|(&r, &c)| std::iter::repeat(r).take(c))
        .collect();
    labels.shuffle(&mut substream(seed, Stream::Allocation, t as u64));
    labels
}

fn cell_value(
    model: &TransitionModel,
    m: usize,
    v_forecast: f64,
    region: Region,
    seed: u64,
    i: usize,
    t: usize,
) -> Result<f64, StressorError> {
    if region != Region::II {
        return Ok(model.region_placeholders.get(region));
    }
    let dist = model.conditional_dists[m].as_ref().ok_or(StressorError::MissingDistribution(m))?;
    let u = open_unit(&mut substream(seed, Stream::Scenario, cell_index(i, t)));
    Ok(model.clamp_region_two(v_forecast + dist.dist.inverse_cdf(u)))
}

/// `n` stressed speeds for one forecast value (period index 0).
pub fn sample_speed_errors(
    v_forecast: f64,
    n: usize,
    model: &TransitionModel,
    seed: u64,
) -> Result<Vec<f64>, StressorError> {
    sample_speed_errors_at(v_forecast, n, model, seed, 0)
}

/// `n` stressed speeds for the forecast at period `t`. Region counts follow the
/// largest-remainder split of the interval's transition row.
pub fn sample_speed_errors_at(
    v_forecast: f64,
    n: usize,
    model: &TransitionModel,
    seed: u64,
    t: usize,
) -> Result<Vec<f64>, StressorError> {
    let m = model.interval_of(v_forecast)?;
    region_assignment(model, m, n, seed, t)
        .into_iter()
        .enumerate()
        .map(|(i, r)| cell_value(model, m, v_forecast, r, seed, i, t))
        .collect()
}

/// N × T stressed key-stressor speeds. Each cell draws from its own substream,
/// so `parallel` changes only the schedule, never the numbers.
pub fn stressed_speed_scenarios(
    forecast: &[f64],
    timestamps: &[NaiveDateTime],
    n: usize,
    model: &TransitionModel,
    seed: u64,
    parallel: bool,
) -> Result<ScenarioSet, StressorError> {
    if forecast.len() != timestamps.len() {
        return Err(StressorError::Dimension("forecast and timestamps differ in length".into()));
    }
    if n == 0 {
        return Err(StressorError::InvalidArgument("N must be at least 1".into()));
    }
    let intervals: Vec<usize> = forecast.iter().map(|&v| model.interval_of(v)).collect::<Result<_, _>>()?;
    let regions: Vec<Vec<Region>> = intervals
        .iter()
        .enumerate()
        .map(|(t, &m)| region_assignment(model, m, n, seed, t))
        .collect();
    let row = |i: usize| -> Result<Vec<f64>, StressorError> {
        (0..forecast.len())
            .map(|t| cell_value(model, intervals[t], forecast[t], regions[t][i], seed, i, t))
            .collect()
    };
    let values: Vec<Vec<f64>> = if parallel {
        (0..n).into_par_iter().map(row).collect::<Result<_, _>>()?
    } else {
        (0..n).map(row).collect::<Result<_, _>>()?
    };
    ScenarioSet::new(Quantity::WindSpeed, timestamps.to_vec(), forecast.to_vec(), values, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Distribution;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand::Rng;

    fn spec() -> TurbineSpec {
        TurbineSpec::default()
    }

    fn fitted(dist: Distribution) -> Option<FittedDistribution> {
        Some(FittedDistribution {
            dist,
            sse: 0.0,
            samples: 100,
            fallback: false,
            scores: vec![],
        })
    }

    fn model_with_row(row: [f64; 4], dist: Distribution) -> TransitionModel {
        let s = spec();
        TransitionModel {
            version: FORMAT_VERSION,
            interval_edges: vec![0.0],
            counts: vec![[0; 4]],
            matrix: vec![row],
            region_placeholders: Placeholders::default(),
            conditional_dists: vec![fitted(dist)],
            cut_in_mps: s.cut_in_mps,
            rated_speed_mps: s.rated_speed_mps,
            cut_out_mps: s.cut_out_mps,
        }
    }

    #[test]
    fn default_edges_step_two_to_cut_out() {
        let e = default_interval_edges(&spec());
        assert_eq!(e.first(), Some(&0.0));
        assert_eq!(e[1], 2.0);
        assert_eq!(e[e.len() - 2], 24.0);
        assert_eq!(e.last(), Some(&25.0));
    }

    #[test]
    fn perfect_forecasts_put_all_mass_on_own_region() {
        let s = spec();
        let edges = vec![0.0, 3.0, 11.4, 25.0];
        let pairs: Vec<(f64, f64)> = [1.0, 2.0, 5.0, 9.0, 15.0, 20.0, 27.0, 40.0].iter().map(|&v| (v, v)).collect();
        let tm = build_transition_matrix(&pairs, &edges, &s).unwrap();
        for (j, row) in tm.matrix.iter().enumerate() {
            assert_eq!(row[j], 1.0);
        }
    }

    #[test]
    fn constructed_split_reproduces_sixty_one_thirty_nine() {
        let s = spec();
        let mut pairs = Vec::new();
        for k in 0..100 {
            let f = 0.5 + 3.0 * (k as f64) / 100.0;
            let a = if k < 61 { 1.5 } else { 6.0 };
            pairs.push((f, a));
        }
        pairs.push((6.0, 6.0));
        let tm = build_transition_matrix(&pairs, &[0.0, 4.0], &s).unwrap();
        assert_eq!(tm.matrix[0], [0.61, 0.39, 0.0, 0.0]);
    }

    #[test]
    fn empty_intervals_are_listed_and_mergeable() {
        let s = spec();
        let pairs = vec![(1.0, 1.0), (7.0, 7.0)];
        let edges = vec![0.0, 2.0, 4.0, 6.0, 8.0];
        match build_transition_matrix(&pairs, &edges, &s) {
            Err(StressorError::EmptyIntervals(v)) => assert_eq!(v, vec![1, 2, 4]),
            other => panic!("{other:?}"),
        }
        let merged = merge_empty_intervals(&pairs, &edges).unwrap();
        assert_eq!(merged, vec![0.0, 6.0]);
        build_transition_matrix(&pairs, &merged, &s).unwrap();
    }

    #[test]
    fn worked_allocation_example() {
        assert_eq!(allocate_largest_remainder(&[0.029, 0.957, 0.013, 0.001], 1000), vec![29, 957, 13, 1]);
        let m = model_with_row([0.029, 0.957, 0.013, 0.001], Distribution::Normal { mu: 0.0, sigma: 1.0 });
        let xs = sample_speed_errors(7.0, 1000, &m, 3).unwrap();
        let s = spec();
        let mut counts = [0; 4];
        for x in &xs {
            counts[classify_region(*x, &s).index()] += 1;
        }
        assert_eq!(counts, [29, 957, 13, 1]);
    }

    #[test]
    fn region_three_row_yields_placeholder() {
        let m = model_with_row([0.0, 0.0, 1.0, 0.0], Distribution::Normal { mu: 0.0, sigma: 1.0 });
        assert!(sample_speed_errors(14.0, 50, &m, 1).unwrap().iter().all(|&x| x == 20.0));
    }

    #[test]
    fn region_two_draws_follow_the_fitted_law() {
        let d = Distribution::Logistic { mu: 0.2, s: 0.4 };
        let m = model_with_row([0.0, 1.0, 0.0, 0.0], d.clone());
        let n = 100_000;
        let mut xs = sample_speed_errors(7.0, n, &m, 17).unwrap();
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = d.cdf(x - 7.0);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.78 / (n as f64).sqrt(), "KS {ks}");
    }

    #[test]
    fn region_two_draws_are_clamped() {
        let m = model_with_row([0.0, 1.0, 0.0, 0.0], Distribution::Normal { mu: 0.0, sigma: 20.0 });
        let s = spec();
        for x in sample_speed_errors(7.0, 2000, &m, 5).unwrap() {
            assert_eq!(classify_region(x, &s), Region::II);
        }
    }

    #[test]
    fn below_span_is_an_error() {
        let mut m = model_with_row([0.0, 1.0, 0.0, 0.0], Distribution::Normal { mu: 0.0, sigma: 1.0 });
        m.interval_edges = vec![2.0];
        assert!(matches!(sample_speed_errors(1.0, 5, &m, 0), Err(StressorError::OutsideSpan(_))));
    }

    #[test]
    fn serial_and_parallel_agree_bitwise() {
        let m = model_with_row([0.1, 0.7, 0.15, 0.05], Distribution::Laplace { mu: 0.0, b: 1.0 });
        let start = NaiveDate::from_ymd_opt(2013, 2, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let ts: Vec<_> = (0..24).map(|h| start + chrono::Duration::hours(h)).collect();
        let f: Vec<f64> = (0..24).map(|h| 4.0 + h as f64 * 0.3).collect();
        let a = stressed_speed_scenarios(&f, &ts, 300, &m, 42, false).unwrap();
        let b = stressed_speed_scenarios(&f, &ts, 300, &m, 42, true).unwrap();
        assert_eq!(a, b);
        // the column of the matrix is the single-period sampler
        assert_eq!(a.column(5), sample_speed_errors_at(f[5], 300, &m, 42, 5).unwrap());
    }

    #[test]
    fn model_json_round_trip() {
        let s = spec();
        let mut rng = substream(3, Stream::Synthetic, 0);
        let pairs: Vec<(f64, f64)> = (0..3000)
            .map(|_| {
                let f: f64 = rng.gen_range(0.0..30.0);
                (f, (f + rng.gen_range(-2.0..2.0)).max(0.0))
            })
            .collect();
        let edges = merge_empty_intervals(&pairs, &default_interval_edges(&s)).unwrap();
        let model = TransitionModel::build(&pairs, &edges, &s, Placeholders::default(), &FitOptions::default()).unwrap();
        let back = TransitionModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
        let mut bumped = model.clone();
        bumped.version = 99;
        assert!(TransitionModel::from_json(&serde_json::to_string(&bumped).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn rows_are_stochastic_and_match_counting(
            pairs in prop::collection::vec((0.0f64..30.0, 0.0f64..30.0), 1..200)
        ) {
            let s = spec();
            let edges = merge_empty_intervals(&pairs, &default_interval_edges(&s)).unwrap();
            let tm = build_transition_matrix(&pairs, &edges, &s).unwrap();
            for (j, row) in tm.matrix.iter().enumerate() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                let lo = edges[j];
                let hi = edges.get(j + 1).copied().unwrap_or(f64::INFINITY);
                let in_row: Vec<_> = pairs.iter().filter(|(f, _)| *f >= lo && *f < hi).collect();
                for (r, bounds) in [(0usize, (0.0, 3.0)), (1, (3.0, 11.4)), (2, (11.4, 25.0)), (3, (25.0, f64::INFINITY))] {
                    let c = in_row.iter().filter(|(_, a)| *a >= bounds.0 && *a < bounds.1).count();
                    prop_assert_eq!(tm.counts[j][r], c);
                    prop_assert_eq!(row[r], c as f64 / in_row.len() as f64);
                }
            }
        }

        #[test]
        fn allocation_sums_to_n_and_is_near_exact(
            w in prop::collection::vec(0.0f64..1.0, 4), n in 1usize..5000
        ) {
            prop_assume!(w.iter().sum::<f64>() > 1e-6);
            let c = allocate_largest_remainder(&w, n);
            prop_assert_eq!(c.iter().sum::<usize>(), n);
            let total: f64 = w.iter().sum();
            for (ci, wi) in c.iter().zip(&w) {
                prop_assert!((*ci as f64 - wi / total * n as f64).abs() < 1.0 + 1e-9);
            }
        }
    }
}
