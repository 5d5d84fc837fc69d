//! Stage functions and the artifact directory that connects them.
//!
//! Every stage is a pure function of the configuration and the previous
//! stage's output. [`Artifacts`] persists each output so any stage can be
//! re-run from disk.
//!
//! ```text
//! <out>/INCOMPLETE                 present while a run is in progress or after it failed
//! <out>/ingest/*.csv, dropped.json
//! <out>/fit/transition.json, coupling.json
//! <out>/stress/stressed.json, speeds.csv, weather.csv, power_<farm>.csv, envelope_<farm>.csv
//! <out>/size/reserve.json, reserve_farms.csv, reserve.csv
//! <out>/scuc/scuc.json, day<d>.csv
//! <out>/rt/rt.json, day<d>.csv
//! <out>/report.json, report.txt, period_costs.csv
//! <out>/sweep/<method>-<level>/...  one sub-run per sweep cell
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use windflex_core::reserve::{aggregate_reserve, size_reserve, MethodKind, ReserveSchedule};
use windflex_core::stressor::{
    confidence_envelope, default_interval_edges, merge_empty_intervals, pca_feature_coupling, scenarios_to_power,
    stress_weather_scenarios, stressed_speed_scenarios, table_power, CouplingCoefficients, ScenarioSet,
    TransitionModel, WeatherScenarioSet,
};
use windflex_core::weather::{
    format_timestamp, load_feature_table, standardize, write_feature_table, Feature, FeatureTable,
};
use windflex_sched::{
    build_rt_dispatch, build_scuc, DaSolution, GridCase, ReservePolicy, RtSolution, SYSTEM_ENTITY,
};

use crate::config::{ReserveConfig, RunConfig};
use crate::error::{AtStage, PipelineError, Result, Stage};
use crate::metrics::{cost_breakdown, reserve_activation_factors, CostSummary, ReserveActivation};
use crate::report::{method_name, DayReport, EvaluationReport, ReportMetadata};

pub const INCOMPLETE: &str = "INCOMPLETE";

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub history_forecast: FeatureTable,
    pub history_actual: FeatureTable,
    pub forecast: FeatureTable,
    pub realized: FeatureTable,
    /// Source file → dropped 1-based data rows.
    pub dropped: BTreeMap<String, Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fitted {
    pub transition: TransitionModel,
    pub coupling: CouplingCoefficients,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stressed {
    pub speeds: ScenarioSet,
    /// Farm id → power scenarios; the set's forecast is the day-ahead wind.
    pub power: BTreeMap<String, ScenarioSet>,
    /// Farm id → output under the realized weather.
    pub realized_power: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sized {
    pub reserve: ReserveConfig,
    pub policy: ReservePolicy,
    /// One schedule per wind farm, in case order.
    pub farms: Vec<ReserveSchedule>,
    /// Schedules of the policy's entities; empty without a policy.
    pub entities: Vec<ReserveSchedule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRun {
    pub day: usize,
    pub start: String,
    /// The case with this day's forecast and realized wind filled in.
    pub case: GridCase,
    pub da: DaSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scheduled {
    pub days: Vec<DayRun>,
}

/// Path as written in the config, so artifacts do not depend on the working directory.
fn study_file(p: &Path) -> String {
    p.display().to_string()
}

/// Keeps the rows whose timestamps appear in both tables.
fn intersect(a: &FeatureTable, b: &FeatureTable) -> Result<(FeatureTable, FeatureTable)> {
    if a.timestamps() == b.timestamps() {
        return Ok((a.clone(), b.clone()));
    }
    let in_b: BTreeSet<_> = b.timestamps().iter().collect();
    let common: BTreeSet<_> = a.timestamps().iter().filter(|t| in_b.contains(t)).collect();
    let keep = |t: &FeatureTable| -> Result<FeatureTable> {
        let rows: Vec<usize> = (0..t.len()).filter(|&r| common.contains(&t.timestamps()[r])).collect();
        let features = t
            .features()
            .iter()
            .map(|f| Feature {
                values: rows.iter().map(|&r| f.values[r]).collect(),
                ..f.clone()
            })
            .collect();
        FeatureTable::new(rows.iter().map(|&r| t.timestamps()[r]).collect(), features).at(Stage::Ingest)
    };
    Ok((keep(a)?, keep(b)?))
}

pub fn ingest(cfg: &RunConfig) -> Result<Ingested> {
    let mut dropped = BTreeMap::new();
    let mut load = |p: &Path| -> Result<FeatureTable> {
        let full = cfg.resolve(p);
        let t = load_feature_table(&full, &cfg.schema).at(Stage::Ingest)?;
        if !t.dropped_rows.is_empty() {
            info!("{}: dropped {} rows with missing values", full.display(), t.dropped_rows.len());
        }
        dropped.insert(study_file(p), t.dropped_rows);
        Ok(t.table)
    };
    let hf = load(&cfg.paths.history_forecast)?;
    let ha = load(&cfg.paths.history_actual)?;
    let forecast = load(&cfg.paths.forecast)?;
    let realized = load(&cfg.paths.realized)?;
    let (history_forecast, history_actual) = intersect(&hf, &ha)?;
    if history_forecast.len() < 2 {
        return Err(PipelineError::invalid(Stage::Ingest, "fewer than two aligned history rows"));
    }
    if forecast.timestamps() != realized.timestamps() {
        return Err(PipelineError::invalid(
            Stage::Ingest,
            "forecast and realized study weather must cover the same complete timestamps",
        ));
    }
    Ok(Ingested {
        history_forecast,
        history_actual,
        forecast,
        realized,
        dropped,
    })
}

pub fn fit(cfg: &RunConfig, ing: &Ingested) -> Result<Fitted> {
    let key = &cfg.stressor.key_stressor;
    let f = ing.history_forecast.column(key).at(Stage::Fit)?;
    let a = ing.history_actual.column(key).at(Stage::Fit)?;
    let pairs: Vec<(f64, f64)> = f.iter().copied().zip(a.iter().copied()).collect();
    let edges = match &cfg.stressor.edges {
        Some(e) => e.clone(),
        None => merge_empty_intervals(&pairs, &default_interval_edges(&cfg.turbine)).at(Stage::Fit)?,
    };
    let transition = TransitionModel::build(
        &pairs,
        &edges,
        &cfg.turbine,
        cfg.stressor.placeholders,
        &cfg.stressor.fit,
    )
    .at(Stage::Fit)?;
    let h = ing.history_actual.len();
    let window = cfg.stressor.pca_window.unwrap_or(h).min(h);
    let std = standardize(&ing.history_actual.slice(h - window, h)).at(Stage::Fit)?;
    let coupling = pca_feature_coupling(&std, key).at(Stage::Fit)?;
    Ok(Fitted { transition, coupling })
}

/// Stressed speeds, weather scenarios and per-farm power scenarios.
pub fn stress(cfg: &RunConfig, case: &GridCase, fitted: &Fitted, ing: &Ingested, seed: u64) -> Result<(Stressed, WeatherScenarioSet)> {
    let key = &cfg.stressor.key_stressor;
    let forecast_speed = ing.forecast.column(key).at(Stage::Stress)?;
    let speeds = stressed_speed_scenarios(
        forecast_speed,
        ing.forecast.timestamps(),
        cfg.stressor.scenarios,
        &fitted.transition,
        seed,
        cfg.stressor.parallel,
    )
    .at(Stage::Stress)?;
    let weather = stress_weather_scenarios(&ing.forecast, &fitted.coupling, &speeds).at(Stage::Stress)?;
    let mut power = BTreeMap::new();
    let mut realized_power = BTreeMap::new();
    for w in &case.wind_farms {
        let set = scenarios_to_power(&weather, &cfg.turbine, w.capacity, &cfg.stressor.layout).at(Stage::Stress)?;
        power.insert(w.id.clone(), set);
        let r = table_power(&ing.realized, &cfg.turbine, w.capacity, &cfg.stressor.layout).at(Stage::Stress)?;
        realized_power.insert(w.id.clone(), r);
    }
    Ok((
        Stressed {
            speeds,
            power,
            realized_power,
        },
        weather,
    ))
}

fn farm_mapping(case: &GridCase, policy: ReservePolicy) -> BTreeMap<String, String> {
    match policy {
        ReservePolicy::None => BTreeMap::new(),
        ReservePolicy::System => case
            .wind_farms
            .iter()
            .map(|w| (w.id.clone(), SYSTEM_ENTITY.to_string()))
            .collect(),
        ReservePolicy::Zonal => case.farm_zones(),
        ReservePolicy::Nodal => case.farm_nodes(),
    }
}

pub fn size(case: &GridCase, stressed: &Stressed, reserve: &ReserveConfig, policy: ReservePolicy) -> Result<Sized> {
    let farms = case
        .wind_farms
        .iter()
        .map(|w| {
            let set = stressed
                .power
                .get(&w.id)
                .ok_or_else(|| PipelineError::invalid(Stage::Size, format!("no scenarios for wind farm `{}`", w.id)))?;
            size_reserve(&w.id, set, w.capacity, reserve.method_for(w.capacity)?).at(Stage::Size)
        })
        .collect::<Result<Vec<_>>>()?;
    let entities = if policy == ReservePolicy::None {
        Vec::new()
    } else {
        aggregate_reserve(&farms, &farm_mapping(case, policy)).at(Stage::Size)?
    };
    Ok(Sized {
        reserve: *reserve,
        policy,
        farms,
        entities,
    })
}

fn slice_schedule(s: &ReserveSchedule, a: usize, b: usize) -> ReserveSchedule {
    ReserveSchedule {
        entity: s.entity.clone(),
        timestamps: s.timestamps[a..b].to_vec(),
        up_mw: s.up_mw[a..b].to_vec(),
        down_mw: s.down_mw[a..b].to_vec(),
        method: s.method,
    }
}

/// Number of whole days in the study horizon.
pub fn day_count(case: &GridCase, stressed: &Stressed) -> Result<usize> {
    let t = stressed.speeds.n_periods();
    if case.periods == 0 || t == 0 || t % case.periods != 0 {
        return Err(PipelineError::invalid(
            Stage::Scuc,
            format!("{t} study periods are not a whole number of {}-period days", case.periods),
        ));
    }
    Ok(t / case.periods)
}

/// One SCUC per day. Each day starts from the case's initial status and
/// repeats its load profile.
pub fn scuc(cfg: &RunConfig, case: &GridCase, stressed: &Stressed, sized: &Sized) -> Result<Scheduled> {
    let backend = windflex_sched::backend(&cfg.solver.backend).at(Stage::Scuc)?;
    let limits = cfg.solver.limits();
    let n = day_count(case, stressed)?;
    let t = case.periods;
    let mut days = Vec::with_capacity(n);
    for d in 0..n {
        let (a, b) = (d * t, (d + 1) * t);
        let mut c = case.clone();
        let wind: BTreeMap<String, (Vec<f64>, Vec<f64>)> = c
            .wind_farms
            .iter()
            .map(|w| {
                let f = stressed.power[&w.id].forecast[a..b].to_vec();
                let r = stressed.realized_power[&w.id][a..b].to_vec();
                (w.id.clone(), (f, r))
            })
            .collect();
        c.set_wind(&wind).at(Stage::Scuc)?;
        let reserve: Vec<ReserveSchedule> = sized.entities.iter().map(|s| slice_schedule(s, a, b)).collect();
        let res = (sized.policy != ReservePolicy::None).then_some(reserve.as_slice());
        let model = build_scuc(&c, res, sized.policy, &cfg.scuc_options()).at(Stage::Scuc)?;
        let da = model.solve(backend.as_ref(), &limits).at(Stage::Scuc)?;
        info!("day {d}: SCUC objective {:.2}", da.objective);
        days.push(DayRun {
            day: d,
            start: format_timestamp(&stressed.speeds.timestamps[a]),
            case: c,
            da,
        });
    }
    Ok(Scheduled { days })
}

pub fn rt(cfg: &RunConfig, scheduled: &Scheduled) -> Result<Vec<RtSolution>> {
    let backend = windflex_sched::backend(&cfg.solver.backend).at(Stage::Rt)?;
    let limits = cfg.solver.limits();
    scheduled
        .days
        .iter()
        .map(|d| {
            build_rt_dispatch(&d.case, &d.da, &cfg.penalties.rt())
                .at(Stage::Rt)?
                .solve(backend.as_ref(), &limits)
                .at(Stage::Rt)
        })
        .collect()
}

/// Report assembly; `generated_at` is supplied by the caller.
pub fn evaluate(
    cfg: &RunConfig,
    seed: u64,
    sized: &Sized,
    scheduled: &Scheduled,
    rts: &[RtSolution],
    generated_at: String,
) -> Result<EvaluationReport> {
    if rts.len() != scheduled.days.len() {
        return Err(PipelineError::invalid(Stage::Evaluate, "one real-time solution per day is required"));
    }
    let mut days = Vec::new();
    for (d, rt) in scheduled.days.iter().zip(rts) {
        let costs = cost_breakdown(rt, &d.da);
        days.push(DayReport {
            day: d.day,
            start: d.start.clone(),
            costs: costs.summary,
            raf: reserve_activation_factors(&d.da, rt)?,
        });
    }
    let aggregate = days.iter().fold(CostSummary::default(), |a, d| a.add(&d.costs));
    let raf = ReserveActivation::merge(&days.iter().map(|d| d.raf).collect::<Vec<_>>());
    let mut run_cfg = cfg.clone();
    run_cfg.seed = seed;
    run_cfg.reserve = sized.reserve;
    run_cfg.policy = sized.policy;
    let report = EvaluationReport {
        metadata: ReportMetadata {
            name: cfg.name.clone(),
            config_hash: run_cfg.hash()?,
            seed,
            policy: sized.policy,
            method: sized.reserve.method,
            level: sized.reserve.level,
            scenarios: cfg.stressor.scenarios,
            backend: cfg.solver.backend.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            generated_at,
        },
        days,
        aggregate,
        raf,
    };
    report.validate()?;
    Ok(report)
}

pub fn now_stamp() -> String {
    chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// An output directory of one run.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn create(&self, rel: &str, stage: Stage) -> Result<BufWriter<File>> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).at(stage)?;
        }
        Ok(BufWriter::new(File::create(p).at(stage)?))
    }

    fn write_text(&self, rel: &str, text: &str, stage: Stage) -> Result<()> {
        let mut w = self.create(rel, stage)?;
        w.write_all(text.as_bytes()).at(stage)?;
        w.flush().at(stage)
    }

    fn write_json<T: Serialize>(&self, rel: &str, v: &T, stage: Stage) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v).at(stage)?;
        s.push('\n');
        self.write_text(rel, &s, stage)
    }

    fn read_json<T: DeserializeOwned>(&self, rel: &str, stage: Stage) -> Result<T> {
        let p = self.path(rel);
        let text = std::fs::read_to_string(&p)
            .map_err(|e| PipelineError::invalid(stage, format!("cannot read {}: {e}", p.display())))?;
        serde_json::from_str(&text).at(stage)
    }

    /// Marks the directory as holding a partial run.
    pub fn begin(&self, stage: Stage) -> Result<()> {
        self.write_text(INCOMPLETE, &format!("stage: {stage}\n"), stage)
    }

    pub fn fail(&self, err: &PipelineError) {
        let _ = std::fs::create_dir_all(&self.dir);
        let _ = std::fs::write(self.path(INCOMPLETE), format!("stage: {}\nerror: {}\n", err.stage, err.cause));
    }

    pub fn finish(&self) -> Result<()> {
        match std::fs::remove_file(self.path(INCOMPLETE)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(PipelineError::new(Stage::Evaluate, e)),
            _ => Ok(()),
        }
    }

    pub fn is_incomplete(&self) -> bool {
        self.path(INCOMPLETE).exists()
    }

    pub fn save_ingested(&self, ing: &Ingested) -> Result<()> {
        let s = Stage::Ingest;
        for (name, t) in [
            ("history_forecast", &ing.history_forecast),
            ("history_actual", &ing.history_actual),
            ("forecast", &ing.forecast),
            ("realized", &ing.realized),
        ] {
            let w = self.create(&format!("ingest/{name}.csv"), s)?;
            write_feature_table(t, w).at(s)?;
        }
        self.write_json("ingest/dropped.json", &ing.dropped, s)
    }

    pub fn load_ingested(&self, cfg: &RunConfig) -> Result<Ingested> {
        let s = Stage::Ingest;
        let schema = cfg.canonical_schema();
        let load = |name: &str| -> Result<FeatureTable> {
            Ok(load_feature_table(&self.path(&format!("ingest/{name}.csv")), &schema).at(s)?.table)
        };
        Ok(Ingested {
            history_forecast: load("history_forecast")?,
            history_actual: load("history_actual")?,
            forecast: load("forecast")?,
            realized: load("realized")?,
            dropped: self.read_json("ingest/dropped.json", s)?,
        })
    }

    pub fn save_fitted(&self, f: &Fitted) -> Result<()> {
        self.write_json("fit/transition.json", &f.transition, Stage::Fit)?;
        self.write_json("fit/coupling.json", &f.coupling, Stage::Fit)
    }

    pub fn load_fitted(&self) -> Result<Fitted> {
        let s = Stage::Fit;
        let transition: TransitionModel = self.read_json("fit/transition.json", s)?;
        transition.validate().at(s)?;
        let coupling: CouplingCoefficients = self.read_json("fit/coupling.json", s)?;
        coupling.validate().at(s)?;
        Ok(Fitted { transition, coupling })
    }

    pub fn save_stressed(&self, st: &Stressed, weather: &WeatherScenarioSet, envelope_ci: f64) -> Result<()> {
        let s = Stage::Stress;
        self.write_json("stress/stressed.json", st, s)?;
        st.speeds.write_csv(self.create("stress/speeds.csv", s)?).at(s)?;
        weather.write_csv(self.create("stress/weather.csv", s)?).at(s)?;
        for (id, set) in &st.power {
            set.write_csv(self.create(&format!("stress/power_{id}.csv"), s)?).at(s)?;
            let env = confidence_envelope(set, envelope_ci).at(s)?;
            let mut w = csv::Writer::from_writer(self.create(&format!("stress/envelope_{id}.csv"), s)?);
            w.write_record(["timestamp", "forecast", "lower", "upper", "realized"]).at(s)?;
            for (t, (lo, hi)) in env.iter().enumerate() {
                w.write_record([
                    format_timestamp(&set.timestamps[t]),
                    set.forecast[t].to_string(),
                    lo.to_string(),
                    hi.to_string(),
                    st.realized_power[id][t].to_string(),
                ])
                .at(s)?;
            }
            w.flush().at(s)?;
        }
        Ok(())
    }

    pub fn load_stressed(&self) -> Result<Stressed> {
        self.read_json("stress/stressed.json", Stage::Stress)
    }

    pub fn save_sized(&self, sz: &Sized) -> Result<()> {
        let s = Stage::Size;
        self.write_json("size/reserve.json", sz, s)?;
        ReserveSchedule::write_csv(&sz.farms, self.create("size/reserve_farms.csv", s)?).at(s)?;
        ReserveSchedule::write_csv(&sz.entities, self.create("size/reserve.csv", s)?).at(s)
    }

    pub fn load_sized(&self) -> Result<Sized> {
        self.read_json("size/reserve.json", Stage::Size)
    }

    pub fn save_scheduled(&self, sc: &Scheduled) -> Result<()> {
        let s = Stage::Scuc;
        self.write_json("scuc/scuc.json", sc, s)?;
        for d in &sc.days {
            d.da.write_csv(&d.case, self.create(&format!("scuc/day{}.csv", d.day), s)?).at(s)?;
        }
        Ok(())
    }

    pub fn load_scheduled(&self) -> Result<Scheduled> {
        self.read_json("scuc/scuc.json", Stage::Scuc)
    }

    pub fn save_rt(&self, sc: &Scheduled, rts: &[RtSolution]) -> Result<()> {
        let s = Stage::Rt;
        self.write_json("rt/rt.json", &rts, s)?;
        for (d, rt) in sc.days.iter().zip(rts) {
            rt.write_csv(&d.case, self.create(&format!("rt/day{}.csv", d.day), s)?).at(s)?;
        }
        Ok(())
    }

    pub fn load_rt(&self) -> Result<Vec<RtSolution>> {
        self.read_json("rt/rt.json", Stage::Rt)
    }

    pub fn save_report(&self, report: &EvaluationReport, sc: &Scheduled, rts: &[RtSolution]) -> Result<()> {
        let s = Stage::Evaluate;
        self.write_text("report.json", &report.to_json()?, s)?;
        self.write_text("report.txt", &report.render_table(), s)?;
        let mut w = csv::Writer::from_writer(self.create("period_costs.csv", s)?);
        w.write_record([
            "day",
            "period",
            "rt_generation",
            "rt_load_shedding",
            "rt_wind_spillage",
            "rt_redispatch",
            "rt_total",
        ])
        .at(s)?;
        for (d, rt) in sc.days.iter().zip(rts) {
            for (t, c) in cost_breakdown(rt, &d.da).periods.iter().enumerate() {
                w.write_record([
                    d.day.to_string(),
                    t.to_string(),
                    c.generation.to_string(),
                    c.load_shedding.to_string(),
                    c.wind_spillage.to_string(),
                    c.redispatch.to_string(),
                    c.total().to_string(),
                ])
                .at(s)?;
            }
        }
        w.flush().at(s)
    }

    pub fn load_report(&self) -> Result<EvaluationReport> {
        let text = std::fs::read_to_string(self.path("report.json")).at(Stage::Evaluate)?;
        EvaluationReport::from_json(&text)
    }
}

/// Runs `f` with the directory marked incomplete until it succeeds.
pub fn guarded<T>(art: &Artifacts, stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    art.begin(stage)?;
    match f() {
        Ok(v) => {
            art.finish()?;
            Ok(v)
        }
        Err(e) => {
            art.fail(&e);
            Err(e)
        }
    }
}

/// Size → SCUC → RT → report for one reserve setting, persisted under `art`.
fn downstream(
    cfg: &RunConfig,
    seed: u64,
    case: &GridCase,
    stressed: &Stressed,
    reserve: &ReserveConfig,
    art: &Artifacts,
) -> Result<EvaluationReport> {
    art.begin(Stage::Size)?;
    let sized = size(case, stressed, reserve, cfg.policy)?;
    art.save_sized(&sized)?;
    art.begin(Stage::Scuc)?;
    let scheduled = scuc(cfg, case, stressed, &sized)?;
    art.save_scheduled(&scheduled)?;
    art.begin(Stage::Rt)?;
    let rts = rt(cfg, &scheduled)?;
    art.save_rt(&scheduled, &rts)?;
    art.begin(Stage::Evaluate)?;
    let report = evaluate(cfg, seed, &sized, &scheduled, &rts, now_stamp())?;
    art.save_report(&report, &scheduled, &rts)?;
    Ok(report)
}

pub fn load_case(cfg: &RunConfig) -> Result<GridCase> {
    GridCase::load(cfg.case_path()).at(Stage::Config)
}

/// Shared upstream stages, persisted under `art`.
fn upstream(cfg: &RunConfig, seed: u64, case: &GridCase, art: &Artifacts) -> Result<Stressed> {
    art.begin(Stage::Ingest)?;
    let ing = ingest(cfg)?;
    art.save_ingested(&ing)?;
    art.begin(Stage::Fit)?;
    let fitted = fit(cfg, &ing)?;
    art.save_fitted(&fitted)?;
    art.begin(Stage::Stress)?;
    let (stressed, weather) = stress(cfg, case, &fitted, &ing, seed)?;
    art.save_stressed(&stressed, &weather, cfg.stressor.envelope_ci)?;
    Ok(stressed)
}

/// End-to-end run under `out`. With a sweep configured, every method × level
/// cell is also run under `out/sweep/`.
pub fn run_pipeline(cfg: &RunConfig, out: &Path) -> Result<EvaluationReport> {
    let art = Artifacts::new(out);
    let result = (|| {
        art.begin(Stage::Config)?;
        cfg.validate()?;
        let case = load_case(cfg)?;
        let stressed = upstream(cfg, cfg.seed, &case, &art)?;
        let report = downstream(cfg, cfg.seed, &case, &stressed, &cfg.reserve, &art)?;
        if let Some(sweep) = &cfg.sweep {
            run_cells(cfg, &case, &stressed, &sweep.methods, &sweep.levels, &art)?;
        }
        Ok(report)
    })();
    match result {
        Ok(r) => {
            art.finish()?;
            Ok(r)
        }
        Err(e) => {
            art.fail(&e);
            Err(e)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub method: MethodKind,
    pub level: usize,
    pub report: EvaluationReport,
}

pub fn cell_dir(method: MethodKind, level: usize) -> String {
    format!("sweep/{}-{level}", method_name(method))
}

fn run_cells(
    cfg: &RunConfig,
    case: &GridCase,
    stressed: &Stressed,
    methods: &[MethodKind],
    levels: &[usize],
    art: &Artifacts,
) -> Result<Vec<SweepCell>> {
    let mut cells = Vec::new();
    for &method in methods {
        for &level in levels {
            let reserve = ReserveConfig {
                method,
                level,
                ..cfg.reserve
            };
            let sub = Artifacts::new(art.path(&cell_dir(method, level)));
            info!("sweep cell {} level {level}", method_name(method));
            let report = downstream(cfg, cfg.seed, case, stressed, &reserve, &sub)?;
            cells.push(SweepCell { method, level, report });
        }
    }
    let s = Stage::Evaluate;
    let mut w = csv::Writer::from_writer(art.create("sweep/summary.csv", s)?);
    w.write_record([
        "method",
        "level",
        "scuc_generation",
        "reserve_penalty",
        "rt_generation",
        "rt_load_shedding",
        "rt_wind_spillage",
        "rt_redispatch",
        "rt_total",
        "raf_up",
        "raf_down",
        "raf_total",
    ])
    .at(s)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| x.to_string());
    for c in &cells {
        let a = &c.report.aggregate;
        let r = &c.report.raf;
        w.write_record([
            method_name(c.method).to_string(),
            c.level.to_string(),
            a.scuc_generation.to_string(),
            a.reserve_penalty.to_string(),
            a.rt_generation.to_string(),
            a.rt_load_shedding.to_string(),
            a.rt_wind_spillage.to_string(),
            a.rt_redispatch.to_string(),
            a.rt_total.to_string(),
            opt(r.up.ratio),
            opt(r.down.ratio),
            r.total.to_string(),
        ])
        .at(s)?;
    }
    w.flush().at(s)?;
    Ok(cells)
}

/// Upstream stages once, then one report per method × level cell.
pub fn run_sweep(cfg: &RunConfig, out: &Path, methods: &[MethodKind], levels: &[usize]) -> Result<Vec<SweepCell>> {
    let art = Artifacts::new(out);
    guarded(&art, Stage::Config, || {
        cfg.validate()?;
        let case = load_case(cfg)?;
        let stressed = upstream(cfg, cfg.seed, &case, &art)?;
        run_cells(cfg, &case, &stressed, methods, levels, &art)
    })
}
