//! Grid case: buses, lines, generators, wind farms and loads over one horizon.
//!
//! Cases are stored as TOML documents:
//!
//! ```toml
//! version = 1
//! name = "toy"
//! periods = 2
//! reference_bus = "b1"
//! contingency_fraction = 0.0   # R^D, share of total load held as spinning reserve
//! load_extent = 0.02           # ε^d, expected relative load deviation
//!
//! [[buses]]
//! id = "b1"
//! zone = "A"
//!
//! [[lines]]
//! id = "l12"
//! from = "b1"
//! to = "b2"
//! susceptance = 10.0   # MW per radian
//! limit = 50.0         # MW, omit for an unconstrained line
//!
//! [[generators]]
//! id = "g1"
//! bus = "b1"
//! p_min = 10.0
//! p_max = 100.0
//! ramp_60 = 60.0
//! ramp_10 = 20.0
//! min_up = 2
//! min_down = 2
//! no_load_cost = 100.0
//! startup_cost = 500.0
//! shutdown_cost = 0.0
//! segments = [{ c1 = 20.0, c0 = 0.0 }, { c1 = 30.0, c0 = -500.0 }]
//! initial = { on = true, power = 40.0 }
//!
//! [[wind_farms]]
//! id = "w1"
//! bus = "b2"
//! capacity = 50.0
//! da = [20.0, 25.0]
//! rt = [18.0, 27.0]
//!
//! [[loads]]
//! id = "d2"
//! bus = "b2"
//! da = [80.0, 90.0]
//! rt = [80.0, 90.0]
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::SchedError;

pub const CASE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    pub zone: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Flow per radian of angle difference, f = b (θ_from − θ_to).
    pub susceptance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
}

/// One piece of a convex cost curve, cost ≥ c1·p + c0 (while committed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSegment {
    pub c1: f64,
    pub c0: f64,
}

/// State before the first period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct InitialStatus {
    pub on: bool,
    pub power: f64,
    /// Periods already spent in the current state; `None` means no residual
    /// minimum up/down obligation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periods_in_state: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    pub p_min: f64,
    pub p_max: f64,
    /// 60-min ramp rate, MW.
    pub ramp_60: f64,
    /// 10-min ramp rate, MW.
    pub ramp_10: f64,
    pub min_up: usize,
    pub min_down: usize,
    pub no_load_cost: f64,
    pub startup_cost: f64,
    pub shutdown_cost: f64,
    pub segments: Vec<CostSegment>,
    #[serde(default)]
    pub initial: InitialStatus,
}

impl Generator {
    /// Operating cost at output `p` while committed.
    pub fn segment_cost(&self, p: f64) -> f64 {
        self.segments.iter().map(|s| s.c1 * p + s.c0).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindFarm {
    pub id: String,
    pub bus: String,
    pub capacity: f64,
    /// Day-ahead forecast, MW per period.
    pub da: Vec<f64>,
    /// Real-time realization, MW per period.
    pub rt: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub id: String,
    pub bus: String,
    pub da: Vec<f64>,
    pub rt: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub periods: usize,
    pub reference_bus: String,
    /// R^D.
    pub contingency_fraction: f64,
    /// ε^d.
    pub load_extent: f64,
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub wind_farms: Vec<WindFarm>,
    #[serde(default)]
    pub loads: Vec<Load>,
}

fn invalid(msg: impl Into<String>) -> SchedError {
    SchedError::InvalidCase(msg.into())
}

fn unique<'a>(what: &str, ids: impl Iterator<Item = &'a String>) -> Result<(), SchedError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(invalid(format!("duplicate {what} id `{id}`")));
        }
    }
    Ok(())
}

impl GridCase {
    pub fn from_toml_str(s: &str) -> Result<Self, SchedError> {
        let case: Self = toml::from_str(s)?;
        case.validate()?;
        Ok(case)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SchedError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String, SchedError> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<(), SchedError> {
        if self.version != CASE_VERSION {
            return Err(invalid(format!("unsupported case version {}", self.version)));
        }
        let t = self.periods;
        if t == 0 {
            return Err(invalid("periods must be at least 1"));
        }
        if self.buses.is_empty() {
            return Err(invalid("no buses"));
        }
        unique("bus", self.buses.iter().map(|b| &b.id))?;
        unique("line", self.lines.iter().map(|l| &l.id))?;
        unique("generator", self.generators.iter().map(|g| &g.id))?;
        unique("wind farm", self.wind_farms.iter().map(|w| &w.id))?;
        unique("load", self.loads.iter().map(|d| &d.id))?;
        let bus = |id: &str, owner: &str| {
            self.bus_index(id)
                .map(|_| ())
                .ok_or_else(|| invalid(format!("{owner} refers to unknown bus `{id}`")))
        };
        bus(&self.reference_bus, "reference bus")?;
        if !(self.contingency_fraction >= 0.0 && self.load_extent >= 0.0) {
            return Err(invalid("contingency fraction and load extent must be non-negative"));
        }
        for l in &self.lines {
            bus(&l.from, &l.id)?;
            bus(&l.to, &l.id)?;
            if l.from == l.to {
                return Err(invalid(format!("line `{}` is a self-loop", l.id)));
            }
            if !(l.susceptance > 0.0 && l.susceptance.is_finite()) {
                return Err(invalid(format!("line `{}` susceptance must be positive", l.id)));
            }
            if l.limit.is_some_and(|f| !(f >= 0.0)) {
                return Err(invalid(format!("line `{}` limit must be non-negative", l.id)));
            }
        }
        for g in &self.generators {
            bus(&g.bus, &g.id)?;
            let bad = |m: &str| Err(invalid(format!("generator `{}`: {m}", g.id)));
            if !(0.0 <= g.p_min && g.p_min <= g.p_max && g.p_max.is_finite()) {
                return bad("need 0 <= p_min <= p_max");
            }
            if !(g.ramp_60 >= 0.0 && g.ramp_10 >= 0.0) {
                return bad("ramp rates must be non-negative");
            }
            if ![g.no_load_cost, g.startup_cost, g.shutdown_cost].iter().all(|c| c.is_finite()) {
                return bad("costs must be finite");
            }
            if g.segments.is_empty() {
                return bad("no cost segments");
            }
            if g.segments.windows(2).any(|w| w[1].c1 < w[0].c1) {
                return bad("cost segments must have increasing marginal cost");
            }
            let i = &g.initial;
            if !(0.0..=g.p_max).contains(&i.power) || (!i.on && i.power != 0.0) || (i.on && i.power < g.p_min) {
                return bad("initial power inconsistent with initial status and limits");
            }
        }
        for w in &self.wind_farms {
            bus(&w.bus, &w.id)?;
            if w.da.len() != t || w.rt.len() != t {
                return Err(SchedError::Dimension(format!("wind farm `{}` needs {t} periods", w.id)));
            }
            if w.da.iter().chain(&w.rt).any(|&p| !(0.0..=w.capacity).contains(&p)) {
                return Err(invalid(format!("wind farm `{}` output outside [0, capacity]", w.id)));
            }
        }
        for d in &self.loads {
            bus(&d.bus, &d.id)?;
            if d.da.len() != t || d.rt.len() != t {
                return Err(SchedError::Dimension(format!("load `{}` needs {t} periods", d.id)));
            }
            if d.da.iter().chain(&d.rt).any(|&p| !(p >= 0.0 && p.is_finite())) {
                return Err(invalid(format!("load `{}` must be non-negative", d.id)));
            }
        }
        Ok(())
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    fn bus_of(&self, id: &str) -> usize {
        self.bus_index(id).expect("validated bus reference")
    }

    pub fn reference_index(&self) -> usize {
        self.bus_of(&self.reference_bus)
    }

    /// Zone ids in sorted order.
    pub fn zones(&self) -> Vec<String> {
        self.buses.iter().map(|b| b.zone.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn generator_buses(&self) -> Vec<usize> {
        self.generators.iter().map(|g| self.bus_of(&g.bus)).collect()
    }

    pub fn farm_buses(&self) -> Vec<usize> {
        self.wind_farms.iter().map(|w| self.bus_of(&w.bus)).collect()
    }

    /// (from, to) bus indices per line.
    pub fn line_ends(&self) -> Vec<(usize, usize)> {
        self.lines.iter().map(|l| (self.bus_of(&l.from), self.bus_of(&l.to))).collect()
    }

    /// Day-ahead load per bus and period.
    pub fn bus_load_da(&self) -> Vec<Vec<f64>> {
        self.bus_series(|d| &d.da)
    }

    pub fn bus_load_rt(&self) -> Vec<Vec<f64>> {
        self.bus_series(|d| &d.rt)
    }

    fn bus_series(&self, pick: impl Fn(&Load) -> &Vec<f64>) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.periods]; self.buses.len()];
        for d in &self.loads {
            let b = self.bus_of(&d.bus);
            for (o, x) in out[b].iter_mut().zip(pick(d)) {
                *o += x;
            }
        }
        out
    }

    /// Day-ahead wind per bus and period.
    pub fn bus_wind_da(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.periods]; self.buses.len()];
        for (w, b) in self.wind_farms.iter().zip(self.farm_buses()) {
            for (o, x) in out[b].iter_mut().zip(&w.da) {
                *o += x;
            }
        }
        out
    }

    /// Replaces the day-ahead and real-time series of the named wind farms.
    pub fn set_wind(&mut self, series: &BTreeMap<String, (Vec<f64>, Vec<f64>)>) -> Result<(), SchedError> {
        let index: HashMap<String, usize> =
            self.wind_farms.iter().enumerate().map(|(k, w)| (w.id.clone(), k)).collect();
        for (id, (da, rt)) in series {
            let &k = index
                .get(id)
                .ok_or_else(|| invalid(format!("unknown wind farm `{id}`")))?;
            self.wind_farms[k].da = da.clone();
            self.wind_farms[k].rt = rt.clone();
        }
        self.validate()
    }

    /// Wind farm id → zone of its bus.
    pub fn farm_zones(&self) -> BTreeMap<String, String> {
        self.wind_farms
            .iter()
            .zip(self.farm_buses())
            .map(|(w, b)| (w.id.clone(), self.buses[b].zone.clone()))
            .collect()
    }

    /// Wind farm id → its bus id.
    pub fn farm_nodes(&self) -> BTreeMap<String, String> {
        self.wind_farms.iter().map(|w| (w.id.clone(), w.bus.clone())).collect()
    }
}
