//! Real-time dispatch against a fixed day-ahead commitment.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::case::GridCase;
use crate::lp::{LinearModel, SolveLimits, SolverBackend, VarId};
use crate::network::Network;
use crate::scuc::DaSolution;
use crate::SchedError;

/// $/MW prices of the real-time balancing channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RtPenalties {
    pub load_shedding: f64,
    pub wind_spillage: f64,
    /// Redispatch inside the day-ahead reserve (Range I).
    pub redispatch_i: f64,
    /// Redispatch beyond it (Range II).
    pub redispatch_ii: f64,
}

impl Default for RtPenalties {
    fn default() -> Self {
        Self {
            load_shedding: 10_000.0,
            wind_spillage: 100.0,
            redispatch_i: 2.0,
            redispatch_ii: 5.0,
        }
    }
}

impl RtPenalties {
    pub fn validate(&self) -> Result<(), SchedError> {
        let all = [self.load_shedding, self.wind_spillage, self.redispatch_i, self.redispatch_ii];
        if all.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(SchedError::InvalidArgument("penalties must be finite and non-negative".into()));
        }
        if self.redispatch_i > self.redispatch_ii {
            return Err(SchedError::InvalidArgument(format!(
                "Range I price {} exceeds Range II price {}",
                self.redispatch_i, self.redispatch_ii
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct UnitVars {
    p: VarId,
    cost: VarId,
    up_i: VarId,
    up_ii: VarId,
    down_i: VarId,
    down_ii: VarId,
}

#[derive(Debug, Clone)]
pub struct RtModel {
    case: GridCase,
    penalties: RtPenalties,
    model: LinearModel,
    /// `units[t][g]`.
    units: Vec<Vec<UnitVars>>,
    shed: Vec<Vec<VarId>>,
    spill: Vec<Vec<VarId>>,
    theta: Vec<Vec<VarId>>,
    flows: Vec<Vec<VarId>>,
    /// Fixed no-load, start-up and shut-down cost per period.
    fixed_cost: Vec<f64>,
    commitment: Vec<Vec<bool>>,
}

/// Builds the real-time LP. The deviation from the day-ahead dispatch is split
/// into up/down parts, each with an in-schedule tier bounded by the day-ahead
/// reserve (Range I) and an unbounded overflow tier (Range II).
pub fn build_rt_dispatch(case: &GridCase, da: &DaSolution, penalties: &RtPenalties) -> Result<RtModel, SchedError> {
    case.validate()?;
    penalties.validate()?;
    let n_t = case.periods;
    let gens = &case.generators;
    let dims_ok = |x: &Vec<Vec<f64>>| x.len() == gens.len() && x.iter().all(|r| r.len() == n_t);
    if !(da.commitment.len() == gens.len() && da.commitment.iter().all(|r| r.len() == n_t))
        || ![&da.dispatch, &da.startup, &da.shutdown, &da.reserve_up, &da.reserve_down].into_iter().all(dims_ok)
    {
        return Err(SchedError::Dimension("day-ahead solution does not match the case".into()));
    }
    let net = Network::new(case);
    let gbus = case.generator_buses();
    let fbus = case.farm_buses();
    let load = case.bus_load_rt();
    let mut m = LinearModel::new();
    let mut units: Vec<Vec<UnitVars>> = Vec::with_capacity(n_t);
    let (mut shed, mut spill, mut theta, mut flows) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut fixed_cost = vec![0.0; n_t];
    let c = penalties;

    for t in 0..n_t {
        let row: Vec<UnitVars> = gens
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let u = if da.commitment[k][t] { 1.0 } else { 0.0 };
                fixed_cost[t] += u * g.no_load_cost + da.startup[k][t] * g.startup_cost + da.shutdown[k][t] * g.shutdown_cost;
                let x = UnitVars {
                    p: m.add_continuous(format!("p[{k},{t}]"), u * g.p_min, u * g.p_max, 0.0),
                    cost: m.add_continuous(format!("cost[{k},{t}]"), 0.0, f64::INFINITY, 1.0),
                    up_i: m.add_continuous(format!("up_i[{k},{t}]"), 0.0, da.reserve_up[k][t].max(0.0), c.redispatch_i),
                    up_ii: m.add_continuous(format!("up_ii[{k},{t}]"), 0.0, f64::INFINITY, c.redispatch_ii),
                    down_i: m.add_continuous(format!("down_i[{k},{t}]"), 0.0, da.reserve_down[k][t].max(0.0), c.redispatch_i),
                    down_ii: m.add_continuous(format!("down_ii[{k},{t}]"), 0.0, f64::INFINITY, c.redispatch_ii),
                };
                for (o, s) in g.segments.iter().enumerate() {
                    m.add_ge(format!("pwl[{k},{o},{t}]"), vec![(x.cost, 1.0), (x.p, -s.c1)], s.c0 * u);
                }
                m.add_eq(
                    format!("deviation[{k},{t}]"),
                    vec![(x.p, 1.0), (x.up_i, -1.0), (x.up_ii, -1.0), (x.down_i, 1.0), (x.down_ii, 1.0)],
                    da.dispatch[k][t],
                );
                x
            })
            .collect();
        for (k, g) in gens.iter().enumerate() {
            let x = row[k];
            let v = da.startup[k][t];
            let w = da.shutdown[k][t];
            let u = if da.commitment[k][t] { 1.0 } else { 0.0 };
            let (prev, u_prev) = if t == 0 {
                (None, if g.initial.on { 1.0 } else { 0.0 })
            } else {
                (Some(units[t - 1][k].p), if da.commitment[k][t - 1] { 1.0 } else { 0.0 })
            };
            let p0 = g.initial.power;
            let mut up = vec![(x.p, 1.0)];
            let mut down = vec![(x.p, -1.0)];
            let (mut up_rhs, mut down_rhs) = (g.ramp_60 * u_prev + v * g.p_min, g.ramp_60 * u + w * g.p_min);
            match prev {
                Some(pp) => {
                    up.push((pp, -1.0));
                    down.push((pp, 1.0));
                }
                None => {
                    up_rhs += p0;
                    down_rhs -= p0;
                }
            }
            m.add_le(format!("ramp_up[{k},{t}]"), up, up_rhs);
            m.add_le(format!("ramp_down[{k},{t}]"), down, down_rhs);
        }

        let sh: Vec<VarId> = (0..net.n_bus)
            .map(|i| m.add_continuous(format!("shed[{i},{t}]"), 0.0, load[i][t], c.load_shedding))
            .collect();
        let sp: Vec<VarId> = case
            .wind_farms
            .iter()
            .enumerate()
            .map(|(w, f)| m.add_continuous(format!("spill[{w},{t}]"), 0.0, f.rt[t], c.wind_spillage))
            .collect();
        let (th, f) = net.add_flows(&mut m, "", t, true);
        for i in 0..net.n_bus {
            let mut terms = net.net_inflow(i, &f);
            terms.extend((0..gens.len()).filter(|&k| gbus[k] == i).map(|k| (row[k].p, 1.0)));
            terms.push((sh[i], 1.0));
            let mut wind = 0.0;
            for (w, farm) in case.wind_farms.iter().enumerate().filter(|(w, _)| fbus[*w] == i) {
                wind += farm.rt[t];
                terms.push((sp[w], -1.0));
            }
            m.add_eq(format!("balance[{i},{t}]"), terms, load[i][t] - wind);
        }
        m.add_offset(fixed_cost[t]);
        units.push(row);
        shed.push(sh);
        spill.push(sp);
        theta.push(th);
        flows.push(f);
    }
    Ok(RtModel {
        case: case.clone(),
        penalties: *penalties,
        model: m,
        units,
        shed,
        spill,
        theta,
        flows,
        fixed_cost,
        commitment: da.commitment.clone(),
    })
}

/// Real-time cost terms of one period.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RtCosts {
    /// M^PG: operating, no-load, start-up and shut-down cost.
    pub generation: f64,
    /// M^LS.
    pub load_shedding: f64,
    /// M^WS.
    pub wind_spillage: f64,
    /// M^RD.
    pub redispatch: f64,
}

impl RtCosts {
    pub fn total(&self) -> f64 {
        self.generation + self.load_shedding + self.wind_spillage + self.redispatch
    }

    pub fn add(&self, o: &RtCosts) -> RtCosts {
        RtCosts {
            generation: self.generation + o.generation,
            load_shedding: self.load_shedding + o.load_shedding,
            wind_spillage: self.wind_spillage + o.wind_spillage,
            redispatch: self.redispatch + o.redispatch,
        }
    }
}

/// Real-time outcome. Per-unit series are `[g][t]`, per-bus `[i][t]`, per-farm `[w][t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtSolution {
    pub commitment: Vec<Vec<bool>>,
    pub dispatch: Vec<Vec<f64>>,
    pub shed: Vec<Vec<f64>>,
    pub spill: Vec<Vec<f64>>,
    pub up_i: Vec<Vec<f64>>,
    pub up_ii: Vec<Vec<f64>>,
    pub down_i: Vec<Vec<f64>>,
    pub down_ii: Vec<Vec<f64>>,
    pub flows: Vec<Vec<f64>>,
    pub angles: Vec<Vec<f64>>,
    pub costs: Vec<RtCosts>,
    pub penalties: RtPenalties,
    pub objective: f64,
    pub dual_objective: Option<f64>,
}

impl RtSolution {
    /// R^I_{g,t} as carried by the LP.
    pub fn range_i(&self, g: usize, t: usize) -> f64 {
        self.up_i[g][t] + self.down_i[g][t]
    }

    /// R^II_{g,t} as carried by the LP.
    pub fn range_ii(&self, g: usize, t: usize) -> f64 {
        self.up_ii[g][t] + self.down_ii[g][t]
    }

    pub fn total_costs(&self) -> RtCosts {
        self.costs.iter().fold(RtCosts::default(), |a, c| a.add(c))
    }

    /// Per-unit table `generator,period,p,range_i,range_ii`.
    pub fn write_csv<W: Write>(&self, case: &GridCase, writer: W) -> Result<(), SchedError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["generator", "period", "p", "range_i", "range_ii"])?;
        for (k, g) in case.generators.iter().enumerate() {
            for t in 0..self.costs.len() {
                w.write_record([
                    g.id.clone(),
                    t.to_string(),
                    self.dispatch[k][t].to_string(),
                    self.range_i(k, t).to_string(),
                    self.range_ii(k, t).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn transpose(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = rows.first().map_or(0, Vec::len);
    (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

impl RtModel {
    pub fn linear_model(&self) -> &LinearModel {
        &self.model
    }

    pub fn case(&self) -> &GridCase {
        &self.case
    }

    pub fn solve(&self, backend: &dyn SolverBackend, limits: &SolveLimits) -> Result<RtSolution, SchedError> {
        let raw = backend.solve(&self.model, limits)?;
        let val = |v: VarId| raw.value(v);
        let grid = |vars: &[Vec<VarId>]| transpose(vars.iter().map(|r| r.iter().map(|&v| val(v)).collect()).collect());
        let per_unit = |f: &dyn Fn(&UnitVars) -> VarId| {
            transpose(self.units.iter().map(|r| r.iter().map(|x| val(f(x))).collect()).collect())
        };
        let c = &self.penalties;
        let costs = (0..self.case.periods)
            .map(|t| RtCosts {
                generation: self.fixed_cost[t] + self.units[t].iter().map(|x| val(x.cost)).sum::<f64>(),
                load_shedding: c.load_shedding * self.shed[t].iter().map(|&v| val(v)).sum::<f64>(),
                wind_spillage: c.wind_spillage * self.spill[t].iter().map(|&v| val(v)).sum::<f64>(),
                redispatch: self.units[t]
                    .iter()
                    .map(|x| c.redispatch_i * (val(x.up_i) + val(x.down_i)) + c.redispatch_ii * (val(x.up_ii) + val(x.down_ii)))
                    .sum(),
            })
            .collect();
        Ok(RtSolution {
            commitment: self.commitment.clone(),
            dispatch: per_unit(&|x| x.p),
            shed: grid(&self.shed),
            spill: grid(&self.spill),
            up_i: per_unit(&|x| x.up_i),
            up_ii: per_unit(&|x| x.up_ii),
            down_i: per_unit(&|x| x.down_i),
            down_ii: per_unit(&|x| x.down_ii),
            flows: grid(&self.flows),
            angles: grid(&self.theta),
            costs,
            penalties: self.penalties,
            objective: raw.objective,
            dual_objective: raw.dual_objective(&self.model),
        })
    }
}

/// Deployed flexibility of one unit and period: `R = p^RT − p^DA` and its Range I/II parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Redispatch {
    pub total: f64,
    pub range_i: f64,
    pub range_ii: f64,
}

/// Evaluates the max/min definitions of the Range I/II split directly.
pub fn redispatch_split(p_rt: f64, p_da: f64, r_up: f64, r_down: f64) -> Redispatch {
    let r = p_rt - p_da;
    Redispatch {
        total: r,
        range_i: 0.0_f64.max(r.min(r_up)).max((-r).min(r_down)),
        range_ii: 0.0_f64.max(r - r_up).max(-r - r_down),
    }
}

/// `[g][t]` redispatch from aligned day-ahead and real-time solutions.
pub fn extract_redispatch(da: &DaSolution, rt: &RtSolution) -> Result<Vec<Vec<Redispatch>>, SchedError> {
    if da.dispatch.len() != rt.dispatch.len() || da.n_periods() != rt.costs.len() {
        return Err(SchedError::Dimension("day-ahead and real-time solutions are not aligned".into()));
    }
    Ok(da
        .dispatch
        .iter()
        .enumerate()
        .map(|(g, row)| {
            row.iter()
                .enumerate()
                .map(|(t, &p_da)| redispatch_split(rt.dispatch[g][t], p_da, da.reserve_up[g][t], da.reserve_down[g][t]))
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_cases() {
        assert_eq!(redispatch_split(50.0, 50.0, 4.0, 4.0), Redispatch { total: 0.0, range_i: 0.0, range_ii: 0.0 });
        assert_eq!(redispatch_split(54.0, 50.0, 4.0, 1.0), Redispatch { total: 4.0, range_i: 4.0, range_ii: 0.0 });
        // R = −(r⁻ + 3)
        assert_eq!(redispatch_split(45.0, 50.0, 9.0, 2.0), Redispatch { total: -5.0, range_i: 2.0, range_ii: 3.0 });
        assert_eq!(redispatch_split(60.0, 50.0, 6.0, 0.0), Redispatch { total: 10.0, range_i: 6.0, range_ii: 4.0 });
    }

    #[test]
    fn penalty_order_is_enforced() {
        let p = RtPenalties {
            redispatch_i: 6.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(RtPenalties::default().validate().is_ok());
    }
}
