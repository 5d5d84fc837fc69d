//! Day-ahead security-constrained unit commitment with flexibility reserve.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use windflex_core::ReserveSchedule;

use crate::case::GridCase;
use crate::lp::{LinearModel, SolveLimits, SolverBackend, VarId};
use crate::network::Network;
use crate::SchedError;

/// Where flexibility reserve requirements are imposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReservePolicy {
    None,
    System,
    Zonal,
    Nodal,
}

impl ReservePolicy {
    pub const ALL: [ReservePolicy; 4] = [Self::None, Self::System, Self::Zonal, Self::Nodal];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::System => "system",
            Self::Zonal => "zonal",
            Self::Nodal => "nodal",
        }
    }

    /// Reserve entities the policy expects: `system`, zone ids or bus ids.
    pub fn entities(self, case: &GridCase) -> Vec<String> {
        match self {
            Self::None => Vec::new(),
            Self::System => vec![SYSTEM_ENTITY.to_string()],
            Self::Zonal => case.zones(),
            Self::Nodal => case.buses.iter().map(|b| b.id.clone()).collect(),
        }
    }
}

impl std::str::FromStr for ReservePolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown reserve policy `{s}`"))
    }
}

/// Entity name of a system-wide reserve schedule.
pub const SYSTEM_ENTITY: &str = "system";

/// Reading of the largest-unit contingency constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContingencyRule {
    /// Σ_g' r^S_g' ≥ p_g + r^S_g for every g, as written.
    #[default]
    Literal,
    /// Σ_{g'≠g} r^S_g' ≥ p_g + r^S_g: the other units cover the loss of g.
    ExcludeOwn,
    /// No per-unit contingency constraint (the demand-share one stays).
    Off,
}

/// Form of the 60-min ramp constraints once flexibility reserve exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RampForm {
    /// p_t + r⁺_t − p_{t−1} + r⁻_{t−1} ≤ …, p_{t−1} + r⁺_{t−1} − p_t + r⁻_t ≤ …
    #[default]
    Printed,
    /// Only the current period's reserve: p_t + r⁺_t − p_{t−1} ≤ …, p_{t−1} − p_t + r⁻_t ≤ …
    CurrentPeriod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScucOptions {
    pub contingency: ContingencyRule,
    pub ramp: RampForm,
    /// $/MW price of relaxing any reserve requirement.
    pub reserve_penalty: f64,
}

impl Default for ScucOptions {
    fn default() -> Self {
        Self {
            contingency: ContingencyRule::Literal,
            ramp: RampForm::Printed,
            reserve_penalty: 500.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct UnitVars {
    u: VarId,
    v: VarId,
    w: VarId,
    p: VarId,
    rs: VarId,
    cost: VarId,
    rp: Option<VarId>,
    rm: Option<VarId>,
}

#[derive(Debug, Clone)]
struct SlackVar {
    requirement: String,
    period: usize,
    var: VarId,
}

/// A built SCUC model; owns its case copy and variable map.
#[derive(Debug, Clone)]
pub struct ScucModel {
    case: GridCase,
    policy: ReservePolicy,
    options: ScucOptions,
    model: LinearModel,
    /// `units[t][g]`.
    units: Vec<Vec<UnitVars>>,
    theta: Vec<Vec<VarId>>,
    flows: Vec<Vec<VarId>>,
    /// Nodal policy: `[up, down]` × `(angles[t], flows[t])`.
    reserve_net: Option<[(Vec<Vec<VarId>>, Vec<Vec<VarId>>); 2]>,
    slacks: Vec<SlackVar>,
}

/// Requirement per entity and period, `(up, down)`.
type Requirements = BTreeMap<String, (Vec<f64>, Vec<f64>)>;

fn requirements(
    case: &GridCase,
    reserve: Option<&[ReserveSchedule]>,
    policy: ReservePolicy,
) -> Result<Requirements, SchedError> {
    let entities = policy.entities(case);
    let t = case.periods;
    let mut req: Requirements = entities.iter().map(|e| (e.clone(), (vec![0.0; t], vec![0.0; t]))).collect();
    if policy == ReservePolicy::None {
        return Ok(req);
    }
    let schedules = reserve.ok_or_else(|| SchedError::Reserve(format!("policy {} needs a reserve schedule", policy.name())))?;
    let mut seen = std::collections::BTreeSet::new();
    for s in schedules {
        let slot = req.get_mut(&s.entity).ok_or_else(|| {
            SchedError::Reserve(format!("reserve entity `{}` not found for policy {}", s.entity, policy.name()))
        })?;
        if !seen.insert(s.entity.clone()) {
            return Err(SchedError::Reserve(format!("duplicate reserve entity `{}`", s.entity)));
        }
        if s.up_mw.len() != t || s.down_mw.len() != t {
            return Err(SchedError::Dimension(format!("reserve `{}` needs {t} periods", s.entity)));
        }
        if s.up_mw.iter().chain(&s.down_mw).any(|&r| !(r >= 0.0 && r.is_finite())) {
            return Err(SchedError::Reserve(format!("reserve `{}` must be finite and non-negative", s.entity)));
        }
        *slot = (s.up_mw.clone(), s.down_mw.clone());
    }
    Ok(req)
}

/// Builds the day-ahead SCUC for `policy`. Flexibility reserve variables exist
/// only when the policy is not `none`.
pub fn build_scuc(
    case: &GridCase,
    reserve: Option<&[ReserveSchedule]>,
    policy: ReservePolicy,
    options: &ScucOptions,
) -> Result<ScucModel, SchedError> {
    case.validate()?;
    if !(options.reserve_penalty >= 0.0) {
        return Err(SchedError::InvalidArgument("reserve penalty must be non-negative".into()));
    }
    let req = requirements(case, reserve, policy)?;
    let flex = policy != ReservePolicy::None;
    let net = Network::new(case);
    let gbus = case.generator_buses();
    let load = case.bus_load_da();
    let wind = case.bus_wind_da();
    let n_t = case.periods;
    let gens = &case.generators;
    let mut m = LinearModel::new();
    let mut slacks = Vec::new();
    let penalty = options.reserve_penalty;
    let mut slack = |m: &mut LinearModel, requirement: String, period: usize| {
        let var = m.add_continuous(format!("slack[{requirement},{period}]"), 0.0, f64::INFINITY, penalty);
        slacks.push(SlackVar { requirement, period, var });
        var
    };

    let units: Vec<Vec<UnitVars>> = (0..n_t)
        .map(|t| {
            gens.iter()
                .enumerate()
                .map(|(k, g)| UnitVars {
                    u: m.add_binary(format!("u[{k},{t}]"), g.no_load_cost),
                    v: m.add_continuous(format!("v[{k},{t}]"), 0.0, 1.0, g.startup_cost),
                    w: m.add_continuous(format!("w[{k},{t}]"), 0.0, 1.0, g.shutdown_cost),
                    p: m.add_continuous(format!("p[{k},{t}]"), 0.0, g.p_max, 0.0),
                    rs: m.add_continuous(format!("rs[{k},{t}]"), 0.0, g.ramp_10, 0.0),
                    cost: m.add_continuous(format!("cost[{k},{t}]"), 0.0, f64::INFINITY, 1.0),
                    rp: flex.then(|| m.add_continuous(format!("rp[{k},{t}]"), 0.0, g.ramp_10, 0.0)),
                    rm: flex.then(|| m.add_continuous(format!("rm[{k},{t}]"), 0.0, g.ramp_10, 0.0)),
                })
                .collect()
        })
        .collect();

    for (k, g) in gens.iter().enumerate() {
        let init = g.initial;
        let u0 = if init.on { 1.0 } else { 0.0 };
        // residual minimum up/down obligation from before the horizon
        if let Some(h) = init.periods_in_state {
            let (need, value) = if init.on { (g.min_up, 1.0) } else { (g.min_down, 0.0) };
            for t in 0..need.saturating_sub(h).min(n_t) {
                m.set_bounds(units[t][k].u, value, value);
            }
        }
        for t in 0..n_t {
            let x = units[t][k];
            for (o, s) in g.segments.iter().enumerate() {
                m.add_ge(format!("pwl[{k},{o},{t}]"), vec![(x.cost, 1.0), (x.p, -s.c1), (x.u, -s.c0)], 0.0);
            }
            let up_window = g.min_up.max(1);
            let mut row: Vec<(VarId, f64)> =
                ((t + 1).saturating_sub(up_window)..=t).map(|s| (units[s][k].v, 1.0)).collect();
            row.push((x.u, -1.0));
            m.add_le(format!("min_up[{k},{t}]"), row, 0.0);
            let down_window = g.min_down.max(1);
            let mut row: Vec<(VarId, f64)> =
                ((t + 1).saturating_sub(down_window)..=t).map(|s| (units[s][k].w, 1.0)).collect();
            row.push((x.u, 1.0));
            m.add_le(format!("min_down[{k},{t}]"), row, 1.0);

            let mut row = vec![(x.v, 1.0), (x.w, -1.0), (x.u, -1.0)];
            let rhs = if t == 0 {
                -u0
            } else {
                row.push((units[t - 1][k].u, 1.0));
                0.0
            };
            m.add_eq(format!("transition[{k},{t}]"), row, rhs);

            let mut lower = vec![(x.p, 1.0), (x.u, -g.p_min)];
            let mut upper = vec![(x.u, g.p_max), (x.p, -1.0), (x.rs, -1.0)];
            if let (Some(rp), Some(rm)) = (x.rp, x.rm) {
                lower.push((rm, -1.0));
                upper.push((rp, -1.0));
            }
            m.add_ge(format!("p_lower[{k},{t}]"), lower, 0.0);
            m.add_ge(format!("p_upper[{k},{t}]"), upper, 0.0);

            // 60-min ramping; the previous period is the initial state at t = 0
            let mut up = vec![(x.p, 1.0), (x.v, -g.p_min)];
            let mut down = vec![(x.p, -1.0), (x.u, -g.ramp_60), (x.w, -g.p_min)];
            let (mut up_rhs, mut down_rhs) = (0.0, 0.0);
            if t == 0 {
                up_rhs += init.power + g.ramp_60 * u0;
                down_rhs -= init.power;
            } else {
                let prev = units[t - 1][k];
                up.extend([(prev.p, -1.0), (prev.u, -g.ramp_60)]);
                down.push((prev.p, 1.0));
                if let (Some(rp), Some(rm)) = (prev.rp, prev.rm) {
                    if options.ramp == RampForm::Printed {
                        up.push((rm, 1.0));
                        down.push((rp, 1.0));
                    }
                }
            }
            if let (Some(rp), Some(rm)) = (x.rp, x.rm) {
                up.push((rp, 1.0));
                down.push((rm, 1.0));
            }
            m.add_le(format!("ramp_up[{k},{t}]"), up, up_rhs);
            m.add_le(format!("ramp_down[{k},{t}]"), down, down_rhs);
        }
    }

    let mut theta = Vec::with_capacity(n_t);
    let mut flows = Vec::with_capacity(n_t);
    let mut reserve_net = (policy == ReservePolicy::Nodal).then(|| [(Vec::new(), Vec::new()), (Vec::new(), Vec::new())]);
    let eps = case.load_extent;
    for t in 0..n_t {
        let (th, f) = net.add_flows(&mut m, "", t, true);
        for i in 0..net.n_bus {
            let mut row = net.net_inflow(i, &f);
            row.extend((0..gens.len()).filter(|&k| gbus[k] == i).map(|k| (units[t][k].p, 1.0)));
            m.add_eq(format!("balance[{i},{t}]"), row, load[i][t] - wind[i][t]);
        }

        let total_load: f64 = load.iter().map(|l| l[t]).sum();
        let all_rs: Vec<(VarId, f64)> = units[t].iter().map(|x| (x.rs, 1.0)).collect();
        if options.contingency != ContingencyRule::Off {
            for (k, x) in units[t].iter().enumerate() {
                let s = slack(&mut m, format!("contingency:{}", gens[k].id), t);
                let own = if options.contingency == ContingencyRule::ExcludeOwn { -2.0 } else { -1.0 };
                let mut row: Vec<(VarId, f64)> =
                    all_rs.iter().map(|&(v, a)| if v == x.rs { (v, a + own) } else { (v, a) }).collect();
                row.extend([(x.p, -1.0), (s, 1.0)]);
                m.add_ge(format!("contingency_unit[{k},{t}]"), row, 0.0);
            }
        }
        let s = slack(&mut m, "contingency:demand".into(), t);
        let mut row = all_rs.clone();
        row.push((s, 1.0));
        m.add_ge(format!("contingency_demand[{t}]"), row, case.contingency_fraction * total_load);

        match policy {
            ReservePolicy::None => {}
            ReservePolicy::System | ReservePolicy::Zonal => {
                let groups: Vec<(String, Vec<usize>)> = if policy == ReservePolicy::System {
                    vec![(SYSTEM_ENTITY.to_string(), (0..net.n_bus).collect())]
                } else {
                    case.zones()
                        .into_iter()
                        .map(|z| {
                            let buses = (0..net.n_bus).filter(|&i| case.buses[i].zone == z).collect();
                            (z, buses)
                        })
                        .collect()
                };
                for (entity, buses) in groups {
                    let (up, down) = &req[&entity];
                    let zone_load: f64 = buses.iter().map(|&i| load[i][t]).sum();
                    let members: Vec<usize> = (0..gens.len()).filter(|k| buses.contains(&gbus[*k])).collect();
                    for (dir, need) in [("up", up[t]), ("down", down[t])] {
                        let s = slack(&mut m, format!("{dir}:{entity}"), t);
                        let mut row: Vec<(VarId, f64)> = members
                            .iter()
                            .map(|&k| {
                                let x = units[t][k];
                                (if dir == "up" { x.rp } else { x.rm }.expect("flex vars"), 1.0)
                            })
                            .collect();
                        row.push((s, 1.0));
                        m.add_ge(format!("reserve_{dir}[{entity},{t}]"), row, need + eps * zone_load);
                    }
                }
            }
            ReservePolicy::Nodal => {
                let rn = reserve_net.as_mut().expect("nodal reserve network");
                for (d, dir) in ["up", "down"].into_iter().enumerate() {
                    let (thd, fd) = net.add_flows(&mut m, &format!("{dir}_"), t, false);
                    for i in 0..net.n_bus {
                        let entity = &case.buses[i].id;
                        let need = if dir == "up" { req[entity].0[t] } else { req[entity].1[t] };
                        let s = slack(&mut m, format!("{dir}:{entity}"), t);
                        let mut row = net.net_inflow(i, &fd);
                        row.extend((0..gens.len()).filter(|&k| gbus[k] == i).map(|k| {
                            let x = units[t][k];
                            (if dir == "up" { x.rp } else { x.rm }.expect("flex vars"), 1.0)
                        }));
                        row.push((s, 1.0));
                        m.add_eq(format!("reserve_{dir}[{entity},{t}]"), row, need + eps * load[i][t]);
                    }
                    // deployed downward reserve reverses the injections, so it
                    // superimposes with a negative sign
                    let sign = if dir == "up" { 1.0 } else { -1.0 };
                    for (l, cap) in net.limit.iter().enumerate() {
                        if let Some(cap) = *cap {
                            m.add_row(format!("limit_{dir}[{l},{t}]"), -cap, cap, vec![(f[l], 1.0), (fd[l], sign)]);
                        }
                    }
                    rn[d].0.push(thd);
                    rn[d].1.push(fd);
                }
            }
        }
        theta.push(th);
        flows.push(f);
    }

    Ok(ScucModel {
        case: case.clone(),
        policy,
        options: *options,
        model: m,
        units,
        theta,
        flows,
        reserve_net,
        slacks,
    })
}

/// Cost terms of the day-ahead objective.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DaCosts {
    /// Σ piecewise operating cost.
    pub operating: f64,
    pub no_load: f64,
    pub startup: f64,
    pub shutdown: f64,
    /// Penalty paid on relaxed reserve requirements.
    pub reserve_penalty: f64,
}

impl DaCosts {
    /// SCUC generation cost: operating + no-load + start-up + shut-down.
    pub fn generation(&self) -> f64 {
        self.operating + self.no_load + self.startup + self.shutdown
    }

    pub fn total(&self) -> f64 {
        self.generation() + self.reserve_penalty
    }
}

/// Angle changes `[i][t]` and flows `[l][t]` caused by deploying one direction of reserve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReserveNetwork {
    pub angles: Vec<Vec<f64>>,
    pub flows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementSlack {
    pub requirement: String,
    pub period: usize,
    pub mw: f64,
}

/// Day-ahead schedule. Per-unit series are indexed `[g][t]`, per-line `[l][t]`, per-bus `[i][t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaSolution {
    pub policy: ReservePolicy,
    pub commitment: Vec<Vec<bool>>,
    pub startup: Vec<Vec<f64>>,
    pub shutdown: Vec<Vec<f64>>,
    pub dispatch: Vec<Vec<f64>>,
    pub spinning: Vec<Vec<f64>>,
    pub reserve_up: Vec<Vec<f64>>,
    pub reserve_down: Vec<Vec<f64>>,
    pub flows: Vec<Vec<f64>>,
    pub angles: Vec<Vec<f64>>,
    /// Superimposed angles and flows of deployed up/down reserve (nodal policy only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reserve_network: Option<[ReserveNetwork; 2]>,
    pub objective: f64,
    pub costs: DaCosts,
    /// Non-zero only where a requirement was relaxed.
    pub slacks: Vec<RequirementSlack>,
    pub mip_gap: f64,
}

impl DaSolution {
    pub fn n_units(&self) -> usize {
        self.dispatch.len()
    }

    pub fn n_periods(&self) -> usize {
        self.dispatch.first().map_or(0, Vec::len)
    }

    /// Total relaxed requirement, MW.
    pub fn total_slack(&self) -> f64 {
        self.slacks.iter().map(|s| s.mw).sum()
    }

    /// Per-unit schedule table `generator,period,u,v,w,p,r_s,r_up,r_down`.
    pub fn write_csv<W: Write>(&self, case: &GridCase, writer: W) -> Result<(), SchedError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["generator", "period", "u", "v", "w", "p", "r_s", "r_up", "r_down"])?;
        for (k, g) in case.generators.iter().enumerate() {
            for t in 0..self.n_periods() {
                w.write_record([
                    g.id.clone(),
                    t.to_string(),
                    u8::from(self.commitment[k][t]).to_string(),
                    self.startup[k][t].to_string(),
                    self.shutdown[k][t].to_string(),
                    self.dispatch[k][t].to_string(),
                    self.spinning[k][t].to_string(),
                    self.reserve_up[k][t].to_string(),
                    self.reserve_down[k][t].to_string(),
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

impl ScucModel {
    pub fn case(&self) -> &GridCase {
        &self.case
    }

    pub fn policy(&self) -> ReservePolicy {
        self.policy
    }

    pub fn options(&self) -> &ScucOptions {
        &self.options
    }

    pub fn linear_model(&self) -> &LinearModel {
        &self.model
    }

    /// Fixes the commitment `u[g][t]` and drops integrality, leaving an LP.
    pub fn fix_commitment(&mut self, u: &[Vec<bool>]) -> Result<(), SchedError> {
        let n_t = self.case.periods;
        if u.len() != self.case.generators.len() || u.iter().any(|r| r.len() != n_t) {
            return Err(SchedError::Dimension("commitment must be [generators][periods]".into()));
        }
        for (k, row) in u.iter().enumerate() {
            for (t, &on) in row.iter().enumerate() {
                let x = self.units[t][k].u;
                let cur = self.model.var(x);
                let val = if on { 1.0 } else { 0.0 };
                if val < cur.lower || val > cur.upper {
                    return Err(SchedError::Solver(crate::lp::SolverError::Infeasible { conflict: None }));
                }
                self.model.set_bounds(x, val, val);
                self.model.set_integer(x, false);
            }
        }
        Ok(())
    }

    pub fn solve(&self, backend: &dyn SolverBackend, limits: &SolveLimits) -> Result<DaSolution, SchedError> {
        let raw = backend.solve(&self.model, limits)?;
        let val = |v: VarId| raw.value(v);
        let per_unit = |f: &dyn Fn(&UnitVars) -> f64| -> Vec<Vec<f64>> {
            transpose(self.units.iter().map(|row| row.iter().map(f).collect()).collect())
        };
        let gens = &self.case.generators;
        let mut costs = DaCosts::default();
        for row in &self.units {
            for (x, g) in row.iter().zip(gens) {
                costs.operating += val(x.cost);
                costs.no_load += val(x.u) * g.no_load_cost;
                costs.startup += val(x.v) * g.startup_cost;
                costs.shutdown += val(x.w) * g.shutdown_cost;
            }
        }
        let slacks: Vec<RequirementSlack> = self
            .slacks
            .iter()
            .map(|s| RequirementSlack {
                requirement: s.requirement.clone(),
                period: s.period,
                mw: val(s.var).max(0.0),
            })
            .collect();
        costs.reserve_penalty = self.options.reserve_penalty * slacks.iter().map(|s| s.mw).sum::<f64>();
        let opt = |o: Option<VarId>| o.map_or(0.0, val);
        let grid = |vars: &[Vec<VarId>]| transpose(vars.iter().map(|r| r.iter().map(|&v| val(v)).collect()).collect());
        Ok(DaSolution {
            policy: self.policy,
            commitment: per_unit(&|x| val(x.u))
                .into_iter()
                .map(|r| r.into_iter().map(|u| u > 0.5).collect())
                .collect(),
            startup: per_unit(&|x| val(x.v)),
            shutdown: per_unit(&|x| val(x.w)),
            dispatch: per_unit(&|x| val(x.p)),
            spinning: per_unit(&|x| val(x.rs)),
            reserve_up: per_unit(&|x| opt(x.rp)),
            reserve_down: per_unit(&|x| opt(x.rm)),
            flows: grid(&self.flows),
            angles: grid(&self.theta),
            reserve_network: self.reserve_net.as_ref().map(|dirs| {
                dirs.clone().map(|(th, f)| ReserveNetwork {
                    angles: grid(&th),
                    flows: grid(&f),
                })
            }),
            objective: raw.objective,
            costs,
            slacks,
            mip_gap: raw.mip_gap,
        })
    }
}
