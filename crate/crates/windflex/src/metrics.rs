//! Reserve activation factors and cost breakdowns.

use serde::{Deserialize, Serialize};
use windflex_sched::{DaSolution, RtCosts, RtSolution};

use crate::error::{PipelineError, Result, Stage};

/// One activation factor: ratio of sums, mean of per-cell ratios, and how many
/// (g, t) cells carried scheduled reserve. `None` when no cell did.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Activation {
    pub ratio: Option<f64>,
    pub mean: Option<f64>,
    pub cells: usize,
    pub deployed_mw: f64,
    pub scheduled_mw: f64,
}

impl Activation {
    pub fn undefined(&self) -> bool {
        self.ratio.is_none()
    }

    fn from_cells(cells: &[(f64, f64)]) -> Self {
        let (dep, sch) = cells.iter().fold((0.0, 0.0), |(a, b), &(d, r)| (a + d, b + r));
        let n = cells.len();
        Activation {
            ratio: (n > 0).then(|| dep / sch),
            mean: (n > 0).then(|| cells.iter().map(|&(d, r)| d / r).sum::<f64>() / n as f64),
            cells: n,
            deployed_mw: dep,
            scheduled_mw: sch,
        }
    }

    fn merge(parts: &[Activation]) -> Self {
        let cells: usize = parts.iter().map(|a| a.cells).sum();
        let dep: f64 = parts.iter().map(|a| a.deployed_mw).sum();
        let sch: f64 = parts.iter().map(|a| a.scheduled_mw).sum();
        let mean_sum: f64 = parts.iter().filter_map(|a| a.mean.map(|m| m * a.cells as f64)).sum();
        Activation {
            ratio: (cells > 0).then(|| dep / sch),
            mean: (cells > 0).then(|| mean_sum / cells as f64),
            cells,
            deployed_mw: dep,
            scheduled_mw: sch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReserveActivation {
    pub up: Activation,
    pub down: Activation,
    /// Sum of the defined ratio-of-sums factors.
    pub total: f64,
    /// Sum of the defined mean factors.
    pub total_mean: f64,
}

impl ReserveActivation {
    fn from_parts(up: Activation, down: Activation) -> Self {
        Self {
            total: up.ratio.unwrap_or(0.0) + down.ratio.unwrap_or(0.0),
            total_mean: up.mean.unwrap_or(0.0) + down.mean.unwrap_or(0.0),
            up,
            down,
        }
    }

    /// Pools several days as if they were one horizon.
    pub fn merge(parts: &[ReserveActivation]) -> Self {
        let up: Vec<Activation> = parts.iter().map(|p| p.up).collect();
        let down: Vec<Activation> = parts.iter().map(|p| p.down).collect();
        Self::from_parts(Activation::merge(&up), Activation::merge(&down))
    }
}

fn aligned(da: &DaSolution, rt: &RtSolution) -> Result<()> {
    let ok = da.dispatch.len() == rt.dispatch.len()
        && da.dispatch.iter().zip(&rt.dispatch).all(|(a, b)| a.len() == b.len())
        && da.reserve_up.len() == da.dispatch.len()
        && da.reserve_down.len() == da.dispatch.len();
    if ok {
        Ok(())
    } else {
        Err(PipelineError::invalid(Stage::Evaluate, "day-ahead and real-time solutions are not aligned"))
    }
}

/// RAF⁺ = Σ max(0, P^RT − P^DA) / Σ r⁺ and RAF⁻ = Σ max(0, P^DA − P^RT) / Σ r⁻,
/// both over the (g, t) cells with the relevant scheduled reserve above zero.
pub fn reserve_activation_factors(da: &DaSolution, rt: &RtSolution) -> Result<ReserveActivation> {
    aligned(da, rt)?;
    let mut up = Vec::new();
    let mut down = Vec::new();
    for g in 0..da.dispatch.len() {
        for t in 0..da.dispatch[g].len() {
            let dev = rt.dispatch[g][t] - da.dispatch[g][t];
            if da.reserve_up[g][t] > 0.0 {
                up.push((dev.max(0.0), da.reserve_up[g][t]));
            }
            if da.reserve_down[g][t] > 0.0 {
                down.push(((-dev).max(0.0), da.reserve_down[g][t]));
            }
        }
    }
    Ok(ReserveActivation::from_parts(
        Activation::from_cells(&up),
        Activation::from_cells(&down),
    ))
}

/// Cost terms of one horizon, $.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostSummary {
    /// Day-ahead SCUC generation cost (operating, no-load, start-up, shut-down).
    pub scuc_generation: f64,
    /// Penalty paid in the SCUC for relaxed reserve requirements.
    pub reserve_penalty: f64,
    /// Relaxed reserve requirement, MW summed over periods.
    pub reserve_shortfall_mw: f64,
    pub rt_generation: f64,
    pub rt_load_shedding: f64,
    pub rt_wind_spillage: f64,
    pub rt_redispatch: f64,
    pub rt_total: f64,
}

impl CostSummary {
    pub fn add(&self, o: &CostSummary) -> CostSummary {
        let rt = self.rt_costs().add(&o.rt_costs());
        CostSummary {
            scuc_generation: self.scuc_generation + o.scuc_generation,
            reserve_penalty: self.reserve_penalty + o.reserve_penalty,
            reserve_shortfall_mw: self.reserve_shortfall_mw + o.reserve_shortfall_mw,
            rt_generation: rt.generation,
            rt_load_shedding: rt.load_shedding,
            rt_wind_spillage: rt.wind_spillage,
            rt_redispatch: rt.redispatch,
            rt_total: rt.total(),
        }
    }

    pub fn rt_costs(&self) -> RtCosts {
        RtCosts {
            generation: self.rt_generation,
            load_shedding: self.rt_load_shedding,
            wind_spillage: self.rt_wind_spillage,
            redispatch: self.rt_redispatch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub summary: CostSummary,
    /// Real-time terms per period.
    pub periods: Vec<RtCosts>,
    /// RT LP objective, for reconciliation against `summary.rt_total`.
    pub rt_objective: f64,
}

pub fn cost_breakdown(rt: &RtSolution, da: &DaSolution) -> CostBreakdown {
    let rtc = rt.total_costs();
    CostBreakdown {
        summary: CostSummary {
            scuc_generation: da.costs.generation(),
            reserve_penalty: da.costs.reserve_penalty,
            reserve_shortfall_mw: da.total_slack(),
            rt_generation: rtc.generation,
            rt_load_shedding: rtc.load_shedding,
            rt_wind_spillage: rtc.wind_spillage,
            rt_redispatch: rtc.redispatch,
            rt_total: rtc.total(),
        },
        periods: rt.costs.clone(),
        rt_objective: rt.objective,
    }
}
