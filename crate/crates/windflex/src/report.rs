use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use windflex_core::reserve::MethodKind;
use windflex_sched::ReservePolicy;

use crate::error::{PipelineError, Result, Stage};
use crate::metrics::{Activation, CostSummary, ReserveActivation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub policy: ReservePolicy,
    pub method: MethodKind,
    pub level: usize,
    pub scenarios: usize,
    pub backend: String,
    pub version: String,
    /// Wall-clock time of the run; the only field that varies between identical runs.
    pub generated_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayReport {
    pub day: usize,
    pub start: String,
    pub costs: CostSummary,
    pub raf: ReserveActivation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub metadata: ReportMetadata,
    pub days: Vec<DayReport>,
    pub aggregate: CostSummary,
    pub raf: ReserveActivation,
}

fn check_costs(c: &CostSummary, what: &str) -> Result<()> {
    let bad = |m: String| Err(PipelineError::invalid(Stage::Evaluate, format!("{what}: {m}")));
    let sum = c.rt_generation + c.rt_load_shedding + c.rt_wind_spillage + c.rt_redispatch;
    if (sum - c.rt_total).abs() > 1e-6 * c.rt_total.abs().max(1.0) {
        return bad(format!("RT total {} differs from its components {sum}", c.rt_total));
    }
    let terms = [
        ("scuc_generation", c.scuc_generation),
        ("reserve_penalty", c.reserve_penalty),
        ("rt_generation", c.rt_generation),
        ("rt_load_shedding", c.rt_load_shedding),
        ("rt_wind_spillage", c.rt_wind_spillage),
        ("rt_redispatch", c.rt_redispatch),
    ];
    for (name, v) in terms {
        if !(v >= -1e-6) {
            return bad(format!("{name} = {v} is negative"));
        }
    }
    Ok(())
}

impl EvaluationReport {
    /// Cost identities and signs.
    pub fn validate(&self) -> Result<()> {
        for d in &self.days {
            check_costs(&d.costs, &format!("day {}", d.day))?;
        }
        check_costs(&self.aggregate, "aggregate")
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| PipelineError::new(Stage::Evaluate, e))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| PipelineError::new(Stage::Evaluate, e))
    }

    /// Same report with the wall-clock stamp blanked.
    pub fn without_timestamp(&self) -> Self {
        let mut r = self.clone();
        r.metadata.generated_at.clear();
        r
    }

    /// Fixed-width cost and activation tables.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let m = &self.metadata;
        let _ = writeln!(out, "run {}  policy {}  reserve {} level {}", m.name, m.policy.name(), method_name(m.method), m.level);
        let _ = writeln!(out, "seed {}  scenarios {}  config {}", m.seed, m.scenarios, &m.config_hash[..m.config_hash.len().min(12)]);
        let _ = writeln!(out);
        let mut header = format!("{:<22}", "cost ($)");
        for d in &self.days {
            header += &format!("{:>16}", format!("day {}", d.day));
        }
        header += &format!("{:>16}", "total");
        let _ = writeln!(out, "{header}");
        let rows: [(&str, fn(&CostSummary) -> f64); 8] = [
            ("SCUC generation", |c| c.scuc_generation),
            ("SCUC reserve penalty", |c| c.reserve_penalty),
            ("RT generation", |c| c.rt_generation),
            ("RT load shedding", |c| c.rt_load_shedding),
            ("RT wind spillage", |c| c.rt_wind_spillage),
            ("RT redispatch", |c| c.rt_redispatch),
            ("RT total", |c| c.rt_total),
            ("reserve shortfall MW", |c| c.reserve_shortfall_mw),
        ];
        for (label, get) in rows {
            let mut line = format!("{label:<22}");
            for d in &self.days {
                line += &format!("{:>16.2}", get(&d.costs));
            }
            line += &format!("{:>16.2}", get(&self.aggregate));
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out);
        let fmt = |a: &Activation, mean: bool| match if mean { a.mean } else { a.ratio } {
            Some(v) => format!("{v:>12.4}"),
            None => format!("{:>12}", "undefined"),
        };
        let _ = writeln!(out, "{:<22}{:>12}{:>12}{:>12}", "activation", "RAF+", "RAF-", "total");
        let r = &self.raf;
        let _ = writeln!(out, "{:<22}{}{}{:>12.4}", "ratio of sums", fmt(&r.up, false), fmt(&r.down, false), r.total);
        let _ = writeln!(out, "{:<22}{}{}{:>12.4}", "mean of ratios", fmt(&r.up, true), fmt(&r.down, true), r.total_mean);
        out
    }
}

pub fn method_name(m: MethodKind) -> &'static str {
    match m {
        MethodKind::Extent => "extent",
        MethodKind::Probability => "probability",
        MethodKind::Risk => "risk",
    }
}
