//! Solver-neutral linear/mixed-integer model and the backends that solve it.

use std::num::NonZeroU32;

use highs::{HighsModelStatus, RowProblem, Sense};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(usize);

impl RowId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub terms: Vec<(VarId, f64)>,
}

/// Minimization problem `min c·x + offset` over `lower ≤ A x ≤ upper`, `l ≤ x ≤ u`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearModel {
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
    offset: f64,
}

impl LinearModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.push_var(name.into(), lower, upper, cost, false)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        self.push_var(name.into(), 0.0, 1.0, cost, true)
    }

    fn push_var(&mut self, name: String, lower: f64, upper: f64, cost: f64, integer: bool) -> VarId {
        self.vars.push(Variable {
            name,
            lower,
            upper,
            cost,
            integer,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_row(&mut self, name: impl Into<String>, lower: f64, upper: f64, terms: Vec<(VarId, f64)>) -> RowId {
        self.rows.push(Constraint {
            name: name.into(),
            lower,
            upper,
            terms,
        });
        RowId(self.rows.len() - 1)
    }

    pub fn add_eq(&mut self, name: impl Into<String>, terms: Vec<(VarId, f64)>, rhs: f64) -> RowId {
        self.add_row(name, rhs, rhs, terms)
    }

    pub fn add_le(&mut self, name: impl Into<String>, terms: Vec<(VarId, f64)>, rhs: f64) -> RowId {
        self.add_row(name, f64::NEG_INFINITY, rhs, terms)
    }

    pub fn add_ge(&mut self, name: impl Into<String>, terms: Vec<(VarId, f64)>, rhs: f64) -> RowId {
        self.add_row(name, rhs, f64::INFINITY, terms)
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.vars[var.0].cost = cost;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.vars[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn set_integer(&mut self, var: VarId, integer: bool) {
        self.vars[var.0].integer = integer;
    }

    pub fn add_offset(&mut self, c: f64) {
        self.offset += c;
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn is_mip(&self) -> bool {
        self.vars.iter().any(|v| v.integer)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.offset + self.vars.iter().zip(x).map(|(v, x)| v.cost * x).sum::<f64>()
    }

    pub fn activity(&self, row: RowId, x: &[f64]) -> f64 {
        self.rows[row.0].terms.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Largest bound, row or integrality violation of `x`, with the name of the offender.
    pub fn max_violation(&self, x: &[f64]) -> (f64, String) {
        let mut worst = (0.0, String::new());
        let mut note = |amount: f64, name: &str| {
            if amount > worst.0 {
                worst = (amount, name.to_string());
            }
        };
        for (v, &x) in self.vars.iter().zip(x) {
            note(v.lower - x, &v.name);
            note(x - v.upper, &v.name);
            if v.integer {
                note((x - x.round()).abs(), &v.name);
            }
        }
        for (k, r) in self.rows.iter().enumerate() {
            let a = self.activity(RowId(k), x);
            note(r.lower - a, &r.name);
            note(a - r.upper, &r.name);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveLimits {
    /// Relative MIP gap at which a solution counts as optimal.
    pub mip_rel_gap: f64,
    pub time_limit_s: Option<f64>,
    pub threads: Option<u32>,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            mip_rel_gap: 1e-3,
            time_limit_s: None,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Gap-certified within the configured relative gap.
    WithinGap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    /// Row and column duals; LPs only.
    pub row_duals: Option<Vec<f64>>,
    pub col_duals: Option<Vec<f64>>,
    pub mip_gap: f64,
}

impl RawSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    /// Dual objective `offset + Σ y·(active row bound) + Σ z·(active column bound)`.
    pub fn dual_objective(&self, model: &LinearModel) -> Option<f64> {
        let (y, z) = (self.row_duals.as_ref()?, self.col_duals.as_ref()?);
        let active = |d: f64, lo: f64, hi: f64| {
            if d.abs() <= 1e-12 {
                0.0
            } else if d > 0.0 {
                d * lo
            } else {
                d * hi
            }
        };
        let rows: f64 = model.rows.iter().zip(y).map(|(r, &d)| active(d, r.lower, r.upper)).sum();
        let cols: f64 = model.vars.iter().zip(z).map(|(v, &d)| active(d, v.lower, v.upper)).sum();
        Some(model.offset + rows + cols)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    /// `conflict` lists the irreducible infeasible constraint set when the backend reports one.
    #[error("model is infeasible")]
    Infeasible { conflict: Option<Vec<String>> },
    #[error("model is unbounded")]
    Unbounded,
    #[error("time limit reached (best objective {objective:?})")]
    TimeLimit {
        objective: Option<f64>,
        incumbent: Option<Vec<f64>>,
    },
    #[error("solver failure: {0}")]
    Backend(String),
    #[error("unknown solver backend `{0}`")]
    UnknownBackend(String),
}

pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, model: &LinearModel, limits: &SolveLimits) -> Result<RawSolution, SolverError>;
}

/// Backend by configuration name.
pub fn backend(name: &str) -> Result<Box<dyn SolverBackend>, SolverError> {
    match name.to_ascii_lowercase().as_str() {
        "highs" => Ok(Box::new(HighsBackend)),
        other => Err(SolverError::UnknownBackend(other.to_string())),
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HighsBackend;

impl SolverBackend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, model: &LinearModel, limits: &SolveLimits) -> Result<RawSolution, SolverError> {
        let mut pb = RowProblem::default();
        let cols: Vec<_> = model
            .vars
            .iter()
            .map(|v| pb.add_column_with_integrality(v.cost, v.lower..=v.upper, v.integer))
            .collect();
        for r in &model.rows {
            pb.add_row(r.lower..=r.upper, r.terms.iter().map(|&(v, a)| (cols[v.0], a)));
        }
        let mut m = pb.optimise(Sense::Minimise);
        m.make_quiet();
        m.set_option("random_seed", 0);
        m.set_option("mip_rel_gap", limits.mip_rel_gap);
        if let Some(t) = limits.time_limit_s {
            m.set_option("time_limit", t);
        }
        if let Some(n) = limits.threads.and_then(NonZeroU32::new) {
            m.set_threads(n);
        }
        let solved = m.try_solve().map_err(|s| SolverError::Backend(format!("{s:?}")))?;
        let mip = model.is_mip();
        let objective = solved.objective_value() + model.offset;
        match solved.status() {
            HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => {
                let sol = solved.get_solution();
                let gap = if mip { solved.mip_gap() } else { 0.0 };
                Ok(RawSolution {
                    status: if gap <= 1e-9 { SolveStatus::Optimal } else { SolveStatus::WithinGap },
                    values: sol.columns().to_vec(),
                    objective,
                    row_duals: (!mip).then(|| sol.dual_rows().to_vec()),
                    col_duals: (!mip).then(|| sol.dual_columns().to_vec()),
                    mip_gap: gap,
                })
            }
            HighsModelStatus::Infeasible => Err(SolverError::Infeasible { conflict: None }),
            HighsModelStatus::Unbounded => Err(SolverError::Unbounded),
            HighsModelStatus::UnboundedOrInfeasible => Err(SolverError::Infeasible { conflict: None }),
            HighsModelStatus::ReachedTimeLimit => {
                let found = solved.primal_solution_status() == highs::HighsSolutionStatus::Feasible;
                Err(SolverError::TimeLimit {
                    objective: found.then_some(objective),
                    incumbent: found.then(|| solved.get_solution().columns().to_vec()),
                })
            }
            other => Err(SolverError::Backend(format!("{other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp_and_duality() {
        // min x + 2y s.t. x + y >= 3, x <= 2
        let mut m = LinearModel::new();
        let x = m.add_continuous("x", 0.0, 2.0, 1.0);
        let y = m.add_continuous("y", 0.0, f64::INFINITY, 2.0);
        m.add_ge("cover", vec![(x, 1.0), (y, 1.0)], 3.0);
        m.add_offset(0.5);
        let s = HighsBackend.solve(&m, &SolveLimits::default()).unwrap();
        assert!((s.value(x) - 2.0).abs() < 1e-9);
        assert!((s.value(y) - 1.0).abs() < 1e-9);
        assert!((s.objective - 4.5).abs() < 1e-9);
        assert!((s.dual_objective(&m).unwrap() - 4.5).abs() < 1e-9);
        assert!(m.max_violation(&s.values).0 < 1e-9);
    }

    #[test]
    fn knapsack_mip() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 4 -> a = c = 1
        let mut m = LinearModel::new();
        let v: Vec<_> = [5.0, 4.0, 3.0].iter().enumerate().map(|(i, c)| m.add_binary(format!("x{i}"), -c)).collect();
        m.add_le("cap", vec![(v[0], 2.0), (v[1], 3.0), (v[2], 1.0)], 4.0);
        let s = HighsBackend.solve(&m, &SolveLimits::default()).unwrap();
        assert_eq!(s.objective, -8.0);
        assert!(s.row_duals.is_none());
    }

    #[test]
    fn infeasible_and_unknown_backend() {
        let mut m = LinearModel::new();
        let x = m.add_continuous("x", 0.0, 1.0, 1.0);
        m.add_ge("too-much", vec![(x, 1.0)], 2.0);
        assert!(matches!(HighsBackend.solve(&m, &SolveLimits::default()), Err(SolverError::Infeasible { .. })));
        assert!(matches!(backend("cplex"), Err(SolverError::UnknownBackend(_))));
        assert_eq!(backend("HiGHS").unwrap().name(), "highs");
    }
}
