use crate::case::GridCase;
use crate::lp::{LinearModel, VarId};

/// DC network data in index form.
#[derive(Debug, Clone)]
pub(crate) struct Network {
    pub n_bus: usize,
    pub reference: usize,
    pub ends: Vec<(usize, usize)>,
    pub susceptance: Vec<f64>,
    pub limit: Vec<Option<f64>>,
}

impl Network {
    pub fn new(case: &GridCase) -> Self {
        Self {
            n_bus: case.buses.len(),
            reference: case.reference_index(),
            ends: case.line_ends(),
            susceptance: case.lines.iter().map(|l| l.susceptance).collect(),
            limit: case.lines.iter().map(|l| l.limit).collect(),
        }
    }

    /// Angle and flow variables for one period with f = b (θ_from − θ_to) and
    /// θ_ref = 0. Flows are bounded by the line limits when `bounded`.
    pub fn add_flows(&self, m: &mut LinearModel, tag: &str, t: usize, bounded: bool) -> (Vec<VarId>, Vec<VarId>) {
        let theta: Vec<VarId> = (0..self.n_bus)
            .map(|i| {
                let fixed = i == self.reference;
                let (lo, hi) = if fixed { (0.0, 0.0) } else { (f64::NEG_INFINITY, f64::INFINITY) };
                m.add_continuous(format!("{tag}theta[{i},{t}]"), lo, hi, 0.0)
            })
            .collect();
        let flows = self
            .ends
            .iter()
            .enumerate()
            .map(|(l, &(a, b))| {
                let cap = if bounded { self.limit[l].unwrap_or(f64::INFINITY) } else { f64::INFINITY };
                let f = m.add_continuous(format!("{tag}f[{l},{t}]"), -cap, cap, 0.0);
                let s = self.susceptance[l];
                m.add_eq(format!("{tag}kirchhoff[{l},{t}]"), vec![(f, 1.0), (theta[a], -s), (theta[b], s)], 0.0);
                f
            })
            .collect();
        (theta, flows)
    }

    /// Terms of (inflow − outflow) at `bus`.
    pub fn net_inflow(&self, bus: usize, flows: &[VarId]) -> Vec<(VarId, f64)> {
        let mut terms = Vec::new();
        for (l, &(a, b)) in self.ends.iter().enumerate() {
            if a == bus {
                terms.push((flows[l], -1.0));
            }
            if b == bus {
                terms.push((flows[l], 1.0));
            }
        }
        terms
    }
}
