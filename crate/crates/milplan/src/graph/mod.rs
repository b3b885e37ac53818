//! Featured bipartite-graph view of a MILP: one node per variable, one per
//! constraint, one edge per nonzero matrix entry, with fixed-width feature
//! rows extracted from the instance and its root LP relaxation.
//!
//! All normalizers are per-instance max-abs (zero norms guard to 0), so
//! extraction needs no dataset-level statistics and every feature lands in
//! `[-1, 1]`. Node order equals instance order: variable node `j` is column
//! `j`, constraint node `i` is row `i`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::{BasisStatus, LpSolution, LpStatus, MilpInstance, RowSense};

pub const VAR_FEATURES: usize = 15;
pub const CON_FEATURES: usize = 4;
pub const EDGE_FEATURES: usize = 1;
pub const SCHEMA_VERSION: u32 = 1;

/// Row activity within this absolute slack of the rhs counts as tight.
const TIGHT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("variable index {idx} out of range for {n} variables")]
    BadIndex { idx: usize, n: usize },
}

/// One nonzero matrix entry, weighted by its row's max-abs coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub con: usize,
    pub var: usize,
    pub weight: f64,
}

/// Variable feature columns, in row order:
///
/// | idx | feature |
/// |----:|---------|
/// | 0-2 | binary / general-integer / continuous one-hot |
/// | 3   | objective coefficient / max-abs objective |
/// | 4-5 | finite lower / upper bound flags |
/// | 6-7 | bounds / max-abs finite bound |
/// | 8   | root LP value scaled to [0, 1] by its own finite bounds |
/// | 9   | fractionality (integer variables, else 0) |
/// | 10  | reduced cost / max-abs reduced cost |
/// | 11-13 | basis at-lower / at-upper / basic one-hot |
/// | 14  | column nonzero count / max column nonzero count |
///
/// Constraint feature columns: rhs / max-abs rhs; sense code (-1 for >=, 0
/// for =, +1 for <=); dual / max-abs dual; tightness flag.
///
/// A root LP that is not optimal zero-fills every LP-derived column (8-13 on
/// variables, 2-3 on constraints); the all-zero basis one-hot marks that
/// condition, which no optimal basis can produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub schema_version: u32,
    pub var_features: Vec<[f64; VAR_FEATURES]>,
    pub con_features: Vec<[f64; CON_FEATURES]>,
    /// Sorted by (con, var); exactly the nonzero matrix entries.
    pub edges: Vec<Edge>,
    /// Optional 0/1 candidate-membership column, all zeros by default; set it
    /// before scoring a variable subset.
    pub membership: Vec<f64>,
}

impl BipartiteGraph {
    pub fn n_vars(&self) -> usize {
        self.var_features.len()
    }

    pub fn n_cons(&self) -> usize {
        self.con_features.len()
    }

    /// Mark exactly the given variables in the membership column.
    pub fn set_membership(
        &mut self,
        members: impl IntoIterator<Item = usize>,
    ) -> Result<(), GraphError> {
        let n = self.membership.len();
        self.membership.iter_mut().for_each(|v| *v = 0.0);
        for idx in members {
            if idx >= n {
                return Err(GraphError::BadIndex { idx, n });
            }
            self.membership[idx] = 1.0;
        }
        Ok(())
    }
}

fn max_abs<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    values.fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Guarded division: zero when the normalizer is zero (or the value is not
/// finite, which only finite-bound columns can feed in).
fn norm(value: f64, scale: f64) -> f64 {
    if scale > 0.0 && value.is_finite() {
        value / scale
    } else {
        0.0
    }
}

/// Extract the featured bipartite graph of `inst` at the root LP solution
/// `root_lp` (from [`crate::milp::lp_relax_solve`] on the same instance).
pub fn to_bipartite(inst: &MilpInstance, root_lp: &LpSolution) -> BipartiteGraph {
    let lp_ok = root_lp.status == LpStatus::Optimal;

    let obj_scale = max_abs(inst.obj.iter());
    let bound_scale = max_abs(inst.lb.iter().chain(&inst.ub).filter(|b| b.is_finite()));
    let rc_scale = if lp_ok {
        max_abs(root_lp.reduced_costs.iter())
    } else {
        0.0
    };
    let dual_scale = if lp_ok { max_abs(root_lp.duals.iter()) } else { 0.0 };
    let rhs_scale = max_abs(inst.rhs.iter());

    let mut col_nnz = vec![0usize; inst.n];
    let mut edges = Vec::new();
    for (i, row) in inst.rows.iter().enumerate() {
        let row_scale = row.iter().fold(0.0f64, |acc, (_, a)| acc.max(a.abs()));
        for (j, a) in row.iter() {
            if a != 0.0 {
                col_nnz[j] += 1;
                edges.push(Edge {
                    con: i,
                    var: j,
                    weight: a / row_scale,
                });
            }
        }
    }
    edges.sort_by_key(|e| (e.con, e.var));
    let nnz_scale = col_nnz.iter().copied().max().unwrap_or(0) as f64;

    let var_features = (0..inst.n)
        .map(|j| {
            let integer = inst.int_set.contains(&j);
            let (lb, ub) = (inst.lb[j], inst.ub[j]);
            let binary = integer && lb >= 0.0 && ub <= 1.0;
            let mut f = [0.0f64; VAR_FEATURES];
            f[0] = binary as u8 as f64;
            f[1] = (integer && !binary) as u8 as f64;
            f[2] = (!integer) as u8 as f64;
            f[3] = norm(inst.obj[j], obj_scale);
            f[4] = lb.is_finite() as u8 as f64;
            f[5] = ub.is_finite() as u8 as f64;
            f[6] = norm(lb, bound_scale);
            f[7] = norm(ub, bound_scale);
            if lp_ok {
                let x = root_lp.values[j];
                if lb.is_finite() && ub.is_finite() && ub > lb {
                    f[8] = ((x - lb) / (ub - lb)).clamp(0.0, 1.0);
                }
                if integer {
                    f[9] = (x - x.round()).abs();
                }
                f[10] = norm(root_lp.reduced_costs[j], rc_scale);
                match root_lp.basis_status[j] {
                    BasisStatus::AtLower => f[11] = 1.0,
                    BasisStatus::AtUpper => f[12] = 1.0,
                    BasisStatus::Basic => f[13] = 1.0,
                }
            }
            f[14] = norm(col_nnz[j] as f64, nnz_scale);
            f
        })
        .collect();

    let con_features = (0..inst.m)
        .map(|i| {
            let mut f = [0.0f64; CON_FEATURES];
            f[0] = norm(inst.rhs[i], rhs_scale);
            f[1] = match inst.sense[i] {
                RowSense::Ge => -1.0,
                RowSense::Eq => 0.0,
                RowSense::Le => 1.0,
            };
            if lp_ok {
                f[2] = norm(root_lp.duals[i], dual_scale);
                let activity: f64 = inst.rows[i]
                    .iter()
                    .map(|(j, a)| a * root_lp.values[j])
                    .sum();
                f[3] = ((activity - inst.rhs[i]).abs() <= TIGHT_TOL) as u8 as f64;
            }
            f
        })
        .collect();

    BipartiteGraph {
        schema_version: SCHEMA_VERSION,
        var_features,
        con_features,
        edges,
        membership: vec![0.0; inst.n],
    }
}

#[cfg(test)]
mod tests;
