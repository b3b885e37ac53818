//! Standard-form MILP data model, LP relaxation via a bounded-variable primal
//! simplex, presolve, and file I/O.
//!
//! An instance is `min c.x  s.t.  A x {<=,=,>=} b,  lb <= x <= ub`, with a
//! subset of variables restricted to integers. Infinite bounds are allowed.

mod io;
mod presolve;
mod simplex;

pub use io::{export_json, export_mps, import_instance, import_json, import_mps};
pub use presolve::{presolve, Presolved, Reduction};
pub use simplex::{lp_relax_solve, Basis, ColState, LpEngine, Pricing, SimplexOptions};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("numerical breakdown at simplex iteration {iteration}: pivot below 1e-10 persists after Bland fallback")]
    NumericalBreakdown { iteration: usize },
    #[error("simplex iteration limit {limit} exceeded")]
    IterationLimit { limit: usize },
    #[error("{path}:{line}: MPS parse error: {msg}")]
    MpsParse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("unrecognized instance file extension '{0}' (expected .json or .mps)")]
    UnknownFormat(String),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row sense of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

/// One sparse constraint row, parallel index/value arrays.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseRow {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseRow {
    pub fn new(entries: &[(usize, f64)]) -> Self {
        Self {
            idx: entries.iter().map(|(i, _)| *i).collect(),
            val: entries.iter().map(|(_, v)| *v).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().copied().zip(self.val.iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    /// Row activity at a point.
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.iter().map(|(j, a)| a * x[j]).sum()
    }
}

/// Free-form provenance labels attached to an instance. `var` and `row` map
/// indices to short tags such as `x[2][5]`, `z:F[2,6]@t0`, or `sample:17`;
/// `info` holds instance-level tags (generator name, seed, parameters).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    #[serde(default)]
    pub var: BTreeMap<usize, String>,
    #[serde(default)]
    pub row: BTreeMap<usize, String>,
    #[serde(default)]
    pub info: BTreeMap<String, String>,
}

/// A mixed-integer linear program in standard minimization form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpInstance {
    /// Number of variables.
    pub n: usize,
    /// Number of rows.
    pub m: usize,
    /// Dense objective vector, length `n`.
    pub obj: Vec<f64>,
    /// Sparse rows, length `m`.
    pub rows: Vec<SparseRow>,
    /// Right-hand sides, length `m`.
    pub rhs: Vec<f64>,
    /// Row senses, length `m`.
    pub sense: Vec<RowSense>,
    /// Lower bounds, length `n`; `-inf` allowed.
    #[serde(with = "io::bound_vec")]
    pub lb: Vec<f64>,
    /// Upper bounds, length `n`; `+inf` allowed.
    #[serde(with = "io::bound_vec")]
    pub ub: Vec<f64>,
    /// Indices of integer-restricted variables.
    pub int_set: BTreeSet<usize>,
    #[serde(default)]
    pub annotations: Annotations,
}

impl MilpInstance {
    /// An instance with `n` continuous variables, zero objective, free of
    /// rows, and default bounds `[0, +inf)`.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            m: 0,
            obj: vec![0.0; n],
            rows: Vec::new(),
            rhs: Vec::new(),
            sense: Vec::new(),
            lb: vec![0.0; n],
            ub: vec![f64::INFINITY; n],
            int_set: BTreeSet::new(),
            annotations: Annotations::default(),
        }
    }

    /// Append a row; returns its index.
    pub fn push_row(&mut self, sense: RowSense, rhs: f64, entries: &[(usize, f64)]) -> usize {
        self.rows.push(SparseRow::new(entries));
        self.rhs.push(rhs);
        self.sense.push(sense);
        self.m += 1;
        self.m - 1
    }

    /// Append a variable; returns its index.
    pub fn push_var(&mut self, obj: f64, lb: f64, ub: f64, integer: bool) -> usize {
        let j = self.n;
        self.obj.push(obj);
        self.lb.push(lb);
        self.ub.push(ub);
        if integer {
            self.int_set.insert(j);
        }
        self.n += 1;
        j
    }

    /// Structural validity check; every solver entry point runs this first.
    pub fn validate(&self) -> Result<(), MilpError> {
        let fail = |msg: String| Err(MilpError::Invalid(msg));
        if self.obj.len() != self.n {
            return fail(format!("obj length {} != n {}", self.obj.len(), self.n));
        }
        if self.lb.len() != self.n || self.ub.len() != self.n {
            return fail(format!(
                "bound lengths {}/{} != n {}",
                self.lb.len(),
                self.ub.len(),
                self.n
            ));
        }
        if self.rows.len() != self.m || self.rhs.len() != self.m || self.sense.len() != self.m {
            return fail(format!(
                "row arrays {}/{}/{} != m {}",
                self.rows.len(),
                self.rhs.len(),
                self.sense.len(),
                self.m
            ));
        }
        for (j, c) in self.obj.iter().enumerate() {
            if !c.is_finite() {
                return fail(format!("objective coefficient {j} is not finite"));
            }
        }
        for j in 0..self.n {
            let (lo, hi) = (self.lb[j], self.ub[j]);
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return fail(format!("variable {j} has malformed bounds [{lo}, {hi}]"));
            }
            // lo > hi is *not* rejected here: contradictory bounds are a
            // legitimate (infeasible) instance the solver must classify.
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.idx.len() != row.val.len() {
                return fail(format!("row {i} has mismatched idx/val lengths"));
            }
            let mut seen = BTreeSet::new();
            for (j, a) in row.iter() {
                if j >= self.n {
                    return fail(format!("row {i} references variable {j} >= n {}", self.n));
                }
                if !a.is_finite() {
                    return fail(format!("row {i} has non-finite coefficient on variable {j}"));
                }
                if !seen.insert(j) {
                    return fail(format!("row {i} has duplicate entry for variable {j}"));
                }
            }
            if !self.rhs[i].is_finite() {
                return fail(format!("row {i} has non-finite rhs"));
            }
        }
        if let Some(&j) = self.int_set.iter().next_back() {
            if j >= self.n {
                return fail(format!("integer set references variable {j} >= n {}", self.n));
            }
        }
        Ok(())
    }

    /// Objective value at a point.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Whether `x` satisfies every row, bound, and integrality restriction.
    /// `tol` is the absolute slack allowed on rows and bounds (and on
    /// integrality for variables in the integer set).
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.n {
            return false;
        }
        for j in 0..self.n {
            if x[j] < self.lb[j] - tol || x[j] > self.ub[j] + tol {
                return false;
            }
        }
        for &j in &self.int_set {
            if (x[j] - x[j].round()).abs() > tol {
                return false;
            }
        }
        for i in 0..self.m {
            let lhs = self.rows[i].dot(x);
            let ok = match self.sense[i] {
                RowSense::Le => lhs <= self.rhs[i] + tol,
                RowSense::Eq => (lhs - self.rhs[i]).abs() <= tol,
                RowSense::Ge => lhs >= self.rhs[i] - tol,
            };
            if !ok {
                return false;
            }
        }
        true
    }

    /// Indices of integer variables whose LP value is fractional beyond `tol`.
    pub fn fractional_vars(&self, x: &[f64], tol: f64) -> Vec<usize> {
        self.int_set
            .iter()
            .copied()
            .filter(|&j| (x[j] - x[j].round()).abs() > tol)
            .collect()
    }
}

/// Termination status of an LP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Basis membership of a structural variable in the final LP basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisStatus {
    Basic,
    AtLower,
    AtUpper,
}

/// Result of an LP relaxation solve.
///
/// For `Infeasible` the objective is `+inf`, for `Unbounded` it is `-inf`;
/// `values`, `duals`, and `reduced_costs` then hold the last iterate and are
/// diagnostic only.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub basis_status: Vec<BasisStatus>,
    /// Simplex iterations spent in this solve.
    pub iterations: usize,
    /// Full internal basis, usable to warm-start a related solve.
    pub basis: Basis,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MilpInstance {
        let mut inst = MilpInstance::new(2);
        inst.obj = vec![-1.0, -1.0];
        inst.ub = vec![1.0, 1.0];
        inst.push_row(RowSense::Le, 1.5, &[(0, 1.0), (1, 1.0)]);
        inst
    }

    #[test]
    fn validate_accepts_well_formed() {
        assert!(tiny().validate().is_ok());
    }

    #[test]
    fn validate_rejects_bad_shapes() {
        let mut a = tiny();
        a.obj.pop();
        assert!(a.validate().is_err());

        let mut b = tiny();
        b.rows[0].idx[0] = 9;
        assert!(b.validate().is_err());

        let mut c = tiny();
        c.rhs[0] = f64::NAN;
        assert!(c.validate().is_err());

        let mut d = tiny();
        d.int_set.insert(5);
        assert!(d.validate().is_err());

        let mut e = tiny();
        e.rows[0] = SparseRow::new(&[(0, 1.0), (0, 2.0)]);
        assert!(e.validate().is_err());
    }

    #[test]
    fn contradictory_bounds_pass_validation() {
        // Infeasibility is a solver verdict, not a malformed instance.
        let mut inst = tiny();
        inst.lb[0] = 2.0;
        inst.ub[0] = 1.0;
        assert!(inst.validate().is_ok());
    }

    #[test]
    fn feasibility_check_covers_rows_bounds_integrality() {
        let mut inst = tiny();
        inst.int_set.insert(0);
        assert!(inst.is_feasible(&[1.0, 0.5], 1e-9));
        assert!(!inst.is_feasible(&[0.5, 0.5], 1e-9)); // fractional integer
        assert!(!inst.is_feasible(&[1.0, 1.0], 1e-9)); // row violated
        assert!(!inst.is_feasible(&[1.0, -0.1], 1e-9)); // bound violated
    }

    #[test]
    fn fractional_vars_respects_tolerance() {
        let mut inst = tiny();
        inst.int_set.insert(0);
        inst.int_set.insert(1);
        let frac = inst.fractional_vars(&[0.9999999, 0.5], 1e-6);
        assert_eq!(frac, vec![1]);
    }
}
