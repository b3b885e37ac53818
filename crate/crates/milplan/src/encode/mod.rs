//! Compilation of temporal-logic motion-planning problems into MILPs.
//!
//! A planning problem couples linear dynamics, a bounded workspace, and a
//! DT-STL specification. The encoder unrolls the dynamics over the horizon,
//! adds an L1 control-effort objective through epigraph variables, and
//! translates the (negation-normal-form) specification into big-M indicator
//! rows: one binary per (subformula, timestep), deduplicated through a
//! registry so shared subformulas are encoded once. Fixing the root binary
//! to 1 enforces satisfaction.
//!
//! The rows are one-sided (`z <= ...`), which is sufficient: any assignment
//! with the root at 1 certifies satisfaction, and nothing forces indicators
//! to 1 elsewhere.

pub mod cpp;

pub use cpp::{encode_cpp, quantile_count, CppEncoding, CppLayout, CppProblem, SampleSet};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::{MilpError, MilpInstance, RowSense};
use crate::stl::{format_formula, LinearPredicate, StlFormula, Trajectory};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("malformed problem: {0}")]
    Invalid(String),
    #[error("big-M {got} too small: predicate range over the state box needs more than {need}")]
    BigMTooSmall { need: f64, got: f64 },
    #[error("formula must be in negation normal form; found a `not` node")]
    NotNnf,
    #[error("quantile infeasible: {q} of {k} samples required")]
    InfeasibleQuantile { q: usize, k: usize },
    #[error(transparent)]
    Milp(#[from] MilpError),
}

/// Discrete-time linear dynamics `x_{t+1} = A x_t + B u_t` (plus an additive
/// disturbance when one is supplied to [`LinearDynamics::simulate`]).
/// Matrices are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDynamics {
    pub n_x: usize,
    pub n_u: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl LinearDynamics {
    pub fn new(n_x: usize, n_u: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self, EncodeError> {
        if n_x == 0 || n_u == 0 {
            return Err(EncodeError::Invalid("state and input must be nonempty".into()));
        }
        if a.len() != n_x * n_x || b.len() != n_x * n_u {
            return Err(EncodeError::Invalid(format!(
                "matrix sizes {}x{} need {} and {} entries, got {} and {}",
                n_x,
                n_u,
                n_x * n_x,
                n_x * n_u,
                a.len(),
                b.len()
            )));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(EncodeError::Invalid("dynamics entries must be finite".into()));
        }
        Ok(Self { n_x, n_u, a, b })
    }

    pub fn a_entry(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n_x + j]
    }

    pub fn b_entry(&self, i: usize, k: usize) -> f64 {
        self.b[i * self.n_u + k]
    }

    /// One dynamics step.
    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; self.n_x];
        for i in 0..self.n_x {
            let mut v = 0.0;
            for j in 0..self.n_x {
                v += self.a_entry(i, j) * x[j];
            }
            for k in 0..self.n_u {
                v += self.b_entry(i, k) * u[k];
            }
            next[i] = v;
        }
        next
    }

    /// Roll the dynamics forward from `x0` under the control sequence,
    /// optionally adding per-step disturbances (`w[t]` enters state `t+1`).
    /// Returns `us.len() + 1` states.
    pub fn simulate(
        &self,
        x0: &[f64],
        us: &[Vec<f64>],
        disturbance: Option<&[Vec<f64>]>,
    ) -> Vec<Vec<f64>> {
        let mut states = Vec::with_capacity(us.len() + 1);
        states.push(x0.to_vec());
        for (t, u) in us.iter().enumerate() {
            let mut next = self.step(states.last().unwrap(), u);
            if let Some(ws) = disturbance {
                for (v, w) in next.iter_mut().zip(&ws[t]) {
                    *v += w;
                }
            }
            states.push(next);
        }
        states
    }
}

/// Axis-aligned box `lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, EncodeError> {
        if lo.len() != hi.len() {
            return Err(EncodeError::Invalid("box bound lengths differ".into()));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if l.is_nan() || h.is_nan() || l > h {
                return Err(EncodeError::Invalid(format!("bad box interval [{l}, {h}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_finite(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|v| v.is_finite())
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }
}

/// A dynamics-constrained DT-STL planning problem over horizon `T`
/// (states `x_0..x_T`, controls `u_0..u_{T-1}`). The objective minimized is
/// the L1 control effort `sum_t ||u_t||_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningProblem {
    pub dynamics: LinearDynamics,
    pub x0: Vec<f64>,
    /// `T`: the final state index.
    pub horizon: usize,
    #[serde(with = "spec_text")]
    pub spec: StlFormula,
    pub state_bounds: BoxBounds,
    pub input_bounds: BoxBounds,
}

/// The problem file stores the specification as its s-expression text.
mod spec_text {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(spec: &StlFormula, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_formula(spec))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<StlFormula, D::Error> {
        let text = String::deserialize(d)?;
        crate::stl::parse_formula(&text, &crate::stl::PredicateBindings::new())
            .map_err(serde::de::Error::custom)
    }
}

impl PlanningProblem {
    pub fn validate(&self) -> Result<(), EncodeError> {
        let n_x = self.dynamics.n_x;
        let bad = |msg: String| Err(EncodeError::Invalid(msg));
        if self.x0.len() != n_x {
            return bad(format!("x0 has {} entries, state is {}-dim", self.x0.len(), n_x));
        }
        if self.state_bounds.dim() != n_x || self.input_bounds.dim() != self.dynamics.n_u {
            return bad("bound boxes do not match the dynamics dimensions".into());
        }
        if !self.state_bounds.is_finite() || !self.input_bounds.is_finite() {
            return bad("state and input boxes must be finite (big-M needs a bounded workspace)".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if !self.spec.well_formed(self.horizon) {
            return bad(format!(
                "specification horizon {} does not fit planning horizon {}",
                self.spec.horizon(),
                self.horizon
            ));
        }
        if let Some(d) = self.spec.state_dim() {
            if d != n_x {
                return bad(format!("predicates are {d}-dim, state is {n_x}-dim"));
            }
        }
        if !self.state_bounds.contains(&self.x0, 1e-9) {
            return bad("x0 lies outside the state box".into());
        }
        Ok(())
    }
}

/// Encoder knobs: `big_m = None` sizes the constant per predicate as its
/// maximum absolute value over the state box plus one slack unit; a supplied
/// value is validated against every predicate. `rho_min` shifts the
/// true-side threshold so certified trajectories keep a robustness margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingContext {
    pub big_m: Option<f64>,
    pub rho_min: f64,
}

impl Default for EncodingContext {
    fn default() -> Self {
        Self {
            big_m: None,
            rho_min: 0.0,
        }
    }
}

impl EncodingContext {
    fn validate(&self) -> Result<(), EncodeError> {
        if let Some(m) = self.big_m {
            if !(m > 0.0) || !m.is_finite() {
                return Err(EncodeError::Invalid(format!("big-M must be positive, got {m}")));
            }
        }
        if !(self.rho_min >= 0.0) || !self.rho_min.is_finite() {
            return Err(EncodeError::Invalid(format!(
                "rho_min must be nonnegative, got {}",
                self.rho_min
            )));
        }
        Ok(())
    }
}

/// Variable layout of an encoded planning problem. Stored in the instance
/// annotations (`info["layout"]`) so a solved instance file is enough to
/// recover the trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StlLayout {
    pub n_x: usize,
    pub n_u: usize,
    pub horizon: usize,
    pub state_base: usize,
    pub control_base: usize,
    pub effort_base: usize,
    pub root_binary: usize,
}

impl StlLayout {
    pub fn state_index(&self, t: usize, i: usize) -> usize {
        self.state_base + t * self.n_x + i
    }

    pub fn control_index(&self, t: usize, k: usize) -> usize {
        self.control_base + t * self.n_u + k
    }

    pub fn states(&self, values: &[f64]) -> Vec<Vec<f64>> {
        (0..=self.horizon)
            .map(|t| (0..self.n_x).map(|i| values[self.state_index(t, i)]).collect())
            .collect()
    }

    pub fn controls(&self, values: &[f64]) -> Vec<Vec<f64>> {
        (0..self.horizon)
            .map(|t| (0..self.n_u).map(|k| values[self.control_index(t, k)]).collect())
            .collect()
    }

    pub fn trajectory(&self, values: &[f64]) -> Result<Trajectory, EncodeError> {
        Trajectory::new(self.states(values))
            .map_err(|e| EncodeError::Invalid(format!("solution states are not a trajectory: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct StlEncoding {
    pub instance: MilpInstance,
    pub layout: StlLayout,
}

/// Recursive subformula encoder writing into a shared instance.
///
/// `state_base` points at the first state variable of the trajectory the
/// formula constrains, so the same encoder type serves both the nominal
/// problem and each sample copy of the chance-constrained one.
pub struct FormulaEncoder<'a> {
    inst: &'a mut MilpInstance,
    big_m: Option<f64>,
    rho_min: f64,
    state_box: &'a BoxBounds,
    state_base: usize,
    horizon: usize,
    label: &'a str,
    registry: BTreeMap<(String, usize), usize>,
}

impl<'a> FormulaEncoder<'a> {
    pub fn new(
        inst: &'a mut MilpInstance,
        ctx: &EncodingContext,
        state_box: &'a BoxBounds,
        state_base: usize,
        horizon: usize,
        label: &'a str,
    ) -> Result<Self, EncodeError> {
        ctx.validate()?;
        if !state_box.is_finite() {
            return Err(EncodeError::Invalid("state box must be finite".into()));
        }
        Ok(Self {
            inst,
            big_m: ctx.big_m,
            rho_min: ctx.rho_min,
            state_box,
            state_base,
            horizon,
            label,
            registry: BTreeMap::new(),
        })
    }

    /// Big-M constant for one predicate: must dominate `|h(x)|` over the
    /// state box with `rho_min` headroom.
    fn big_m_for(&self, pred: &LinearPredicate) -> Result<f64, EncodeError> {
        let mut hi = -pred.offset;
        let mut lo = -pred.offset;
        for (c, (l, h)) in pred
            .coefficients
            .iter()
            .zip(self.state_box.lo.iter().zip(&self.state_box.hi))
        {
            hi += (c * l).max(c * h);
            lo += (c * l).min(c * h);
        }
        let need = hi.abs().max(lo.abs()) + self.rho_min;
        match self.big_m {
            Some(m) if m > need => Ok(m),
            Some(m) => Err(EncodeError::BigMTooSmall { need, got: m }),
            None => Ok(need + 1.0),
        }
    }

    fn new_binary(&mut self, note: String) -> usize {
        let z = self.inst.push_var(0.0, 0.0, 1.0, true);
        self.inst.annotations.var.insert(z, note);
        z
    }

    fn annotate_row(&mut self, row: usize, note: String) {
        self.inst.annotations.row.insert(row, note);
    }

    /// Indicator binary for `h(x_t) >= rho_min`, via the two big-M rows
    /// `h(x_t) + M (1 - z) >= rho_min` and `h(x_t) - M z <= rho_min`.
    pub fn encode_predicate(
        &mut self,
        pred: &LinearPredicate,
        t: usize,
    ) -> Result<usize, EncodeError> {
        if t > self.horizon {
            return Err(EncodeError::Invalid(format!(
                "predicate at step {t} exceeds horizon {}",
                self.horizon
            )));
        }
        if pred.dim() != self.state_box.dim() {
            return Err(EncodeError::Invalid(format!(
                "predicate is {}-dim, state is {}-dim",
                pred.dim(),
                self.state_box.dim()
            )));
        }
        let key = (
            format_formula(&StlFormula::unnamed_pred(pred.clone())),
            t,
        );
        if let Some(&z) = self.registry.get(&key) {
            return Ok(z);
        }
        let m = self.big_m_for(pred)?;
        let z = self.new_binary(format!("{}[t={t}] {}", self.label, clip(&key.0)));
        let mut entries: Vec<(usize, f64)> = pred
            .coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (self.state_base + t * pred.dim() + i, *c))
            .collect();
        entries.push((z, -m));
        let lo_row = self
            .inst
            .push_row(RowSense::Ge, self.rho_min + pred.offset - m, &entries);
        self.annotate_row(lo_row, format!("{}_on[t={t}]", self.label));
        let hi_row = self
            .inst
            .push_row(RowSense::Le, self.rho_min + pred.offset, &entries);
        self.annotate_row(hi_row, format!("{}_off[t={t}]", self.label));
        self.registry.insert(key, z);
        Ok(z)
    }

    /// Indicator binary for `phi` holding at step `t`. `phi` must be in
    /// negation normal form; repeated (subformula, step) pairs share one
    /// binary through the registry.
    pub fn encode_formula(&mut self, phi: &StlFormula, t: usize) -> Result<usize, EncodeError> {
        if t + phi.horizon() > self.horizon {
            return Err(EncodeError::Invalid(format!(
                "formula at step {t} inspects step {} beyond horizon {}",
                t + phi.horizon(),
                self.horizon
            )));
        }
        let key = (canonical_text(phi), t);
        if let Some(&z) = self.registry.get(&key) {
            return Ok(z);
        }
        let z = match phi {
            StlFormula::Not(_) => return Err(EncodeError::NotNnf),
            StlFormula::Pred { pred, .. } => return self.encode_predicate(pred, t),
            StlFormula::True => {
                // Constant-true indicator: a binary pinned to 1 by bounds.
                let z = self.new_binary(format!("{}[t={t}] true", self.label));
                self.inst.lb[z] = 1.0;
                z
            }
            StlFormula::And(children) => {
                let zs: Vec<usize> = children
                    .iter()
                    .map(|c| self.encode_formula(c, t))
                    .collect::<Result<_, _>>()?;
                let z = self.new_binary(format!("{}[t={t}] {}", self.label, clip(&key.0)));
                for zc in zs {
                    let r = self.inst.push_row(RowSense::Le, 0.0, &[(z, 1.0), (zc, -1.0)]);
                    self.annotate_row(r, format!("{}_and[t={t}]", self.label));
                }
                z
            }
            StlFormula::Or(children) => {
                let zs: Vec<usize> = children
                    .iter()
                    .map(|c| self.encode_formula(c, t))
                    .collect::<Result<_, _>>()?;
                let z = self.new_binary(format!("{}[t={t}] {}", self.label, clip(&key.0)));
                let mut entries = vec![(z, 1.0)];
                entries.extend(zs.into_iter().map(|zc| (zc, -1.0)));
                let r = self.inst.push_row(RowSense::Le, 0.0, &entries);
                self.annotate_row(r, format!("{}_or[t={t}]", self.label));
                z
            }
            StlFormula::Always(child, iv) => {
                let zs: Vec<usize> = iv
                    .steps()
                    .map(|s| self.encode_formula(child, t + s))
                    .collect::<Result<_, _>>()?;
                let z = self.new_binary(format!("{}[t={t}] {}", self.label, clip(&key.0)));
                for zc in zs {
                    let r = self.inst.push_row(RowSense::Le, 0.0, &[(z, 1.0), (zc, -1.0)]);
                    self.annotate_row(r, format!("{}_alw[t={t}]", self.label));
                }
                z
            }
            StlFormula::Eventually(child, iv) => {
                let zs: Vec<usize> = iv
                    .steps()
                    .map(|s| self.encode_formula(child, t + s))
                    .collect::<Result<_, _>>()?;
                let z = self.new_binary(format!("{}[t={t}] {}", self.label, clip(&key.0)));
                let mut entries = vec![(z, 1.0)];
                entries.extend(zs.into_iter().map(|zc| (zc, -1.0)));
                let r = self.inst.push_row(RowSense::Le, 0.0, &entries);
                self.annotate_row(r, format!("{}_evt[t={t}]", self.label));
                z
            }
            StlFormula::Until(f1, f2, iv) => {
                // One witness binary per candidate step t': the rhs formula
                // holds at t' and the lhs holds at every step from t to t'.
                let mut witnesses = Vec::new();
                for s in iv.steps() {
                    let tp = t + s;
                    let wkey = (format!("{}#aux@{t}", key.0), tp);
                    let w = if let Some(&w) = self.registry.get(&wkey) {
                        w
                    } else {
                        let z2 = self.encode_formula(f2, tp)?;
                        let w = self.new_binary(format!("{}[t={tp}] until-witness", self.label));
                        let r = self.inst.push_row(RowSense::Le, 0.0, &[(w, 1.0), (z2, -1.0)]);
                        self.annotate_row(r, format!("{}_untl[t={tp}]", self.label));
                        for tpp in t..=tp {
                            let z1 = self.encode_formula(f1, tpp)?;
                            let r =
                                self.inst.push_row(RowSense::Le, 0.0, &[(w, 1.0), (z1, -1.0)]);
                            self.annotate_row(r, format!("{}_untl[t={tp}]", self.label));
                        }
                        self.registry.insert(wkey, w);
                        w
                    };
                    witnesses.push(w);
                }
                let z = self.new_binary(format!("{}[t={t}] {}", self.label, clip(&key.0)));
                let mut entries = vec![(z, 1.0)];
                entries.extend(witnesses.into_iter().map(|w| (w, -1.0)));
                let r = self.inst.push_row(RowSense::Le, 0.0, &entries);
                self.annotate_row(r, format!("{}_untl[t={t}]", self.label));
                z
            }
        };
        self.registry.insert(key, z);
        Ok(z)
    }
}

/// Registry key text: names are stripped so two bindings of the same name to
/// different predicates cannot collide, and identical predicates dedup even
/// when one is named and one inline.
fn canonical_text(phi: &StlFormula) -> String {
    format_formula(&strip_names(phi))
}

fn strip_names(phi: &StlFormula) -> StlFormula {
    match phi {
        StlFormula::True => StlFormula::True,
        StlFormula::Pred { pred, .. } => StlFormula::unnamed_pred(pred.clone()),
        StlFormula::Not(c) => StlFormula::Not(Box::new(strip_names(c))),
        StlFormula::And(cs) => StlFormula::And(cs.iter().map(strip_names).collect()),
        StlFormula::Or(cs) => StlFormula::Or(cs.iter().map(strip_names).collect()),
        StlFormula::Until(f1, f2, iv) => {
            StlFormula::Until(Box::new(strip_names(f1)), Box::new(strip_names(f2)), *iv)
        }
        StlFormula::Eventually(c, iv) => StlFormula::Eventually(Box::new(strip_names(c)), *iv),
        StlFormula::Always(c, iv) => StlFormula::Always(Box::new(strip_names(c)), *iv),
    }
}

fn clip(text: &str) -> String {
    if text.len() <= 48 {
        text.to_string()
    } else {
        let cut: String = text.chars().take(45).collect();
        format!("{cut}...")
    }
}

/// Compile a planning problem into a MILP.
///
/// Variables, in order: states `x_t` (free, boxed by explicit rows),
/// controls `u_t` (box bounds), effort epigraph `e_t >= |u_t|` (objective),
/// then the specification binaries. Rows: initial-state fixing, dynamics
/// equalities, state-box rows, effort epigraph rows, the specification rows,
/// and the root-binary fixing row.
pub fn encode_problem(
    problem: &PlanningProblem,
    ctx: &EncodingContext,
) -> Result<StlEncoding, EncodeError> {
    problem.validate()?;
    ctx.validate()?;
    let nnf = problem.spec.to_nnf();
    let (n_x, n_u, horizon) = (problem.dynamics.n_x, problem.dynamics.n_u, problem.horizon);

    let mut inst = MilpInstance::new(0);
    for t in 0..=horizon {
        for i in 0..n_x {
            let j = inst.push_var(0.0, f64::NEG_INFINITY, f64::INFINITY, false);
            inst.annotations.var.insert(j, format!("x[t={t}].{i}"));
        }
    }
    let control_base = inst.n;
    for t in 0..horizon {
        for k in 0..n_u {
            let j = inst.push_var(0.0, problem.input_bounds.lo[k], problem.input_bounds.hi[k], false);
            inst.annotations.var.insert(j, format!("u[t={t}].{k}"));
        }
    }
    let effort_base = inst.n;
    for t in 0..horizon {
        for k in 0..n_u {
            let j = inst.push_var(1.0, 0.0, f64::INFINITY, false);
            inst.annotations.var.insert(j, format!("e[t={t}].{k}"));
        }
    }
    let layout_proto = StlLayout {
        n_x,
        n_u,
        horizon,
        state_base: 0,
        control_base,
        effort_base,
        root_binary: 0, // patched after the formula is encoded
    };

    for i in 0..n_x {
        let r = inst.push_row(RowSense::Eq, problem.x0[i], &[(layout_proto.state_index(0, i), 1.0)]);
        inst.annotations.row.insert(r, format!("x0.{i}"));
    }
    emit_dynamics_rows(&mut inst, &problem.dynamics, &layout_proto, None, "");
    emit_state_box_rows(&mut inst, &problem.state_bounds, &layout_proto, "");
    emit_effort_rows(&mut inst, &layout_proto);

    let mut encoder = FormulaEncoder::new(&mut inst, ctx, &problem.state_bounds, 0, horizon, "z")?;
    let root = encoder.encode_formula(&nnf, 0)?;
    let r = inst.push_row(RowSense::Eq, 1.0, &[(root, 1.0)]);
    inst.annotations.row.insert(r, "root".into());

    let layout = StlLayout {
        root_binary: root,
        ..layout_proto
    };
    inst.annotations.info.insert("kind".into(), "stl".into());
    inst.annotations
        .info
        .insert("layout".into(), serde_json::to_string(&layout).unwrap());
    inst.validate()?;
    Ok(StlEncoding { instance: inst, layout })
}

/// Dynamics equalities `x_{t+1} - A x_t - B u_t = w_t` (rhs 0 without
/// disturbance). Shared with the per-sample chance-constrained encoding.
fn emit_dynamics_rows(
    inst: &mut MilpInstance,
    dyn_: &LinearDynamics,
    layout: &StlLayout,
    disturbance: Option<&[Vec<f64>]>,
    tag: &str,
) {
    for t in 0..layout.horizon {
        for i in 0..dyn_.n_x {
            let mut entries = vec![(layout.state_index(t + 1, i), 1.0)];
            for j in 0..dyn_.n_x {
                let a = dyn_.a_entry(i, j);
                if a != 0.0 {
                    entries.push((layout.state_index(t, j), -a));
                }
            }
            for k in 0..dyn_.n_u {
                let b = dyn_.b_entry(i, k);
                if b != 0.0 {
                    entries.push((layout.control_index(t, k), -b));
                }
            }
            let rhs = disturbance.map_or(0.0, |ws| ws[t][i]);
            let r = inst.push_row(RowSense::Eq, rhs, &entries);
            inst.annotations
                .row
                .insert(r, format!("dyn{tag}[t={}].{i}", t + 1));
        }
    }
}

/// Explicit state-box rows `lo <= x_t <= hi` for every state coordinate.
fn emit_state_box_rows(inst: &mut MilpInstance, state_box: &BoxBounds, layout: &StlLayout, tag: &str) {
    for t in 0..=layout.horizon {
        for i in 0..layout.n_x {
            let j = layout.state_index(t, i);
            let r = inst.push_row(RowSense::Ge, state_box.lo[i], &[(j, 1.0)]);
            inst.annotations.row.insert(r, format!("xlo{tag}[t={t}].{i}"));
            let r = inst.push_row(RowSense::Le, state_box.hi[i], &[(j, 1.0)]);
            inst.annotations.row.insert(r, format!("xhi{tag}[t={t}].{i}"));
        }
    }
}

/// Epigraph rows `u - e <= 0` and `-u - e <= 0` for the L1 objective.
fn emit_effort_rows(inst: &mut MilpInstance, layout: &StlLayout) {
    for t in 0..layout.horizon {
        for k in 0..layout.n_u {
            let u = layout.control_index(t, k);
            let e = layout.effort_base + t * layout.n_u + k;
            let r = inst.push_row(RowSense::Le, 0.0, &[(u, 1.0), (e, -1.0)]);
            inst.annotations.row.insert(r, format!("eff_pos[t={t}].{k}"));
            let r = inst.push_row(RowSense::Le, 0.0, &[(u, -1.0), (e, -1.0)]);
            inst.annotations.row.insert(r, format!("eff_neg[t={t}].{k}"));
        }
    }
}

#[cfg(test)]
mod tests;
