//! Sample-based encoding of chance-constrained planning problems.
//!
//! The chance constraint "the specification holds with probability at least
//! 1 - delta" is replaced by its sampled counterpart: simulate K disturbance
//! trajectories, give each sample its own state copy driven by the shared
//! controls, attach a satisfaction indicator z_i per sample, and require
//! `sum_i z_i >= ceil((K+1)(1-delta))`. The objective stays the L1 effort
//! of the shared controls.

use serde::{Deserialize, Serialize};

use crate::milp::{MilpInstance, RowSense};
use crate::stl::{StlFormula, Trajectory};

use super::{
    emit_dynamics_rows, emit_effort_rows, emit_state_box_rows, BoxBounds, EncodeError,
    EncodingContext, FormulaEncoder, LinearDynamics, StlLayout,
};

/// K disturbance trajectories, each `horizon + 1` steps of `n_x`-dim noise
/// (the final step is kept for shape symmetry; dynamics consume the first
/// `horizon`). `sigma` records the per-axis standard deviation used to draw
/// them, `seed` the generator seed, so sets are reproducible from metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub trajectories: Vec<Vec<Vec<f64>>>,
    pub seed: u64,
    pub sigma: f64,
}

impl SampleSet {
    pub fn num_samples(&self) -> usize {
        self.trajectories.len()
    }

    fn validate(&self, horizon: usize, n_x: usize) -> Result<(), EncodeError> {
        if self.trajectories.is_empty() {
            return Err(EncodeError::Invalid("sample set is empty".into()));
        }
        for (i, traj) in self.trajectories.iter().enumerate() {
            if traj.len() != horizon + 1 {
                return Err(EncodeError::Invalid(format!(
                    "sample {i} has {} steps, expected {}",
                    traj.len(),
                    horizon + 1
                )));
            }
            for w in traj {
                if w.len() != n_x {
                    return Err(EncodeError::Invalid(format!(
                        "sample {i} disturbance has dim {}, state is {n_x}-dim",
                        w.len()
                    )));
                }
                if w.iter().any(|v| !v.is_finite()) {
                    return Err(EncodeError::Invalid(format!("sample {i} has a non-finite entry")));
                }
            }
        }
        Ok(())
    }
}

/// Chance-constrained planning problem: disturbed linear dynamics
/// `x_{t+1} = A x_t + B u_t + w_t`, a DT-STL specification to hold with
/// probability at least `1 - delta`, and the K-sample set standing in for
/// the disturbance distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CppProblem {
    pub dynamics: LinearDynamics,
    pub x0: Vec<f64>,
    pub horizon: usize,
    #[serde(with = "super::spec_text")]
    pub spec: StlFormula,
    pub delta: f64,
    pub samples: SampleSet,
    pub state_bounds: BoxBounds,
    pub input_bounds: BoxBounds,
}

impl CppProblem {
    pub fn validate(&self) -> Result<(), EncodeError> {
        // The nominal checks carry over unchanged.
        let nominal = super::PlanningProblem {
            dynamics: self.dynamics.clone(),
            x0: self.x0.clone(),
            horizon: self.horizon,
            spec: self.spec.clone(),
            state_bounds: self.state_bounds.clone(),
            input_bounds: self.input_bounds.clone(),
        };
        nominal.validate()?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(EncodeError::Invalid(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        self.samples.validate(self.horizon, self.dynamics.n_x)?;
        quantile_count(self.samples.num_samples(), self.delta)?;
        Ok(())
    }

    /// Simulated state trajectory of sample `i` under controls `us`.
    pub fn simulate_sample(&self, i: usize, us: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.dynamics
            .simulate(&self.x0, us, Some(&self.samples.trajectories[i]))
    }
}

/// Number of samples that must satisfy the specification:
/// `q = ceil((K+1)(1-delta))`, infeasible when `q > K`.
pub fn quantile_count(k: usize, delta: f64) -> Result<usize, EncodeError> {
    if k == 0 || !(delta > 0.0 && delta < 1.0) {
        return Err(EncodeError::Invalid(format!(
            "quantile needs K >= 1 and delta in (0, 1), got K={k}, delta={delta}"
        )));
    }
    // Nudge before the ceiling so exact integer products stay put.
    let q = ((k as f64 + 1.0) * (1.0 - delta) - 1e-9).ceil() as usize;
    if q > k {
        return Err(EncodeError::InfeasibleQuantile { q, k });
    }
    Ok(q)
}

/// Variable layout of an encoded chance-constrained problem: shared controls
/// and effort first, then one state block per sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CppLayout {
    pub n_x: usize,
    pub n_u: usize,
    pub horizon: usize,
    pub num_samples: usize,
    pub control_base: usize,
    pub effort_base: usize,
    pub sample_state_base: Vec<usize>,
    /// Per-sample satisfaction indicator variables, in sample order.
    pub sample_roots: Vec<usize>,
    pub quantile: usize,
}

impl CppLayout {
    pub fn control_index(&self, t: usize, k: usize) -> usize {
        self.control_base + t * self.n_u + k
    }

    pub fn controls(&self, values: &[f64]) -> Vec<Vec<f64>> {
        (0..self.horizon)
            .map(|t| (0..self.n_u).map(|k| values[self.control_index(t, k)]).collect())
            .collect()
    }

    pub fn sample_states(&self, i: usize, values: &[f64]) -> Vec<Vec<f64>> {
        let base = self.sample_state_base[i];
        (0..=self.horizon)
            .map(|t| {
                (0..self.n_x)
                    .map(|d| values[base + t * self.n_x + d])
                    .collect()
            })
            .collect()
    }

    pub fn sample_trajectory(&self, i: usize, values: &[f64]) -> Result<Trajectory, EncodeError> {
        Trajectory::new(self.sample_states(i, values))
            .map_err(|e| EncodeError::Invalid(format!("sample states are not a trajectory: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct CppEncoding {
    pub instance: MilpInstance,
    pub layout: CppLayout,
}

/// Compile the sampled chance-constrained problem into a MILP.
pub fn encode_cpp(problem: &CppProblem, ctx: &EncodingContext) -> Result<CppEncoding, EncodeError> {
    problem.validate()?;
    let k = problem.samples.num_samples();
    let q = quantile_count(k, problem.delta)?;
    let nnf = problem.spec.to_nnf();
    let (n_x, n_u, horizon) = (problem.dynamics.n_x, problem.dynamics.n_u, problem.horizon);

    let mut inst = MilpInstance::new(0);
    for t in 0..horizon {
        for kk in 0..n_u {
            let j = inst.push_var(
                0.0,
                problem.input_bounds.lo[kk],
                problem.input_bounds.hi[kk],
                false,
            );
            inst.annotations.var.insert(j, format!("u[t={t}].{kk}"));
        }
    }
    let effort_base = inst.n;
    for t in 0..horizon {
        for kk in 0..n_u {
            let j = inst.push_var(1.0, 0.0, f64::INFINITY, false);
            inst.annotations.var.insert(j, format!("e[t={t}].{kk}"));
        }
    }
    // The effort epigraph only needs control/effort indices, which a
    // borrowed nominal layout provides.
    emit_effort_rows(
        &mut inst,
        &StlLayout {
            n_x,
            n_u,
            horizon,
            state_base: 0,
            control_base: 0,
            effort_base,
            root_binary: 0,
        },
    );

    let mut sample_state_base = Vec::with_capacity(k);
    let mut sample_roots = Vec::with_capacity(k);
    for i in 0..k {
        let state_base = inst.n;
        sample_state_base.push(state_base);
        for t in 0..=horizon {
            for d in 0..n_x {
                let j = inst.push_var(0.0, f64::NEG_INFINITY, f64::INFINITY, false);
                inst.annotations.var.insert(j, format!("x{i}[t={t}].{d}"));
            }
        }
        let sample_layout = StlLayout {
            n_x,
            n_u,
            horizon,
            state_base,
            control_base: 0,
            effort_base,
            root_binary: 0,
        };
        for d in 0..n_x {
            let r = inst.push_row(
                RowSense::Eq,
                problem.x0[d],
                &[(sample_layout.state_index(0, d), 1.0)],
            );
            inst.annotations.row.insert(r, format!("x0_{i}.{d}"));
        }
        emit_dynamics_rows(
            &mut inst,
            &problem.dynamics,
            &sample_layout,
            Some(&problem.samples.trajectories[i]),
            &format!("_{i}"),
        );
        emit_state_box_rows(&mut inst, &problem.state_bounds, &sample_layout, &format!("_{i}"));

        let label = format!("z{i}");
        let mut encoder = FormulaEncoder::new(
            &mut inst,
            ctx,
            &problem.state_bounds,
            state_base,
            horizon,
            &label,
        )?;
        sample_roots.push(encoder.encode_formula(&nnf, 0)?);
    }

    // The quantile row: at least q of the K indicators must be on.
    let entries: Vec<(usize, f64)> = sample_roots.iter().map(|&z| (z, 1.0)).collect();
    let r = inst.push_row(RowSense::Ge, q as f64, &entries);
    inst.annotations.row.insert(r, "quantile".into());

    let layout = CppLayout {
        n_x,
        n_u,
        horizon,
        num_samples: k,
        control_base: 0,
        effort_base,
        sample_state_base,
        sample_roots,
        quantile: q,
    };
    inst.annotations.info.insert("kind".into(), "cpp".into());
    inst.annotations
        .info
        .insert("layout".into(), serde_json::to_string(&layout).unwrap());
    inst.validate()?;
    Ok(CppEncoding { instance: inst, layout })
}

#[cfg(test)]
mod tests;
