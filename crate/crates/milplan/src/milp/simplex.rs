//! Bounded-variable revised primal simplex with an explicit basis inverse.
//!
//! The computational form appends one slack per row, `A x + s = b`, with the
//! slack's bounds carrying the row sense (`<=` gives `s in [0, +inf)`, `>=`
//! gives `s in (-inf, 0]`, `=` pins `s = 0`). Phase 1 drives bound violations
//! of basic variables to zero with composite +-1 costs; phase 2 optimizes the
//! real objective. Pricing is Dantzig by default with a sticky switch to
//! Bland's rule after a long degenerate streak, which guarantees termination.
//!
//! The engine is deliberately stateful: branch-and-bound mutates variable
//! bounds between solves and re-solves from the current basis, so a child LP
//! usually costs a handful of phase-1 repair pivots instead of a fresh solve.
//! The basis inverse is a dense column-major `m x m` matrix; this caps the
//! practical row count around a couple of thousand, which is all the search
//! layer ever asks of it.

use serde::{Deserialize, Serialize};

use super::{BasisStatus, LpSolution, LpStatus, MilpError, MilpInstance, RowSense};

/// Primal feasibility tolerance (absolute, on variable bounds).
const FEAS_TOL: f64 = 1e-7;
/// Reduced-cost significance threshold.
const COST_TOL: f64 = 1e-9;
/// Minimum pivot magnitude under normal pricing.
const PIVOT_TOL: f64 = 1e-9;
/// Minimum pivot magnitude tolerated once Bland's rule is active; smaller
/// pivots that persist are reported as numerical breakdown.
const PIVOT_MIN: f64 = 1e-10;
/// Column entries below this are treated as exact zeros in the ratio test.
const ZERO_TOL: f64 = 1e-11;
/// Recompute basic values from the inverse this often to limit drift.
const REFRESH_EVERY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pricing {
    Dantzig,
    Bland,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub pricing: Pricing,
    pub max_iterations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            pricing: Pricing::Dantzig,
            max_iterations: 200_000,
        }
    }
}

/// Where a column sits relative to the basis. `Free` nonbasic columns rest at
/// zero. Stored per column (structurals first, then slacks).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColState {
    Basic,
    Lower,
    Upper,
    Free,
}

/// Exported basis snapshot: one state per column, structurals then slacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub states: Vec<ColState>,
}

/// Outcome of one pricing/ratio/pivot step.
enum Step {
    Pivoted,
    BoundFlip,
    NoEntering,
    Unbounded,
    /// Pricing must be redone (switched to Bland mid-step).
    Retry,
}

pub struct LpEngine {
    n: usize,
    m: usize,
    ncols: usize,
    /// Sparse columns of `[A | I]`.
    cols: Vec<Vec<(usize, f64)>>,
    /// Phase-2 costs (structural objective, zeros on slacks).
    cost: Vec<f64>,
    b: Vec<f64>,
    /// Current bounds, length `ncols` (slack bounds encode row senses).
    lb: Vec<f64>,
    ub: Vec<f64>,
    /// Instance bounds, for `reset_bounds`.
    base_lb: Vec<f64>,
    base_ub: Vec<f64>,
    state: Vec<ColState>,
    /// Row index of each basic column (parallel to `state`'s `Basic` entries).
    basic_row: Vec<usize>,
    /// Column occupying each basis row.
    basis: Vec<usize>,
    /// Dense `B^{-1}`, column-major: entry (row r, col c) at `c*m + r`.
    binv: Vec<f64>,
    x: Vec<f64>,
    opts: SimplexOptions,
    bland: bool,
    degen_streak: usize,
    pivots_since_refresh: usize,
    total_iterations: usize,
    // scratch buffers reused across iterations
    scratch_y: Vec<f64>,
    scratch_w: Vec<f64>,
}

impl LpEngine {
    pub fn new(inst: &MilpInstance, opts: SimplexOptions) -> Result<Self, MilpError> {
        inst.validate()?;
        let n = inst.n;
        let m = inst.m;
        let ncols = n + m;

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
        for (i, row) in inst.rows.iter().enumerate() {
            for (j, a) in row.iter() {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
        }
        for i in 0..m {
            cols[n + i].push((i, 1.0));
        }

        let mut lb = Vec::with_capacity(ncols);
        let mut ub = Vec::with_capacity(ncols);
        lb.extend_from_slice(&inst.lb);
        ub.extend_from_slice(&inst.ub);
        for sense in &inst.sense {
            match sense {
                RowSense::Le => {
                    lb.push(0.0);
                    ub.push(f64::INFINITY);
                }
                RowSense::Ge => {
                    lb.push(f64::NEG_INFINITY);
                    ub.push(0.0);
                }
                RowSense::Eq => {
                    lb.push(0.0);
                    ub.push(0.0);
                }
            }
        }

        let mut cost = vec![0.0; ncols];
        cost[..n].copy_from_slice(&inst.obj);

        let mut engine = Self {
            n,
            m,
            ncols,
            cols,
            cost,
            b: inst.rhs.clone(),
            base_lb: lb.clone(),
            base_ub: ub.clone(),
            lb,
            ub,
            state: vec![ColState::Lower; ncols],
            basic_row: vec![usize::MAX; ncols],
            basis: Vec::new(),
            binv: Vec::new(),
            x: vec![0.0; ncols],
            opts,
            bland: matches!(opts.pricing, Pricing::Bland),
            degen_streak: 0,
            pivots_since_refresh: 0,
            total_iterations: 0,
            scratch_y: vec![0.0; m],
            scratch_w: vec![0.0; m],
        };
        engine.reset_basis();
        Ok(engine)
    }

    /// Cumulative simplex iterations across all solves on this engine.
    pub fn iterations(&self) -> usize {
        self.total_iterations
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Override the bounds of structural variable `j` for subsequent solves.
    pub fn set_var_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        assert!(j < self.n, "set_var_bounds: {j} out of range");
        self.lb[j] = lo;
        self.ub[j] = hi;
    }

    pub fn var_bounds(&self, j: usize) -> (f64, f64) {
        (self.lb[j], self.ub[j])
    }

    /// Restore all structural bounds to the instance's.
    pub fn reset_bounds(&mut self) {
        self.lb.copy_from_slice(&self.base_lb);
        self.ub.copy_from_slice(&self.base_ub);
    }

    /// Discard the current basis: all slacks basic, structurals at a finite
    /// bound (lower preferred), `B^{-1} = I`.
    pub fn reset_basis(&mut self) {
        for j in 0..self.n {
            self.state[j] = if self.lb[j].is_finite() {
                ColState::Lower
            } else if self.ub[j].is_finite() {
                ColState::Upper
            } else {
                ColState::Free
            };
        }
        self.basis.clear();
        for i in 0..self.m {
            self.state[self.n + i] = ColState::Basic;
            self.basic_row[self.n + i] = i;
            self.basis.push(self.n + i);
        }
        self.binv = vec![0.0; self.m * self.m];
        for i in 0..self.m {
            self.binv[i * self.m + i] = 1.0;
        }
        self.bland = matches!(self.opts.pricing, Pricing::Bland);
        self.degen_streak = 0;
    }

    /// Install an exported basis (e.g. from a previous solve of a related
    /// instance) and rebuild the inverse. Falls back to the slack basis if
    /// the snapshot is inconsistent or singular.
    pub fn load_basis(&mut self, basis: &Basis) {
        if basis.states.len() != self.ncols {
            self.reset_basis();
            return;
        }
        let basic: Vec<usize> = (0..self.ncols)
            .filter(|&j| matches!(basis.states[j], ColState::Basic))
            .collect();
        if basic.len() != self.m {
            self.reset_basis();
            return;
        }
        let mut dense = vec![0.0; self.m * self.m];
        for (c, &j) in basic.iter().enumerate() {
            for &(i, a) in &self.cols[j] {
                dense[c * self.m + i] = a;
            }
        }
        match invert_col_major(&dense, self.m) {
            Some(inv) => {
                self.state.copy_from_slice(&basis.states);
                self.basis = basic;
                for (r, &j) in self.basis.iter().enumerate() {
                    self.basic_row[j] = r;
                }
                self.binv = inv;
                self.bland = matches!(self.opts.pricing, Pricing::Bland);
                self.degen_streak = 0;
            }
            None => self.reset_basis(),
        }
    }

    /// Solve the LP with the current bounds, starting from the current basis.
    pub fn solve(&mut self) -> Result<LpSolution, MilpError> {
        // Contradictory bounds make the whole program infeasible outright.
        for j in 0..self.ncols {
            if self.lb[j] > self.ub[j] + 1e-9 {
                return Ok(self.extract(LpStatus::Infeasible, 0));
            }
        }

        let start_iterations = self.total_iterations;
        self.normalize_nonbasic();
        self.refresh_basics();

        // Phase 1: drive basic bound violations to zero.
        loop {
            if self.max_infeasibility() <= FEAS_TOL {
                break;
            }
            match self.step(true)? {
                Step::Pivoted | Step::BoundFlip | Step::Retry => {}
                Step::NoEntering => {
                    return Ok(self.extract(
                        LpStatus::Infeasible,
                        self.total_iterations - start_iterations,
                    ));
                }
                Step::Unbounded => {
                    // A feasibility objective bounded below by zero cannot be
                    // unbounded; treat as a numerical failure.
                    return Err(MilpError::NumericalBreakdown {
                        iteration: self.total_iterations,
                    });
                }
            }
            self.check_budget(start_iterations)?;
        }

        // Phase 2: optimize the real objective.
        loop {
            match self.step(false)? {
                Step::Pivoted | Step::BoundFlip | Step::Retry => {}
                Step::NoEntering => break,
                Step::Unbounded => {
                    return Ok(self.extract(
                        LpStatus::Unbounded,
                        self.total_iterations - start_iterations,
                    ));
                }
            }
            // Phase-2 pivots can re-violate feasibility only through drift;
            // a periodic refresh inside `step` keeps that in check.
            self.check_budget(start_iterations)?;
        }

        self.refresh_basics();
        Ok(self.extract(LpStatus::Optimal, self.total_iterations - start_iterations))
    }

    fn check_budget(&self, start: usize) -> Result<(), MilpError> {
        if self.total_iterations - start > self.opts.max_iterations {
            Err(MilpError::IterationLimit {
                limit: self.opts.max_iterations,
            })
        } else {
            Ok(())
        }
    }

    /// Make every nonbasic column consistent with the current bounds; bounds
    /// may have changed since the basis was last used.
    fn normalize_nonbasic(&mut self) {
        for j in 0..self.ncols {
            match self.state[j] {
                ColState::Basic => {}
                ColState::Lower => {
                    if self.lb[j].is_finite() {
                        self.x[j] = self.lb[j];
                    } else if self.ub[j].is_finite() {
                        self.state[j] = ColState::Upper;
                        self.x[j] = self.ub[j];
                    } else {
                        self.state[j] = ColState::Free;
                        self.x[j] = 0.0;
                    }
                }
                ColState::Upper => {
                    if self.ub[j].is_finite() {
                        self.x[j] = self.ub[j];
                    } else if self.lb[j].is_finite() {
                        self.state[j] = ColState::Lower;
                        self.x[j] = self.lb[j];
                    } else {
                        self.state[j] = ColState::Free;
                        self.x[j] = 0.0;
                    }
                }
                ColState::Free => {
                    if self.lb[j].is_finite() {
                        self.state[j] = ColState::Lower;
                        self.x[j] = self.lb[j];
                    } else if self.ub[j].is_finite() {
                        self.state[j] = ColState::Upper;
                        self.x[j] = self.ub[j];
                    } else {
                        self.x[j] = 0.0;
                    }
                }
            }
        }
    }

    /// Recompute basic values `x_B = B^{-1} (b - N x_N)` from scratch.
    fn refresh_basics(&mut self) {
        let m = self.m;
        let mut rhs = self.b.clone();
        for j in 0..self.ncols {
            if !matches!(self.state[j], ColState::Basic) && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    rhs[i] -= a * self.x[j];
                }
            }
        }
        let mut xb = vec![0.0; m];
        for (i, &r) in rhs.iter().enumerate() {
            if r != 0.0 {
                let col = &self.binv[i * m..(i + 1) * m];
                for (row, c) in col.iter().enumerate() {
                    xb[row] += c * r;
                }
            }
        }
        for (row, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[row];
        }
        self.pivots_since_refresh = 0;
    }

    /// Largest single bound violation over basic variables. Must classify
    /// violations with the same threshold the phase-1 multipliers use, or the
    /// two could disagree about whether phase 1 is finished.
    fn max_infeasibility(&self) -> f64 {
        let mut worst = 0.0_f64;
        for &j in &self.basis {
            let v = self.x[j];
            if v < self.lb[j] {
                worst = worst.max(self.lb[j] - v);
            } else if v > self.ub[j] {
                worst = worst.max(v - self.ub[j]);
            }
        }
        worst
    }

    /// Simplex multipliers for the phase-1 composite objective: -1 on basics
    /// below their lower bound, +1 above their upper bound.
    fn phase1_multipliers(&mut self) {
        let m = self.m;
        let mut g = vec![0.0; m];
        let mut any = false;
        for (row, &j) in self.basis.iter().enumerate() {
            let v = self.x[j];
            if v < self.lb[j] - FEAS_TOL {
                g[row] = -1.0;
                any = true;
            } else if v > self.ub[j] + FEAS_TOL {
                g[row] = 1.0;
                any = true;
            }
        }
        if !any {
            self.scratch_y.iter_mut().for_each(|y| *y = 0.0);
            return;
        }
        for i in 0..m {
            let col = &self.binv[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for (row, c) in col.iter().enumerate() {
                if g[row] != 0.0 {
                    acc += g[row] * c;
                }
            }
            self.scratch_y[i] = acc;
        }
    }

    /// Simplex multipliers `y = c_B B^{-1}` for the real objective.
    fn phase2_multipliers(&mut self) {
        let m = self.m;
        for i in 0..m {
            let col = &self.binv[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for (row, c) in col.iter().enumerate() {
                let cb = self.cost[self.basis[row]];
                if cb != 0.0 {
                    acc += cb * c;
                }
            }
            self.scratch_y[i] = acc;
        }
    }

    fn reduced_cost(&self, j: usize, phase1: bool) -> f64 {
        let base = if phase1 { 0.0 } else { self.cost[j] };
        let mut acc = base;
        for &(i, a) in &self.cols[j] {
            acc -= self.scratch_y[i] * a;
        }
        acc
    }

    /// One pricing + ratio-test + update step. `phase1` selects the composite
    /// feasibility objective and the extended ratio test that lets violated
    /// basics travel to their violated bound.
    fn step(&mut self, phase1: bool) -> Result<Step, MilpError> {
        if phase1 {
            self.phase1_multipliers();
        } else {
            self.phase2_multipliers();
        }

        // Pricing: most negative improvement (Dantzig) or lowest index (Bland).
        let mut entering: Option<(usize, f64, f64)> = None; // (col, direction, score)
        for j in 0..self.ncols {
            let dir = match self.state[j] {
                ColState::Basic => continue,
                ColState::Lower => {
                    if self.ub[j] - self.lb[j] <= 1e-30 {
                        continue; // fixed column can never move
                    }
                    1.0
                }
                ColState::Upper => {
                    if self.ub[j] - self.lb[j] <= 1e-30 {
                        continue;
                    }
                    -1.0
                }
                ColState::Free => 0.0,
            };
            let d = self.reduced_cost(j, phase1);
            let (dir, score) = if dir == 0.0 {
                // free column: move against the gradient
                if d > COST_TOL {
                    (-1.0, d)
                } else if d < -COST_TOL {
                    (1.0, -d)
                } else {
                    continue;
                }
            } else if dir > 0.0 {
                if d < -COST_TOL {
                    (1.0, -d)
                } else {
                    continue;
                }
            } else if d > COST_TOL {
                (-1.0, d)
            } else {
                continue;
            };
            if self.bland {
                entering = Some((j, dir, score));
                break;
            }
            match entering {
                Some((_, _, best)) if best >= score => {}
                _ => entering = Some((j, dir, score)),
            }
        }

        let Some((q, dir, _)) = entering else {
            return Ok(Step::NoEntering);
        };

        // w = B^{-1} A_q, accumulated column-wise from the inverse.
        let m = self.m;
        self.scratch_w.iter_mut().for_each(|w| *w = 0.0);
        for &(i, a) in &self.cols[q] {
            let col = &self.binv[i * m..(i + 1) * m];
            for (row, c) in col.iter().enumerate() {
                self.scratch_w[row] += a * c;
            }
        }

        // Ratio test. The entering column's own travel range is a candidate
        // blocker (bound flip).
        let own_range = self.ub[q] - self.lb[q]; // +inf when either is infinite
        let mut best_delta = if own_range.is_finite() {
            own_range
        } else {
            f64::INFINITY
        };
        let mut leave: Option<(usize, f64)> = None; // (row, pivot magnitude)
        let mut leave_to_upper = false;

        for row in 0..m {
            let w = self.scratch_w[row];
            if w.abs() <= ZERO_TOL {
                continue;
            }
            let rate = -dir * w;
            let j = self.basis[row];
            let v = self.x[j];
            let (lo, hi) = (self.lb[j], self.ub[j]);

            // Infeasible basics (phase 1 only) block when they reach the bound
            // they violate; feasible basics block at whichever bound they move
            // toward. Either way the blocking bound is where the leaving
            // variable comes to rest.
            let (delta, to_upper) = if phase1 && v < lo - FEAS_TOL {
                if rate > 0.0 {
                    ((lo - v) / rate, false)
                } else {
                    continue;
                }
            } else if phase1 && v > hi + FEAS_TOL {
                if rate < 0.0 {
                    ((hi - v) / rate, true)
                } else {
                    continue;
                }
            } else if rate > 0.0 {
                if hi.is_finite() {
                    (((hi - v) / rate).max(0.0), true)
                } else {
                    continue;
                }
            } else if lo.is_finite() {
                (((lo - v) / rate).max(0.0), false)
            } else {
                continue;
            };

            let delta = delta.max(0.0);
            let better = match leave {
                _ if delta < best_delta - 1e-12 => true,
                Some((prev_row, prev_mag)) if delta <= best_delta + 1e-12 => {
                    if self.bland {
                        self.basis[row] < self.basis[prev_row]
                    } else {
                        w.abs() > prev_mag
                    }
                }
                None if delta <= best_delta + 1e-12 => true,
                _ => false,
            };
            if better {
                best_delta = delta.min(best_delta);
                leave = Some((row, w.abs()));
                leave_to_upper = to_upper;
            }
        }

        if best_delta.is_infinite() {
            // In phase 1 this cannot happen for a genuinely improving
            // direction (some violated basic must block); the caller treats
            // it as a numerical failure there.
            return Ok(Step::Unbounded);
        }

        self.total_iterations += 1;

        // Degenerate-streak bookkeeping drives the Bland fallback.
        if best_delta <= 1e-12 {
            self.degen_streak += 1;
            if self.degen_streak > 200 + self.ncols && !self.bland {
                self.bland = true;
            }
        } else {
            self.degen_streak = 0;
        }

        match leave {
            None => {
                // Bound flip: the entering column travels its full range.
                let delta = best_delta;
                self.apply_move(q, dir, delta);
                self.state[q] = match self.state[q] {
                    ColState::Lower => {
                        self.x[q] = self.ub[q];
                        ColState::Upper
                    }
                    ColState::Upper => {
                        self.x[q] = self.lb[q];
                        ColState::Lower
                    }
                    other => other, // free columns never have a finite range
                };
                Ok(Step::BoundFlip)
            }
            Some((row, mag)) => {
                if mag < PIVOT_TOL && !self.bland {
                    // Too small to pivot on safely: retry the whole step under
                    // Bland's rule, which picks a different entering column.
                    self.bland = true;
                    self.total_iterations -= 1;
                    return Ok(Step::Retry);
                }
                if mag < PIVOT_MIN {
                    return Err(MilpError::NumericalBreakdown {
                        iteration: self.total_iterations,
                    });
                }
                let delta = best_delta;
                self.apply_move(q, dir, delta);
                let leaving = self.basis[row];
                // Snap the leaving variable onto its blocking bound.
                self.x[leaving] = if leave_to_upper {
                    self.ub[leaving]
                } else {
                    self.lb[leaving]
                };
                self.state[leaving] = if leave_to_upper {
                    ColState::Upper
                } else {
                    ColState::Lower
                };
                self.basic_row[leaving] = usize::MAX;
                self.update_inverse(row);
                self.basis[row] = q;
                self.basic_row[q] = row;
                self.state[q] = ColState::Basic;

                self.pivots_since_refresh += 1;
                if self.pivots_since_refresh >= REFRESH_EVERY {
                    self.refresh_basics();
                }
                Ok(Step::Pivoted)
            }
        }
    }

    /// Move the entering column by `delta` in direction `dir`, updating every
    /// basic value along `w`.
    fn apply_move(&mut self, q: usize, dir: f64, delta: f64) {
        if delta == 0.0 {
            return;
        }
        self.x[q] += dir * delta;
        for row in 0..self.m {
            let w = self.scratch_w[row];
            if w.abs() > ZERO_TOL {
                let j = self.basis[row];
                self.x[j] -= dir * w * delta;
            }
        }
    }

    /// Product-form update of the explicit inverse after the column in basis
    /// `row` is replaced: `B^{-1} <- E B^{-1}` with the eta column built from
    /// the pivot column `w`.
    fn update_inverse(&mut self, row: usize) {
        let m = self.m;
        let p = self.scratch_w[row];
        for c in 0..m {
            let t = self.binv[c * m + row];
            if t == 0.0 {
                continue;
            }
            let f = t / p;
            let col = &mut self.binv[c * m..(c + 1) * m];
            for (i, entry) in col.iter_mut().enumerate() {
                if i == row {
                    *entry = f;
                } else {
                    let w = self.scratch_w[i];
                    if w != 0.0 {
                        *entry -= w * f;
                    }
                }
            }
        }
    }

    fn extract(&mut self, status: LpStatus, iterations: usize) -> LpSolution {
        let n = self.n;
        self.phase2_multipliers();
        let duals = self.scratch_y[..self.m].to_vec();
        let mut reduced = Vec::with_capacity(n);
        for j in 0..n {
            reduced.push(self.reduced_cost(j, false));
        }
        let values: Vec<f64> = self.x[..n].to_vec();
        let objective = match status {
            LpStatus::Optimal => self
                .cost[..n]
                .iter()
                .zip(&values)
                .map(|(c, v)| c * v)
                .sum(),
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
        };
        let basis_status = (0..n)
            .map(|j| match self.state[j] {
                ColState::Basic => BasisStatus::Basic,
                ColState::Lower | ColState::Free => BasisStatus::AtLower,
                ColState::Upper => BasisStatus::AtUpper,
            })
            .collect();
        LpSolution {
            status,
            values,
            objective,
            duals,
            reduced_costs: reduced,
            basis_status,
            iterations,
            basis: Basis {
                states: self.state.clone(),
            },
        }
    }
}

/// Invert a dense column-major `m x m` matrix by Gauss-Jordan with partial
/// pivoting; `None` if singular (pivot below 1e-11).
fn invert_col_major(a: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut work = a.to_vec();
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    let at = |mat: &[f64], r: usize, c: usize| mat[c * m + r];
    for col in 0..m {
        // pivot row for this column
        let mut piv = col;
        let mut best = at(&work, col, col).abs();
        for r in col + 1..m {
            let v = at(&work, r, col).abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < 1e-11 {
            return None;
        }
        if piv != col {
            for c in 0..m {
                work.swap(c * m + piv, c * m + col);
                inv.swap(c * m + piv, c * m + col);
            }
        }
        let p = at(&work, col, col);
        for c in 0..m {
            work[c * m + col] /= p;
            inv[c * m + col] /= p;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = at(&work, r, col);
            if f == 0.0 {
                continue;
            }
            for c in 0..m {
                let wv = work[c * m + col];
                if wv != 0.0 {
                    work[c * m + r] -= f * wv;
                }
                let iv = inv[c * m + col];
                if iv != 0.0 {
                    inv[c * m + r] -= f * iv;
                }
            }
        }
    }
    Some(inv)
}

/// Solve the LP relaxation of an instance (integrality dropped) with default
/// options and a cold start.
pub fn lp_relax_solve(inst: &MilpInstance) -> Result<LpSolution, MilpError> {
    let mut engine = LpEngine::new(inst, SimplexOptions::default())?;
    engine.solve()
}
