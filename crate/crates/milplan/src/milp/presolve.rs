//! Presolve: cheap, provably objective-preserving instance reductions.
//!
//! Three rule families run to a fixpoint: empty-row elimination, singleton
//! rows folded into variable bounds, and activity-based bound tightening on
//! longer rows (with integer rounding of integer variables' bounds). A
//! variable whose bounds collapse is "fixed": its row entries are folded into
//! the right-hand sides and the column stays in place with `lb = ub`, so
//! variable indices and the optimal objective are untouched.
//!
//! Rows are only deleted at the very end, so every reduction in the log
//! refers to original row indices.

use std::fmt;

use super::{MilpError, MilpInstance, RowSense};

const TIGHTEN_EPS: f64 = 1e-9;
const COEFF_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Reduction {
    EmptyRowRemoved { row: usize },
    SingletonRowRemoved { row: usize, var: usize },
    LowerTightened { var: usize, from: f64, to: f64 },
    UpperTightened { var: usize, from: f64, to: f64 },
    VarFixed { var: usize, value: f64 },
    InfeasibleDetected { reason: String },
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reduction::EmptyRowRemoved { row } => write!(f, "removed empty row {row}"),
            Reduction::SingletonRowRemoved { row, var } => {
                write!(f, "folded singleton row {row} into bounds of variable {var}")
            }
            Reduction::LowerTightened { var, from, to } => {
                write!(f, "raised lower bound of variable {var}: {from} -> {to}")
            }
            Reduction::UpperTightened { var, from, to } => {
                write!(f, "lowered upper bound of variable {var}: {from} -> {to}")
            }
            Reduction::VarFixed { var, value } => {
                write!(f, "fixed variable {var} at {value}")
            }
            Reduction::InfeasibleDetected { reason } => {
                write!(f, "detected infeasibility: {reason}")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Presolved {
    pub instance: MilpInstance,
    pub reductions: Vec<Reduction>,
    /// Trivial infeasibility was proven; `instance` is the partially reduced
    /// state and has no feasible point.
    pub infeasible: bool,
}

struct Ctx {
    inst: MilpInstance,
    /// Rows scheduled for deletion (kept in place until the end so logged
    /// indices stay valid).
    dead_row: Vec<bool>,
    /// Variables already folded into the rhs.
    fixed: Vec<bool>,
    log: Vec<Reduction>,
}

pub fn presolve(instance: &MilpInstance) -> Result<Presolved, MilpError> {
    instance.validate()?;
    let m = instance.m;
    let n = instance.n;
    let mut ctx = Ctx {
        inst: instance.clone(),
        dead_row: vec![false; m],
        fixed: vec![false; n],
        log: Vec::new(),
    };

    let infeasible = loop {
        let before = ctx.log.len();
        if round_integer_bounds(&mut ctx) | check_bound_consistency(&mut ctx) {
            break true;
        }
        if fold_fixed_variables(&mut ctx) {
            break true;
        }
        if scan_rows(&mut ctx) {
            break true;
        }
        if ctx.log.len() == before {
            break false;
        }
    };

    let instance = compact(ctx.inst, &ctx.dead_row);
    Ok(Presolved {
        instance,
        reductions: ctx.log,
        infeasible,
    })
}

/// Clamp integer variables' bounds to integers. Returns true on proven
/// infeasibility (never happens here; kept for signature symmetry).
fn round_integer_bounds(ctx: &mut Ctx) -> bool {
    let int_vars: Vec<usize> = ctx.inst.int_set.iter().copied().collect();
    for j in int_vars {
        let lo = ctx.inst.lb[j];
        if lo.is_finite() {
            let rounded = (lo - TIGHTEN_EPS).ceil();
            if rounded - lo > TIGHTEN_EPS {
                ctx.log.push(Reduction::LowerTightened {
                    var: j,
                    from: lo,
                    to: rounded,
                });
                ctx.inst.lb[j] = rounded;
            }
        }
        let hi = ctx.inst.ub[j];
        if hi.is_finite() {
            let rounded = (hi + TIGHTEN_EPS).floor();
            if hi - rounded > TIGHTEN_EPS {
                ctx.log.push(Reduction::UpperTightened {
                    var: j,
                    from: hi,
                    to: rounded,
                });
                ctx.inst.ub[j] = rounded;
            }
        }
    }
    false
}

/// Crossed bounds prove infeasibility.
fn check_bound_consistency(ctx: &mut Ctx) -> bool {
    for j in 0..ctx.inst.n {
        if ctx.inst.lb[j] > ctx.inst.ub[j] + TIGHTEN_EPS {
            ctx.log.push(Reduction::InfeasibleDetected {
                reason: format!(
                    "variable {j} has crossed bounds [{}, {}]",
                    ctx.inst.lb[j], ctx.inst.ub[j]
                ),
            });
            return true;
        }
    }
    false
}

/// Fold variables with collapsed bounds into the right-hand sides. The column
/// itself stays (fixed at its value) so indices and the objective are stable.
fn fold_fixed_variables(ctx: &mut Ctx) -> bool {
    for j in 0..ctx.inst.n {
        if ctx.fixed[j] || !ctx.inst.lb[j].is_finite() {
            continue;
        }
        if (ctx.inst.ub[j] - ctx.inst.lb[j]).abs() > TIGHTEN_EPS {
            continue;
        }
        let value = ctx.inst.lb[j];
        ctx.inst.ub[j] = value;
        ctx.fixed[j] = true;
        ctx.log.push(Reduction::VarFixed { var: j, value });
        for i in 0..ctx.inst.m {
            if ctx.dead_row[i] {
                continue;
            }
            let row = &mut ctx.inst.rows[i];
            if let Some(k) = row.idx.iter().position(|&c| c == j) {
                let a = row.val[k];
                row.idx.swap_remove(k);
                row.val.swap_remove(k);
                ctx.inst.rhs[i] -= a * value;
            }
        }
    }
    false
}

/// Per-row analysis: empty-row elimination, singleton folding, and
/// activity-based bound tightening. Returns true on proven infeasibility.
fn scan_rows(ctx: &mut Ctx) -> bool {
    for i in 0..ctx.inst.m {
        if ctx.dead_row[i] {
            continue;
        }
        let live: Vec<(usize, f64)> = ctx.inst.rows[i]
            .iter()
            .filter(|(_, a)| a.abs() > COEFF_EPS)
            .collect();
        let sense = ctx.inst.sense[i];
        let rhs = ctx.inst.rhs[i];

        match live.len() {
            0 => {
                let ok = match sense {
                    RowSense::Le => 0.0 <= rhs + TIGHTEN_EPS,
                    RowSense::Eq => rhs.abs() <= TIGHTEN_EPS,
                    RowSense::Ge => 0.0 >= rhs - TIGHTEN_EPS,
                };
                if !ok {
                    ctx.log.push(Reduction::InfeasibleDetected {
                        reason: format!("empty row {i} requires 0 {} {rhs}", sense_str(sense)),
                    });
                    return true;
                }
                ctx.dead_row[i] = true;
                ctx.log.push(Reduction::EmptyRowRemoved { row: i });
            }
            1 => {
                let (j, a) = live[0];
                // a x_j (sense) rhs  =>  bound(s) on x_j
                let v = rhs / a;
                let tighten_upper = matches!(
                    (sense, a > 0.0),
                    (RowSense::Le, true) | (RowSense::Ge, false)
                ) || sense == RowSense::Eq;
                let tighten_lower = matches!(
                    (sense, a > 0.0),
                    (RowSense::Ge, true) | (RowSense::Le, false)
                ) || sense == RowSense::Eq;
                if tighten_upper && tighten_var(ctx, j, v, false) {
                    return true;
                }
                if tighten_lower && tighten_var(ctx, j, v, true) {
                    return true;
                }
                ctx.dead_row[i] = true;
                ctx.log.push(Reduction::SingletonRowRemoved { row: i, var: j });
            }
            _ => {
                if tighten_from_activity(ctx, i, &live) {
                    return true;
                }
            }
        }
    }
    false
}

fn sense_str(sense: RowSense) -> &'static str {
    match sense {
        RowSense::Le => "<=",
        RowSense::Eq => "=",
        RowSense::Ge => ">=",
    }
}

/// Tighten one bound of `j` to `v` (lower if `is_lower`). Returns true when
/// the move proves infeasibility.
fn tighten_var(ctx: &mut Ctx, j: usize, v: f64, is_lower: bool) -> bool {
    if is_lower {
        if v > ctx.inst.lb[j] + TIGHTEN_EPS {
            ctx.log.push(Reduction::LowerTightened {
                var: j,
                from: ctx.inst.lb[j],
                to: v,
            });
            ctx.inst.lb[j] = v;
        }
    } else if v < ctx.inst.ub[j] - TIGHTEN_EPS {
        ctx.log.push(Reduction::UpperTightened {
            var: j,
            from: ctx.inst.ub[j],
            to: v,
        });
        ctx.inst.ub[j] = v;
    }
    if ctx.inst.lb[j] > ctx.inst.ub[j] + TIGHTEN_EPS {
        ctx.log.push(Reduction::InfeasibleDetected {
            reason: format!(
                "variable {j} has crossed bounds [{}, {}] after tightening",
                ctx.inst.lb[j], ctx.inst.ub[j]
            ),
        });
        return true;
    }
    false
}

/// Activity bounds of a row slice: (minimum activity, maximum activity),
/// either possibly infinite.
fn activity_bounds(ctx: &Ctx, live: &[(usize, f64)]) -> (f64, f64) {
    let mut min_act = 0.0;
    let mut max_act = 0.0;
    for &(j, a) in live {
        let (lo, hi) = (ctx.inst.lb[j], ctx.inst.ub[j]);
        if a > 0.0 {
            min_act += a * lo; // -inf propagates
            max_act += a * hi;
        } else {
            min_act += a * hi;
            max_act += a * lo;
        }
    }
    (min_act, max_act)
}

/// Implied-bound tightening for a multi-entry row. For `sum a_j x_j <= rhs`
/// and `a_k > 0`: `x_k <= (rhs - min_activity_without_k) / a_k`, and the
/// mirrored versions. Equality rows apply both directions. Returns true on
/// proven infeasibility.
fn tighten_from_activity(ctx: &mut Ctx, i: usize, live: &[(usize, f64)]) -> bool {
    let sense = ctx.inst.sense[i];
    let rhs = ctx.inst.rhs[i];
    let (min_act, max_act) = activity_bounds(ctx, live);

    // The row itself can already be impossible.
    if (sense != RowSense::Ge && min_act > rhs + 1e-7)
        || (sense != RowSense::Le && max_act < rhs - 1e-7)
    {
        ctx.log.push(Reduction::InfeasibleDetected {
            reason: format!(
                "row {i} activity range [{min_act}, {max_act}] excludes rhs {rhs} ({})",
                sense_str(sense)
            ),
        });
        return true;
    }

    for &(k, a) in live {
        let (lo_k, hi_k) = (ctx.inst.lb[k], ctx.inst.ub[k]);
        // Activity of the row without k's own contribution.
        let own_min = if a > 0.0 { a * lo_k } else { a * hi_k };
        let own_max = if a > 0.0 { a * hi_k } else { a * lo_k };
        let rest_min = min_act - own_min;
        let rest_max = max_act - own_max;

        if sense != RowSense::Ge && rest_min.is_finite() {
            // a x_k <= rhs - rest_min
            let v = (rhs - rest_min) / a;
            if tighten_var(ctx, k, v, a < 0.0) {
                return true;
            }
        }
        if sense != RowSense::Le && rest_max.is_finite() {
            // a x_k >= rhs - rest_max
            let v = (rhs - rest_max) / a;
            if tighten_var(ctx, k, v, a > 0.0) {
                return true;
            }
        }
    }
    false
}

/// Drop dead rows, remapping row annotations onto the surviving indices.
fn compact(mut inst: MilpInstance, dead: &[bool]) -> MilpInstance {
    if !dead.iter().any(|&d| d) {
        return inst;
    }
    let mut new_index = vec![usize::MAX; inst.m];
    let mut next = 0;
    for i in 0..inst.m {
        if !dead[i] {
            new_index[i] = next;
            next += 1;
        }
    }
    let keep = |i: &usize| !dead[*i];
    let mut rows = Vec::with_capacity(next);
    let mut rhs = Vec::with_capacity(next);
    let mut sense = Vec::with_capacity(next);
    for i in 0..inst.m {
        if !dead[i] {
            rows.push(std::mem::take(&mut inst.rows[i]));
            rhs.push(inst.rhs[i]);
            sense.push(inst.sense[i]);
        }
    }
    inst.annotations.row = inst
        .annotations
        .row
        .iter()
        .filter(|(i, _)| keep(i))
        .map(|(i, tag)| (new_index[*i], tag.clone()))
        .collect();
    inst.rows = rows;
    inst.rhs = rhs;
    inst.sense = sense;
    inst.m = next;
    inst
}
