//! Evaluation harness: solver-run metrics, method-vs-default summaries, and
//! experiment reports.
//!
//! The metric conventions, fixed here and used everywhere downstream:
//!
//! * **Primal gap** `PG(v, v*) = |v − v*| / max(|v*|, 1e-8)`, defined only
//!   when `v · v* ≥ 0`; a sign conflict returns `None` rather than a silent
//!   number.
//! * **Primal integral** integrates the capped gap `min(PG, 1)` as a
//!   right-continuous step function of the trace. Before the first incumbent
//!   (and for undefined gaps) the level is 1, so `PI ≤ t_end` always. The
//!   time axis is the caller's choice: wall seconds for human-readable
//!   reports, cumulative LP iterations for deterministic comparisons.
//! * **Wins** are strict pairwise comparisons against the default method on
//!   the headline metric; ties are excluded and counted separately.
//! * **Improvement** = `(mean_default − mean_method) / mean_default × 100`,
//!   means taken over the instances where both methods have a defined
//!   headline metric.

pub mod runner;


use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bnb::{SolveResult, SolveStatus, TracePoint};

/// Denominator floor in the primal-gap normalization.
pub const GAP_EPSILON: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("instances missing a record for every method: {0:?}")]
    MissingPairs(Vec<String>),
    #[error("no records to summarize")]
    Empty,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("report parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Normalized primal gap; `None` when the bound and reference disagree in
/// sign, where the normalization is meaningless.
pub fn primal_gap(v: f64, v_star: f64) -> Option<f64> {
    if !v.is_finite() || !v_star.is_finite() {
        return None;
    }
    if v * v_star < 0.0 {
        return None;
    }
    Some((v - v_star).abs() / v_star.abs().max(GAP_EPSILON))
}

/// Time-integral of the capped primal gap over `[0, t_end]`.
///
/// `points` are `(t, incumbent objective)` in non-decreasing `t`; the gap
/// level is 1 until the first point, then steps right-continuously to
/// `min(1, PG(bound, v_star))` at each point (undefined gaps count as 1).
pub fn primal_integral(points: &[(f64, f64)], t_end: f64, v_star: f64) -> f64 {
    if !(t_end > 0.0) {
        return 0.0;
    }
    let level_of = |bound: f64| -> f64 {
        match primal_gap(bound, v_star) {
            Some(g) => g.min(1.0),
            None => 1.0,
        }
    };
    let mut total = 0.0;
    let mut t_prev = 0.0;
    let mut level = 1.0;
    for &(t, bound) in points {
        let t = t.clamp(0.0, t_end);
        debug_assert!(t >= t_prev, "trace timestamps must be non-decreasing");
        total += level * (t - t_prev).max(0.0);
        t_prev = t.max(t_prev);
        // A later incumbent can only improve the bound, but clamp anyway so a
        // noisy trace cannot push the integral above t_end.
        level = level.min(level_of(bound));
        if t_prev >= t_end {
            break;
        }
    }
    total += level * (t_end - t_prev).max(0.0);
    total
}

/// Trace projected onto wall-clock seconds.
pub fn trace_by_time(trace: &[TracePoint]) -> Vec<(f64, f64)> {
    trace.iter().map(|p| (p.elapsed, p.bound)).collect()
}

/// Trace projected onto cumulative LP iterations — the deterministic axis.
pub fn trace_by_iterations(trace: &[TracePoint]) -> Vec<(f64, f64)> {
    trace.iter().map(|p| (p.lp_iterations as f64, p.bound)).collect()
}

/// One solver run with its derived metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub method: String,
    pub status: SolveStatus,
    pub solve_time: f64,
    pub node_count: u64,
    pub lp_iterations: u64,
    pub objective: Option<f64>,
    pub primal_gap: Option<f64>,
    pub primal_integral: f64,
}

impl RunRecord {
    /// Derive the record from a solve. `v_star` is the best-known objective
    /// for the instance; `t_end` is the LP-iteration horizon used for the
    /// deterministic primal integral.
    pub fn from_result(
        instance: impl Into<String>,
        method: impl Into<String>,
        result: &SolveResult,
        v_star: f64,
        t_end: f64,
    ) -> Self {
        let gap = result.objective.and_then(|v| primal_gap(v, v_star));
        let pi = primal_integral(&trace_by_iterations(&result.primal_trace), t_end, v_star);
        RunRecord {
            instance: instance.into(),
            method: method.into(),
            status: result.status,
            solve_time: result.wall_time,
            node_count: result.node_count,
            lp_iterations: result.lp_iterations,
            objective: result.objective,
            primal_gap: gap,
            primal_integral: pi,
        }
    }
}

/// Which per-run number the comparison ranks on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Headline {
    /// Deterministic solve-effort proxy (branch-and-bound node count).
    NodeCount,
    /// Normalized primal gap at the cutoff.
    PrimalGap,
}

impl Headline {
    pub fn metric(self, record: &RunRecord) -> Option<f64> {
        match self {
            Headline::NodeCount => Some(record.node_count as f64),
            Headline::PrimalGap => record.primal_gap,
        }
    }
}

/// Distribution statistics for one method over the common instance set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodStats {
    pub method: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    /// `(mean_default − mean_method) / mean_default × 100`; `None` for the
    /// default method itself.
    pub improvement_pct: Option<f64>,
}

/// Strict-win tally of one method against the default.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairComparison {
    pub method: String,
    pub default_wins: usize,
    pub method_wins: usize,
    pub ties: usize,
    /// Instances left out of this pair because a headline metric was
    /// undefined on either side.
    pub excluded: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub headline: Headline,
    pub methods: Vec<MethodStats>,
    pub pairs: Vec<PairComparison>,
}

pub const DEFAULT_METHOD: &str = "default";

/// Aggregate per-run records into the Table-2-style summary. Every instance
/// must carry a record for every method present; comparisons run against
/// [`DEFAULT_METHOD`], which must appear.
pub fn summarize(records: &[RunRecord], headline: Headline) -> Result<MetricsSummary, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Empty);
    }
    let methods: BTreeSet<&str> = records.iter().map(|r| r.method.as_str()).collect();
    if !methods.contains(DEFAULT_METHOD) {
        return Err(HarnessError::Invalid(format!(
            "no '{DEFAULT_METHOD}' records to compare against"
        )));
    }
    let mut by_instance: BTreeMap<&str, BTreeMap<&str, &RunRecord>> = BTreeMap::new();
    for r in records {
        let slot = by_instance
            .entry(r.instance.as_str())
            .or_default()
            .insert(r.method.as_str(), r);
        if slot.is_some() {
            return Err(HarnessError::Invalid(format!(
                "duplicate record for instance '{}', method '{}'",
                r.instance, r.method
            )));
        }
    }
    let incomplete: Vec<String> = by_instance
        .iter()
        .filter(|(_, per)| per.len() != methods.len())
        .map(|(inst, _)| inst.to_string())
        .collect();
    if !incomplete.is_empty() {
        return Err(HarnessError::MissingPairs(incomplete));
    }

    let mut pairs = Vec::new();
    let mut stats = Vec::new();
    // Instances where every method has a defined metric and no method proved
    // infeasibility while another found a point: the common set the
    // distribution statistics are computed over.
    let common: Vec<&str> = by_instance
        .iter()
        .filter(|(_, per)| {
            per.values().all(|r| headline.metric(r).is_some())
                && per
                    .values()
                    .all(|r| comparable(r, per[DEFAULT_METHOD]))
        })
        .map(|(inst, _)| *inst)
        .collect();
    if common.is_empty() {
        return Err(HarnessError::Invalid(
            "no instance has a defined headline metric for every method".into(),
        ));
    }
    let default_mean = mean(
        &common
            .iter()
            .map(|inst| headline.metric(by_instance[inst][DEFAULT_METHOD]).unwrap())
            .collect::<Vec<_>>(),
    );

    for &method in &methods {
        let values: Vec<f64> = common
            .iter()
            .map(|inst| headline.metric(by_instance[inst][method]).unwrap())
            .collect();
        let m = mean(&values);
        stats.push(MethodStats {
            method: method.to_string(),
            count: values.len(),
            mean: m,
            std: std_dev(&values),
            p25: percentile(&values, 0.25),
            median: percentile(&values, 0.5),
            p75: percentile(&values, 0.75),
            improvement_pct: if method == DEFAULT_METHOD {
                None
            } else {
                Some((default_mean - m) / default_mean * 100.0)
            },
        });
        if method == DEFAULT_METHOD {
            continue;
        }
        let mut cmp = PairComparison {
            method: method.to_string(),
            default_wins: 0,
            method_wins: 0,
            ties: 0,
            excluded: Vec::new(),
        };
        for (inst, per) in &by_instance {
            if !comparable(per[DEFAULT_METHOD], per[method]) {
                cmp.excluded.push(inst.to_string());
                continue;
            }
            let d = headline.metric(per[DEFAULT_METHOD]);
            let m = headline.metric(per[method]);
            match (d, m) {
                (Some(d), Some(m)) => {
                    if m < d {
                        cmp.method_wins += 1;
                    } else if d < m {
                        cmp.default_wins += 1;
                    } else {
                        cmp.ties += 1;
                    }
                }
                _ => cmp.excluded.push(inst.to_string()),
            }
        }
        pairs.push(cmp);
    }

    Ok(MetricsSummary {
        headline,
        methods: stats,
        pairs,
    })
}

/// True when the two records can be compared head-to-head: neither proved
/// infeasibility while the other found a feasible point.
pub fn comparable(a: &RunRecord, b: &RunRecord) -> bool {
    (a.status == SolveStatus::Infeasible) == (b.status == SolveStatus::Infeasible)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation.
fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Linearly interpolated percentile of an unsorted sample, `q` in `[0, 1]`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile out of range");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Render the summary as the fixed-column report CSV:
/// `benchmark, method, wins, mean, std, p25, median, p75, improvement_pct`.
/// The default method's `wins` column counts its wins against the single
/// compared method when exactly one exists, otherwise 0.
pub fn summary_to_csv(benchmark: &str, summary: &MetricsSummary) -> String {
    let mut out = String::from("benchmark,method,wins,mean,std,p25,median,p75,improvement_pct\n");
    for s in &summary.methods {
        let wins = if s.method == DEFAULT_METHOD {
            if summary.pairs.len() == 1 {
                summary.pairs[0].default_wins
            } else {
                0
            }
        } else {
            summary
                .pairs
                .iter()
                .find(|p| p.method == s.method)
                .map(|p| p.method_wins)
                .unwrap_or(0)
        };
        let imp = s
            .improvement_pct
            .map(|v| format!("{v:.6}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            benchmark, s.method, wins, s.mean, s.std, s.p25, s.median, s.p75, imp
        ));
    }
    out
}

/// Parsed row of the report CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub benchmark: String,
    pub method: String,
    pub wins: usize,
    pub mean: f64,
    pub std: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub improvement_pct: Option<f64>,
}

/// Parse a report CSV produced by [`summary_to_csv`].
pub fn parse_summary_csv(text: &str) -> Result<Vec<CsvRow>, HarnessError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(HarnessError::Parse("empty file".into()))?;
    if header.trim() != "benchmark,method,wins,mean,std,p25,median,p75,improvement_pct" {
        return Err(HarnessError::Parse(format!("unexpected header: {header}")));
    }
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(HarnessError::Parse(format!(
                "line {}: expected 9 fields, got {}",
                ln + 2,
                fields.len()
            )));
        }
        let num = |s: &str| -> Result<f64, HarnessError> {
            s.parse()
                .map_err(|_| HarnessError::Parse(format!("line {}: bad number '{s}'", ln + 2)))
        };
        rows.push(CsvRow {
            benchmark: fields[0].to_string(),
            method: fields[1].to_string(),
            wins: fields[2]
                .parse()
                .map_err(|_| HarnessError::Parse(format!("line {}: bad wins", ln + 2)))?,
            mean: num(fields[3])?,
            std: num(fields[4])?,
            p25: num(fields[5])?,
            median: num(fields[6])?,
            p75: num(fields[7])?,
            improvement_pct: if fields[8].is_empty() {
                None
            } else {
                Some(num(fields[8])?)
            },
        });
    }
    Ok(rows)
}
