//! Exact branch-and-bound over the LP relaxation.
//!
//! The search honors strict branching priorities (the hook the learned
//! ranker drives), a 15-parameter configuration space ([`SolverConfig`]),
//! per-solve limits, and produces a primal trace plus an optional structured
//! search log. Runs are bit-deterministic given (instance, config,
//! priorities): wall-clock enters only the time-limit check and trace
//! timestamps, never a decision.

pub mod config;

use std::cmp::Reverse;
use std::collections::BTreeSet;
use std::collections::BinaryHeap;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::{
    presolve, LpEngine, LpSolution, LpStatus, MilpError, MilpInstance, Pricing, SimplexOptions,
};
pub use config::SolverConfig;
use config::{
    BranchDirection, BranchRule, DivingMode, IncumbentCut, LpPricing, NodeReprocess, NodeSelection,
    PresolveMode, PriorityDecay, RoundingFreq, TieBreak, WarmStart,
};

/// Integrality tolerance: an LP value within this of an integer counts as
/// integral, both for branching decisions and incumbent acceptance.
const INT_TOL: f64 = 1e-6;

/// Feasibility slack when verifying a candidate incumbent against the
/// original instance. Looser than [`INT_TOL`] because snapping integer
/// values to exact integers perturbs row activities by up to `INT_TOL`
/// times the coefficient mass.
const VERIFY_TOL: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum BnbError {
    #[error("invalid solve request: {0}")]
    Invalid(String),
    #[error("LP relaxation is unbounded; the integer program has no finite optimum to search for")]
    UnboundedRelaxation,
    #[error(transparent)]
    Milp(#[from] MilpError),
}

/// Branching priorities: higher values branch earlier; unlisted variables
/// have priority 0. Priorities are strict — whenever any maximal-priority
/// integer variable is fractional, one of them is branched on.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchPriority {
    map: std::collections::BTreeMap<usize, i64>,
}

impl BranchPriority {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, var: usize, priority: i64) {
        if priority == 0 {
            self.map.remove(&var);
        } else {
            self.map.insert(var, priority);
        }
    }

    pub fn get(&self, var: usize) -> i64 {
        self.map.get(&var).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Priority `1` for every listed variable, `0` elsewhere — the shape the
    /// backdoor pipeline emits.
    pub fn from_set(vars: impl IntoIterator<Item = usize>) -> Self {
        let mut p = Self::default();
        for v in vars {
            p.set(v, 1);
        }
        p
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        self.map.iter().map(|(&v, &p)| (v, p))
    }
}

/// Per-solve cutoffs. All fields must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    /// Wall-clock limit in seconds.
    pub time_limit: f64,
    /// Maximum number of processed (LP-solved) nodes.
    pub node_limit: u64,
    /// Relative optimality gap at which the search stops.
    pub gap: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            time_limit: 900.0,
            node_limit: u64::MAX,
            gap: 1e-6,
        }
    }
}

impl Limits {
    fn validate(&self) -> Result<(), BnbError> {
        if !(self.time_limit > 0.0) || self.node_limit == 0 || !(self.gap > 0.0) {
            return Err(BnbError::Invalid(format!(
                "limits must all be positive: time {}, nodes {}, gap {}",
                self.time_limit, self.node_limit, self.gap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Incumbent proven within the gap tolerance of the true optimum.
    Optimal,
    /// A limit struck while an incumbent was in hand.
    Feasible,
    Infeasible,
    /// A limit struck with no incumbent found.
    Limit,
}

/// One primal-bound improvement: (elapsed seconds, cumulative LP iterations,
/// incumbent objective).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub elapsed: f64,
    pub lp_iterations: u64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub incumbent: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// Processed nodes (nodes whose LP was solved).
    pub node_count: u64,
    pub lp_iterations: u64,
    pub wall_time: f64,
    pub primal_trace: Vec<TracePoint>,
    /// Final relative gap; 0 at proven optimality, `inf` with no incumbent.
    pub gap: f64,
}

impl SolveResult {
    /// Hardware-independent runtime proxy: compares by node count first,
    /// LP iterations second.
    pub fn runtime_proxy(&self) -> (u64, u64) {
        (self.node_count, self.lp_iterations)
    }
}

/// One search-log record per processed node. `bound` is the node's LP
/// objective (`None` when the node LP is infeasible); `global_lower` is the
/// best lower bound over the whole tree at the time the node finished;
/// `incumbent` is the primal bound at that moment. The two priority fields
/// expose the strict-priority invariant to log consumers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchLogRecord {
    pub id: u64,
    pub parent: Option<u64>,
    pub depth: u32,
    pub branch_var: Option<usize>,
    pub bound: Option<f64>,
    pub global_lower: f64,
    pub incumbent: Option<f64>,
    pub chosen_priority: Option<i64>,
    pub max_fractional_priority: Option<i64>,
}

#[derive(Debug, Clone)]
struct Node {
    id: u64,
    parent: Option<u64>,
    depth: u32,
    /// Lower bound inherited from the parent LP (the node's own LP can only
    /// raise it).
    bound: f64,
    /// Bounds of the integer variables, by position in the solver's int list.
    int_bounds: Vec<(f64, f64)>,
    /// Pseudocost bookkeeping: the branch that created this node.
    branch: Option<BranchInfo>,
}

#[derive(Debug, Clone, Copy)]
struct BranchInfo {
    var_pos: usize,
    /// Distance the branch pushed the variable (fractional part for the down
    /// child, one minus it for the up child).
    distance: f64,
    up: bool,
    parent_obj: f64,
}

struct HeapEntry(Node);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.0.bound == other.0.bound && self.0.id == other.0.id
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .bound
            .total_cmp(&other.0.bound)
            .then(self.0.id.cmp(&other.0.id))
    }
}

#[derive(Default)]
struct Pseudocosts {
    down: Vec<(f64, u32)>,
    up: Vec<(f64, u32)>,
}

impl Pseudocosts {
    fn with_len(len: usize) -> Self {
        Self {
            down: vec![(0.0, 0); len],
            up: vec![(0.0, 0); len],
        }
    }

    fn avg(slot: (f64, u32)) -> f64 {
        if slot.1 == 0 {
            1.0
        } else {
            slot.0 / f64::from(slot.1)
        }
    }

    fn record(&mut self, pos: usize, up: bool, unit_gain: f64) {
        let slot = if up {
            &mut self.up[pos]
        } else {
            &mut self.down[pos]
        };
        slot.0 += unit_gain;
        slot.1 += 1;
    }

    fn score(&self, pos: usize, frac: f64) -> f64 {
        let d = Self::avg(self.down[pos]) * frac;
        let u = Self::avg(self.up[pos]) * (1.0 - frac);
        d.max(1e-6) * u.max(1e-6)
    }
}

/// Solve a MILP to proven optimality (within `limits.gap`) or until a limit
/// strikes.
pub fn solve(
    instance: &MilpInstance,
    config: &SolverConfig,
    priorities: &BranchPriority,
    limits: &Limits,
) -> Result<SolveResult, BnbError> {
    solve_with_log(instance, config, priorities, limits, None)
}

/// As [`solve`], optionally appending one [`SearchLogRecord`] per processed
/// node to `log`.
pub fn solve_with_log(
    instance: &MilpInstance,
    config: &SolverConfig,
    priorities: &BranchPriority,
    limits: &Limits,
    mut log: Option<&mut Vec<SearchLogRecord>>,
) -> Result<SolveResult, BnbError> {
    instance.validate()?;
    limits.validate()?;
    let start = Instant::now();

    // Optional presolve. The reduced instance has the same variable count and
    // the same optimum, so solutions map back without translation.
    let reduced;
    let search_inst: &MilpInstance = match config.presolve {
        PresolveMode::Off => instance,
        PresolveMode::Basic => {
            let out = presolve(instance)?;
            if out.infeasible {
                return Ok(SolveResult {
                    status: SolveStatus::Infeasible,
                    incumbent: None,
                    objective: None,
                    node_count: 0,
                    lp_iterations: 0,
                    wall_time: start.elapsed().as_secs_f64(),
                    primal_trace: Vec::new(),
                    gap: f64::INFINITY,
                });
            }
            reduced = out.instance;
            &reduced
        }
    };

    let pricing = match config.lp_pricing {
        LpPricing::Dantzig => Pricing::Dantzig,
        LpPricing::Bland => Pricing::Bland,
    };
    let engine = LpEngine::new(
        search_inst,
        SimplexOptions {
            pricing,
            ..SimplexOptions::default()
        },
    )?;

    let int_vars: Vec<usize> = search_inst.int_set.iter().copied().collect();
    let mut search = Search {
        original: instance,
        inst: search_inst,
        config: *config,
        priorities,
        limits,
        engine,
        int_pos: int_vars
            .iter()
            .enumerate()
            .map(|(pos, &j)| (j, pos))
            .collect(),
        int_vars,
        heap: BinaryHeap::new(),
        stack: Vec::new(),
        plunge_left: 0,
        rng: ChaCha8Rng::seed_from_u64(config.rng_seed.seed()),
        pseudo: Pseudocosts::default(),
        decayed: BTreeSet::new(),
        incumbent: None,
        trace: Vec::new(),
        node_count: 0,
        next_id: 0,
        start,
    };
    search.pseudo = Pseudocosts::with_len(search.int_vars.len());
    search.run(&mut log)
}

struct Search<'a> {
    original: &'a MilpInstance,
    inst: &'a MilpInstance,
    config: SolverConfig,
    priorities: &'a BranchPriority,
    limits: &'a Limits,
    engine: LpEngine,
    int_vars: Vec<usize>,
    int_pos: std::collections::BTreeMap<usize, usize>,
    heap: BinaryHeap<Reverse<HeapEntry>>,
    stack: Vec<Node>,
    plunge_left: u32,
    rng: ChaCha8Rng,
    pseudo: Pseudocosts,
    decayed: BTreeSet<usize>,
    incumbent: Option<(Vec<f64>, f64)>,
    trace: Vec<TracePoint>,
    node_count: u64,
    next_id: u64,
    start: Instant,
}

enum Finish {
    Exhausted,
    GapClosed(f64),
    LimitHit,
}

impl<'a> Search<'a> {
    fn run(&mut self, log: &mut Option<&mut Vec<SearchLogRecord>>) -> Result<SolveResult, BnbError> {
        let root = Node {
            id: self.fresh_id(),
            parent: None,
            depth: 0,
            bound: f64::NEG_INFINITY,
            int_bounds: self
                .int_vars
                .iter()
                .map(|&j| (self.inst.lb[j], self.inst.ub[j]))
                .collect(),
            branch: None,
        };
        self.push_preferred(root);

        let finish = loop {
            if self.heap.is_empty() && self.stack.is_empty() {
                break Finish::Exhausted;
            }
            if self.start.elapsed().as_secs_f64() >= self.limits.time_limit
                || self.node_count >= self.limits.node_limit
            {
                break Finish::LimitHit;
            }
            let node = self.pop_next().expect("open set checked non-empty");
            if self.pruned_by_bound(node.bound) {
                continue;
            }

            let lp = self.solve_node_lp(&node)?;
            self.node_count += 1;

            if let (Some(info), LpStatus::Optimal) = (node.branch, lp.status) {
                let gain = (lp.objective - info.parent_obj).max(0.0);
                self.pseudo
                    .record(info.var_pos, info.up, gain / info.distance.max(1e-6));
            }

            match lp.status {
                LpStatus::Unbounded => return Err(BnbError::UnboundedRelaxation),
                LpStatus::Infeasible => {
                    self.log_node(log, &node, None, None, None, None);
                    if let Some(g) = self.gap_closed() {
                        break Finish::GapClosed(g);
                    }
                    continue;
                }
                LpStatus::Optimal => {}
            }
            let obj = lp.objective;
            if self.pruned_by_bound(obj) {
                self.log_node(log, &node, Some(obj), None, None, None);
                if let Some(g) = self.gap_closed() {
                    break Finish::GapClosed(g);
                }
                continue;
            }

            let fractional = self.inst.fractional_vars(&lp.values, INT_TOL);
            if fractional.is_empty() {
                self.offer_incumbent(&lp.values);
                self.log_node(log, &node, Some(obj), None, None, None);
                if let Some(g) = self.gap_closed() {
                    break Finish::GapClosed(g);
                }
                continue;
            }

            self.run_heuristics(&node, &lp);
            // The node's children are not pushed yet, so its own LP bound
            // still stands in for that subtree in the closure check.
            if let Some(g) = self.gap_closed_with(obj) {
                self.log_node(log, &node, Some(obj), None, None, None);
                break Finish::GapClosed(g);
            }

            let (var, chosen_prio, max_prio) = self.select_branch(&fractional, &lp.values);
            self.log_node(
                log,
                &node,
                Some(obj),
                Some(var),
                Some(chosen_prio),
                Some(max_prio),
            );
            self.decayed.insert(var);
            self.branch(node, var, &lp);
        };

        let wall_time = self.start.elapsed().as_secs_f64();
        let (status, gap) = match (&finish, &self.incumbent) {
            (Finish::Exhausted, Some(_)) => (SolveStatus::Optimal, 0.0),
            (Finish::Exhausted, None) => (SolveStatus::Infeasible, f64::INFINITY),
            (Finish::GapClosed(g), Some(_)) => (SolveStatus::Optimal, *g),
            // Gap closure requires an incumbent; unreachable without one.
            (Finish::GapClosed(_), None) => (SolveStatus::Infeasible, f64::INFINITY),
            (Finish::LimitHit, Some((_, obj))) => {
                (SolveStatus::Feasible, relative_gap(Some(*obj), self.open_lower()))
            }
            (Finish::LimitHit, None) => (SolveStatus::Limit, f64::INFINITY),
        };
        let (incumbent, objective) = match &self.incumbent {
            Some((x, obj)) => (Some(x.clone()), Some(*obj)),
            None => (None, None),
        };
        Ok(SolveResult {
            status,
            incumbent,
            objective,
            node_count: self.node_count,
            lp_iterations: self.engine.iterations() as u64,
            wall_time,
            primal_trace: std::mem::take(&mut self.trace),
            gap,
        })
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn prune_eps(&self, incumbent_obj: f64) -> f64 {
        1e-9 * incumbent_obj.abs().max(1.0)
    }

    fn pruned_by_bound(&self, bound: f64) -> bool {
        if self.config.incumbent_cut == IncumbentCut::Off {
            return false;
        }
        match &self.incumbent {
            Some((_, obj)) => bound >= obj - self.prune_eps(*obj),
            None => false,
        }
    }

    fn solve_node_lp(&mut self, node: &Node) -> Result<LpSolution, BnbError> {
        for (pos, &j) in self.int_vars.iter().enumerate() {
            let (lo, hi) = node.int_bounds[pos];
            self.engine.set_var_bounds(j, lo, hi);
        }
        if self.config.warm_start == WarmStart::Off {
            self.engine.reset_basis();
        }
        match self.engine.solve() {
            Ok(lp) => Ok(lp),
            Err(MilpError::NumericalBreakdown { .. }) | Err(MilpError::IterationLimit { .. }) => {
                // One cold retry from the slack basis before giving up.
                self.engine.reset_basis();
                Ok(self.engine.solve()?)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Best lower bound among open nodes (`inf` when the tree is exhausted).
    fn open_lower(&self) -> f64 {
        let mut lower = f64::INFINITY;
        if let Some(Reverse(entry)) = self.heap.peek() {
            lower = lower.min(entry.0.bound);
        }
        for node in &self.stack {
            lower = lower.min(node.bound);
        }
        lower
    }

    /// When an incumbent exists and the open tree cannot beat it by more than
    /// the gap tolerance, the search is done; returns the achieved gap.
    fn gap_closed(&self) -> Option<f64> {
        self.gap_closed_with(f64::INFINITY)
    }

    /// As [`Self::gap_closed`] but folding one extra subtree bound into the
    /// lower bound (used while the current node's children are unpushed).
    fn gap_closed_with(&self, extra_lower: f64) -> Option<f64> {
        let (_, obj) = self.incumbent.as_ref()?;
        let lower = self.open_lower().min(extra_lower);
        let gap = relative_gap(Some(*obj), lower);
        (gap <= self.limits.gap).then_some(gap)
    }

    fn offer_incumbent(&mut self, values: &[f64]) {
        // Snap integer values exactly and verify against the *original*
        // instance; presolve reductions are feasibility-preserving, so this
        // is the stricter check.
        let mut x = values.to_vec();
        for &j in &self.int_vars {
            let r = x[j].round();
            if (x[j] - r).abs() <= INT_TOL {
                x[j] = r;
            } else {
                return; // not actually integral
            }
        }
        if !self.original.is_feasible(&x, VERIFY_TOL) {
            return;
        }
        let obj = self.original.objective_value(&x);
        let improves = match &self.incumbent {
            Some((_, best)) => obj < best - 1e-12,
            None => true,
        };
        if !improves {
            return;
        }
        self.incumbent = Some((x, obj));
        self.trace.push(TracePoint {
            elapsed: self.start.elapsed().as_secs_f64(),
            lp_iterations: self.engine.iterations() as u64,
            bound: obj,
        });
        if self.config.node_reprocess == NodeReprocess::On
            && self.config.incumbent_cut == IncumbentCut::On
        {
            self.sweep_open();
        }
    }

    /// Drop open nodes that the new incumbent already dominates.
    fn sweep_open(&mut self) {
        let keep = |bound: f64, this: &Self| !this.pruned_by_bound(bound);
        let heap = std::mem::take(&mut self.heap);
        self.heap = heap
            .into_iter()
            .filter(|Reverse(e)| keep(e.0.bound, self))
            .collect();
        let stack = std::mem::take(&mut self.stack);
        self.stack = stack
            .into_iter()
            .filter(|node| keep(node.bound, self))
            .collect();
    }

    fn run_heuristics(&mut self, node: &Node, lp: &LpSolution) {
        let due_rounding = match self.config.rounding_freq {
            RoundingFreq::Off => false,
            RoundingFreq::EveryNode => true,
            RoundingFreq::EveryTenNodes => self.node_count % 10 == 1,
        };
        if due_rounding {
            if let Some(x) = rounding_heuristic(lp, self.inst) {
                self.offer_incumbent(&x);
            }
        }
        let due_diving = match self.config.diving_mode {
            DivingMode::Off => false,
            DivingMode::RootOnly => node.id == 0,
            // Periodic diving fires at the root and then every 50 processed
            // nodes.
            DivingMode::Periodic => node.id == 0 || self.node_count % 50 == 0,
        };
        if due_diving {
            let budget = self.config.diving_budget.budget();
            if let Some(x) = dive(
                &mut self.engine,
                self.inst,
                &self.int_vars,
                &node.int_bounds,
                lp.values.clone(),
                budget,
            ) {
                self.offer_incumbent(&x);
            }
        }
    }

    /// Strict-priority branching: among fractional integer variables of
    /// maximal effective priority, apply the configured rule, then the
    /// configured tie-break. Returns (variable, its priority, max priority).
    fn select_branch(&mut self, fractional: &[usize], values: &[f64]) -> (usize, i64, i64) {
        let effective = |j: usize, this: &Self| -> i64 {
            if this.config.priority_decay == PriorityDecay::On && this.decayed.contains(&j) {
                0
            } else {
                this.priorities.get(j)
            }
        };
        let max_prio = fractional
            .iter()
            .map(|&j| effective(j, self))
            .max()
            .expect("select_branch needs at least one fractional variable");
        let cands: Vec<usize> = fractional
            .iter()
            .copied()
            .filter(|&j| effective(j, self) == max_prio)
            .collect();

        let chosen = match self.config.branch_rule {
            BranchRule::Random => cands[self.rng.random_range(0..cands.len())],
            rule => {
                let score = |j: usize, this: &Self| -> f64 {
                    let v = values[j];
                    match rule {
                        BranchRule::MostFractional => (v - v.round()).abs(),
                        BranchRule::Pseudocost => {
                            let pos = this.int_pos[&j];
                            this.pseudo.score(pos, v - v.floor())
                        }
                        BranchRule::Random => unreachable!(),
                    }
                };
                let mut best = cands[0];
                let mut best_score = score(best, self);
                for &j in &cands[1..] {
                    let s = score(j, self);
                    let take = s > best_score
                        || (s == best_score && self.config.tie_break == TieBreak::ReverseIndex);
                    if take {
                        best = j;
                        best_score = s;
                    }
                }
                best
            }
        };
        (chosen, effective(chosen, self), max_prio)
    }

    fn branch(&mut self, node: Node, var: usize, lp: &LpSolution) {
        let pos = self.int_pos[&var];
        let x = lp.values[var];
        let floor = x.floor();
        let frac = x - floor;
        let (lo, hi) = node.int_bounds[pos];

        let mut down = None;
        if floor >= lo - INT_TOL {
            let mut b = node.int_bounds.clone();
            b[pos].1 = floor;
            down = Some(Node {
                id: self.fresh_id(),
                parent: Some(node.id),
                depth: node.depth + 1,
                bound: lp.objective,
                int_bounds: b,
                branch: Some(BranchInfo {
                    var_pos: pos,
                    distance: frac,
                    up: false,
                    parent_obj: lp.objective,
                }),
            });
        }
        let mut up = None;
        if floor + 1.0 <= hi + INT_TOL {
            let mut b = node.int_bounds.clone();
            b[pos].0 = floor + 1.0;
            up = Some(Node {
                id: self.fresh_id(),
                parent: Some(node.id),
                depth: node.depth + 1,
                bound: lp.objective,
                int_bounds: b,
                branch: Some(BranchInfo {
                    var_pos: pos,
                    distance: 1.0 - frac,
                    up: true,
                    parent_obj: lp.objective,
                }),
            });
        }

        let down_preferred = match self.config.branch_direction {
            BranchDirection::DownFirst => true,
            BranchDirection::UpFirst => false,
            BranchDirection::Auto => frac <= 0.5,
        };
        let (preferred, other) = if down_preferred { (down, up) } else { (up, down) };
        if let Some(n) = other {
            self.push_other(n);
        }
        if let Some(n) = preferred {
            self.push_preferred(n);
        }
    }

    /// Insert the child explored first under the active selection policy.
    fn push_preferred(&mut self, node: Node) {
        match self.config.node_selection {
            NodeSelection::BestBound => self.heap.push(Reverse(HeapEntry(node))),
            NodeSelection::DepthFirst => self.stack.push(node),
            NodeSelection::Hybrid => {
                if self.plunge_left > 0 {
                    self.plunge_left -= 1;
                    self.stack.push(node);
                } else {
                    self.heap.push(Reverse(HeapEntry(node)));
                }
            }
        }
    }

    fn push_other(&mut self, node: Node) {
        match self.config.node_selection {
            NodeSelection::BestBound => self.heap.push(Reverse(HeapEntry(node))),
            NodeSelection::DepthFirst => {
                // Pushed beneath the preferred child so it pops second.
                self.stack.push(node);
            }
            NodeSelection::Hybrid => self.heap.push(Reverse(HeapEntry(node))),
        }
    }

    fn pop_next(&mut self) -> Option<Node> {
        match self.config.node_selection {
            NodeSelection::BestBound => self.heap.pop().map(|Reverse(e)| e.0),
            NodeSelection::DepthFirst => self.stack.pop(),
            NodeSelection::Hybrid => {
                if let Some(node) = self.stack.pop() {
                    return Some(node);
                }
                // A fresh plunge starts from the best-bound node.
                self.plunge_left = self.config.plunge_depth.depth();
                self.heap.pop().map(|Reverse(e)| e.0)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn log_node(
        &self,
        log: &mut Option<&mut Vec<SearchLogRecord>>,
        node: &Node,
        bound: Option<f64>,
        branch_var: Option<usize>,
        chosen_priority: Option<i64>,
        max_fractional_priority: Option<i64>,
    ) {
        let Some(sink) = log.as_deref_mut() else {
            return;
        };
        // Valid lower bound on the full problem: open subtrees, the current
        // node's subtree, and the closed region the incumbent came from.
        let global_lower = self
            .open_lower()
            .min(bound.unwrap_or(f64::INFINITY))
            .min(
                self.incumbent
                    .as_ref()
                    .map_or(f64::INFINITY, |(_, o)| *o),
            );
        sink.push(SearchLogRecord {
            id: node.id,
            parent: node.parent,
            depth: node.depth,
            branch_var,
            bound,
            global_lower,
            incumbent: self.incumbent.as_ref().map(|(_, o)| *o),
            chosen_priority,
            max_fractional_priority,
        });
    }
}

/// Relative optimality gap between an incumbent objective and a lower bound,
/// scaled by `max(|incumbent|, 1e-10)` and clamped at 0.
fn relative_gap(incumbent: Option<f64>, lower: f64) -> f64 {
    match incumbent {
        None => f64::INFINITY,
        Some(obj) => {
            if lower.is_infinite() {
                if lower > 0.0 {
                    0.0 // exhausted tree: bound meets the incumbent
                } else {
                    f64::INFINITY
                }
            } else {
                ((obj - lower) / obj.abs().max(1e-10)).max(0.0)
            }
        }
    }
}

/// Round every integer variable to the nearest in-bounds integer and accept
/// the point only if it is feasible for the full instance.
pub fn rounding_heuristic(lp: &LpSolution, inst: &MilpInstance) -> Option<Vec<f64>> {
    let mut x = lp.values.clone();
    for &j in &inst.int_set {
        let lo = inst.lb[j].ceil();
        let hi = inst.ub[j].floor();
        if lo > hi {
            // No integer point inside the bounds: nothing to round to.
            return None;
        }
        x[j] = x[j].round().clamp(lo, hi);
    }
    inst.is_feasible(&x, INT_TOL).then_some(x)
}

/// Iteratively fix the most fractional integer variable to its nearest value
/// and re-solve, up to `depth_budget` LP solves; `Some` only for a verified
/// feasible integral point.
pub fn diving_heuristic(
    inst: &MilpInstance,
    overrides: &[(usize, f64, f64)],
    depth_budget: usize,
) -> Result<Option<Vec<f64>>, BnbError> {
    inst.validate()?;
    let mut engine = LpEngine::new(inst, SimplexOptions::default())?;
    for &(j, lo, hi) in overrides {
        engine.set_var_bounds(j, lo, hi);
    }
    let lp = match engine.solve() {
        Ok(lp) if lp.status == LpStatus::Optimal => lp,
        Ok(_) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let int_vars: Vec<usize> = inst.int_set.iter().copied().collect();
    let start_bounds: Vec<(f64, f64)> = int_vars.iter().map(|&j| engine.var_bounds(j)).collect();
    Ok(dive(
        &mut engine,
        inst,
        &int_vars,
        &start_bounds,
        lp.values,
        depth_budget,
    ))
}

/// Shared diving core: `engine` already holds the starting LP solution for
/// `start_bounds`; fixes one variable per iteration.
fn dive(
    engine: &mut LpEngine,
    inst: &MilpInstance,
    int_vars: &[usize],
    start_bounds: &[(f64, f64)],
    mut values: Vec<f64>,
    depth_budget: usize,
) -> Option<Vec<f64>> {
    let mut bounds = start_bounds.to_vec();
    for _ in 0..depth_budget {
        let fractional = inst.fractional_vars(&values, INT_TOL);
        if fractional.is_empty() {
            let mut x = values;
            for &j in int_vars {
                x[j] = x[j].round();
            }
            return inst.is_feasible(&x, INT_TOL).then_some(x);
        }
        // Most fractional, lowest index on ties.
        let j = *fractional
            .iter()
            .max_by(|&&a, &&b| {
                let fa = (values[a] - values[a].round()).abs();
                let fb = (values[b] - values[b].round()).abs();
                fa.total_cmp(&fb).then(b.cmp(&a))
            })
            .unwrap();
        let pos = int_vars.iter().position(|&v| v == j).unwrap();
        let (lo, hi) = bounds[pos];
        if lo.ceil() > hi.floor() {
            // No integer value fits between the dive bounds.
            return None;
        }
        let target = values[j].round().clamp(lo.ceil(), hi.floor());
        bounds[pos] = (target, target);
        engine.set_var_bounds(j, target, target);
        match engine.solve() {
            Ok(lp) if lp.status == LpStatus::Optimal => values = lp.values,
            _ => return None,
        }
    }
    // Budget exhausted; the last LP may still have come out integral.
    let fractional = inst.fractional_vars(&values, INT_TOL);
    if fractional.is_empty() {
        let mut x = values;
        for &j in int_vars {
            x[j] = x[j].round();
        }
        return inst.is_feasible(&x, INT_TOL).then_some(x);
    }
    None
}

/// Standalone branching-variable selection for one LP solution: strict
/// priorities, then the configured rule, then the tie-break. `None` when no
/// integer variable is fractional.
pub fn branch_select(
    inst: &MilpInstance,
    lp: &LpSolution,
    config: &SolverConfig,
    priorities: &BranchPriority,
) -> Option<usize> {
    let fractional = inst.fractional_vars(&lp.values, INT_TOL);
    if fractional.is_empty() {
        return None;
    }
    let max_prio = fractional.iter().map(|&j| priorities.get(j)).max().unwrap();
    let cands: Vec<usize> = fractional
        .into_iter()
        .filter(|&j| priorities.get(j) == max_prio)
        .collect();
    match config.branch_rule {
        BranchRule::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed.seed());
            Some(cands[rng.random_range(0..cands.len())])
        }
        rule => {
            let score = |j: usize| -> f64 {
                let v = lp.values[j];
                match rule {
                    BranchRule::MostFractional => (v - v.round()).abs(),
                    // Without search history every pseudocost is 1, which
                    // degenerates to the fractionality product.
                    BranchRule::Pseudocost => {
                        let f = v - v.floor();
                        f.max(1e-6) * (1.0 - f).max(1e-6)
                    }
                    BranchRule::Random => unreachable!(),
                }
            };
            let mut best = cands[0];
            let mut best_score = score(best);
            for &j in &cands[1..] {
                let s = score(j);
                if s > best_score || (s == best_score && config.tie_break == TieBreak::ReverseIndex)
                {
                    best = j;
                    best_score = s;
                }
            }
            Some(best)
        }
    }
}
