//! Learned solver guidance: backdoor-candidate generation and ranking-label
//! collection, configuration sampling and contrastive-label collection,
//! dataset assembly with train/validation splits, and inference-time
//! translation of model outputs into [`BranchPriority`] and [`SolverConfig`].
//!
//! Labels rank candidates by the deterministic runtime proxy
//! `(censored, node_count, lp_iterations)` — wall time is recorded for
//! reporting but never decides a label, so collection is reproducible across
//! machines. Candidate search is fractionality-weighted sampling plus one
//! round of single-swap local improvement; configuration search is uniform
//! sampling plus the same improvement step.

#[cfg(test)]
mod tests;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bnb::config::{SolverConfig, ONE_HOT_DIM, PARAM_CARDINALITIES};
use crate::bnb::{self, BnbError, BranchPriority, Limits, SolveResult, SolveStatus};
use crate::graph::{to_bipartite, BipartiteGraph};
use crate::harness::{primal_integral, trace_by_iterations};
use crate::milp::{lp_relax_solve, LpSolution, LpStatus, MilpError, MilpInstance};
use crate::neural::{
    config_vector, score_backdoor, ContrastiveSample, Dataset, GatModel, NeuralError, RankSample,
    TaskMode,
};

/// Default backdoor size `K`.
pub const DEFAULT_BACKDOOR_SIZE: usize = 8;
/// Fractionality floor so fully integral variables stay samplable.
pub const EPS_FRAC: f64 = 0.01;
/// Candidates scored per instance at inference time.
pub const INFER_CANDIDATES: usize = 50;
/// Minimum evaluated candidates before an instance yields ranking pairs.
pub const MIN_EVALUATED: usize = 30;
/// Size of the fastest/slowest groups that form the cross pairs.
pub const RANK_GROUP: usize = 15;
/// Fraction of configurations labeled positive (and negative).
pub const DEFAULT_EXTREME_FRACTION: f64 = 0.15;
/// Minimum configurations sampled per collection.
pub const MIN_CONFIGS: usize = 8;
/// Local-improvement swap attempts.
pub const DEFAULT_SWAPS: usize = 10;
/// On-disk dataset layout version.
pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GuidanceError {
    #[error("root LP relaxation is {0:?}, need optimal")]
    RootNotOptimal(LpStatus),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Solver(#[from] BnbError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("instance has {have} integer variables, need at least {need}")]
    TooFewIntegers { have: usize, need: usize },
    #[error("{have} evaluated candidates, need at least {need}")]
    TooFewCandidates { have: usize, need: usize },
    #[error("invalid options: {0}")]
    BadOptions(String),
    #[error("dataset invalid: {0}")]
    BadDataset(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

// ---------------------------------------------------------------------------
// Backdoor candidates
// ---------------------------------------------------------------------------

/// How a candidate entered the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    FractionalitySampled,
    LocallyImproved,
}

/// Outcome of one guided solve used as a label source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub node_count: u64,
    pub lp_iterations: u64,
    pub wall_time: f64,
    pub status: SolveStatus,
    /// True when a limit cut the run short; censored runs rank below every
    /// completed one.
    pub censored: bool,
}

impl EvalRecord {
    /// Deterministic ordering key: completed before censored, then by node
    /// count, then LP iterations. Smaller is better.
    pub fn proxy_key(&self) -> (bool, u64, u64) {
        (self.censored, self.node_count, self.lp_iterations)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackdoorCandidate {
    pub members: BTreeSet<usize>,
    pub provenance: Provenance,
    pub eval: Option<EvalRecord>,
}

/// Integer variables with their root-LP sampling weights
/// (`fractionality + EPS_FRAC`).
pub fn fractionality_weights(
    inst: &MilpInstance,
    root_lp: &LpSolution,
) -> Result<Vec<(usize, f64)>, GuidanceError> {
    if root_lp.status != LpStatus::Optimal {
        return Err(GuidanceError::RootNotOptimal(root_lp.status));
    }
    Ok(inst
        .int_set
        .iter()
        .map(|&j| {
            let v = root_lp.values[j];
            ((j), (v - v.round()).abs() + EPS_FRAC)
        })
        .collect())
}

/// Draw exactly `count` candidate sets of size `k`. Within a candidate,
/// members are sampled without replacement with probability proportional to
/// root-LP fractionality plus [`EPS_FRAC`]. Distinct draws can repeat the
/// same set; collection dedups before evaluating.
pub fn sample_backdoor_candidates(
    inst: &MilpInstance,
    root_lp: &LpSolution,
    k: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<BackdoorCandidate>, GuidanceError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_candidates_with_rng(inst, root_lp, k, count, &mut rng)
}

fn sample_candidates_with_rng(
    inst: &MilpInstance,
    root_lp: &LpSolution,
    k: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<BackdoorCandidate>, GuidanceError> {
    if k == 0 || count == 0 {
        return Err(GuidanceError::BadOptions(
            "candidate size and count must be positive".into(),
        ));
    }
    let weights = fractionality_weights(inst, root_lp)?;
    if weights.len() < k {
        return Err(GuidanceError::TooFewIntegers {
            have: weights.len(),
            need: k,
        });
    }
    let mut out: Vec<BackdoorCandidate> = Vec::new();
    for _ in 0..count {
        let mut urn = weights.clone();
        let mut members = BTreeSet::new();
        for _ in 0..k {
            let total: f64 = urn.iter().map(|(_, w)| w).sum();
            let mut r = rng.random_range(0.0..total);
            let mut picked = urn.len() - 1;
            for (pos, (_, w)) in urn.iter().enumerate() {
                if r < *w {
                    picked = pos;
                    break;
                }
                r -= w;
            }
            members.insert(urn.remove(picked).0);
        }
        out.push(BackdoorCandidate {
            members,
            provenance: Provenance::FractionalitySampled,
            eval: None,
        });
    }
    Ok(out)
}

/// Solve with maximum branching priority on `members` and the stock
/// configuration, and record the effort. A limit hit marks the record
/// censored but keeps it.
pub fn evaluate_backdoor(
    inst: &MilpInstance,
    members: &BTreeSet<usize>,
    limits: &Limits,
) -> Result<EvalRecord, GuidanceError> {
    let priorities = BranchPriority::from_set(members.iter().copied());
    let result = bnb::solve(inst, &SolverConfig::default(), &priorities, limits)?;
    Ok(record_from(&result))
}

fn record_from(result: &SolveResult) -> EvalRecord {
    let censored = matches!(result.status, SolveStatus::Feasible | SolveStatus::Limit);
    EvalRecord {
        node_count: result.node_count,
        lp_iterations: result.lp_iterations,
        wall_time: result.wall_time,
        status: result.status,
        censored,
    }
}

/// One round of local improvement: starting from the best evaluated
/// candidate, try `swaps` single member-for-non-member exchanges, keeping an
/// exchange only when the proxy improves. Every newly evaluated set joins
/// `pool` with [`Provenance::LocallyImproved`].
pub fn improve_backdoor(
    inst: &MilpInstance,
    pool: &mut Vec<BackdoorCandidate>,
    swaps: usize,
    limits: &Limits,
    rng: &mut ChaCha8Rng,
) -> Result<(), GuidanceError> {
    let best = pool
        .iter()
        .filter_map(|c| c.eval.as_ref().map(|e| (e.proxy_key(), c.members.clone())))
        .min();
    let Some((mut current_key, mut current)) = best else {
        return Ok(());
    };
    let ints: Vec<usize> = inst.int_set.iter().copied().collect();
    for _ in 0..swaps {
        let outside: Vec<usize> = ints
            .iter()
            .copied()
            .filter(|j| !current.contains(j))
            .collect();
        if outside.is_empty() || current.is_empty() {
            break;
        }
        let leaving = *current
            .iter()
            .nth(rng.random_range(0..current.len()))
            .unwrap();
        let entering = outside[rng.random_range(0..outside.len())];
        let mut swapped = current.clone();
        swapped.remove(&leaving);
        swapped.insert(entering);
        if pool.iter().any(|c| c.members == swapped) {
            continue;
        }
        let eval = evaluate_backdoor(inst, &swapped, limits)?;
        let key = eval.proxy_key();
        pool.push(BackdoorCandidate {
            members: swapped.clone(),
            provenance: Provenance::LocallyImproved,
            eval: Some(eval),
        });
        if key < current_key {
            current = swapped;
            current_key = key;
        }
    }
    Ok(())
}

/// One ranking pair; `y = +1` designates `b1` the preferred (faster) set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankPair {
    pub b1: BTreeSet<usize>,
    pub b2: BTreeSet<usize>,
    pub y: f64,
}

/// Cross the [`RANK_GROUP`] fastest candidates with the [`RANK_GROUP`]
/// slowest (by proxy, censored last) into preference pairs; pairs whose two
/// proxies tie carry no information and are dropped. Requires at least
/// [`MIN_EVALUATED`] evaluated candidates.
pub fn make_rank_pairs(pool: &[BackdoorCandidate]) -> Result<Vec<RankPair>, GuidanceError> {
    let mut evaluated: Vec<(&BackdoorCandidate, (bool, u64, u64))> = pool
        .iter()
        .filter_map(|c| c.eval.as_ref().map(|e| (c, e.proxy_key())))
        .collect();
    if evaluated.len() < MIN_EVALUATED {
        return Err(GuidanceError::TooFewCandidates {
            have: evaluated.len(),
            need: MIN_EVALUATED,
        });
    }
    evaluated.sort_by(|a, b| a.1.cmp(&b.1));
    let fastest = &evaluated[..RANK_GROUP];
    let slowest = &evaluated[evaluated.len() - RANK_GROUP..];
    let mut pairs = Vec::new();
    for (f, fk) in fastest {
        for (s, sk) in slowest {
            if fk == sk {
                continue;
            }
            pairs.push(RankPair {
                b1: f.members.clone(),
                b2: s.members.clone(),
                y: 1.0,
            });
        }
    }
    Ok(pairs)
}

// ---------------------------------------------------------------------------
// Configuration samples
// ---------------------------------------------------------------------------

/// One evaluated configuration on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSample {
    pub config: SolverConfig,
    pub one_hot: Vec<f64>,
    /// Incumbent objective at the cutoff; `None` when the run found nothing.
    pub bound: Option<f64>,
    /// Primal integral on the LP-iteration axis against the pool's best
    /// bound.
    pub integral: f64,
    pub status: SolveStatus,
}

/// Uniformly sample `count` distinct configurations.
pub fn sample_configs(count: usize, seed: u64) -> Result<Vec<SolverConfig>, GuidanceError> {
    if count < MIN_CONFIGS {
        return Err(GuidanceError::BadOptions(format!(
            "need at least {MIN_CONFIGS} configurations, got {count}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<SolverConfig> = Vec::new();
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 100 * count {
            return Err(GuidanceError::BadOptions(format!(
                "could not sample {count} distinct configurations"
            )));
        }
        let c = SolverConfig::sample(&mut rng);
        if !out.contains(&c) {
            out.push(c);
        }
    }
    Ok(out)
}

/// Ordering key for configuration quality: better bound first (`None`
/// worst), then smaller primal integral, then input position.
fn config_order(samples: &[ConfigSample]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.sort_by(|&a, &b| {
        let ka = samples[a].bound.unwrap_or(f64::INFINITY);
        let kb = samples[b].bound.unwrap_or(f64::INFINITY);
        ka.total_cmp(&kb)
            .then(samples[a].integral.total_cmp(&samples[b].integral))
            .then(a.cmp(&b))
    });
    idx
}

/// Indices of the top and bottom `fraction` of the pool by quality, or
/// `None` when the pool has no contrast (best and worst outcomes identical)
/// or is too small to split.
pub fn pick_extremes(
    samples: &[ConfigSample],
    fraction: f64,
) -> Option<(Vec<usize>, Vec<usize>)> {
    if samples.len() < 2 || !(0.0..=0.5).contains(&fraction) {
        return None;
    }
    let order = config_order(samples);
    let outcome = |i: usize| (samples[i].bound.unwrap_or(f64::INFINITY), samples[i].integral);
    if outcome(order[0]) == outcome(*order.last().unwrap()) {
        return None;
    }
    let mut n_ext = ((fraction * samples.len() as f64).ceil() as usize).max(1);
    n_ext = n_ext.min(samples.len() / 2);
    if n_ext == 0 {
        return None;
    }
    let positives = order[..n_ext].to_vec();
    let negatives = order[order.len() - n_ext..].to_vec();
    Some((positives, negatives))
}

// ---------------------------------------------------------------------------
// Dataset container
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InstanceLabels {
    Rank(Vec<RankPair>),
    Contrastive {
        positives: Vec<Vec<f64>>,
        negatives: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceEntry {
    pub id: String,
    pub graph: Arc<BipartiteGraph>,
    pub labels: InstanceLabels,
    pub split: Split,
}

/// A labeled corpus for one guidance task, grouped by instance so each graph
/// is stored once no matter how many labels reference it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceDataset {
    pub schema_version: u32,
    pub task: TaskMode,
    pub seed: u64,
    pub solver_version: String,
    pub entries: Vec<InstanceEntry>,
}

/// An instance skipped during collection, with the reason — callers surface
/// these as warnings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub instance: String,
    pub reason: String,
}

impl GuidanceDataset {
    pub fn new(task: TaskMode, seed: u64) -> Self {
        GuidanceDataset {
            schema_version: DATASET_SCHEMA_VERSION,
            task,
            seed,
            solver_version: env!("CARGO_PKG_VERSION").to_string(),
            entries: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), GuidanceError> {
        let fail = |msg: String| Err(GuidanceError::BadDataset(msg));
        if self.schema_version != DATASET_SCHEMA_VERSION {
            return fail(format!(
                "schema version {} (expected {DATASET_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let mut seen = BTreeSet::new();
        for entry in &self.entries {
            if !seen.insert(entry.id.as_str()) {
                return fail(format!("instance '{}' appears more than once", entry.id));
            }
            let n = entry.graph.n_vars();
            match (&entry.labels, self.task) {
                (InstanceLabels::Rank(pairs), TaskMode::BackdoorScore) => {
                    for (i, p) in pairs.iter().enumerate() {
                        if p.b1.is_empty() || p.b2.is_empty() || p.b1 == p.b2 {
                            return fail(format!(
                                "instance '{}' pair {i}: degenerate candidate sets",
                                entry.id
                            ));
                        }
                        if p.b1.iter().chain(&p.b2).any(|&j| j >= n) {
                            return fail(format!(
                                "instance '{}' pair {i}: member out of range",
                                entry.id
                            ));
                        }
                        if p.y != 1.0 && p.y != -1.0 {
                            return fail(format!(
                                "instance '{}' pair {i}: label {} not ±1",
                                entry.id, p.y
                            ));
                        }
                    }
                }
                (InstanceLabels::Contrastive { positives, negatives }, TaskMode::ConfigLogits) => {
                    if positives.is_empty() || negatives.is_empty() {
                        return fail(format!("instance '{}': empty extreme group", entry.id));
                    }
                    for v in positives.iter().chain(negatives) {
                        if v.len() != ONE_HOT_DIM {
                            return fail(format!(
                                "instance '{}': encoding length {} (expected {ONE_HOT_DIM})",
                                entry.id,
                                v.len()
                            ));
                        }
                    }
                }
                _ => {
                    return fail(format!(
                        "instance '{}': label kind does not match task {:?}",
                        entry.id, self.task
                    ))
                }
            }
        }
        Ok(())
    }

    /// Assign splits deterministically by entry order: the trailing
    /// `val_fraction` (at least one instance, at most all but one) becomes
    /// validation. With a single entry everything stays in train.
    pub fn assign_splits(&mut self, val_fraction: f64) {
        let n = self.entries.len();
        let n_val = if n < 2 {
            0
        } else {
            ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1)
        };
        for (i, entry) in self.entries.iter_mut().enumerate() {
            entry.split = if i < n - n_val {
                Split::Train
            } else {
                Split::Validation
            };
        }
    }

    /// Convert into per-task training and validation sets, sharing each
    /// instance graph across its samples.
    pub fn to_neural(&self) -> Result<(Dataset, Dataset), GuidanceError> {
        self.validate()?;
        let build = |split: Split| -> Dataset {
            match self.task {
                TaskMode::BackdoorScore => {
                    let mut items = Vec::new();
                    for entry in self.entries.iter().filter(|e| e.split == split) {
                        let InstanceLabels::Rank(pairs) = &entry.labels else {
                            unreachable!("validated above");
                        };
                        for p in pairs {
                            items.push(RankSample {
                                graph: Arc::clone(&entry.graph),
                                b1: p.b1.clone(),
                                b2: p.b2.clone(),
                                y: p.y,
                            });
                        }
                    }
                    Dataset::Rank(items)
                }
                TaskMode::ConfigLogits => {
                    let mut items = Vec::new();
                    for entry in self.entries.iter().filter(|e| e.split == split) {
                        let InstanceLabels::Contrastive { positives, negatives } = &entry.labels
                        else {
                            unreachable!("validated above");
                        };
                        items.push(ContrastiveSample {
                            graph: Arc::clone(&entry.graph),
                            positives: positives.clone(),
                            negatives: negatives.clone(),
                        });
                    }
                    Dataset::Contrastive(items)
                }
            }
        };
        let train = build(Split::Train);
        let val = build(Split::Validation);
        if train.is_empty() || val.is_empty() {
            return Err(GuidanceError::BadDataset(
                "both splits need at least one labeled instance".into(),
            ));
        }
        Ok((train, val))
    }

    /// Write the dataset as a manifest plus per-instance graph and label
    /// files. Identical datasets serialize byte-identically.
    pub fn save(&self, dir: &Path) -> Result<(), GuidanceError> {
        self.validate()?;
        for entry in &self.entries {
            if !entry
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
                || entry.id.is_empty()
            {
                return Err(GuidanceError::BadDataset(format!(
                    "instance id '{}' is not filesystem-safe",
                    entry.id
                )));
            }
        }
        std::fs::create_dir_all(dir.join("graphs"))?;
        std::fs::create_dir_all(dir.join("labels"))?;
        let manifest = Manifest {
            schema_version: self.schema_version,
            task: self.task,
            seed: self.seed,
            solver_version: self.solver_version.clone(),
            instances: self
                .entries
                .iter()
                .map(|e| ManifestRow {
                    id: e.id.clone(),
                    split: e.split,
                    graph_file: format!("graphs/{}.json", e.id),
                    labels_file: format!("labels/{}.json", e.id),
                })
                .collect(),
        };
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        for entry in &self.entries {
            std::fs::write(
                dir.join("graphs").join(format!("{}.json", entry.id)),
                serde_json::to_string(entry.graph.as_ref())?,
            )?;
            std::fs::write(
                dir.join("labels").join(format!("{}.json", entry.id)),
                serde_json::to_string(&entry.labels)?,
            )?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, GuidanceError> {
        let manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let mut entries = Vec::new();
        for row in &manifest.instances {
            let graph: BipartiteGraph =
                serde_json::from_str(&std::fs::read_to_string(dir.join(&row.graph_file))?)?;
            let labels: InstanceLabels =
                serde_json::from_str(&std::fs::read_to_string(dir.join(&row.labels_file))?)?;
            entries.push(InstanceEntry {
                id: row.id.clone(),
                graph: Arc::new(graph),
                labels,
                split: row.split,
            });
        }
        let out = GuidanceDataset {
            schema_version: manifest.schema_version,
            task: manifest.task,
            seed: manifest.seed,
            solver_version: manifest.solver_version,
            entries,
        };
        out.validate()?;
        Ok(out)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    task: TaskMode,
    seed: u64,
    solver_version: String,
    instances: Vec<ManifestRow>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    id: String,
    split: Split,
    graph_file: String,
    labels_file: String,
}

// ---------------------------------------------------------------------------
// Collection drivers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CollectBackdoorOptions {
    /// Backdoor size `K`.
    pub k: usize,
    /// Candidate sets sampled per instance before local improvement.
    pub budget: usize,
    /// Local-improvement swap attempts per instance.
    pub swaps: usize,
    /// Per-evaluation limits; hitting one censors the record.
    pub limits: Limits,
    pub seed: u64,
    /// Trailing fraction of instances held out for validation.
    pub val_fraction: f64,
}

impl Default for CollectBackdoorOptions {
    fn default() -> Self {
        CollectBackdoorOptions {
            k: DEFAULT_BACKDOOR_SIZE,
            budget: 40,
            swaps: DEFAULT_SWAPS,
            limits: Limits {
                node_limit: 5_000,
                ..Limits::default()
            },
            seed: 0,
            val_fraction: 0.2,
        }
    }
}

/// Per-instance rng, derived so results depend only on `(seed, position)`.
fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// A labeled entry or a recorded skip: what one instance contributed to a
/// collection pass.
#[derive(Debug, Clone)]
pub enum CollectOutcome {
    Labeled(Box<InstanceEntry>),
    Skipped(Skip),
}

/// Fold per-instance outcomes (in input order) into a dataset plus the skip
/// list, then assign the trailing validation split.
pub fn assemble_dataset(
    task: TaskMode,
    seed: u64,
    outcomes: Vec<CollectOutcome>,
    val_fraction: f64,
) -> (GuidanceDataset, Vec<Skip>) {
    let mut dataset = GuidanceDataset::new(task, seed);
    let mut skips = Vec::new();
    for outcome in outcomes {
        match outcome {
            CollectOutcome::Labeled(entry) => dataset.entries.push(*entry),
            CollectOutcome::Skipped(skip) => skips.push(skip),
        }
    }
    dataset.assign_splits(val_fraction);
    (dataset, skips)
}

/// Sample, evaluate, and locally improve backdoor candidates on one
/// instance, then assemble its ranking pairs. Returns a skip (not an error)
/// when the instance cannot produce labels: non-optimal root LP, too few
/// integers, too few candidates, or all proxies tied. `index` is the
/// instance's position in the collection run; it seeds the per-instance RNG.
pub fn collect_backdoor_instance(
    id: &str,
    inst: &MilpInstance,
    index: usize,
    opts: &CollectBackdoorOptions,
) -> Result<CollectOutcome, GuidanceError> {
    let skipped = |reason: String| {
        Ok(CollectOutcome::Skipped(Skip {
            instance: id.to_string(),
            reason,
        }))
    };
    let root = match lp_relax_solve(inst) {
        Ok(r) => r,
        Err(e) => return skipped(format!("root LP failed: {e}")),
    };
    if root.status != LpStatus::Optimal {
        return skipped(format!("root LP {:?}", root.status));
    }
    let mut rng = instance_rng(opts.seed, index);
    let mut pool = match sample_candidates_with_rng(inst, &root, opts.k, opts.budget, &mut rng) {
        Ok(p) => p,
        Err(GuidanceError::TooFewIntegers { have, need }) => {
            return skipped(format!("{have} integer variables, need {need}"));
        }
        Err(e) => return Err(e),
    };
    // Repeated draws of the same set are evaluated once.
    let mut seen = BTreeSet::new();
    pool.retain(|c| seen.insert(c.members.clone()));
    for cand in &mut pool {
        cand.eval = Some(evaluate_backdoor(inst, &cand.members, &opts.limits)?);
    }
    improve_backdoor(inst, &mut pool, opts.swaps, &opts.limits, &mut rng)?;
    let pairs = match make_rank_pairs(&pool) {
        Ok(p) => p,
        Err(GuidanceError::TooFewCandidates { have, need }) => {
            return skipped(format!("{have} evaluated candidates, need {need}"));
        }
        Err(e) => return Err(e),
    };
    if pairs.is_empty() {
        return skipped("all candidate proxies tied".into());
    }
    Ok(CollectOutcome::Labeled(Box::new(InstanceEntry {
        id: id.to_string(),
        graph: Arc::new(to_bipartite(inst, &root)),
        labels: InstanceLabels::Rank(pairs),
        split: Split::Train,
    })))
}

/// Sample, evaluate, and locally improve backdoor candidates on every
/// instance, then assemble ranking pairs. Instances that cannot produce
/// labels (non-optimal root LP, too few integers, too few candidates, all
/// proxies tied) are skipped and reported, not fatal.
pub fn collect_backdoor_data(
    instances: &[(String, MilpInstance)],
    opts: &CollectBackdoorOptions,
) -> Result<(GuidanceDataset, Vec<Skip>), GuidanceError> {
    collect_backdoor_data_jobs(instances, opts, 1)
}

/// [`collect_backdoor_data`] fanned out over `jobs` threads. Per-instance
/// RNGs are seeded by instance index, so the dataset is byte-identical to
/// the sequential run.
pub fn collect_backdoor_data_jobs(
    instances: &[(String, MilpInstance)],
    opts: &CollectBackdoorOptions,
    jobs: usize,
) -> Result<(GuidanceDataset, Vec<Skip>), GuidanceError> {
    if instances.is_empty() {
        return Err(GuidanceError::BadOptions("no instances".into()));
    }
    if !(0.0..1.0).contains(&opts.val_fraction) {
        return Err(GuidanceError::BadOptions(format!(
            "val_fraction {} outside [0, 1)",
            opts.val_fraction
        )));
    }
    let outcomes = crate::par::par_map_indexed(instances, jobs, |index, (id, inst)| {
        collect_backdoor_instance(id, inst, index, opts)
    });
    let outcomes: Vec<CollectOutcome> = outcomes.into_iter().collect::<Result<_, _>>()?;
    Ok(assemble_dataset(
        TaskMode::BackdoorScore,
        opts.seed,
        outcomes,
        opts.val_fraction,
    ))
}

#[derive(Debug, Clone)]
pub struct CollectConfigOptions {
    /// Configurations sampled (shared across instances).
    pub count: usize,
    /// Local-improvement mutations per instance.
    pub swaps: usize,
    /// Cutoff limits; the primal bound is read at this cutoff.
    pub cutoff: Limits,
    /// Extreme fraction labeled positive/negative.
    pub fraction: f64,
    pub seed: u64,
    pub val_fraction: f64,
}

impl Default for CollectConfigOptions {
    fn default() -> Self {
        CollectConfigOptions {
            count: 20,
            swaps: DEFAULT_SWAPS,
            cutoff: Limits {
                node_limit: 500,
                ..Limits::default()
            },
            fraction: DEFAULT_EXTREME_FRACTION,
            seed: 0,
            val_fraction: 0.2,
        }
    }
}

/// Evaluate one configuration at the cutoff (no priorities).
pub fn evaluate_config(
    inst: &MilpInstance,
    config: &SolverConfig,
    cutoff: &Limits,
) -> Result<SolveResult, GuidanceError> {
    Ok(bnb::solve(inst, config, &BranchPriority::new(), cutoff)?)
}

/// Run a shared configuration pool (plus per-instance local improvement) on
/// one instance and label the quality extremes. Returns a skip when the
/// instance offers no contrast: failed root LP, no feasible run, or
/// identical outcomes. `index` seeds the per-instance RNG.
pub fn collect_config_instance(
    id: &str,
    inst: &MilpInstance,
    configs: &[SolverConfig],
    index: usize,
    opts: &CollectConfigOptions,
) -> Result<CollectOutcome, GuidanceError> {
    let skipped = |reason: String| {
        Ok(CollectOutcome::Skipped(Skip {
            instance: id.to_string(),
            reason,
        }))
    };
    let root = match lp_relax_solve(inst) {
        Ok(r) => r,
        Err(e) => return skipped(format!("root LP failed: {e}")),
    };
    if root.status != LpStatus::Optimal {
        return skipped(format!("root LP {:?}", root.status));
    }
    let mut runs: Vec<(SolverConfig, SolveResult)> = Vec::new();
    for config in configs {
        let result = evaluate_config(inst, config, &opts.cutoff)?;
        runs.push((config.clone(), result));
    }
    // Local improvement on the cutoff bound (ties by LP iterations):
    // mutate one parameter of the best configuration, keep on strict
    // improvement, and pool every evaluated mutant.
    let mut rng = instance_rng(opts.seed, index);
    let quality = |r: &SolveResult| (r.objective.unwrap_or(f64::INFINITY), r.lp_iterations);
    let mut best = runs
        .iter()
        .map(|(c, r)| (quality(r), c.clone()))
        .min_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.cmp(&b.0 .1)))
        .ok_or_else(|| GuidanceError::BadOptions("empty configuration pool".into()))?;
    for _ in 0..opts.swaps {
        let mutant = best.1.mutate_one(&mut rng);
        if runs.iter().any(|(c, _)| *c == mutant) {
            continue;
        }
        let result = evaluate_config(inst, &mutant, &opts.cutoff)?;
        let q = quality(&result);
        runs.push((mutant.clone(), result));
        if q.0 < best.0 .0 || (q.0 == best.0 .0 && q.1 < best.0 .1) {
            best = (q, mutant);
        }
    }

    if runs.iter().all(|(_, r)| r.objective.is_none()) {
        return skipped("no configuration found a feasible solution".into());
    }
    let v_star = runs
        .iter()
        .filter_map(|(_, r)| r.objective)
        .fold(f64::INFINITY, f64::min);
    let t_end = runs.iter().map(|(_, r)| r.lp_iterations).max().unwrap() as f64;
    let samples: Vec<ConfigSample> = runs
        .iter()
        .map(|(c, r)| ConfigSample {
            config: c.clone(),
            one_hot: c.one_hot(),
            bound: r.objective,
            integral: primal_integral(&trace_by_iterations(&r.primal_trace), t_end, v_star),
            status: r.status,
        })
        .collect();
    let Some((pos, neg)) = pick_extremes(&samples, opts.fraction) else {
        return skipped("identical outcomes across all configurations".into());
    };
    Ok(CollectOutcome::Labeled(Box::new(InstanceEntry {
        id: id.to_string(),
        graph: Arc::new(to_bipartite(inst, &root)),
        labels: InstanceLabels::Contrastive {
            positives: pos.iter().map(|&i| samples[i].one_hot.clone()).collect(),
            negatives: neg.iter().map(|&i| samples[i].one_hot.clone()).collect(),
        },
        split: Split::Train,
    })))
}

/// Run the shared configuration pool (plus per-instance local improvement)
/// on every instance and label the quality extremes. Instances with no
/// feasible run or no contrast are skipped and reported.
pub fn collect_config_data(
    instances: &[(String, MilpInstance)],
    opts: &CollectConfigOptions,
) -> Result<(GuidanceDataset, Vec<Skip>), GuidanceError> {
    collect_config_data_jobs(instances, opts, 1)
}

/// [`collect_config_data`] fanned out over `jobs` threads. The shared pool
/// is sampled once up front and per-instance RNGs are seeded by instance
/// index, so the dataset is byte-identical to the sequential run.
pub fn collect_config_data_jobs(
    instances: &[(String, MilpInstance)],
    opts: &CollectConfigOptions,
    jobs: usize,
) -> Result<(GuidanceDataset, Vec<Skip>), GuidanceError> {
    if instances.is_empty() {
        return Err(GuidanceError::BadOptions("no instances".into()));
    }
    if !(0.0..1.0).contains(&opts.val_fraction) {
        return Err(GuidanceError::BadOptions(format!(
            "val_fraction {} outside [0, 1)",
            opts.val_fraction
        )));
    }
    if !(0.0..=0.5).contains(&opts.fraction) || opts.fraction == 0.0 {
        return Err(GuidanceError::BadOptions(format!(
            "extreme fraction {} outside (0, 0.5]",
            opts.fraction
        )));
    }
    let configs = sample_configs(opts.count, opts.seed)?;
    let outcomes = crate::par::par_map_indexed(instances, jobs, |index, (id, inst)| {
        collect_config_instance(id, inst, &configs, index, opts)
    });
    let outcomes: Vec<CollectOutcome> = outcomes.into_iter().collect::<Result<_, _>>()?;
    Ok(assemble_dataset(
        TaskMode::ConfigLogits,
        opts.seed,
        outcomes,
        opts.val_fraction,
    ))
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

/// Score every candidate and return `(index, score)` of the best; ties go to
/// the first candidate in order.
pub fn select_best_candidate(
    model: &GatModel,
    graph: &BipartiteGraph,
    candidates: &[BackdoorCandidate],
) -> Result<(usize, f64), GuidanceError> {
    if candidates.is_empty() {
        return Err(GuidanceError::Neural(NeuralError::EmptyCandidates));
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, cand) in candidates.iter().enumerate() {
        let score = score_backdoor(model, graph, &cand.members)?;
        if score > best.1 {
            best = (i, score);
        }
    }
    Ok(best)
}

/// Sample [`INFER_CANDIDATES`] candidates of size `k`, score them, and turn
/// the argmax set into single-level branching priorities (members 1, rest
/// default 0).
pub fn infer_backdoor(
    model: &GatModel,
    inst: &MilpInstance,
    k: usize,
    seed: u64,
) -> Result<BranchPriority, GuidanceError> {
    let root = lp_relax_solve(inst)?;
    if root.status != LpStatus::Optimal {
        return Err(GuidanceError::RootNotOptimal(root.status));
    }
    let graph = to_bipartite(inst, &root);
    let candidates = sample_backdoor_candidates(inst, &root, k, INFER_CANDIDATES, seed)?;
    let (best, _) = select_best_candidate(model, &graph, &candidates)?;
    Ok(BranchPriority::from_set(
        candidates[best].members.iter().copied(),
    ))
}

/// Per-parameter block argmax over a config logit vector; ties take the
/// lowest option index.
pub fn decode_config_logits(logits: &[f64]) -> Result<[usize; 15], GuidanceError> {
    if logits.len() != ONE_HOT_DIM {
        return Err(GuidanceError::BadOptions(format!(
            "logit vector length {} (expected {ONE_HOT_DIM})",
            logits.len()
        )));
    }
    let mut out = [0usize; 15];
    let mut offset = 0;
    for (p, &card) in PARAM_CARDINALITIES.iter().enumerate() {
        let block = &logits[offset..offset + card];
        let mut best = 0usize;
        for (i, &v) in block.iter().enumerate() {
            if v > block[best] {
                best = i;
            }
        }
        out[p] = best;
        offset += card;
    }
    Ok(out)
}

/// Forward pass in configuration mode, decoded into a concrete
/// [`SolverConfig`].
pub fn infer_config(
    model: &GatModel,
    inst: &MilpInstance,
) -> Result<SolverConfig, GuidanceError> {
    let root = lp_relax_solve(inst)?;
    if root.status != LpStatus::Optimal {
        return Err(GuidanceError::RootNotOptimal(root.status));
    }
    let graph = to_bipartite(inst, &root);
    let logits = config_vector(model, &graph)?;
    let indices = decode_config_logits(&logits)?;
    SolverConfig::from_option_indices(&indices).map_err(GuidanceError::BadOptions)
}
