use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bnb::config::{SolverConfig, ONE_HOT_DIM, PARAM_CARDINALITIES};
use crate::bnb::{self, BranchPriority, Limits};
use crate::milp::{lp_relax_solve, MilpInstance, RowSense};
use crate::neural::{GatModel, TaskMode};

use super::*;

/// Binary covering/packing mix with enough integer variables to sample
/// size-3 backdoors; a few nodes of branching, never trivial at the root.
fn toy_instance(seed: u64, n: usize) -> MilpInstance {
    // Overlapping random covers plus one cardinality cap. A vertex of this
    // LP can be fractional in as many coordinates as there are rows, which
    // matters for the collection tests: distinct priority sets must lead to
    // genuinely different search trees, not one shared effort profile.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inst = MilpInstance::new(0);
    for _ in 0..n {
        inst.push_var(rng.random_range(1.0..10.0), 0.0, 1.0, true);
    }
    for _ in 0..10 {
        let mut row = Vec::new();
        let mut total = 0.0;
        for j in 0..n {
            if rng.random_bool(0.5) {
                let w = rng.random_range(1.0..3.0);
                total += w;
                row.push((j, w));
            }
        }
        if row.len() < 2 {
            continue;
        }
        inst.push_row(RowSense::Ge, total * 0.45, &row);
    }
    let everyone: Vec<(usize, f64)> = (0..n).map(|j| (j, 1.0)).collect();
    inst.push_row(RowSense::Le, n as f64 * 0.75, &everyone);
    inst
}

fn fast_limits() -> Limits {
    Limits {
        node_limit: 2_000,
        ..Limits::default()
    }
}

// ---------------------------------------------------------------------------
// Candidate sampling
// ---------------------------------------------------------------------------

#[test]
fn fractional_variable_dominates_sampled_candidates() {
    // Root LP with exactly one fractional variable (0.5) among twelve
    // integers: P(that variable enters a size-3 candidate) is over 99%.
    let inst = toy_instance(1, 12);
    let mut root = lp_relax_solve(&inst).unwrap();
    for v in &mut root.values {
        *v = v.round();
    }
    root.values[4] = 0.5;
    let candidates = sample_backdoor_candidates(&inst, &root, 3, 1000, 7).unwrap();
    assert_eq!(candidates.len(), 1000, "one candidate per draw");
    let hits = candidates.iter().filter(|c| c.members.contains(&4)).count();
    assert!(
        hits >= 950,
        "variable 4 in only {hits}/1000 candidates"
    );
    for c in &candidates {
        assert_eq!(c.members.len(), 3);
        assert!(c.members.iter().all(|j| inst.int_set.contains(j)));
        assert_eq!(c.provenance, Provenance::FractionalitySampled);
        assert!(c.eval.is_none());
    }
}

#[test]
fn integral_root_still_samples_through_the_floor() {
    // All-integral root: every weight collapses to the epsilon floor, so
    // sampling is uniform and every variable still shows up.
    let inst = toy_instance(2, 10);
    let mut root = lp_relax_solve(&inst).unwrap();
    for v in &mut root.values {
        *v = v.round();
    }
    let candidates = sample_backdoor_candidates(&inst, &root, 4, 300, 3).unwrap();
    let mut seen = BTreeSet::new();
    for c in &candidates {
        seen.extend(c.members.iter().copied());
    }
    assert_eq!(seen.len(), 10, "some variable never sampled: {seen:?}");
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let inst = toy_instance(3, 9);
    let root = lp_relax_solve(&inst).unwrap();
    let a = sample_backdoor_candidates(&inst, &root, 3, 40, 11).unwrap();
    let b = sample_backdoor_candidates(&inst, &root, 3, 40, 11).unwrap();
    assert_eq!(a, b);
    let c = sample_backdoor_candidates(&inst, &root, 3, 40, 12).unwrap();
    assert_ne!(a, c, "different seeds produced identical candidate lists");
}

#[test]
fn sampling_guards_reject_bad_inputs() {
    let inst = toy_instance(4, 5);
    let root = lp_relax_solve(&inst).unwrap();
    assert!(matches!(
        sample_backdoor_candidates(&inst, &root, 6, 10, 0),
        Err(GuidanceError::TooFewIntegers { have: 5, need: 6 })
    ));
    assert!(matches!(
        sample_backdoor_candidates(&inst, &root, 0, 10, 0),
        Err(GuidanceError::BadOptions(_))
    ));
    let mut bad_root = root.clone();
    bad_root.status = crate::milp::LpStatus::Infeasible;
    assert!(matches!(
        sample_backdoor_candidates(&inst, &bad_root, 3, 10, 0),
        Err(GuidanceError::RootNotOptimal(_))
    ));
}

// ---------------------------------------------------------------------------
// Evaluation and local improvement
// ---------------------------------------------------------------------------

#[test]
fn evaluate_backdoor_records_effort_and_censoring() {
    let inst = toy_instance(5, 10);
    let members: BTreeSet<usize> = [0, 1, 2].into_iter().collect();

    let full = evaluate_backdoor(&inst, &members, &fast_limits()).unwrap();
    assert!(!full.censored);
    assert!(full.node_count >= 1);
    assert!(full.lp_iterations >= 1);

    // A one-node budget must censor.
    let clipped = evaluate_backdoor(
        &inst,
        &members,
        &Limits {
            node_limit: 1,
            ..Limits::default()
        },
    )
    .unwrap();
    assert!(clipped.censored);
    assert_eq!(clipped.node_count, 1);
    assert!(clipped.proxy_key() > full.proxy_key(), "censored ranks below");

    // Determinism: the proxy fields repeat exactly (wall time may not).
    let again = evaluate_backdoor(&inst, &members, &fast_limits()).unwrap();
    assert_eq!(again.node_count, full.node_count);
    assert_eq!(again.lp_iterations, full.lp_iterations);
    assert_eq!(again.status, full.status);
}

#[test]
fn local_improvement_only_adds_evaluated_swaps() {
    let inst = toy_instance(6, 10);
    let root = lp_relax_solve(&inst).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pool = sample_backdoor_candidates(&inst, &root, 3, 5, 2).unwrap();
    let mut seen = BTreeSet::new();
    pool.retain(|c| seen.insert(c.members.clone()));
    for c in &mut pool {
        c.eval = Some(evaluate_backdoor(&inst, &c.members, &fast_limits()).unwrap());
    }
    let best_before = pool
        .iter()
        .filter_map(|c| c.eval.as_ref().map(EvalRecord::proxy_key))
        .min()
        .unwrap();
    let sampled = pool.len();
    improve_backdoor(&inst, &mut pool, 10, &fast_limits(), &mut rng).unwrap();
    assert!(pool.len() > sampled, "no swap was ever evaluated");
    for c in &pool[sampled..] {
        assert_eq!(c.provenance, Provenance::LocallyImproved);
        assert_eq!(c.members.len(), 3);
        assert!(c.eval.is_some());
    }
    let best_after = pool
        .iter()
        .filter_map(|c| c.eval.as_ref().map(EvalRecord::proxy_key))
        .min()
        .unwrap();
    assert!(best_after <= best_before, "improvement made the best worse");
    // Member sets stay pairwise distinct.
    let sets: BTreeSet<_> = pool.iter().map(|c| c.members.clone()).collect();
    assert_eq!(sets.len(), pool.len());
}

// ---------------------------------------------------------------------------
// Ranking pairs
// ---------------------------------------------------------------------------

fn synthetic_candidate(members: &[usize], nodes: u64, censored: bool) -> BackdoorCandidate {
    BackdoorCandidate {
        members: members.iter().copied().collect(),
        provenance: Provenance::FractionalitySampled,
        eval: Some(EvalRecord {
            node_count: nodes,
            lp_iterations: 10 * nodes,
            wall_time: 0.0,
            status: if censored {
                crate::bnb::SolveStatus::Limit
            } else {
                crate::bnb::SolveStatus::Optimal
            },
            censored,
        }),
    }
}

#[test]
fn thirty_distinct_candidates_make_225_cross_pairs() {
    let pool: Vec<BackdoorCandidate> = (0..30)
        .map(|i| synthetic_candidate(&[i, i + 100], 10 + i as u64, false))
        .collect();
    let pairs = make_rank_pairs(&pool).unwrap();
    assert_eq!(pairs.len(), 225);
    // Label coherence: b1 is always the faster set, labeled +1.
    let nodes_of = |b: &BTreeSet<usize>| {
        pool.iter()
            .find(|c| &c.members == b)
            .unwrap()
            .eval
            .as_ref()
            .unwrap()
            .node_count
    };
    for p in &pairs {
        assert_eq!(p.y, 1.0);
        assert!(nodes_of(&p.b1) < nodes_of(&p.b2));
    }
}

#[test]
fn tie_pairs_are_dropped_and_censored_sink() {
    // 20 completed with identical proxies + 10 censored: every cross pair
    // between the fast group and a completed slow-group member ties away,
    // leaving only completed-vs-censored pairs.
    let mut pool: Vec<BackdoorCandidate> = (0..20)
        .map(|i| synthetic_candidate(&[i, 50 + i], 10, false))
        .collect();
    for i in 0..10 {
        // Censored with tiny node counts: still ranked below every
        // completed candidate.
        pool.push(synthetic_candidate(&[i + 200, i + 300], 1, true));
    }
    let pairs = make_rank_pairs(&pool).unwrap();
    // Slow group = 5 completed(tied with fast) + 10 censored; fast group =
    // 15 completed. Cross pairs: 15×10 informative, 15×5 dropped.
    assert_eq!(pairs.len(), 150);
    for p in &pairs {
        let c2 = pool.iter().find(|c| c.members == p.b2).unwrap();
        assert!(c2.eval.as_ref().unwrap().censored, "slow side must be censored");
    }

    // All identical → nothing survives.
    let flat: Vec<BackdoorCandidate> = (0..30)
        .map(|i| synthetic_candidate(&[i, 40 + i], 5, false))
        .collect();
    assert!(make_rank_pairs(&flat).unwrap().is_empty());
}

#[test]
fn too_few_candidates_is_an_error() {
    let pool: Vec<BackdoorCandidate> = (0..29)
        .map(|i| synthetic_candidate(&[i, i + 40], 10 + i as u64, false))
        .collect();
    assert!(matches!(
        make_rank_pairs(&pool),
        Err(GuidanceError::TooFewCandidates { have: 29, need: 30 })
    ));
}

// ---------------------------------------------------------------------------
// Backdoor collection end to end
// ---------------------------------------------------------------------------

fn collect_opts(budget: usize) -> CollectBackdoorOptions {
    CollectBackdoorOptions {
        k: 3,
        budget,
        swaps: 3,
        limits: fast_limits(),
        seed: 5,
        val_fraction: 0.34,
    }
}

#[test]
fn collect_backdoor_data_builds_a_split_dataset() {
    let instances: Vec<(String, MilpInstance)> = (0..3)
        .map(|i| (format!("toy-{i}"), toy_instance(20 + i as u64, 16)))
        .collect();
    let opts = collect_opts(150);
    let (dataset, skips) = collect_backdoor_data(&instances, &opts).unwrap();
    assert!(skips.is_empty(), "unexpected skips: {skips:?}");
    assert_eq!(dataset.entries.len(), 3);
    dataset.validate().unwrap();
    assert_eq!(dataset.task, TaskMode::BackdoorScore);
    // Deterministic split by input order: trailing instance is validation.
    assert_eq!(dataset.entries[0].split, Split::Train);
    assert_eq!(dataset.entries[1].split, Split::Train);
    assert_eq!(dataset.entries[2].split, Split::Validation);

    let (train, val) = dataset.to_neural().unwrap();
    train.validate().unwrap();
    val.validate().unwrap();
    assert_eq!(train.mode(), TaskMode::BackdoorScore);
    assert!(!train.is_empty() && !val.is_empty());

    // Byte-identical reruns.
    let (dataset2, _) = collect_backdoor_data(&instances, &opts).unwrap();
    assert_eq!(
        serde_json::to_string(&dataset).unwrap(),
        serde_json::to_string(&dataset2).unwrap()
    );
}

#[test]
fn under_budget_instances_are_skipped_with_a_reason() {
    let instances = vec![("small".to_string(), toy_instance(30, 10))];
    let (dataset, skips) = collect_backdoor_data(&instances, &collect_opts(20)).unwrap();
    assert!(dataset.entries.is_empty());
    assert_eq!(skips.len(), 1);
    assert_eq!(skips[0].instance, "small");
    assert!(skips[0].reason.contains("need 30"), "reason: {}", skips[0].reason);
}

#[test]
fn infeasible_roots_are_skipped_not_fatal() {
    let mut bad = toy_instance(31, 16);
    let j = bad.push_var(0.0, 0.0, 1.0, false);
    bad.push_row(RowSense::Ge, 2.0, &[(j, 1.0)]);
    let instances = vec![
        ("bad".to_string(), bad),
        ("good".to_string(), toy_instance(32, 16)),
    ];
    let (dataset, skips) = collect_backdoor_data(&instances, &collect_opts(150)).unwrap();
    assert_eq!(dataset.entries.len(), 1);
    assert_eq!(dataset.entries[0].id, "good");
    assert_eq!(skips.len(), 1);
    assert_eq!(skips[0].instance, "bad");
}

// ---------------------------------------------------------------------------
// Configuration collection
// ---------------------------------------------------------------------------

#[test]
fn sample_configs_is_deterministic_and_guarded() {
    assert!(matches!(
        sample_configs(7, 0),
        Err(GuidanceError::BadOptions(_))
    ));
    let a = sample_configs(20, 9).unwrap();
    let b = sample_configs(20, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 20);
    let distinct: BTreeSet<_> = a.iter().map(|c| c.option_indices()).collect();
    assert_eq!(distinct.len(), 20);
    // Encoding invariant: one-hot decodes back to the config.
    for c in &a {
        let decoded = SolverConfig::from_option_indices(&c.option_indices()).unwrap();
        assert_eq!(&decoded, c);
        assert_eq!(c.one_hot().len(), ONE_HOT_DIM);
    }
}

fn synthetic_config_sample(bound: Option<f64>, integral: f64) -> ConfigSample {
    ConfigSample {
        config: SolverConfig::default(),
        one_hot: SolverConfig::default().one_hot(),
        bound,
        integral,
        status: crate::bnb::SolveStatus::Feasible,
    }
}

#[test]
fn extremes_pick_top_and_bottom_by_bound_then_integral() {
    // Twenty samples with distinct bounds: 15% of 20 = 3 apiece.
    let samples: Vec<ConfigSample> = (0..20)
        .map(|i| synthetic_config_sample(Some(i as f64), 0.0))
        .collect();
    let (pos, neg) = pick_extremes(&samples, 0.15).unwrap();
    assert_eq!(pos, vec![0, 1, 2]);
    assert_eq!(neg, vec![17, 18, 19]);

    // Bound ties break by primal integral.
    let samples: Vec<ConfigSample> = (0..10)
        .map(|i| synthetic_config_sample(Some(1.0), i as f64))
        .collect();
    let (pos, neg) = pick_extremes(&samples, 0.15).unwrap();
    assert_eq!(pos, vec![0, 1]);
    assert_eq!(neg, vec![8, 9]);

    // Unbounded (no incumbent) samples sink to the negative end.
    let mut samples: Vec<ConfigSample> = (0..9)
        .map(|i| synthetic_config_sample(Some(i as f64), 0.0))
        .collect();
    samples.push(synthetic_config_sample(None, 5.0));
    let (_, neg) = pick_extremes(&samples, 0.15).unwrap();
    assert!(neg.contains(&9));

    // No contrast → None.
    let flat: Vec<ConfigSample> =
        (0..12).map(|_| synthetic_config_sample(Some(2.0), 1.5)).collect();
    assert!(pick_extremes(&flat, 0.15).is_none());
}

#[test]
fn collect_config_data_labels_the_extremes() {
    // A cutoff of one node leaves most configurations with only their
    // dive/rounding incumbents, so outcomes differ by configuration.
    let instances: Vec<(String, MilpInstance)> = (0..3)
        .map(|i| (format!("cfg-{i}"), toy_instance(40 + i as u64, 12)))
        .collect();
    let opts = CollectConfigOptions {
        count: 20,
        swaps: 4,
        cutoff: Limits {
            node_limit: 2,
            ..Limits::default()
        },
        fraction: 0.15,
        seed: 6,
        val_fraction: 0.34,
    };
    let (dataset, skips) = collect_config_data(&instances, &opts).unwrap();
    assert!(
        !dataset.entries.is_empty(),
        "every instance was skipped: {skips:?}"
    );
    dataset.validate().unwrap();
    assert_eq!(dataset.task, TaskMode::ConfigLogits);
    for entry in &dataset.entries {
        let InstanceLabels::Contrastive { positives, negatives } = &entry.labels else {
            panic!("wrong label kind");
        };
        assert!(!positives.is_empty() && !negatives.is_empty());
        for v in positives.iter().chain(negatives) {
            assert_eq!(v.len(), ONE_HOT_DIM);
            // Each vector is a valid concatenated one-hot: decode it.
            let idx = decode_config_logits(v).unwrap();
            let rebuilt = SolverConfig::from_option_indices(&idx).unwrap();
            assert_eq!(&rebuilt.one_hot(), v);
        }
    }

    // Byte-identical reruns.
    let (dataset2, _) = collect_config_data(&instances, &opts).unwrap();
    assert_eq!(
        serde_json::to_string(&dataset).unwrap(),
        serde_json::to_string(&dataset2).unwrap()
    );
}

#[test]
fn hopeless_instances_are_skipped() {
    // The root LP is happily feasible at x = 0.5, but no integer point
    // exists: every configuration proves infeasibility, no primal bound ever
    // appears, and the instance produces no labels.
    let mut inst = MilpInstance::new(0);
    inst.push_var(1.0, 0.5, 0.5, true);
    inst.push_row(RowSense::Ge, 0.2, &[(0, 1.0)]);
    let instances = vec![("hopeless".to_string(), inst)];
    let opts = CollectConfigOptions {
        count: 10,
        swaps: 0,
        cutoff: fast_limits(),
        ..CollectConfigOptions::default()
    };
    let (dataset, skips) = collect_config_data(&instances, &opts).unwrap();
    assert!(dataset.entries.is_empty());
    assert_eq!(skips.len(), 1);
    assert!(
        skips[0].reason.contains("no configuration"),
        "reason: {}",
        skips[0].reason
    );
}

// ---------------------------------------------------------------------------
// Dataset container
// ---------------------------------------------------------------------------

#[test]
fn dataset_save_load_round_trips() {
    let instances: Vec<(String, MilpInstance)> = (0..2)
        .map(|i| (format!("rt-{i}"), toy_instance(50 + i as u64, 16)))
        .collect();
    let (dataset, _) = collect_backdoor_data(&instances, &collect_opts(150)).unwrap();
    assert_eq!(dataset.entries.len(), 2);

    let dir = tempfile::tempdir().unwrap();
    dataset.save(dir.path()).unwrap();
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("graphs/rt-0.json").exists());
    assert!(dir.path().join("labels/rt-1.json").exists());

    let loaded = GuidanceDataset::load(dir.path()).unwrap();
    assert_eq!(loaded, dataset);

    // Unsafe ids refuse to serialize.
    let mut bad = dataset.clone();
    bad.entries[0].id = "../escape".into();
    assert!(matches!(
        bad.save(dir.path()),
        Err(GuidanceError::BadDataset(_))
    ));
}

#[test]
fn dataset_validation_rejects_duplicates_and_mismatches() {
    let instances = vec![("dup".to_string(), toy_instance(60, 16))];
    let (mut dataset, _) = collect_backdoor_data(&instances, &collect_opts(150)).unwrap();
    assert_eq!(dataset.entries.len(), 1);

    // Same id twice — also covers "no instance in both splits".
    let mut twin = dataset.entries[0].clone();
    twin.split = Split::Validation;
    dataset.entries.push(twin);
    assert!(matches!(
        dataset.validate(),
        Err(GuidanceError::BadDataset(_))
    ));
    dataset.entries.pop();

    // Label kind disagreeing with the task.
    let mut wrong = dataset.clone();
    wrong.task = TaskMode::ConfigLogits;
    assert!(matches!(wrong.validate(), Err(GuidanceError::BadDataset(_))));

    // Out-of-range member.
    let mut oob = dataset.clone();
    if let InstanceLabels::Rank(pairs) = &mut oob.entries[0].labels {
        pairs[0].b1.insert(10_000);
    }
    assert!(matches!(oob.validate(), Err(GuidanceError::BadDataset(_))));

    // Single-split dataset cannot convert.
    let mut train_only = dataset.clone();
    for e in &mut train_only.entries {
        e.split = Split::Train;
    }
    assert!(matches!(
        train_only.to_neural(),
        Err(GuidanceError::BadDataset(_))
    ));
}

#[test]
fn split_assignment_is_deterministic_by_order() {
    let mut dataset = GuidanceDataset::new(TaskMode::BackdoorScore, 0);
    let graph = Arc::new(crate::graph::to_bipartite(
        &toy_instance(70, 10),
        &lp_relax_solve(&toy_instance(70, 10)).unwrap(),
    ));
    for i in 0..10 {
        dataset.entries.push(InstanceEntry {
            id: format!("e{i}"),
            graph: Arc::clone(&graph),
            labels: InstanceLabels::Rank(vec![]),
            split: Split::Train,
        });
    }
    dataset.assign_splits(0.2);
    let val: Vec<&str> = dataset
        .entries
        .iter()
        .filter(|e| e.split == Split::Validation)
        .map(|e| e.id.as_str())
        .collect();
    assert_eq!(val, vec!["e8", "e9"]);

    // One entry stays entirely in train; tiny fractions still hold out one.
    dataset.entries.truncate(1);
    dataset.assign_splits(0.2);
    assert_eq!(dataset.entries[0].split, Split::Train);
    dataset.entries = (0..3)
        .map(|i| InstanceEntry {
            id: format!("f{i}"),
            graph: Arc::clone(&graph),
            labels: InstanceLabels::Rank(vec![]),
            split: Split::Train,
        })
        .collect();
    dataset.assign_splits(0.01);
    assert_eq!(
        dataset
            .entries
            .iter()
            .filter(|e| e.split == Split::Validation)
            .count(),
        1
    );
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

#[test]
fn infer_backdoor_returns_single_level_priorities() {
    let inst = toy_instance(80, 10);
    let model = GatModel::new(TaskMode::BackdoorScore, 8, 2, 1).unwrap();
    let prio = infer_backdoor(&model, &inst, 3, 13).unwrap();
    let members: Vec<(usize, i64)> = prio.iter().collect();
    assert_eq!(members.len(), 3);
    for &(j, p) in &members {
        assert_eq!(p, 1);
        assert!(inst.int_set.contains(&j));
    }
    // Unlisted variables sit at the default priority 0.
    let listed: BTreeSet<usize> = members.iter().map(|&(j, _)| j).collect();
    for j in inst.int_set.iter().filter(|j| !listed.contains(j)) {
        assert_eq!(prio.get(*j), 0);
    }
    // Deterministic per seed.
    let again = infer_backdoor(&model, &inst, 3, 13).unwrap();
    assert_eq!(
        prio.iter().collect::<Vec<_>>(),
        again.iter().collect::<Vec<_>>()
    );
}

#[test]
fn best_candidate_selection_breaks_ties_by_order() {
    let inst = toy_instance(81, 10);
    let root = lp_relax_solve(&inst).unwrap();
    let graph = crate::graph::to_bipartite(&inst, &root);
    let model = GatModel::new(TaskMode::BackdoorScore, 8, 2, 2).unwrap();
    let mut candidates = sample_backdoor_candidates(&inst, &root, 3, 10, 3).unwrap();
    // Append an exact duplicate of the current argmax: its score ties
    // bit-for-bit, and the earlier index must keep winning.
    let (best, score) = select_best_candidate(&model, &graph, &candidates).unwrap();
    assert!(score.is_finite());
    let clone = candidates[best].clone();
    candidates.push(clone);
    let (best2, score2) = select_best_candidate(&model, &graph, &candidates).unwrap();
    assert_eq!(best2, best, "tie must resolve to the first candidate");
    assert_eq!(score2, score);
    // A lone candidate comes straight back.
    let (only, _) = select_best_candidate(&model, &graph, &candidates[..1]).unwrap();
    assert_eq!(only, 0);
    assert!(select_best_candidate(&model, &graph, &[]).is_err());
}

#[test]
fn config_logits_decode_blockwise_with_low_index_ties() {
    // Strict per-block maxima land on the expected option.
    let mut logits = vec![0.0; ONE_HOT_DIM];
    let mut offset = 0;
    let mut expected = [0usize; 15];
    for (p, &card) in PARAM_CARDINALITIES.iter().enumerate() {
        let pick = p % card;
        logits[offset + pick] = 1.0;
        expected[p] = pick;
        offset += card;
    }
    assert_eq!(decode_config_logits(&logits).unwrap(), expected);

    // All-equal logits tie every block down to option 0.
    let flat = vec![0.5; ONE_HOT_DIM];
    assert_eq!(decode_config_logits(&flat).unwrap(), [0usize; 15]);

    assert!(decode_config_logits(&[0.0; 3]).is_err());

    // decode(encode(config)) round-trips through the argmax for real
    // one-hot encodings.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let c = SolverConfig::sample(&mut rng);
        let idx = decode_config_logits(&c.one_hot()).unwrap();
        assert_eq!(SolverConfig::from_option_indices(&idx).unwrap(), c);
    }
}

#[test]
fn infer_config_produces_a_decodable_config() {
    let inst = toy_instance(82, 10);
    let model = GatModel::new(TaskMode::ConfigLogits, 8, 2, 5).unwrap();
    let config = infer_config(&model, &inst).unwrap();
    // The returned config is exactly the blockwise argmax of the logits.
    let root = lp_relax_solve(&inst).unwrap();
    let graph = crate::graph::to_bipartite(&inst, &root);
    let logits = crate::neural::config_vector(&model, &graph).unwrap();
    let expected =
        SolverConfig::from_option_indices(&decode_config_logits(&logits).unwrap()).unwrap();
    assert_eq!(config, expected);
    // Wrong-mode models are rejected downstream.
    let rank_model = GatModel::new(TaskMode::BackdoorScore, 8, 2, 5).unwrap();
    assert!(infer_config(&rank_model, &inst).is_err());
}

#[test]
fn inferred_guidance_never_changes_the_optimum() {
    // Inference safety: priorities and configurations only steer the search
    // path; the proven optimum must coincide with the default solve.
    let backdoor_model = GatModel::new(TaskMode::BackdoorScore, 8, 2, 7).unwrap();
    let config_model = GatModel::new(TaskMode::ConfigLogits, 8, 2, 8).unwrap();
    for seed in [90, 91, 92] {
        let inst = toy_instance(seed, 10);
        let default = bnb::solve(
            &inst,
            &SolverConfig::default(),
            &BranchPriority::new(),
            &fast_limits(),
        )
        .unwrap();
        assert_eq!(default.status, crate::bnb::SolveStatus::Optimal);
        let baseline = default.objective.unwrap();

        let prio = infer_backdoor(&backdoor_model, &inst, 3, 1).unwrap();
        let guided = bnb::solve(&inst, &SolverConfig::default(), &prio, &fast_limits()).unwrap();
        assert_eq!(guided.status, crate::bnb::SolveStatus::Optimal);
        assert!(
            (guided.objective.unwrap() - baseline).abs() <= 1e-6,
            "priorities changed the optimum on seed {seed}"
        );

        let config = infer_config(&config_model, &inst).unwrap();
        let tuned = bnb::solve(&inst, &config, &BranchPriority::new(), &fast_limits()).unwrap();
        assert_eq!(tuned.status, crate::bnb::SolveStatus::Optimal);
        assert!(
            (tuned.objective.unwrap() - baseline).abs() <= 1e-6,
            "configuration changed the optimum on seed {seed}"
        );
    }
}
