use super::*;
use crate::milp::{lp_relax_solve, Basis, ColState, MilpInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn fake_optimal(inst: &MilpInstance, values: Vec<f64>) -> LpSolution {
    LpSolution {
        status: LpStatus::Optimal,
        objective: inst.objective_value(&values),
        duals: vec![0.0; inst.m],
        reduced_costs: vec![0.0; inst.n],
        basis_status: vec![BasisStatus::AtLower; inst.n],
        iterations: 0,
        basis: Basis {
            states: vec![ColState::Lower; inst.n + inst.m],
        },
        values,
    }
}

fn random_instance(seed: u64) -> MilpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=7);
    let mut inst = MilpInstance::new(n);
    for j in 0..n {
        inst.obj[j] = f64::from(rng.random_range(-3..=3));
        match rng.random_range(0..4) {
            0 => {
                inst.ub[j] = 1.0;
                inst.int_set.insert(j);
            }
            1 => {
                inst.ub[j] = f64::from(rng.random_range(2..=4));
                inst.int_set.insert(j);
            }
            2 => {
                inst.lb[j] = -3.0;
                inst.ub[j] = 3.0;
            }
            _ => {
                inst.lb[j] = f64::NEG_INFINITY;
            }
        }
    }
    for _ in 0..rng.random_range(2..=5) {
        let mut entries = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.6) {
                let mut a = f64::from(rng.random_range(-2..=2));
                if entries.is_empty() && a == 0.0 {
                    a = 1.0;
                }
                entries.push((j, a));
            }
        }
        if entries.is_empty() {
            entries.push((0, 1.0));
        }
        let sense = match rng.random_range(0..3) {
            0 => RowSense::Le,
            1 => RowSense::Ge,
            _ => RowSense::Eq,
        };
        // Generous right-hand sides keep most draws feasible; the extractor
        // must behave for the rest too.
        let rhs = match sense {
            RowSense::Le => f64::from(rng.random_range(2..=10)),
            RowSense::Ge => f64::from(rng.random_range(-10..=-2)),
            RowSense::Eq => f64::from(rng.random_range(-1..=1)),
        };
        inst.push_row(sense, rhs, &entries);
    }
    inst.validate().unwrap();
    inst
}

#[test]
fn edge_set_is_exactly_the_nonzeros() {
    let mut inst = MilpInstance::new(3);
    inst.ub = vec![1.0; 3];
    // An explicitly stored zero must not become an edge.
    inst.push_row(RowSense::Le, 1.0, &[(0, 0.0), (1, 2.0), (2, -1.0)]);
    inst.push_row(RowSense::Ge, 0.0, &[(1, 0.5)]);
    let g = to_bipartite(&inst, &fake_optimal(&inst, vec![0.0; 3]));
    assert_eq!(g.edges.len(), 3);
    assert_eq!(
        g.edges,
        vec![
            Edge { con: 0, var: 1, weight: 1.0 },
            Edge { con: 0, var: 2, weight: -0.5 },
            Edge { con: 1, var: 1, weight: 1.0 },
        ]
    );
    // Column nonzero counts: var 1 has two, others at most one.
    assert_eq!(g.var_features[1][14], 1.0);
    assert_eq!(g.var_features[2][14], 0.5);
    assert_eq!(g.var_features[0][14], 0.0);
}

#[test]
fn half_fractional_binary_scores_half() {
    let mut inst = MilpInstance::new(1);
    inst.ub = vec![1.0];
    inst.int_set.insert(0);
    inst.push_row(RowSense::Le, 1.0, &[(0, 1.0)]);
    let g = to_bipartite(&inst, &fake_optimal(&inst, vec![0.5]));
    assert_eq!(g.var_features[0][9], 0.5, "fractionality");
    assert_eq!(g.var_features[0][8], 0.5, "scaled LP value");
}

#[test]
fn variable_class_one_hot_is_exclusive() {
    let mut inst = MilpInstance::new(3);
    inst.ub = vec![1.0, 2.0, f64::INFINITY];
    inst.int_set.insert(0);
    inst.int_set.insert(1);
    inst.push_row(RowSense::Le, 1.0, &[(0, 1.0), (1, 1.0), (2, 1.0)]);
    let g = to_bipartite(&inst, &fake_optimal(&inst, vec![0.0; 3]));
    assert_eq!(g.var_features[0][..3], [1.0, 0.0, 0.0], "binary");
    assert_eq!(g.var_features[1][..3], [0.0, 1.0, 0.0], "general integer");
    assert_eq!(g.var_features[2][..3], [0.0, 0.0, 1.0], "continuous");
    // Finite-bound flags: all have finite lb 0; only the first two a finite ub.
    assert_eq!(g.var_features[2][4], 1.0);
    assert_eq!(g.var_features[2][5], 0.0);
}

#[test]
fn zero_norms_and_free_variables_guard_to_zero() {
    let mut inst = MilpInstance::new(2);
    inst.lb = vec![f64::NEG_INFINITY; 2];
    inst.ub = vec![f64::INFINITY; 2];
    inst.push_row(RowSense::Eq, 0.0, &[(0, 1.0), (1, -1.0)]);
    let g = to_bipartite(&inst, &fake_optimal(&inst, vec![0.0; 2]));
    for f in &g.var_features {
        assert_eq!(f[3], 0.0, "zero objective norm");
        assert_eq!(f[6], 0.0, "guarded lower bound");
        assert_eq!(f[7], 0.0, "guarded upper bound");
        assert_eq!(f[8], 0.0, "unbounded LP scaling");
        assert!(f.iter().all(|v| v.is_finite()));
    }
    assert_eq!(g.con_features[0][0], 0.0, "zero rhs norm");
}

#[test]
fn sense_codes_and_tightness_flags() {
    let mut inst = MilpInstance::new(1);
    inst.ub = vec![10.0];
    inst.push_row(RowSense::Le, 5.0, &[(0, 1.0)]); // slack at x = 2
    inst.push_row(RowSense::Ge, 2.0, &[(0, 1.0)]); // tight at x = 2
    inst.push_row(RowSense::Eq, 2.0, &[(0, 1.0)]); // tight by construction
    let g = to_bipartite(&inst, &fake_optimal(&inst, vec![2.0]));
    assert_eq!(g.con_features[0][1], 1.0);
    assert_eq!(g.con_features[1][1], -1.0);
    assert_eq!(g.con_features[2][1], 0.0);
    assert_eq!(g.con_features[0][3], 0.0, "slack row not tight");
    assert_eq!(g.con_features[1][3], 1.0, "active row tight");
    assert_eq!(g.con_features[2][3], 1.0, "equality tight");
}

#[test]
fn non_optimal_root_zero_fills_lp_columns() {
    let mut inst = MilpInstance::new(2);
    inst.ub = vec![1.0; 2];
    inst.int_set.insert(0);
    inst.push_row(RowSense::Le, 1.0, &[(0, 1.0), (1, 1.0)]);
    let mut lp = fake_optimal(&inst, vec![0.7, 0.2]);
    lp.status = LpStatus::Infeasible;
    lp.basis_status = vec![BasisStatus::Basic; 2];
    lp.duals = vec![3.0];
    lp.reduced_costs = vec![1.0, -2.0];
    let g = to_bipartite(&inst, &lp);
    for f in &g.var_features {
        assert_eq!(f[8..=13], [0.0; 6], "LP-derived variable columns");
    }
    assert_eq!(g.con_features[0][2], 0.0);
    assert_eq!(g.con_features[0][3], 0.0);
}

#[test]
fn all_features_stay_in_the_unit_box() {
    for seed in 0..20 {
        let inst = random_instance(seed);
        let lp = lp_relax_solve(&inst).unwrap();
        let g = to_bipartite(&inst, &lp);
        for (j, f) in g.var_features.iter().enumerate() {
            for (k, v) in f.iter().enumerate() {
                assert!(
                    v.is_finite() && v.abs() <= 1.0 + 1e-12,
                    "seed {seed} var {j} feature {k} = {v}"
                );
            }
        }
        for (i, f) in g.con_features.iter().enumerate() {
            for (k, v) in f.iter().enumerate() {
                assert!(
                    v.is_finite() && v.abs() <= 1.0 + 1e-12,
                    "seed {seed} con {i} feature {k} = {v}"
                );
            }
        }
        for e in &g.edges {
            assert!(e.weight.is_finite() && e.weight.abs() <= 1.0);
        }
    }
}

/// Apply `sigma` (old index -> new index) to the variable space of an
/// instance and a solution.
fn permute_vars(
    inst: &MilpInstance,
    lp: &LpSolution,
    sigma: &[usize],
) -> (MilpInstance, LpSolution) {
    let n = inst.n;
    let mut out = MilpInstance::new(n);
    out.m = inst.m;
    out.rhs = inst.rhs.clone();
    out.sense = inst.sense.clone();
    for j in 0..n {
        out.obj[sigma[j]] = inst.obj[j];
        out.lb[sigma[j]] = inst.lb[j];
        out.ub[sigma[j]] = inst.ub[j];
    }
    out.int_set = inst.int_set.iter().map(|&j| sigma[j]).collect();
    for row in &inst.rows {
        let entries: Vec<(usize, f64)> = row.iter().map(|(j, a)| (sigma[j], a)).collect();
        out.rows.push(crate::milp::SparseRow::new(&entries));
    }
    let mut lp2 = lp.clone();
    for j in 0..n {
        lp2.values[sigma[j]] = lp.values[j];
        lp2.reduced_costs[sigma[j]] = lp.reduced_costs[j];
        lp2.basis_status[sigma[j]] = lp.basis_status[j];
        lp2.basis.states[sigma[j]] = lp.basis.states[j];
    }
    (out, lp2)
}

fn permute_rows(
    inst: &MilpInstance,
    lp: &LpSolution,
    rho: &[usize],
) -> (MilpInstance, LpSolution) {
    let mut out = inst.clone();
    let mut lp2 = lp.clone();
    for i in 0..inst.m {
        out.rows[rho[i]] = inst.rows[i].clone();
        out.rhs[rho[i]] = inst.rhs[i];
        out.sense[rho[i]] = inst.sense[i];
        lp2.duals[rho[i]] = lp.duals[i];
        lp2.basis.states[inst.n + rho[i]] = lp.basis.states[inst.n + i];
    }
    (out, lp2)
}

fn random_permutation(rng: &mut ChaCha8Rng, len: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..len).collect();
    // Fisher-Yates.
    for i in (1..len).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

#[test]
fn variable_permutation_commutes_with_extraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for seed in 0..20 {
        let inst = random_instance(seed);
        let lp = lp_relax_solve(&inst).unwrap();
        let sigma = random_permutation(&mut rng, inst.n);
        let (inst2, lp2) = permute_vars(&inst, &lp, &sigma);
        let g1 = to_bipartite(&inst, &lp);
        let g2 = to_bipartite(&inst2, &lp2);
        for j in 0..inst.n {
            let a: Vec<u64> = g1.var_features[j].iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = g2.var_features[sigma[j]].iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b, "seed {seed} var {j}");
        }
        assert_eq!(g1.con_features, g2.con_features);
        let mapped: BTreeSet<(usize, usize, u64)> = g1
            .edges
            .iter()
            .map(|e| (e.con, sigma[e.var], e.weight.to_bits()))
            .collect();
        let actual: BTreeSet<(usize, usize, u64)> = g2
            .edges
            .iter()
            .map(|e| (e.con, e.var, e.weight.to_bits()))
            .collect();
        assert_eq!(mapped, actual, "seed {seed}");
    }
}

#[test]
fn constraint_permutation_commutes_with_extraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for seed in 0..20 {
        let inst = random_instance(seed);
        let lp = lp_relax_solve(&inst).unwrap();
        let rho = random_permutation(&mut rng, inst.m);
        let (inst2, lp2) = permute_rows(&inst, &lp, &rho);
        let g1 = to_bipartite(&inst, &lp);
        let g2 = to_bipartite(&inst2, &lp2);
        assert_eq!(g1.var_features, g2.var_features, "seed {seed}");
        for i in 0..inst.m {
            assert_eq!(
                g1.con_features[i], g2.con_features[rho[i]],
                "seed {seed} con {i}"
            );
        }
        let mapped: BTreeSet<(usize, usize, u64)> = g1
            .edges
            .iter()
            .map(|e| (rho[e.con], e.var, e.weight.to_bits()))
            .collect();
        let actual: BTreeSet<(usize, usize, u64)> = g2
            .edges
            .iter()
            .map(|e| (e.con, e.var, e.weight.to_bits()))
            .collect();
        assert_eq!(mapped, actual, "seed {seed}");
    }
}

#[test]
fn extraction_round_trips_through_json() {
    let inst = random_instance(5);
    let lp = lp_relax_solve(&inst).unwrap();
    let g1 = to_bipartite(&inst, &lp);
    let g2 = to_bipartite(&inst, &lp);
    assert_eq!(g1, g2);
    let text = serde_json::to_string(&g1).unwrap();
    let back: BipartiteGraph = serde_json::from_str(&text).unwrap();
    assert_eq!(back, g1);
    assert_eq!(back.schema_version, SCHEMA_VERSION);
}

#[test]
fn membership_column_sets_and_resets() {
    let inst = random_instance(3);
    let lp = lp_relax_solve(&inst).unwrap();
    let mut g = to_bipartite(&inst, &lp);
    assert!(g.membership.iter().all(|&v| v == 0.0));
    g.set_membership([1usize, 2]).unwrap();
    assert_eq!(g.membership[1], 1.0);
    assert_eq!(g.membership[2], 1.0);
    g.set_membership([0usize]).unwrap();
    assert_eq!(g.membership[1], 0.0, "previous members cleared");
    assert_eq!(g.membership[0], 1.0);
    let err = g.set_membership([inst.n]).unwrap_err();
    assert!(matches!(err, GraphError::BadIndex { .. }));
}
