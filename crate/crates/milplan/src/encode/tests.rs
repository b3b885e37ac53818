use super::*;
use crate::bnb::{self, BranchPriority, Limits, SolveResult, SolveStatus, SolverConfig};
use crate::milp::{lp_relax_solve, LpStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn integrator_1d() -> LinearDynamics {
    LinearDynamics::new(1, 1, vec![1.0], vec![1.0]).unwrap()
}

fn problem_1d(spec: StlFormula, horizon: usize, x0: f64) -> PlanningProblem {
    PlanningProblem {
        dynamics: integrator_1d(),
        x0: vec![x0],
        horizon,
        spec,
        state_bounds: BoxBounds::new(vec![-8.0], vec![8.0]).unwrap(),
        input_bounds: BoxBounds::new(vec![-2.0], vec![2.0]).unwrap(),
    }
}

/// `x >= thr`
fn pred_ge(thr: f64) -> StlFormula {
    StlFormula::unnamed_pred(LinearPredicate::new(vec![1.0], thr).unwrap())
}

/// `x <= thr`
fn pred_le(thr: f64) -> StlFormula {
    StlFormula::unnamed_pred(LinearPredicate::new(vec![-1.0], -thr).unwrap())
}

fn solve_encoding(enc: &StlEncoding) -> SolveResult {
    bnb::solve(
        &enc.instance,
        &SolverConfig::default(),
        &BranchPriority::new(),
        &Limits::default(),
    )
    .unwrap()
}

fn pred_binary(inst: &MilpInstance) -> usize {
    *inst
        .annotations
        .var
        .iter()
        .find(|(_, txt)| txt.contains("(pred"))
        .map(|(j, _)| j)
        .unwrap()
}

#[test]
fn true_spec_yields_minimal_instance() {
    let problem = problem_1d(StlFormula::True, 2, 1.0);
    let enc = encode_problem(&problem, &EncodingContext::default()).unwrap();
    // One constant-true binary and nothing else integer.
    assert_eq!(enc.instance.int_set.len(), 1);
    // states 3 + controls 2 + effort 2 + root binary.
    assert_eq!(enc.instance.n, 8);
    // x0 + dynamics 2 + state box 6 + effort 4 + root fixing.
    assert_eq!(enc.instance.m, 14);
    let res = solve_encoding(&enc);
    assert_eq!(res.status, SolveStatus::Optimal);
    assert!(res.objective.unwrap().abs() < 1e-7, "zero effort suffices");
}

#[test]
fn conjunction_emits_one_row_per_child() {
    let spec = StlFormula::and(vec![pred_ge(1.0), pred_le(3.0)]);
    let problem = problem_1d(spec, 1, 2.0);
    let enc = encode_problem(&problem, &EncodingContext::default()).unwrap();
    // Two predicate binaries plus the conjunction node.
    assert_eq!(enc.instance.int_set.len(), 3);
    let and_rows = enc
        .instance
        .annotations
        .row
        .values()
        .filter(|t| t.contains("_and"))
        .count();
    assert_eq!(and_rows, 2);
    assert_eq!(solve_encoding(&enc).status, SolveStatus::Optimal);
}

#[test]
fn eventually_unrolls_into_one_disjunction_row() {
    let spec = StlFormula::eventually(pred_ge(2.0), 0, 2);
    let problem = problem_1d(spec, 3, 0.0);
    let enc = encode_problem(&problem, &EncodingContext::default()).unwrap();
    // Predicate binaries at t = 0, 1, 2 plus the disjunction node.
    assert_eq!(enc.instance.int_set.len(), 4);
    let (row_idx, _) = enc
        .instance
        .annotations
        .row
        .iter()
        .find(|(_, t)| t.contains("_evt"))
        .unwrap();
    assert_eq!(enc.instance.rows[*row_idx].nnz(), 4, "z plus three witnesses");
    let res = solve_encoding(&enc);
    assert_eq!(res.status, SolveStatus::Optimal);
    let traj = enc.layout.trajectory(res.incumbent.as_ref().unwrap()).unwrap();
    assert_eq!(problem.spec.satisfies(&traj, 0), Ok(true));
}

#[test]
fn registry_dedups_shared_subformulas() {
    let p = || pred_ge(1.0);
    let spec = StlFormula::and(vec![
        StlFormula::eventually(p(), 0, 2),
        StlFormula::always(p(), 0, 2),
    ]);
    let problem = problem_1d(spec, 3, 2.0);
    let enc = encode_problem(&problem, &EncodingContext::default()).unwrap();
    // Shared predicate binaries at t = 0..2 encoded once: 3 + F + G + And.
    assert_eq!(enc.instance.int_set.len(), 6);

    let again = encode_problem(&problem, &EncodingContext::default()).unwrap();
    assert_eq!(
        serde_json::to_string(&enc.instance).unwrap(),
        serde_json::to_string(&again.instance).unwrap(),
        "encoding is deterministic"
    );
}

#[test]
fn same_name_bound_to_different_predicates_does_not_collide() {
    let a1 = StlFormula::pred("a", LinearPredicate::new(vec![1.0], 1.0).unwrap());
    let a2 = StlFormula::pred("a", LinearPredicate::new(vec![1.0], 2.0).unwrap());
    let problem = problem_1d(StlFormula::and(vec![a1, a2]), 1, 3.0);
    let enc = encode_problem(&problem, &EncodingContext::default()).unwrap();
    // Registry keys come from predicate values, not names: two distinct
    // predicate binaries plus the conjunction.
    assert_eq!(enc.instance.int_set.len(), 3);
}

#[test]
fn predicate_indicator_forcing() {
    let spec = || StlFormula::always(pred_ge(2.0), 0, 0);

    // Far on the true side: the indicator cannot be 0.
    let enc = encode_problem(&problem_1d(spec(), 1, 5.0), &EncodingContext::default()).unwrap();
    assert_eq!(lp_relax_solve(&enc.instance).unwrap().status, LpStatus::Optimal);
    let zp = pred_binary(&enc.instance);
    let mut forced = enc.instance.clone();
    forced.ub[zp] = 0.0;
    assert_eq!(
        lp_relax_solve(&forced).unwrap().status,
        LpStatus::Infeasible,
        "x0 = 5 forces the x >= 2 indicator to 1"
    );

    // Far on the false side: the root demands 1, so the problem is infeasible.
    let enc = encode_problem(&problem_1d(spec(), 1, -5.0), &EncodingContext::default()).unwrap();
    assert_eq!(solve_encoding(&enc).status, SolveStatus::Infeasible);

    // Boundary: both indicator values are admissible, the root picks 1.
    let enc = encode_problem(&problem_1d(spec(), 1, 2.0), &EncodingContext::default()).unwrap();
    assert_eq!(solve_encoding(&enc).status, SolveStatus::Optimal);
}

#[test]
fn rho_min_demands_a_margin() {
    let spec = || StlFormula::always(pred_ge(2.0), 0, 0);
    let relaxed = EncodingContext::default();
    let tight = EncodingContext {
        rho_min: 0.5,
        ..EncodingContext::default()
    };
    let boundary = problem_1d(spec(), 1, 2.0);
    let enc = encode_problem(&boundary, &relaxed).unwrap();
    assert_eq!(solve_encoding(&enc).status, SolveStatus::Optimal);
    let enc = encode_problem(&boundary, &tight).unwrap();
    assert_eq!(
        solve_encoding(&enc).status,
        SolveStatus::Infeasible,
        "x0 sits on the boundary; a 0.5 margin is unreachable at t = 0"
    );
}

#[test]
fn supplied_big_m_is_validated_per_predicate() {
    let problem = problem_1d(StlFormula::always(pred_ge(2.0), 0, 0), 1, 5.0);
    let ctx = EncodingContext {
        big_m: Some(1.0),
        ..EncodingContext::default()
    };
    match encode_problem(&problem, &ctx) {
        Err(EncodeError::BigMTooSmall { need, got }) => {
            // |h| over [-8, 8] peaks at |-8 - 2| = 10.
            assert!((need - 10.0).abs() < 1e-12, "need {need}");
            assert_eq!(got, 1.0);
        }
        other => panic!("expected BigMTooSmall, got {other:?}"),
    }

    let ok = EncodingContext {
        big_m: Some(50.0),
        ..EncodingContext::default()
    };
    assert!(encode_problem(&problem, &ok).is_ok());
}

#[test]
fn until_requires_a_witness_with_held_prefix() {
    let until = |hi: usize| StlFormula::until(pred_ge(-1.0), pred_ge(2.0), 0, hi);
    let mut problem = problem_1d(until(3), 4, 0.0);
    problem.input_bounds = BoxBounds::new(vec![-1.0], vec![1.0]).unwrap();
    let enc = encode_problem(&problem, &EncodingContext::default()).unwrap();
    let res = solve_encoding(&enc);
    assert_eq!(res.status, SolveStatus::Optimal);
    let traj = enc.layout.trajectory(res.incumbent.as_ref().unwrap()).unwrap();
    assert_eq!(problem.spec.satisfies(&traj, 0), Ok(true));
    assert!(problem.spec.robustness(&traj, 0).unwrap() >= 0.0);

    // Climbing at 1 per step cannot reach 2 by step 1.
    let mut problem = problem_1d(until(1), 4, 0.0);
    problem.input_bounds = BoxBounds::new(vec![-1.0], vec![1.0]).unwrap();
    let enc = encode_problem(&problem, &EncodingContext::default()).unwrap();
    assert_eq!(solve_encoding(&enc).status, SolveStatus::Infeasible);
}

#[test]
fn solution_states_follow_the_dynamics() {
    let spec = StlFormula::eventually(pred_ge(3.0), 0, 3);
    let problem = problem_1d(spec, 4, 0.0);
    let enc = encode_problem(&problem, &EncodingContext::default()).unwrap();
    let res = solve_encoding(&enc);
    assert_eq!(res.status, SolveStatus::Optimal);
    let values = res.incumbent.unwrap();
    let states = enc.layout.states(&values);
    let controls = enc.layout.controls(&values);
    assert!((states[0][0] - 0.0).abs() < 1e-9);
    let replay = problem.dynamics.simulate(&problem.x0, &controls, None);
    for (t, (a, b)) in states.iter().zip(&replay).enumerate() {
        assert!((a[0] - b[0]).abs() < 1e-7, "step {t}: {} vs {}", a[0], b[0]);
    }
}

fn random_pred(rng: &mut ChaCha8Rng) -> StlFormula {
    let thr = rng.random_range(-30..=30) as f64 / 10.0;
    if rng.random_bool(0.5) {
        pred_ge(thr)
    } else {
        pred_le(thr)
    }
}

fn random_interval(rng: &mut ChaCha8Rng, cap: usize) -> (usize, usize) {
    let hi = rng.random_range(0..=cap);
    let lo = rng.random_range(0..=hi);
    (lo, hi)
}

fn random_problem(seed: u64) -> PlanningProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = rng.random_range(4..=8usize);
    let cap = horizon - 1;
    let spec = match rng.random_range(0..7) {
        0 => {
            let (a, b) = random_interval(&mut rng, cap);
            StlFormula::always(random_pred(&mut rng), a, b)
        }
        1 => {
            let (a, b) = random_interval(&mut rng, cap);
            StlFormula::eventually(random_pred(&mut rng), a, b)
        }
        2 => StlFormula::and(vec![
            StlFormula::eventually(random_pred(&mut rng), 0, rng.random_range(0..=cap)),
            StlFormula::always(random_pred(&mut rng), 0, rng.random_range(0..=cap)),
        ]),
        3 => StlFormula::or(vec![
            StlFormula::always(random_pred(&mut rng), 0, rng.random_range(0..=cap)),
            StlFormula::eventually(random_pred(&mut rng), 0, rng.random_range(0..=cap)),
        ]),
        4 => {
            let outer = rng.random_range(0..=cap - 1);
            let inner = rng.random_range(0..=cap - 1 - outer.min(cap - 1));
            StlFormula::eventually(
                StlFormula::always(random_pred(&mut rng), 0, inner),
                0,
                outer,
            )
        }
        5 => {
            let (a, b) = random_interval(&mut rng, cap);
            StlFormula::until(random_pred(&mut rng), random_pred(&mut rng), a, b)
        }
        _ => {
            let (a, b) = random_interval(&mut rng, cap);
            StlFormula::eventually(
                StlFormula::and(vec![random_pred(&mut rng), random_pred(&mut rng)]),
                a,
                b,
            )
        }
    };
    let x0 = rng.random_range(-30..=30) as f64 / 10.0;
    problem_1d(spec, horizon, x0)
}

#[test]
fn feasible_solutions_satisfy_the_specification() {
    // Keep certified trajectories strictly off predicate boundaries so the
    // robustness check has no sign ambiguity.
    let ctx = EncodingContext {
        rho_min: 1e-6,
        ..EncodingContext::default()
    };
    let mut feasible = 0;
    for seed in 0..50 {
        let problem = random_problem(seed);
        let enc = encode_problem(&problem, &ctx).unwrap();
        let res = solve_encoding(&enc);
        match res.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Optimal => {}
            other => panic!("seed {seed}: unexpected status {other:?}"),
        }
        feasible += 1;
        let traj = enc.layout.trajectory(res.incumbent.as_ref().unwrap()).unwrap();
        assert_eq!(
            problem.spec.satisfies(&traj, 0),
            Ok(true),
            "seed {seed}: certified trajectory violates the spec"
        );
        assert!(
            problem.spec.robustness(&traj, 0).unwrap() >= 0.0,
            "seed {seed}: robustness negative"
        );
    }
    assert!(feasible >= 15, "only {feasible} of 50 problems feasible");
}

#[test]
fn grid_witness_implies_milp_feasible() {
    // If exhaustive search over a coarse control grid finds a trajectory
    // with a clear margin, the encoding must admit it.
    let grid = [-2.0, 0.0, 2.0];
    let mut witnessed = 0;
    for seed in 100..110 {
        let problem = random_problem(seed);
        let t = problem.horizon;
        let mut best = f64::NEG_INFINITY;
        for mut combo in 0..3usize.pow(t as u32) {
            let us: Vec<Vec<f64>> = (0..t)
                .map(|_| {
                    let u = grid[combo % 3];
                    combo /= 3;
                    vec![u]
                })
                .collect();
            let states = problem.dynamics.simulate(&problem.x0, &us, None);
            if !states
                .iter()
                .all(|s| problem.state_bounds.contains(s, 1e-9))
            {
                continue;
            }
            let traj = Trajectory::new(states).unwrap();
            best = best.max(problem.spec.robustness(&traj, 0).unwrap());
        }
        if best < 0.1 {
            continue;
        }
        witnessed += 1;
        let enc = encode_problem(&problem, &EncodingContext::default()).unwrap();
        let res = solve_encoding(&enc);
        assert_ne!(
            res.status,
            SolveStatus::Infeasible,
            "seed {seed}: grid found robustness {best} but the MILP is infeasible"
        );
    }
    assert!(witnessed >= 3, "grid witnessed only {witnessed} problems");
}

#[test]
fn problem_descriptor_embeds_the_formula_as_text() {
    let problem = problem_1d(StlFormula::always(pred_ge(1.5), 0, 2), 4, 2.0);
    let text = serde_json::to_string(&problem).unwrap();
    assert!(text.contains("(G 0 2"), "spec serialized as s-expression: {text}");
    let back: PlanningProblem = serde_json::from_str(&text).unwrap();
    assert_eq!(back, problem);
}

#[test]
fn validate_rejects_malformed_problems() {
    // x0 outside the state box.
    let mut p = problem_1d(StlFormula::True, 2, 0.0);
    p.x0 = vec![100.0];
    assert!(matches!(p.validate(), Err(EncodeError::Invalid(_))));

    // Specification horizon does not fit the planning horizon.
    let p = problem_1d(StlFormula::eventually(pred_ge(0.0), 0, 5), 5, 0.0);
    assert!(matches!(p.validate(), Err(EncodeError::Invalid(_))));

    // Predicate dimension mismatch.
    let two_dim = StlFormula::unnamed_pred(LinearPredicate::new(vec![1.0, 1.0], 0.0).unwrap());
    let p = problem_1d(StlFormula::always(two_dim, 0, 1), 3, 0.0);
    assert!(matches!(p.validate(), Err(EncodeError::Invalid(_))));

    // Unbounded state box cannot size big-M.
    let mut p = problem_1d(StlFormula::True, 2, 0.0);
    p.state_bounds = BoxBounds {
        lo: vec![f64::NEG_INFINITY],
        hi: vec![f64::INFINITY],
    };
    assert!(matches!(p.validate(), Err(EncodeError::Invalid(_))));
}

#[test]
fn layout_survives_the_annotation_round_trip() {
    let problem = problem_1d(StlFormula::eventually(pred_ge(1.0), 0, 2), 3, 0.0);
    let enc = encode_problem(&problem, &EncodingContext::default()).unwrap();
    let stored = &enc.instance.annotations.info["layout"];
    let back: StlLayout = serde_json::from_str(stored).unwrap();
    assert_eq!(back, enc.layout);
    assert_eq!(enc.instance.annotations.info["kind"], "stl");
}
