use super::*;
use crate::bnb::{self, BranchPriority, Limits, SolveResult, SolveStatus, SolverConfig};
use crate::stl::LinearPredicate;

fn integrator_1d() -> LinearDynamics {
    LinearDynamics::new(1, 1, vec![1.0], vec![1.0]).unwrap()
}

/// `x >= thr`
fn pred_ge(thr: f64) -> StlFormula {
    StlFormula::unnamed_pred(LinearPredicate::new(vec![1.0], thr).unwrap())
}

/// Small deterministic disturbance pattern in {-0.2 .. 0.2}; `seed` shifts
/// the phase so distinct instances differ.
fn patterned_samples(k: usize, horizon: usize, seed: u64) -> SampleSet {
    let trajectories = (0..k)
        .map(|i| {
            (0..=horizon)
                .map(|t| {
                    let phase = (i as u64 * 7 + t as u64 * 3 + seed * 11) % 5;
                    vec![phase as f64 / 10.0 - 0.2]
                })
                .collect()
        })
        .collect();
    SampleSet {
        trajectories,
        seed,
        sigma: 0.1,
    }
}

fn reach_cpp(k: usize, delta: f64, seed: u64) -> CppProblem {
    let horizon = 5;
    CppProblem {
        dynamics: integrator_1d(),
        x0: vec![0.0],
        horizon,
        spec: StlFormula::eventually(pred_ge(2.5), 0, horizon - 1),
        delta,
        samples: patterned_samples(k, horizon, seed),
        state_bounds: BoxBounds::new(vec![-8.0], vec![8.0]).unwrap(),
        input_bounds: BoxBounds::new(vec![-2.0], vec![2.0]).unwrap(),
    }
}

fn solve_encoding(enc: &CppEncoding) -> SolveResult {
    bnb::solve(
        &enc.instance,
        &SolverConfig::default(),
        &BranchPriority::new(),
        &Limits::default(),
    )
    .unwrap()
}

#[test]
fn quantile_count_worked_examples() {
    assert_eq!(quantile_count(15, 0.2).unwrap(), 13);
    assert_eq!(quantile_count(19, 0.05).unwrap(), 19);
    assert_eq!(quantile_count(2, 0.5).unwrap(), 2);
    match quantile_count(5, 0.01) {
        Err(EncodeError::InfeasibleQuantile { q: 6, k: 5 }) => {}
        other => panic!("expected infeasible quantile, got {other:?}"),
    }
    match quantile_count(1, 0.4) {
        Err(EncodeError::InfeasibleQuantile { q: 2, k: 1 }) => {}
        other => panic!("expected infeasible quantile, got {other:?}"),
    }
    assert!(quantile_count(0, 0.5).is_err());
    assert!(quantile_count(5, 0.0).is_err());
    assert!(quantile_count(5, 1.0).is_err());
}

#[test]
fn two_samples_at_delta_half_force_both_indicators() {
    let problem = reach_cpp(2, 0.5, 0);
    // A strict margin keeps the optimum off the predicate boundary so the
    // re-simulated trajectories satisfy the closed predicates exactly.
    let ctx = EncodingContext {
        rho_min: 1e-6,
        ..EncodingContext::default()
    };
    let enc = encode_cpp(&problem, &ctx).unwrap();
    assert_eq!(enc.layout.quantile, 2);
    let res = solve_encoding(&enc);
    assert_eq!(res.status, SolveStatus::Optimal);
    let values = res.incumbent.unwrap();
    let controls = enc.layout.controls(&values);
    for i in 0..2 {
        assert!(
            (values[enc.layout.sample_roots[i]] - 1.0).abs() < 1e-6,
            "sample {i} indicator must be on"
        );
        let traj = Trajectory::new(problem.simulate_sample(i, &controls)).unwrap();
        assert_eq!(problem.spec.satisfies(&traj, 0), Ok(true), "sample {i}");
    }
}

#[test]
fn quantile_satisfaction_holds_under_resimulation() {
    let problem = reach_cpp(5, 0.35, 3);
    let q = quantile_count(5, 0.35).unwrap();
    assert_eq!(q, 4);
    let enc = encode_cpp(&problem, &EncodingContext::default()).unwrap();
    let res = solve_encoding(&enc);
    assert_eq!(res.status, SolveStatus::Optimal);
    let controls = enc.layout.controls(res.incumbent.as_ref().unwrap());
    let satisfied = (0..5)
        .filter(|&i| {
            let traj = Trajectory::new(problem.simulate_sample(i, &controls)).unwrap();
            problem.spec.robustness(&traj, 0).unwrap() >= -1e-6
        })
        .count();
    assert!(satisfied >= q, "{satisfied} of 5 samples satisfied, need {q}");
}

#[test]
fn milp_sample_states_match_independent_simulation() {
    let problem = reach_cpp(3, 0.4, 1);
    let enc = encode_cpp(&problem, &EncodingContext::default()).unwrap();
    let res = solve_encoding(&enc);
    assert_eq!(res.status, SolveStatus::Optimal);
    let values = res.incumbent.unwrap();
    let controls = enc.layout.controls(&values);
    for i in 0..3 {
        let milp_states = enc.layout.sample_states(i, &values);
        let sim = problem.simulate_sample(i, &controls);
        for (t, (a, b)) in milp_states.iter().zip(&sim).enumerate() {
            assert!(
                (a[0] - b[0]).abs() < 1e-7,
                "sample {i} step {t}: MILP {} vs simulated {}",
                a[0],
                b[0]
            );
        }
    }
}

#[test]
fn raising_delta_never_raises_the_optimum() {
    // Higher allowed failure probability weakens the constraint set, so the
    // minimal effort cannot increase.
    for seed in 0..10 {
        let mut objectives = Vec::new();
        for delta in [0.1, 0.2, 0.4] {
            let problem = reach_cpp(10, delta, seed);
            let enc = encode_cpp(&problem, &EncodingContext::default()).unwrap();
            let res = solve_encoding(&enc);
            assert_eq!(res.status, SolveStatus::Optimal, "seed {seed} delta {delta}");
            objectives.push(res.objective.unwrap());
        }
        for pair in objectives.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-9,
                "seed {seed}: objectives not monotone: {objectives:?}"
            );
        }
    }
}

#[test]
fn shared_controls_one_state_block_per_sample() {
    let problem = reach_cpp(4, 0.4, 2);
    let enc = encode_cpp(&problem, &EncodingContext::default()).unwrap();
    let l = &enc.layout;
    assert_eq!(l.num_samples, 4);
    assert_eq!(l.sample_state_base.len(), 4);
    assert_eq!(l.sample_roots.len(), 4);
    // Controls and effort precede the first sample block.
    assert_eq!(l.control_base, 0);
    assert_eq!(l.effort_base, problem.horizon);
    assert_eq!(l.sample_state_base[0], 2 * problem.horizon);
    // Exactly one cardinality row.
    let quantile_rows = enc
        .instance
        .annotations
        .row
        .values()
        .filter(|t| t.as_str() == "quantile")
        .count();
    assert_eq!(quantile_rows, 1);
    // Variable accounting: controls + effort + K state blocks + binaries.
    let expected = 2 * problem.horizon
        + 4 * (problem.horizon + 1)
        + enc.instance.int_set.len();
    assert_eq!(enc.instance.n, expected);
}

#[test]
fn cpp_encoding_is_deterministic() {
    let problem = reach_cpp(3, 0.3, 5);
    let a = encode_cpp(&problem, &EncodingContext::default()).unwrap();
    let b = encode_cpp(&problem, &EncodingContext::default()).unwrap();
    assert_eq!(
        serde_json::to_string(&a.instance).unwrap(),
        serde_json::to_string(&b.instance).unwrap()
    );
    assert_eq!(a.instance.annotations.info["kind"], "cpp");
    let back: CppLayout = serde_json::from_str(&a.instance.annotations.info["layout"]).unwrap();
    assert_eq!(back, a.layout);
}

#[test]
fn validation_guards_delta_and_sample_shape() {
    let mut p = reach_cpp(3, 0.4, 0);
    p.delta = 0.0;
    assert!(matches!(p.validate(), Err(EncodeError::Invalid(_))));
    p.delta = 1.0;
    assert!(matches!(p.validate(), Err(EncodeError::Invalid(_))));

    let mut p = reach_cpp(3, 0.4, 0);
    p.samples.trajectories[1].pop();
    assert!(matches!(p.validate(), Err(EncodeError::Invalid(_))));

    let mut p = reach_cpp(3, 0.4, 0);
    p.samples.trajectories[0][2] = vec![0.0, 0.0];
    assert!(matches!(p.validate(), Err(EncodeError::Invalid(_))));

    // Too few samples for the requested confidence.
    let p = reach_cpp(2, 0.1, 0);
    assert!(matches!(p.validate(), Err(EncodeError::InfeasibleQuantile { .. })));
}
