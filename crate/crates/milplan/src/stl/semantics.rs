//! Quantitative (robustness) and Boolean semantics over finite trajectories.
//!
//! Both are written as direct recursions over the formula tree. They share no
//! code on purpose: `satisfies` is the independent check that the sign of
//! `robustness` must agree with (away from zero-robustness boundaries).

use super::{StlFormula, StlError, Trajectory};

impl StlFormula {
    /// Robustness degree `rho(phi, x, t)`.
    ///
    /// Min/max semantics: conjunction and `Always` take minima, disjunction,
    /// `Eventually`, and the until witness take maxima. `True` is `+inf`.
    /// Errors if the trajectory is too short for the formula's horizon at `t`.
    pub fn robustness(&self, traj: &Trajectory, t: usize) -> Result<f64, StlError> {
        let needed = t + self.horizon();
        if needed > traj.horizon() {
            return Err(StlError::OutOfHorizon {
                t,
                needed,
                have: traj.horizon(),
            });
        }
        self.rho(traj, t)
    }

    // Recursion body; horizon already checked at the root, so indexing is safe.
    fn rho(&self, traj: &Trajectory, t: usize) -> Result<f64, StlError> {
        match self {
            StlFormula::True => Ok(f64::INFINITY),
            StlFormula::Pred { pred, .. } => pred.eval(traj.state(t)),
            StlFormula::Not(f) => Ok(-f.rho(traj, t)?),
            StlFormula::And(fs) => {
                let mut acc = f64::INFINITY;
                for f in fs {
                    acc = acc.min(f.rho(traj, t)?);
                }
                Ok(acc)
            }
            StlFormula::Or(fs) => {
                let mut acc = f64::NEG_INFINITY;
                for f in fs {
                    acc = acc.max(f.rho(traj, t)?);
                }
                Ok(acc)
            }
            StlFormula::Always(f, iv) => {
                let mut acc = f64::INFINITY;
                for dt in iv.steps() {
                    acc = acc.min(f.rho(traj, t + dt)?);
                }
                Ok(acc)
            }
            StlFormula::Eventually(f, iv) => {
                let mut acc = f64::NEG_INFINITY;
                for dt in iv.steps() {
                    acc = acc.max(f.rho(traj, t + dt)?);
                }
                Ok(acc)
            }
            StlFormula::Until(f1, f2, iv) => {
                // max over witness times t' of min(rho(f2, t'), min_{t''<=t'} rho(f1, t'')),
                // with the f1 prefix running from t up to and including t'.
                let mut best = f64::NEG_INFINITY;
                for dt in iv.steps() {
                    let tp = t + dt;
                    let mut cand = f2.rho(traj, tp)?;
                    for tpp in t..=tp {
                        cand = cand.min(f1.rho(traj, tpp)?);
                    }
                    best = best.max(cand);
                }
                Ok(best)
            }
        }
    }

    /// Boolean satisfaction `(x, t) |= phi`, with closed predicates
    /// (`h(x) >= 0` counts as satisfied).
    pub fn satisfies(&self, traj: &Trajectory, t: usize) -> Result<bool, StlError> {
        let needed = t + self.horizon();
        if needed > traj.horizon() {
            return Err(StlError::OutOfHorizon {
                t,
                needed,
                have: traj.horizon(),
            });
        }
        self.sat(traj, t)
    }

    fn sat(&self, traj: &Trajectory, t: usize) -> Result<bool, StlError> {
        match self {
            StlFormula::True => Ok(true),
            StlFormula::Pred { pred, .. } => Ok(pred.eval(traj.state(t))? >= 0.0),
            StlFormula::Not(f) => Ok(!f.sat(traj, t)?),
            StlFormula::And(fs) => {
                for f in fs {
                    if !f.sat(traj, t)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            StlFormula::Or(fs) => {
                for f in fs {
                    if f.sat(traj, t)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            StlFormula::Always(f, iv) => {
                for dt in iv.steps() {
                    if !f.sat(traj, t + dt)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            StlFormula::Eventually(f, iv) => {
                for dt in iv.steps() {
                    if f.sat(traj, t + dt)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            StlFormula::Until(f1, f2, iv) => {
                for dt in iv.steps() {
                    let tp = t + dt;
                    if f2.sat(traj, tp)? {
                        let mut prefix_ok = true;
                        for tpp in t..=tp {
                            if !f1.sat(traj, tpp)? {
                                prefix_ok = false;
                                break;
                            }
                        }
                        if prefix_ok {
                            return Ok(true);
                        }
                    }
                }
                Ok(false)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::stl::{LinearPredicate, StlFormula, Trajectory};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn traj1(values: &[f64]) -> Trajectory {
        Trajectory::new(values.iter().map(|v| vec![*v]).collect()).unwrap()
    }

    fn above(th: f64) -> StlFormula {
        StlFormula::unnamed_pred(LinearPredicate::new(vec![1.0], th).unwrap())
    }

    #[test]
    fn predicate_robustness_is_signed_margin() {
        // x >= 2 at x = 3.5 has margin 1.5; at x = 1 it is -1.
        let f = above(2.0);
        let tr = traj1(&[3.5, 1.0]);
        assert_eq!(f.robustness(&tr, 0).unwrap(), 1.5);
        assert_eq!(f.robustness(&tr, 1).unwrap(), -1.0);
    }

    #[test]
    fn always_takes_min_eventually_takes_max() {
        let f_g = StlFormula::always(above(0.0), 0, 3);
        let f_f = StlFormula::eventually(above(0.0), 0, 3);
        let tr = traj1(&[2.0, -1.0, 4.0, 0.5]);
        assert_eq!(f_g.robustness(&tr, 0).unwrap(), -1.0);
        assert_eq!(f_f.robustness(&tr, 0).unwrap(), 4.0);
    }

    #[test]
    fn until_worked_example() {
        // a = x >= 0, b = x >= 3, b reachable at step 2 with a holding up to
        // and including the witness. Hand evaluation:
        //   t'=0: min(b(0)=-2) = -2
        //   t'=1: min(b(1)=-1, a(0)=1, a(1)=2) = -1
        //   t'=2: min(b(2)=2,  a(0)=1, a(1)=2, a(2)=5) = 1
        // max = 1.
        let a = above(0.0);
        let b = above(3.0);
        let f = StlFormula::until(a, b, 0, 2);
        let tr = traj1(&[1.0, 2.0, 5.0, -7.0]);
        assert_eq!(f.robustness(&tr, 0).unwrap(), 1.0);
        assert!(f.satisfies(&tr, 0).unwrap());
    }

    #[test]
    fn until_fails_when_prefix_breaks_before_witness() {
        // b only holds at step 2, but a is violated at step 1.
        let a = above(0.0);
        let b = above(3.0);
        let f = StlFormula::until(a, b, 0, 2);
        let tr = traj1(&[1.0, -2.0, 5.0]);
        assert!(!f.satisfies(&tr, 0).unwrap());
        assert!(f.robustness(&tr, 0).unwrap() < 0.0);
    }

    #[test]
    fn evaluation_at_later_start_shifts_the_window() {
        let f = StlFormula::eventually(above(0.0), 0, 1);
        let tr = traj1(&[-1.0, -2.0, 3.0]);
        assert!(!f.satisfies(&tr, 0).unwrap());
        assert!(f.satisfies(&tr, 1).unwrap());
    }

    #[test]
    fn out_of_horizon_is_an_error() {
        let f = StlFormula::always(above(0.0), 0, 5);
        let tr = traj1(&[1.0, 1.0, 1.0]);
        assert!(f.robustness(&tr, 0).is_err());
        assert!(f.satisfies(&tr, 1).is_err());
        // Exactly enough steps is fine.
        let tr6 = traj1(&[1.0; 6]);
        assert!(f.robustness(&tr6, 0).is_ok());
    }

    #[test]
    fn true_has_infinite_robustness() {
        let tr = traj1(&[0.0]);
        assert_eq!(StlFormula::True.robustness(&tr, 0).unwrap(), f64::INFINITY);
        assert!(StlFormula::True.satisfies(&tr, 0).unwrap());
    }

    // Cross-check: sign of robustness agrees with Boolean satisfaction on
    // random formulas and random trajectories whenever robustness is nonzero,
    // and NNF rewriting changes neither.
    #[test]
    fn robustness_sign_matches_satisfaction_and_nnf_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..300 {
            let f = random_formula(&mut rng, 3);
            let t_max = f.horizon() + 2;
            let states: Vec<Vec<f64>> = (0..=t_max)
                .map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
                .collect();
            let tr = Trajectory::new(states).unwrap();
            let rho = f.robustness(&tr, 0).unwrap();
            let sat = f.satisfies(&tr, 0).unwrap();
            if rho != 0.0 {
                assert_eq!(rho > 0.0, sat, "case {case}: rho={rho}, formula {f:?}");
            }
            let nnf = f.to_nnf();
            assert!(nnf.is_nnf());
            let rho_nnf = nnf.robustness(&tr, 0).unwrap();
            // NNF only moves negations around; min/max semantics are exactly
            // dual under negation, so robustness is preserved bit-for-bit
            // except through the not-until expansion, where it is preserved
            // as a value but may differ in which branch attains it. Values
            // still must match.
            assert!(
                (rho - rho_nnf).abs() < 1e-12 || (rho.is_infinite() && rho_nnf.is_infinite()),
                "case {case}: rho={rho} vs nnf {rho_nnf} for {f:?}"
            );
        }
    }

    fn random_formula(rng: &mut ChaCha8Rng, depth: usize) -> StlFormula {
        let leaf = depth == 0;
        let choice = if leaf {
            rng.random_range(0..2)
        } else {
            rng.random_range(0..7)
        };
        match choice {
            0 | 1 => {
                let c0 = rng.random_range(-2.0..2.0_f64);
                let c1 = rng.random_range(-2.0..2.0_f64);
                let (c0, c1) = if c0 == 0.0 && c1 == 0.0 {
                    (1.0, 0.0)
                } else {
                    (c0, c1)
                };
                StlFormula::unnamed_pred(
                    LinearPredicate::new(vec![c0, c1], rng.random_range(-2.0..2.0)).unwrap(),
                )
            }
            2 => StlFormula::not(random_formula(rng, depth - 1)),
            3 => StlFormula::and(vec![
                random_formula(rng, depth - 1),
                random_formula(rng, depth - 1),
            ]),
            4 => StlFormula::or(vec![
                random_formula(rng, depth - 1),
                random_formula(rng, depth - 1),
            ]),
            5 => {
                let lo = rng.random_range(0..3);
                let hi = lo + rng.random_range(0..3);
                if rng.random_bool(0.5) {
                    StlFormula::always(random_formula(rng, depth - 1), lo, hi)
                } else {
                    StlFormula::eventually(random_formula(rng, depth - 1), lo, hi)
                }
            }
            _ => {
                let lo = rng.random_range(0..2);
                let hi = lo + rng.random_range(0..3);
                StlFormula::until(
                    random_formula(rng, depth - 1),
                    random_formula(rng, depth - 1),
                    lo,
                    hi,
                )
            }
        }
    }
}
