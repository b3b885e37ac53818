//! Discrete-time signal temporal logic: formula trees, horizon computation,
//! negative normal form, and Boolean/quantitative semantics.
//!
//! Formulas are evaluated over finite trajectories indexed `t = 0..=T`. Time
//! intervals are step indices, not real times. The quantitative semantics
//! ([`robustness`](StlFormula::robustness)) and the Boolean semantics
//! ([`satisfies`](StlFormula::satisfies)) are implemented as independent
//! recursions so either can serve as an oracle for the other.

mod parse;
mod semantics;

pub use parse::{format_formula, parse_formula, PredicateBindings};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StlError {
    #[error("predicate coefficient vector must not be empty or all zero")]
    DegeneratePredicate,
    #[error("time interval lower bound {lo} exceeds upper bound {hi}")]
    BadInterval { lo: usize, hi: usize },
    #[error("evaluation at t={t} needs steps up to {needed} but trajectory ends at {have}")]
    OutOfHorizon { t: usize, needed: usize, have: usize },
    #[error("state dimension mismatch: predicate expects {expected}, state has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("trajectory contains a non-finite entry at step {step}")]
    NonFiniteState { step: usize },
    #[error("formula parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Affine predicate `h(x) = coefficients . x - offset >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPredicate {
    pub coefficients: Vec<f64>,
    pub offset: f64,
}

impl LinearPredicate {
    pub fn new(coefficients: Vec<f64>, offset: f64) -> Result<Self, StlError> {
        if coefficients.is_empty() || coefficients.iter().all(|c| *c == 0.0) {
            return Err(StlError::DegeneratePredicate);
        }
        Ok(Self {
            coefficients,
            offset,
        })
    }

    /// Value of `h` at a single state.
    pub fn eval(&self, state: &[f64]) -> Result<f64, StlError> {
        if state.len() != self.coefficients.len() {
            return Err(StlError::DimensionMismatch {
                expected: self.coefficients.len(),
                got: state.len(),
            });
        }
        Ok(self
            .coefficients
            .iter()
            .zip(state)
            .map(|(c, x)| c * x)
            .sum::<f64>()
            - self.offset)
    }

    /// The closed complement `-h >= 0`. The shared boundary `h = 0` is kept in
    /// both half-spaces; callers that care keep predicate values away from 0.
    pub fn negated(&self) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| -c).collect(),
            offset: -self.offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }
}

/// Closed step-index interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub lo: usize,
    pub hi: usize,
}

impl TimeInterval {
    pub fn new(lo: usize, hi: usize) -> Result<Self, StlError> {
        if lo > hi {
            return Err(StlError::BadInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn steps(&self) -> impl Iterator<Item = usize> {
        self.lo..=self.hi
    }
}

/// DT-STL formula tree.
///
/// `And`/`Or` always carry at least two children; use the checked builders
/// below to maintain that. `Eventually` and `Always` are first-class nodes so
/// the MILP encoder can emit the direct disjunction/conjunction rows for them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StlFormula {
    True,
    Pred {
        /// Binding name used by the textual format; `None` prints inline.
        name: Option<String>,
        pred: LinearPredicate,
    },
    Not(Box<StlFormula>),
    And(Vec<StlFormula>),
    Or(Vec<StlFormula>),
    Until(Box<StlFormula>, Box<StlFormula>, TimeInterval),
    Eventually(Box<StlFormula>, TimeInterval),
    Always(Box<StlFormula>, TimeInterval),
}

impl StlFormula {
    pub fn pred(name: impl Into<String>, pred: LinearPredicate) -> Self {
        StlFormula::Pred {
            name: Some(name.into()),
            pred,
        }
    }

    pub fn unnamed_pred(pred: LinearPredicate) -> Self {
        StlFormula::Pred { name: None, pred }
    }

    /// Conjunction of two or more children.
    ///
    /// # Panics
    /// If fewer than two children are given.
    pub fn and(children: Vec<StlFormula>) -> Self {
        assert!(children.len() >= 2, "And needs at least two children");
        StlFormula::And(children)
    }

    /// Disjunction of two or more children.
    ///
    /// # Panics
    /// If fewer than two children are given.
    pub fn or(children: Vec<StlFormula>) -> Self {
        assert!(children.len() >= 2, "Or needs at least two children");
        StlFormula::Or(children)
    }

    pub fn not(child: StlFormula) -> Self {
        StlFormula::Not(Box::new(child))
    }

    pub fn eventually(child: StlFormula, lo: usize, hi: usize) -> Self {
        StlFormula::Eventually(Box::new(child), TimeInterval { lo, hi })
    }

    pub fn always(child: StlFormula, lo: usize, hi: usize) -> Self {
        StlFormula::Always(Box::new(child), TimeInterval { lo, hi })
    }

    pub fn until(lhs: StlFormula, rhs: StlFormula, lo: usize, hi: usize) -> Self {
        StlFormula::Until(Box::new(lhs), Box::new(rhs), TimeInterval { lo, hi })
    }

    /// Formula horizon `hrz`: the furthest step offset the formula inspects.
    ///
    /// Temporal operators add the upper end of their interval; negation keeps
    /// its child's horizon (a negated formula inspects exactly the same steps).
    pub fn horizon(&self) -> usize {
        match self {
            StlFormula::True => 0,
            StlFormula::Pred { .. } => 0,
            StlFormula::Not(f) => f.horizon(),
            StlFormula::And(fs) | StlFormula::Or(fs) => {
                fs.iter().map(|f| f.horizon()).max().unwrap_or(0)
            }
            StlFormula::Until(f1, f2, iv) => iv.hi + f1.horizon().max(f2.horizon()),
            StlFormula::Eventually(f, iv) | StlFormula::Always(f, iv) => iv.hi + f.horizon(),
        }
    }

    /// A formula is well-formed for horizon `T` when `hrz < T`, so evaluation
    /// at `t = 0` over a signal of length `T + 1` is unambiguous with a step
    /// to spare.
    pub fn well_formed(&self, t_horizon: usize) -> bool {
        self.horizon() < t_horizon
    }

    /// State dimension used by any predicate in the tree, if one exists.
    pub fn state_dim(&self) -> Option<usize> {
        match self {
            StlFormula::True => None,
            StlFormula::Pred { pred, .. } => Some(pred.dim()),
            StlFormula::Not(f) | StlFormula::Eventually(f, _) | StlFormula::Always(f, _) => {
                f.state_dim()
            }
            StlFormula::And(fs) | StlFormula::Or(fs) => fs.iter().find_map(|f| f.state_dim()),
            StlFormula::Until(f1, f2, _) => f1.state_dim().or_else(|| f2.state_dim()),
        }
    }

    pub fn is_nnf(&self) -> bool {
        match self {
            StlFormula::True | StlFormula::Pred { .. } => true,
            StlFormula::Not(_) => false,
            StlFormula::And(fs) | StlFormula::Or(fs) => fs.iter().all(|f| f.is_nnf()),
            StlFormula::Until(f1, f2, _) => f1.is_nnf() && f2.is_nnf(),
            StlFormula::Eventually(f, _) | StlFormula::Always(f, _) => f.is_nnf(),
        }
    }

    /// Negative normal form: no `Not` nodes remain.
    ///
    /// Negated predicates become their closed complement `-h >= 0`; the
    /// measure-zero overlap on the boundary `h = 0` is the price for keeping
    /// every predicate a closed half-space as the MILP rows require. A negated
    /// until is expanded through its witness times:
    /// `not (f1 U_[a,b] f2)  =  AND_k ( G_[k,k] not f2  OR  F_[0,k] not f1 )`.
    pub fn to_nnf(&self) -> StlFormula {
        let dim = self.state_dim().unwrap_or(1);
        self.nnf_pos(dim)
    }

    fn nnf_pos(&self, dim: usize) -> StlFormula {
        match self {
            StlFormula::True => StlFormula::True,
            StlFormula::Pred { .. } => self.clone(),
            StlFormula::Not(f) => f.nnf_neg(dim),
            StlFormula::And(fs) => StlFormula::And(fs.iter().map(|f| f.nnf_pos(dim)).collect()),
            StlFormula::Or(fs) => StlFormula::Or(fs.iter().map(|f| f.nnf_pos(dim)).collect()),
            StlFormula::Until(f1, f2, iv) => StlFormula::Until(
                Box::new(f1.nnf_pos(dim)),
                Box::new(f2.nnf_pos(dim)),
                *iv,
            ),
            StlFormula::Eventually(f, iv) => {
                StlFormula::Eventually(Box::new(f.nnf_pos(dim)), *iv)
            }
            StlFormula::Always(f, iv) => StlFormula::Always(Box::new(f.nnf_pos(dim)), *iv),
        }
    }

    fn nnf_neg(&self, dim: usize) -> StlFormula {
        match self {
            // not true is a contradiction; emitted as a pair of disjoint
            // closed half-spaces so the tree stays within the predicate
            // fragment (robustness is at most -1/2 everywhere).
            StlFormula::True => {
                let mut up = vec![0.0; dim.max(1)];
                up[0] = 1.0;
                let down = up.iter().map(|c| -c).collect::<Vec<_>>();
                StlFormula::And(vec![
                    StlFormula::Pred {
                        name: None,
                        pred: LinearPredicate {
                            coefficients: up,
                            offset: 1.0,
                        },
                    },
                    StlFormula::Pred {
                        name: None,
                        pred: LinearPredicate {
                            coefficients: down,
                            offset: 0.0,
                        },
                    },
                ])
            }
            StlFormula::Pred { pred, .. } => StlFormula::Pred {
                name: None,
                pred: pred.negated(),
            },
            StlFormula::Not(f) => f.nnf_pos(dim),
            StlFormula::And(fs) => StlFormula::Or(fs.iter().map(|f| f.nnf_neg(dim)).collect()),
            StlFormula::Or(fs) => StlFormula::And(fs.iter().map(|f| f.nnf_neg(dim)).collect()),
            StlFormula::Eventually(f, iv) => StlFormula::Always(Box::new(f.nnf_neg(dim)), *iv),
            StlFormula::Always(f, iv) => StlFormula::Eventually(Box::new(f.nnf_neg(dim)), *iv),
            StlFormula::Until(f1, f2, iv) => {
                let not_f1 = f1.nnf_neg(dim);
                let not_f2 = f2.nnf_neg(dim);
                let mut conjuncts = Vec::with_capacity(iv.hi - iv.lo + 1);
                for k in iv.lo..=iv.hi {
                    conjuncts.push(StlFormula::Or(vec![
                        StlFormula::Always(
                            Box::new(not_f2.clone()),
                            TimeInterval { lo: k, hi: k },
                        ),
                        StlFormula::Eventually(
                            Box::new(not_f1.clone()),
                            TimeInterval { lo: 0, hi: k },
                        ),
                    ]));
                }
                if conjuncts.len() == 1 {
                    conjuncts.pop().unwrap()
                } else {
                    StlFormula::And(conjuncts)
                }
            }
        }
    }
}

/// Finite trajectory `x_0 .. x_T` of fixed-dimension states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(states: Vec<Vec<f64>>) -> Result<Self, StlError> {
        for (step, s) in states.iter().enumerate() {
            if s.iter().any(|v| !v.is_finite()) {
                return Err(StlError::NonFiniteState { step });
            }
        }
        Ok(Self { states })
    }

    /// Final step index `T` (states run `0..=T`).
    pub fn horizon(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t]
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(coeffs: Vec<f64>, offset: f64) -> LinearPredicate {
        LinearPredicate::new(coeffs, offset).unwrap()
    }

    #[test]
    fn horizon_of_true_and_predicate_is_zero() {
        assert_eq!(StlFormula::True.horizon(), 0);
        let pred = StlFormula::unnamed_pred(p(vec![1.0], 0.0));
        assert_eq!(pred.horizon(), 0);
    }

    #[test]
    fn horizon_of_nested_temporal_adds_interval_tops() {
        // G_[2,6](F_[0,3] p) has horizon 6 + 3 = 9.
        let pred = StlFormula::unnamed_pred(p(vec![1.0], 0.0));
        let f = StlFormula::always(StlFormula::eventually(pred, 0, 3), 2, 6);
        assert_eq!(f.horizon(), 9);
    }

    #[test]
    fn horizon_of_until_uses_interval_top_plus_max_child() {
        let a = StlFormula::unnamed_pred(p(vec![1.0], 0.0));
        let b = StlFormula::eventually(StlFormula::unnamed_pred(p(vec![1.0], 1.0)), 0, 4);
        let f = StlFormula::until(a, b, 1, 3);
        assert_eq!(f.horizon(), 3 + 4);
    }

    #[test]
    fn well_formed_is_strict() {
        let pred = StlFormula::unnamed_pred(p(vec![1.0], 0.0));
        let f = StlFormula::eventually(pred.clone(), 0, 5);
        assert!(f.well_formed(30));
        let g = StlFormula::eventually(pred, 0, 30);
        assert!(!g.well_formed(30));
        assert!(!StlFormula::True.well_formed(0));
    }

    #[test]
    fn nnf_applies_de_morgan_and_pushes_into_predicates() {
        let a = StlFormula::pred("a", p(vec![1.0], 1.0));
        let b = StlFormula::pred("b", p(vec![-1.0], 0.0));
        let f = StlFormula::not(StlFormula::and(vec![a, b]));
        let nnf = f.to_nnf();
        match &nnf {
            StlFormula::Or(children) => {
                assert_eq!(children.len(), 2);
                for c in children {
                    assert!(matches!(c, StlFormula::Pred { name: None, .. }));
                }
            }
            other => panic!("expected Or, got {other:?}"),
        }
        assert!(nnf.is_nnf());
    }

    #[test]
    fn nnf_temporal_duality() {
        let a = StlFormula::pred("a", p(vec![1.0], 1.0));
        let f = StlFormula::not(StlFormula::eventually(a, 1, 4));
        match f.to_nnf() {
            StlFormula::Always(inner, iv) => {
                assert_eq!((iv.lo, iv.hi), (1, 4));
                assert!(matches!(*inner, StlFormula::Pred { .. }));
            }
            other => panic!("expected Always, got {other:?}"),
        }
    }

    #[test]
    fn nnf_of_nnf_input_is_identity() {
        let a = StlFormula::pred("a", p(vec![1.0, 0.0], 1.0));
        let b = StlFormula::pred("b", p(vec![0.0, 1.0], 2.0));
        let f = StlFormula::and(vec![
            StlFormula::always(a.clone(), 0, 3),
            StlFormula::until(a, b, 0, 2),
        ]);
        assert_eq!(f.to_nnf(), f);
    }

    #[test]
    fn nnf_preserves_horizon() {
        let a = StlFormula::pred("a", p(vec![1.0], 1.0));
        let b = StlFormula::pred("b", p(vec![1.0], 2.0));
        let f = StlFormula::not(StlFormula::until(
            StlFormula::not(a),
            StlFormula::eventually(b, 0, 2),
            1,
            5,
        ));
        assert_eq!(f.to_nnf().horizon(), f.horizon());
        assert!(f.to_nnf().is_nnf());
    }

    #[test]
    fn degenerate_predicate_rejected() {
        assert!(LinearPredicate::new(vec![], 0.0).is_err());
        assert!(LinearPredicate::new(vec![0.0, 0.0], 1.0).is_err());
        assert!(LinearPredicate::new(vec![0.0, 0.1], 1.0).is_ok());
    }

    #[test]
    fn trajectory_rejects_non_finite() {
        assert!(Trajectory::new(vec![vec![0.0], vec![f64::NAN]]).is_err());
        assert!(Trajectory::new(vec![vec![0.0], vec![1.0]]).is_ok());
    }
}
