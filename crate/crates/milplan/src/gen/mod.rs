//! Reproducible generators for the two planning benchmark families:
//! multi-target temporal-logic navigation and chance-constrained timed
//! reach-avoid.
//!
//! Both families drive a planar double integrator with state
//! `(px, vx, py, vy)` and acceleration input `(ax, ay)` at unit timestep.
//! Each generator call owns a stream cipher PRNG seeded from its params and
//! draws in a fixed order, so equal params yield byte-identical problems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encode::{
    BoxBounds, CppProblem, EncodeError, LinearDynamics, PlanningProblem, SampleSet,
};
use crate::stl::{LinearPredicate, StlFormula};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid benchmark parameters: {0}")]
    Invalid(String),
    #[error("gave up placing a target after {attempts} rejection attempts")]
    PlacementFailed { attempts: usize },
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

/// Total rejection budget across all target placements in one call.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Per-step disturbance scale for the chance-constrained family: each state
/// coordinate is perturbed by independent N(0, sigma^2) noise, sigma^2 = 0.01.
pub const NOISE_SIGMA: f64 = 0.1;

const V_MAX: f64 = 5.0;
const A_MAX: f64 = 2.0;

/// Uniform position jitter applied to each chance-constrained region.
const CPP_JITTER: f64 = 0.25;

/// Sample trajectories drift far from the nominal plan once velocity noise
/// integrates into position (standard deviation ~5 at step 20), so sample
/// states live in the workspace inflated by this envelope. A workspace-sized
/// box would render most draws infeasible through the hard box rows.
const CPP_POS_MARGIN: f64 = 30.0;
const CPP_VEL_BOX: f64 = 8.0;

/// Unit-timestep double integrator per planar axis.
fn double_integrator() -> LinearDynamics {
    #[rustfmt::skip]
    let a = vec![
        1.0, 1.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 1.0,
        0.0, 0.0, 0.0, 1.0,
    ];
    #[rustfmt::skip]
    let b = vec![
        0.5, 0.0,
        1.0, 0.0,
        0.0, 0.5,
        0.0, 1.0,
    ];
    LinearDynamics::new(4, 2, a, b).unwrap()
}

/// Axis-aligned rectangle in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Rect {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self, GenError> {
        let r = Rect { x_lo, x_hi, y_lo, y_hi };
        r.check()?;
        Ok(r)
    }

    fn check(&self) -> Result<(), GenError> {
        let vals = [self.x_lo, self.x_hi, self.y_lo, self.y_hi];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(GenError::Invalid("rectangle has a non-finite corner".into()));
        }
        if self.x_lo >= self.x_hi || self.y_lo >= self.y_hi {
            return Err(GenError::Invalid(format!(
                "degenerate rectangle [{}, {}] x [{}, {}]",
                self.x_lo, self.x_hi, self.y_lo, self.y_hi
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi))
    }

    /// Closed containment of `inner` within `self`.
    pub fn contains_rect(&self, inner: &Rect) -> bool {
        self.x_lo <= inner.x_lo
            && inner.x_hi <= self.x_hi
            && self.y_lo <= inner.y_lo
            && inner.y_hi <= self.y_hi
    }

    pub fn contains_point(&self, px: f64, py: f64) -> bool {
        self.x_lo <= px && px <= self.x_hi && self.y_lo <= py && py <= self.y_hi
    }

    pub fn shifted(&self, dx: f64, dy: f64) -> Rect {
        Rect {
            x_lo: self.x_lo + dx,
            x_hi: self.x_hi + dx,
            y_lo: self.y_lo + dy,
            y_hi: self.y_hi + dy,
        }
    }

    fn grown(&self, margin: f64) -> Rect {
        Rect {
            x_lo: self.x_lo - margin,
            x_hi: self.x_hi + margin,
            y_lo: self.y_lo - margin,
            y_hi: self.y_hi + margin,
        }
    }

    /// "Position inside the rectangle" as a conjunction of four closed
    /// half-planes over the state `(px, vx, py, vy)`.
    pub fn inside(&self) -> StlFormula {
        StlFormula::and(vec![
            half_plane(1.0, 0.0, self.x_lo),
            half_plane(-1.0, 0.0, -self.x_hi),
            half_plane(0.0, 1.0, self.y_lo),
            half_plane(0.0, -1.0, -self.y_hi),
        ])
    }

    /// "Position outside the rectangle" as a disjunction of the four
    /// complementary half-planes (closed, so the boundary counts as outside).
    pub fn outside(&self) -> StlFormula {
        StlFormula::or(vec![
            half_plane(-1.0, 0.0, -self.x_lo),
            half_plane(1.0, 0.0, self.x_hi),
            half_plane(0.0, -1.0, -self.y_lo),
            half_plane(0.0, 1.0, self.y_hi),
        ])
    }
}

/// `cx * px + cy * py >= offset` over the 4-dim state.
fn half_plane(cx: f64, cy: f64, offset: f64) -> StlFormula {
    StlFormula::unnamed_pred(LinearPredicate::new(vec![cx, 0.0, cy, 0.0], offset).unwrap())
}

/// Parameters of the multi-target family: visit one target of each of
/// `num_groups` colors within the spec horizon while staying clear of every
/// obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StlBenchParams {
    pub num_obstacles: usize,
    pub num_groups: usize,
    pub targets_per_group: usize,
    /// Spec horizon `T`; trajectories run one step longer so the formula's
    /// lookahead stays strictly inside the trajectory.
    pub horizon: usize,
    pub workspace: Rect,
    /// Rectangle side lengths are drawn uniformly from this range.
    pub side_range: (f64, f64),
    pub seed: u64,
}

impl StlBenchParams {
    pub fn new(
        num_obstacles: usize,
        num_groups: usize,
        targets_per_group: usize,
        horizon: usize,
        seed: u64,
    ) -> Self {
        StlBenchParams {
            num_obstacles,
            num_groups,
            targets_per_group,
            horizon,
            workspace: Rect::new(0.0, 10.0, 0.0, 10.0).unwrap(),
            side_range: (0.8, 2.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.num_groups == 0 || self.targets_per_group == 0 {
            return Err(GenError::Invalid(
                "need at least one target group with at least one target".into(),
            ));
        }
        if self.horizon == 0 {
            return Err(GenError::Invalid("spec horizon must be at least 1".into()));
        }
        self.workspace.check()?;
        if self.workspace.width() < 1.0 || self.workspace.height() < 1.0 {
            return Err(GenError::Invalid(
                "workspace must be at least 1 x 1 to hold the start strip".into(),
            ));
        }
        let (lo, hi) = self.side_range;
        if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || hi < lo {
            return Err(GenError::Invalid(format!(
                "rectangle side range [{lo}, {hi}] must satisfy 0 < lo <= hi"
            )));
        }
        if hi > self.workspace.width().min(self.workspace.height()) {
            return Err(GenError::Invalid(
                "largest rectangle side exceeds the workspace".into(),
            ));
        }
        Ok(())
    }
}

/// Uniform rectangle with side lengths from `side_range`, fully inside `ws`.
fn sample_rect(rng: &mut ChaCha8Rng, ws: &Rect, side_range: (f64, f64)) -> Rect {
    let w = rng.random_range(side_range.0..=side_range.1);
    let h = rng.random_range(side_range.0..=side_range.1);
    let x_lo = rng.random_range(ws.x_lo..=ws.x_hi - w);
    let y_lo = rng.random_range(ws.y_lo..=ws.y_hi - h);
    Rect {
        x_lo,
        x_hi: x_lo + w,
        y_lo,
        y_hi: y_lo + h,
    }
}

fn and_all(mut fs: Vec<StlFormula>) -> StlFormula {
    if fs.len() == 1 {
        fs.pop().unwrap()
    } else {
        StlFormula::and(fs)
    }
}

fn or_all(mut fs: Vec<StlFormula>) -> StlFormula {
    if fs.len() == 1 {
        fs.pop().unwrap()
    } else {
        StlFormula::or(fs)
    }
}

/// Generate a multi-target navigation problem: reach at least one target of
/// each group within `[0, T]` and always avoid every obstacle.
///
/// Obstacles are placed first, then targets group by group; a target draw is
/// rejected while it lands fully inside some obstacle. The start state sits in
/// a strip along the bottom workspace edge with zero velocity.
pub fn gen_stl_multi_target(params: &StlBenchParams) -> Result<PlanningProblem, GenError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let ws = &params.workspace;

    let obstacles: Vec<Rect> = (0..params.num_obstacles)
        .map(|_| sample_rect(&mut rng, ws, params.side_range))
        .collect();

    let mut attempts = 0usize;
    let mut groups: Vec<Vec<Rect>> = Vec::with_capacity(params.num_groups);
    for _ in 0..params.num_groups {
        let mut group = Vec::with_capacity(params.targets_per_group);
        for _ in 0..params.targets_per_group {
            let target = loop {
                attempts += 1;
                if attempts > MAX_PLACEMENT_ATTEMPTS {
                    return Err(GenError::PlacementFailed {
                        attempts: MAX_PLACEMENT_ATTEMPTS,
                    });
                }
                let candidate = sample_rect(&mut rng, ws, params.side_range);
                if !obstacles.iter().any(|o| o.contains_rect(&candidate)) {
                    break candidate;
                }
            };
            group.push(target);
        }
        groups.push(group);
    }

    let px = rng.random_range(ws.x_lo + 0.5..=ws.x_hi - 0.5);
    let py = rng.random_range(ws.y_lo + 0.2..=ws.y_lo + 0.8);

    let t = params.horizon;
    let mut conjuncts: Vec<StlFormula> = groups
        .iter()
        .map(|group| {
            or_all(
                group
                    .iter()
                    .map(|r| StlFormula::eventually(r.inside(), 0, t))
                    .collect(),
            )
        })
        .collect();
    if !obstacles.is_empty() {
        let clear = and_all(obstacles.iter().map(Rect::outside).collect());
        conjuncts.push(StlFormula::always(clear, 0, t));
    }
    let spec = and_all(conjuncts);

    let problem = PlanningProblem {
        dynamics: double_integrator(),
        x0: vec![px, 0.0, py, 0.0],
        horizon: t + 1,
        spec,
        state_bounds: BoxBounds::new(
            vec![ws.x_lo, -V_MAX, ws.y_lo, -V_MAX],
            vec![ws.x_hi, V_MAX, ws.y_hi, V_MAX],
        )
        .map_err(|e| GenError::Invalid(e.to_string()))?,
        input_bounds: BoxBounds::new(vec![-A_MAX, -A_MAX], vec![A_MAX, A_MAX])
            .map_err(|e| GenError::Invalid(e.to_string()))?,
    };
    problem.validate()?;
    Ok(problem)
}

/// Parameters of the chance-constrained timed reach-avoid family: visit goal
/// one and then goal two inside nested time windows while avoiding the
/// obstacle over the first 15 steps, with probability at least `1 - delta`.
///
/// The three region rectangles are the base layout; generation shifts each by
/// an independent uniform jitter before building the spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CppBenchParams {
    pub num_samples: usize,
    pub horizon: usize,
    pub delta: f64,
    pub goal1: Rect,
    pub goal2: Rect,
    pub obstacle: Rect,
    pub seed: u64,
}

impl CppBenchParams {
    pub fn new(num_samples: usize, horizon: usize, seed: u64) -> Self {
        CppBenchParams {
            num_samples,
            horizon,
            delta: 0.2,
            goal1: Rect::new(3.2, 4.8, 3.2, 4.8).unwrap(),
            goal2: Rect::new(6.8, 8.4, 6.8, 8.4).unwrap(),
            obstacle: Rect::new(5.4, 6.6, 4.6, 6.0).unwrap(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.num_samples == 0 {
            return Err(GenError::Invalid("need at least one sample trajectory".into()));
        }
        // The spec looks 15 steps ahead, and the trajectory must strictly
        // cover that lookahead.
        if self.horizon < 16 {
            return Err(GenError::Invalid(format!(
                "horizon {} too short: the spec inspects steps up to 15",
                self.horizon
            )));
        }
        if !self.delta.is_finite() || self.delta <= 0.0 || self.delta >= 1.0 {
            return Err(GenError::Invalid(format!(
                "violation budget delta = {} must lie strictly in (0, 1)",
                self.delta
            )));
        }
        let ws = cpp_workspace();
        for (name, region) in [
            ("goal1", &self.goal1),
            ("goal2", &self.goal2),
            ("obstacle", &self.obstacle),
        ] {
            region.check()?;
            if !ws.contains_rect(&region.grown(CPP_JITTER)) {
                return Err(GenError::Invalid(format!(
                    "{name} region must fit in the workspace with jitter room"
                )));
            }
        }
        Ok(())
    }
}

fn cpp_workspace() -> Rect {
    Rect {
        x_lo: 0.0,
        x_hi: 10.0,
        y_lo: 0.0,
        y_hi: 10.0,
    }
}

/// Draw `k` disturbance trajectories of `horizon + 1` steps, each step a
/// `dim`-vector of independent N(0, sigma^2) entries via the Box-Muller
/// transform.
pub fn gaussian_disturbances(
    rng: &mut impl Rng,
    k: usize,
    horizon: usize,
    dim: usize,
    sigma: f64,
) -> Vec<Vec<Vec<f64>>> {
    (0..k)
        .map(|_| {
            (0..=horizon)
                .map(|_| {
                    let mut w = Vec::with_capacity(dim);
                    while w.len() < dim {
                        let (a, b) = standard_normal_pair(rng);
                        w.push(sigma * a);
                        if w.len() < dim {
                            w.push(sigma * b);
                        }
                    }
                    w
                })
                .collect()
        })
        .collect()
}

fn standard_normal_pair(rng: &mut impl Rng) -> (f64, f64) {
    // 1 - u keeps the log argument in (0, 1].
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Generate a chance-constrained timed reach-avoid problem:
/// `F_[2,6](G1 and F_[3,7] G2) and G_[0,15](not Obs)` under per-step Gaussian
/// state noise, enforced on at least a `1 - delta` quantile of the sample
/// trajectories.
pub fn gen_cpp_reach_avoid(params: &CppBenchParams) -> Result<CppProblem, GenError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut jittered = |r: &Rect| {
        let dx = rng.random_range(-CPP_JITTER..=CPP_JITTER);
        let dy = rng.random_range(-CPP_JITTER..=CPP_JITTER);
        r.shifted(dx, dy)
    };
    let goal1 = jittered(&params.goal1);
    let goal2 = jittered(&params.goal2);
    let obstacle = jittered(&params.obstacle);

    let px = rng.random_range(0.5..=2.0);
    let py = rng.random_range(0.5..=1.5);

    let trajectories =
        gaussian_disturbances(&mut rng, params.num_samples, params.horizon, 4, NOISE_SIGMA);

    let spec = StlFormula::and(vec![
        StlFormula::eventually(
            StlFormula::and(vec![
                goal1.inside(),
                StlFormula::eventually(goal2.inside(), 3, 7),
            ]),
            2,
            6,
        ),
        StlFormula::always(obstacle.outside(), 0, 15),
    ]);

    let ws = cpp_workspace();
    let problem = CppProblem {
        dynamics: double_integrator(),
        x0: vec![px, 0.0, py, 0.0],
        horizon: params.horizon,
        spec,
        delta: params.delta,
        samples: SampleSet {
            trajectories,
            seed: params.seed,
            sigma: NOISE_SIGMA,
        },
        state_bounds: BoxBounds::new(
            vec![ws.x_lo - CPP_POS_MARGIN, -CPP_VEL_BOX, ws.y_lo - CPP_POS_MARGIN, -CPP_VEL_BOX],
            vec![ws.x_hi + CPP_POS_MARGIN, CPP_VEL_BOX, ws.y_hi + CPP_POS_MARGIN, CPP_VEL_BOX],
        )
        .map_err(|e| GenError::Invalid(e.to_string()))?,
        input_bounds: BoxBounds::new(vec![-A_MAX, -A_MAX], vec![A_MAX, A_MAX])
            .map_err(|e| GenError::Invalid(e.to_string()))?,
    };
    problem.validate()?;
    Ok(problem)
}
