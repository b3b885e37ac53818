//! Graph attention network for branching and configuration guidance.
//!
//! The model reads the bipartite variable/constraint graph of a MILP and
//! produces either a per-variable score in (0,1) (`BackdoorScore` mode) or a
//! fixed-width configuration vector (`ConfigLogits` mode). The architecture
//! is deliberately small and fixed:
//!
//! * input projections lift variable, constraint, and edge features into an
//!   `L`-dimensional space (`L` divisible by the head count `H`);
//! * round 1 updates constraint embeddings by multi-head attention over
//!   incident variable messages;
//! * round 2 updates variable embeddings by a second set of heads over the
//!   refreshed constraint embeddings;
//! * a two-layer head maps embeddings through a sigmoid — applied per
//!   variable node in `BackdoorScore` mode, or to the mean-pooled
//!   `[mean(V) ‖ mean(C)]` vector in `ConfigLogits` mode.
//!
//! Attention scores use the two-layer form `a · leaky_relu(W · [h_dst ‖
//! h_src ‖ h_edge])`. Nodes with an empty neighborhood receive a single
//! self-message (their own embedding, with a zero-feature edge). There are
//! exactly two rounds and no residual connections or normalization layers.
//!
//! Everything runs on plain `f64` matrices with a recording tape for
//! gradients; see [`tape`]. Training uses Adam with hinge ranking loss or an
//! InfoNCE contrastive loss.

pub mod tape;


use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bnb::config::ONE_HOT_DIM;
use crate::graph::{BipartiteGraph, CON_FEATURES, SCHEMA_VERSION, VAR_FEATURES};
use tape::{sigmoid, Matrix, Tape, Tensor};

/// Negative slope of the attention nonlinearity.
pub const LEAKY_SLOPE: f64 = 0.2;
/// Version stamp written into every checkpoint.
pub const MODEL_SCHEMA_VERSION: u32 = 1;
/// Default hinge margin for the ranking loss.
pub const DEFAULT_MARGIN: f64 = 0.1;
/// Default temperature for the contrastive loss.
pub const DEFAULT_TAU: f64 = 0.1;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("model shape error: {0}")]
    Shape(String),
    #[error("graph schema {found} does not match expected {expected}")]
    Schema { found: u32, expected: u32 },
    #[error("model is in {found:?} mode but {needed:?} was required")]
    WrongMode { found: TaskMode, needed: TaskMode },
    #[error("candidate set must not be empty")]
    EmptyCandidates,
    #[error("variable {0} is not integer-restricted")]
    NotInteger(usize),
    #[error("variable index {index} out of range for {n} variables")]
    BadIndex { index: usize, n: usize },
    #[error("invalid training data: {0}")]
    BadData(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("gradient contains non-finite entries")]
    BadGradient,
    #[error("invalid hyperparameters: {0}")]
    BadOptions(String),
    #[error("checkpoint parse error: {0}")]
    Checkpoint(String),
}

/// What the output head predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskMode {
    /// One score in (0,1) per variable node; candidate sets are scored by
    /// the mean over their members, higher is better.
    BackdoorScore,
    /// One pooled vector of width [`ONE_HOT_DIM`] per graph.
    ConfigLogits,
}

/// A dense affine map `x · w + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Matrix,
    pub b: Matrix,
}

/// Per-head attention parameters for one message-passing round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRound {
    /// One `3L × (L/H)` mixing matrix per head.
    pub w: Vec<Matrix>,
    /// One `(L/H) × 1` scoring vector per head.
    pub a: Vec<Matrix>,
}

/// Two-layer output head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatModel {
    pub schema_version: u32,
    pub mode: TaskMode,
    /// Embedding width `L`.
    pub width: usize,
    /// Head count `H`; must divide `width`.
    pub heads: usize,
    /// Seed the parameters were initialized from.
    pub seed: u64,
    pub proj_v: Linear,
    pub proj_c: Linear,
    pub proj_e: Linear,
    pub round1: AttentionRound,
    pub round2: AttentionRound,
    pub head: Mlp,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-s..s)).collect();
    Matrix::from_vec(rows, cols, data)
}

fn linear_init(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Linear {
    Linear {
        w: xavier(rng, rows, cols),
        b: Matrix::zeros(1, cols),
    }
}

impl GatModel {
    /// Fresh model with Xavier-uniform weights drawn from `seed`.
    pub fn new(mode: TaskMode, width: usize, heads: usize, seed: u64) -> Result<Self, NeuralError> {
        if width == 0 || heads == 0 || width % heads != 0 {
            return Err(NeuralError::Shape(format!(
                "width {width} must be a positive multiple of head count {heads}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = width / heads;
        let mk_round = |rng: &mut ChaCha8Rng| AttentionRound {
            w: (0..heads).map(|_| xavier(rng, 3 * width, d)).collect(),
            a: (0..heads).map(|_| xavier(rng, d, 1)).collect(),
        };
        let (head_in, head_out) = match mode {
            TaskMode::BackdoorScore => (width, 1),
            TaskMode::ConfigLogits => (2 * width, ONE_HOT_DIM),
        };
        let model = GatModel {
            schema_version: MODEL_SCHEMA_VERSION,
            mode,
            width,
            heads,
            seed,
            proj_v: linear_init(&mut rng, VAR_FEATURES + 1, width),
            proj_c: linear_init(&mut rng, CON_FEATURES, width),
            proj_e: linear_init(&mut rng, 1, width),
            round1: mk_round(&mut rng),
            round2: mk_round(&mut rng),
            head: Mlp {
                w1: xavier(&mut rng, head_in, width),
                b1: Matrix::zeros(1, width),
                w2: xavier(&mut rng, width, head_out),
                b2: Matrix::zeros(1, head_out),
            },
        };
        model.validate()?;
        Ok(model)
    }

    /// All parameter tensors in a fixed order (shared with [`Gradients`] and
    /// the Adam moment vectors).
    pub fn params(&self) -> Vec<&Matrix> {
        let mut p = vec![
            &self.proj_v.w,
            &self.proj_v.b,
            &self.proj_c.w,
            &self.proj_c.b,
            &self.proj_e.w,
            &self.proj_e.b,
        ];
        for h in 0..self.heads {
            p.push(&self.round1.w[h]);
            p.push(&self.round1.a[h]);
        }
        for h in 0..self.heads {
            p.push(&self.round2.w[h]);
            p.push(&self.round2.a[h]);
        }
        p.push(&self.head.w1);
        p.push(&self.head.b1);
        p.push(&self.head.w2);
        p.push(&self.head.b2);
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut p: Vec<&mut Matrix> = vec![
            &mut self.proj_v.w,
            &mut self.proj_v.b,
            &mut self.proj_c.w,
            &mut self.proj_c.b,
            &mut self.proj_e.w,
            &mut self.proj_e.b,
        ];
        for pair in self.round1.w.iter_mut().zip(self.round1.a.iter_mut()) {
            p.push(pair.0);
            p.push(pair.1);
        }
        for pair in self.round2.w.iter_mut().zip(self.round2.a.iter_mut()) {
            p.push(pair.0);
            p.push(pair.1);
        }
        p.push(&mut self.head.w1);
        p.push(&mut self.head.b1);
        p.push(&mut self.head.w2);
        p.push(&mut self.head.b2);
        p
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|m| m.data.len()).sum()
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(NeuralError::Checkpoint(format!(
                "unsupported model schema {}",
                self.schema_version
            )));
        }
        let (l, h) = (self.width, self.heads);
        if l == 0 || h == 0 || l % h != 0 {
            return Err(NeuralError::Shape(format!(
                "width {l} must be a positive multiple of head count {h}"
            )));
        }
        let d = l / h;
        let expect = |m: &Matrix, rows: usize, cols: usize, what: &str| {
            if (m.rows, m.cols) != (rows, cols) {
                return Err(NeuralError::Shape(format!(
                    "{what} has shape {}x{}, expected {rows}x{cols}",
                    m.rows, m.cols
                )));
            }
            Ok(())
        };
        expect(&self.proj_v.w, VAR_FEATURES + 1, l, "variable projection")?;
        expect(&self.proj_v.b, 1, l, "variable projection bias")?;
        expect(&self.proj_c.w, CON_FEATURES, l, "constraint projection")?;
        expect(&self.proj_c.b, 1, l, "constraint projection bias")?;
        expect(&self.proj_e.w, 1, l, "edge projection")?;
        expect(&self.proj_e.b, 1, l, "edge projection bias")?;
        for (round, name) in [(&self.round1, "round 1"), (&self.round2, "round 2")] {
            if round.w.len() != h || round.a.len() != h {
                return Err(NeuralError::Shape(format!("{name} must have {h} heads")));
            }
            for head in 0..h {
                expect(&round.w[head], 3 * l, d, &format!("{name} head {head} W"))?;
                expect(&round.a[head], d, 1, &format!("{name} head {head} a"))?;
            }
        }
        let (head_in, head_out) = match self.mode {
            TaskMode::BackdoorScore => (l, 1),
            TaskMode::ConfigLogits => (2 * l, ONE_HOT_DIM),
        };
        expect(&self.head.w1, head_in, l, "head layer 1")?;
        expect(&self.head.b1, 1, l, "head layer 1 bias")?;
        expect(&self.head.w2, l, head_out, "head layer 2")?;
        expect(&self.head.b2, 1, head_out, "head layer 2 bias")?;
        for m in self.params() {
            if !m.is_finite() {
                return Err(NeuralError::Shape("non-finite parameter".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, NeuralError> {
        let model: GatModel =
            serde_json::from_str(text).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    /// Run the network. Returns per-variable scores in `BackdoorScore` mode
    /// and the pooled configuration vector in `ConfigLogits` mode.
    pub fn forward(&self, graph: &BipartiteGraph) -> Result<ForwardOutput, NeuralError> {
        let pass = self.forward_pass(graph)?;
        let out = pass.output_matrix();
        Ok(match self.mode {
            TaskMode::BackdoorScore => ForwardOutput::VariableScores(out.data.clone()),
            TaskMode::ConfigLogits => ForwardOutput::ConfigVector(out.data.clone()),
        })
    }

    /// Run the network keeping the recording tape, so gradients can be pulled
    /// out with [`ForwardPass::backward`].
    pub fn forward_pass(&self, graph: &BipartiteGraph) -> Result<ForwardPass, NeuralError> {
        self.validate()?;
        if graph.schema_version != SCHEMA_VERSION {
            return Err(NeuralError::Schema {
                found: graph.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        let n = graph.var_features.len();
        let m = graph.con_features.len();
        if n == 0 {
            return Err(NeuralError::Shape("graph has no variable nodes".into()));
        }
        if self.mode == TaskMode::ConfigLogits && m == 0 {
            return Err(NeuralError::Shape(
                "configuration mode needs at least one constraint node".into(),
            ));
        }

        let mut tape = Tape::new();
        let pl: Vec<Tensor> = self
            .params()
            .into_iter()
            .map(|p| tape.leaf(p.clone()))
            .collect();
        let heads = self.heads;
        let r1_base = 6;
        let r2_base = 6 + 2 * heads;
        let head_base = 6 + 4 * heads;

        // Input matrices. Variables carry their 15 features plus the
        // candidate-membership column; edges carry the single coefficient
        // feature, padded with zero-feature rows for self-messages.
        let mut v_in = Matrix::zeros(n, VAR_FEATURES + 1);
        for j in 0..n {
            for (k, &f) in graph.var_features[j].iter().enumerate() {
                v_in.set(j, k, f);
            }
            v_in.set(j, VAR_FEATURES, graph.membership[j]);
        }
        let mut c_in = Matrix::zeros(m, CON_FEATURES);
        for i in 0..m {
            for (k, &f) in graph.con_features[i].iter().enumerate() {
                c_in.set(i, k, f);
            }
        }

        let ne = graph.edges.len();
        let mut con_has = vec![false; m];
        let mut var_has = vec![false; n];
        for e in &graph.edges {
            con_has[e.con] = true;
            var_has[e.var] = true;
        }
        let lonely_cons: Vec<usize> = (0..m).filter(|&i| !con_has[i]).collect();
        let lonely_vars: Vec<usize> = (0..n).filter(|&j| !var_has[j]).collect();

        let mut e_in = Matrix::zeros(ne + lonely_cons.len() + lonely_vars.len(), 1);
        for (k, e) in graph.edges.iter().enumerate() {
            e_in.set(k, 0, e.weight);
        }

        let v_leaf = tape.leaf(v_in);
        let c_leaf = tape.leaf(c_in);
        let e_leaf = tape.leaf(e_in);

        // Input projections.
        let hv = {
            let t = tape.matmul(v_leaf, pl[0]);
            tape.add_row(t, pl[1])
        };
        let hc = {
            let t = tape.matmul(c_leaf, pl[2]);
            tape.add_row(t, pl[3])
        };
        let he = {
            let t = tape.matmul(e_leaf, pl[4]);
            tape.add_row(t, pl[5])
        };

        // Round 1: constraints attend over incident variables. Sources are
        // gathered from [H_v ; H_c] so self-messages can point at the
        // constraint's own embedding.
        let all1 = tape.concat_rows(&[hv, hc]);
        let mut dst1 = Vec::with_capacity(ne + lonely_cons.len());
        let mut src1 = Vec::with_capacity(dst1.capacity());
        let mut erow1 = Vec::with_capacity(dst1.capacity());
        for (k, e) in graph.edges.iter().enumerate() {
            dst1.push(e.con);
            src1.push(e.var);
            erow1.push(k);
        }
        for (idx, &i) in lonely_cons.iter().enumerate() {
            dst1.push(i);
            src1.push(n + i);
            erow1.push(ne + idx);
        }
        let c2 = self.attention(
            &mut tape,
            &pl[r1_base..r2_base],
            hc,
            all1,
            he,
            &dst1,
            &src1,
            &erow1,
            m,
        );

        // Round 2: variables attend over the refreshed constraints.
        let all2 = tape.concat_rows(&[hv, c2]);
        let mut dst2 = Vec::with_capacity(ne + lonely_vars.len());
        let mut src2 = Vec::with_capacity(dst2.capacity());
        let mut erow2 = Vec::with_capacity(dst2.capacity());
        for (k, e) in graph.edges.iter().enumerate() {
            dst2.push(e.var);
            src2.push(n + e.con);
            erow2.push(k);
        }
        for (idx, &j) in lonely_vars.iter().enumerate() {
            dst2.push(j);
            src2.push(j);
            erow2.push(ne + lonely_cons.len() + idx);
        }
        let v2 = self.attention(
            &mut tape,
            &pl[r2_base..head_base],
            hv,
            all2,
            he,
            &dst2,
            &src2,
            &erow2,
            n,
        );

        // Output head.
        let head_in = match self.mode {
            TaskMode::BackdoorScore => v2,
            TaskMode::ConfigLogits => {
                let mv = tape.mean_rows(v2);
                let mc = tape.mean_rows(c2);
                tape.concat_cols(&[mv, mc])
            }
        };
        let hidden = {
            let t = tape.matmul(head_in, pl[head_base]);
            let t = tape.add_row(t, pl[head_base + 1]);
            tape.relu(t)
        };
        let output = {
            let t = tape.matmul(hidden, pl[head_base + 2]);
            let t = tape.add_row(t, pl[head_base + 3]);
            tape.sigmoid(t)
        };
        Ok(ForwardPass {
            tape,
            output,
            param_leaves: pl,
        })
    }

    /// One multi-head attention round. `h_dst` holds destination embeddings
    /// (one row per destination node), `sources` the gather pool for source
    /// embeddings, `h_edge` the projected edge embeddings. The parallel
    /// `dst`/`src`/`erow` lists describe one message each.
    #[allow(clippy::too_many_arguments)]
    fn attention(
        &self,
        tape: &mut Tape,
        round_leaves: &[Tensor],
        h_dst: Tensor,
        sources: Tensor,
        h_edge: Tensor,
        dst: &[usize],
        src: &[usize],
        erow: &[usize],
        n_dst: usize,
    ) -> Tensor {
        let gd = tape.gather_rows(h_dst, dst);
        let gs = tape.gather_rows(sources, src);
        let ge = tape.gather_rows(h_edge, erow);
        let cat = tape.concat_cols(&[gd, gs, ge]);
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let w = round_leaves[2 * h];
            let a = round_leaves[2 * h + 1];
            let z = {
                let t = tape.matmul(cat, w);
                tape.leaky_relu(t, LEAKY_SLOPE)
            };
            let score = tape.matmul(z, a);
            let alpha = tape.segment_softmax(score, dst, n_dst);
            outs.push(tape.segment_weighted_sum(alpha, z, dst, n_dst));
        }
        tape.concat_cols(&outs)
    }
}

/// Network output for one graph.
#[derive(Debug, Clone, PartialEq)]
pub enum ForwardOutput {
    /// One score in (0,1) per variable node.
    VariableScores(Vec<f64>),
    /// Pooled configuration vector of width [`ONE_HOT_DIM`].
    ConfigVector(Vec<f64>),
}

/// A completed forward run with its tape, ready for a reverse pass.
pub struct ForwardPass {
    tape: Tape,
    output: Tensor,
    param_leaves: Vec<Tensor>,
}

impl ForwardPass {
    pub fn output_matrix(&self) -> &Matrix {
        self.tape.value(self.output)
    }

    /// Reverse pass seeded with `d(loss)/d(output)`; returns parameter
    /// gradients in [`GatModel::params`] order.
    pub fn backward(&self, seed: Matrix) -> Gradients {
        let node_grads = self.tape.backward(self.output, seed);
        Gradients(
            self.param_leaves
                .iter()
                .map(|t| node_grads[t.index()].clone())
                .collect(),
        )
    }
}

/// Parameter gradients, aligned with [`GatModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Matrix>);

impl Gradients {
    pub fn zeros_like(model: &GatModel) -> Self {
        Gradients(model.params().iter().map(|m| m.zeros_like()).collect())
    }

    pub fn add_scaled(&mut self, other: &Gradients, factor: f64) {
        assert_eq!(self.0.len(), other.0.len(), "gradient layout mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += factor * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for m in &mut self.0 {
            for x in &mut m.data {
                *x *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|m| m.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|m| m.data.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

/// Mean of the member variables' scores; higher is better. `members` must be
/// non-empty and name integer-restricted variable nodes.
pub fn score_backdoor(
    model: &GatModel,
    graph: &BipartiteGraph,
    members: &BTreeSet<usize>,
) -> Result<f64, NeuralError> {
    if model.mode != TaskMode::BackdoorScore {
        return Err(NeuralError::WrongMode {
            found: model.mode,
            needed: TaskMode::BackdoorScore,
        });
    }
    check_members(graph, members)?;
    let mut marked = graph.clone();
    marked
        .set_membership(members.iter().copied())
        .expect("membership indices already validated");
    let pass = model.forward_pass(&marked)?;
    let out = pass.output_matrix();
    let sum: f64 = members.iter().map(|&j| out.get(j, 0)).sum();
    Ok(sum / members.len() as f64)
}

fn check_members(graph: &BipartiteGraph, members: &BTreeSet<usize>) -> Result<(), NeuralError> {
    if members.is_empty() {
        return Err(NeuralError::EmptyCandidates);
    }
    let n = graph.var_features.len();
    for &j in members {
        if j >= n {
            return Err(NeuralError::BadIndex { index: j, n });
        }
        // Columns 0/1 of the variable features are the binary and
        // general-integer class indicators.
        if graph.var_features[j][0] != 1.0 && graph.var_features[j][1] != 1.0 {
            return Err(NeuralError::NotInteger(j));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Hinge ranking loss `max(0, −y·(s1−s2) + margin)` with `y ∈ {−1, +1}`;
/// `y = +1` asserts the first candidate should score higher.
pub fn rank_loss(s1: f64, s2: f64, y: f64, margin: f64) -> f64 {
    (margin - y * (s1 - s2)).max(0.0)
}

/// Derivatives of [`rank_loss`] with respect to `(s1, s2)`.
pub fn rank_loss_grad(s1: f64, s2: f64, y: f64, margin: f64) -> (f64, f64) {
    if margin - y * (s1 - s2) > 0.0 {
        (-y, y)
    } else {
        (0.0, 0.0)
    }
}

/// InfoNCE contrastive loss. For each positive `a`, the denominator runs over
/// all negatives plus `a` itself:
///
/// `L = −(1/|P|) Σ_{a∈P} log( exp(a·π/τ) / Σ_{a'∈N∪{a}} exp(a'·π/τ) )`.
///
/// Stabilized by per-term max subtraction, so large similarity/temperature
/// ratios stay finite.
pub fn info_nce_loss(
    pi: &[f64],
    positives: &[Vec<f64>],
    negatives: &[Vec<f64>],
    tau: f64,
) -> Result<f64, NeuralError> {
    check_contrastive_inputs(pi, positives, negatives, tau)?;
    let neg_sims: Vec<f64> = negatives.iter().map(|a| dot(a, pi) / tau).collect();
    let mut total = 0.0;
    for a in positives {
        let pos_sim = dot(a, pi) / tau;
        let m = neg_sims.iter().fold(pos_sim, |acc, &s| acc.max(s));
        let denom: f64 =
            (pos_sim - m).exp() + neg_sims.iter().map(|&s| (s - m).exp()).sum::<f64>();
        total += -(pos_sim - m - denom.ln());
    }
    Ok(total / positives.len() as f64)
}

/// Gradient of [`info_nce_loss`] with respect to the pooled vector `π`.
pub fn info_nce_grad(
    pi: &[f64],
    positives: &[Vec<f64>],
    negatives: &[Vec<f64>],
    tau: f64,
) -> Result<Vec<f64>, NeuralError> {
    check_contrastive_inputs(pi, positives, negatives, tau)?;
    let neg_sims: Vec<f64> = negatives.iter().map(|a| dot(a, pi) / tau).collect();
    let mut grad = vec![0.0; pi.len()];
    for a in positives {
        let pos_sim = dot(a, pi) / tau;
        let m = neg_sims.iter().fold(pos_sim, |acc, &s| acc.max(s));
        let e_pos = (pos_sim - m).exp();
        let denom: f64 = e_pos + neg_sims.iter().map(|&s| (s - m).exp()).sum::<f64>();
        // d/dπ of −log softmax: −a/τ + Σ_x p_x · x/τ over the denominator set.
        let p_pos = e_pos / denom;
        for (g, &ai) in grad.iter_mut().zip(a) {
            *g += (p_pos - 1.0) * ai / tau;
        }
        for (neg, &s) in negatives.iter().zip(&neg_sims) {
            let p = (s - m).exp() / denom;
            for (g, &ni) in grad.iter_mut().zip(neg) {
                *g += p * ni / tau;
            }
        }
    }
    let scale = 1.0 / positives.len() as f64;
    for g in &mut grad {
        *g *= scale;
    }
    Ok(grad)
}

fn check_contrastive_inputs(
    pi: &[f64],
    positives: &[Vec<f64>],
    negatives: &[Vec<f64>],
    tau: f64,
) -> Result<(), NeuralError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(NeuralError::BadOptions(format!(
            "temperature must be positive and finite, got {tau}"
        )));
    }
    if positives.is_empty() {
        return Err(NeuralError::BadData("no positive examples".into()));
    }
    if negatives.is_empty() {
        return Err(NeuralError::BadData("no negative examples".into()));
    }
    for a in positives.iter().chain(negatives) {
        if a.len() != pi.len() {
            return Err(NeuralError::BadData(format!(
                "example width {} does not match embedding width {}",
                a.len(),
                pi.len()
            )));
        }
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Training data
// ---------------------------------------------------------------------------

/// One ranking comparison: candidate sets `b1`, `b2` over the integer
/// variables of `graph`, `y = +1` when `b1` is the better (faster) set.
///
/// Graphs are shared: many samples reference the same instance, and an `Arc`
/// keeps a 225-pair instance from storing 225 graph copies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankSample {
    pub graph: Arc<BipartiteGraph>,
    pub b1: BTreeSet<usize>,
    pub b2: BTreeSet<usize>,
    pub y: f64,
}

/// One contrastive sample: configuration one-hot vectors that worked well
/// (`positives`) and poorly (`negatives`) on `graph`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContrastiveSample {
    pub graph: Arc<BipartiteGraph>,
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
}

/// Training data for one task mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Dataset {
    Rank(Vec<RankSample>),
    Contrastive(Vec<ContrastiveSample>),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Rank(v) => v.len(),
            Dataset::Contrastive(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self) -> TaskMode {
        match self {
            Dataset::Rank(_) => TaskMode::BackdoorScore,
            Dataset::Contrastive(_) => TaskMode::ConfigLogits,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.is_empty() {
            return Err(NeuralError::EmptyDataset);
        }
        match self {
            Dataset::Rank(items) => {
                for (i, item) in items.iter().enumerate() {
                    check_members(&item.graph, &item.b1)
                        .and_then(|_| check_members(&item.graph, &item.b2))
                        .map_err(|e| {
                            NeuralError::BadData(format!("ranking sample {i}: {e}"))
                        })?;
                    if item.b1 == item.b2 {
                        return Err(NeuralError::BadData(format!(
                            "ranking sample {i}: identical candidate sets"
                        )));
                    }
                    if item.y != 1.0 && item.y != -1.0 {
                        return Err(NeuralError::BadData(format!(
                            "ranking sample {i}: label {} is not ±1",
                            item.y
                        )));
                    }
                }
            }
            Dataset::Contrastive(items) => {
                for (i, item) in items.iter().enumerate() {
                    if item.positives.is_empty() || item.negatives.is_empty() {
                        return Err(NeuralError::BadData(format!(
                            "contrastive sample {i}: positives and negatives must be non-empty"
                        )));
                    }
                    for v in item.positives.iter().chain(&item.negatives) {
                        if v.len() != ONE_HOT_DIM {
                            return Err(NeuralError::BadData(format!(
                                "contrastive sample {i}: vector width {} != {ONE_HOT_DIM}",
                                v.len()
                            )));
                        }
                    }
                    for p in &item.positives {
                        if item.negatives.iter().any(|q| q == p) {
                            return Err(NeuralError::BadData(format!(
                                "contrastive sample {i}: positives and negatives overlap"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

/// Adam state wrapped around a model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainState {
    pub model: GatModel,
    /// First-moment estimates, one per parameter tensor.
    pub m: Vec<Matrix>,
    /// Second-moment estimates.
    pub v: Vec<Matrix>,
    pub step: u64,
    pub learning_rate: f64,
}

impl TrainState {
    pub fn new(model: GatModel, learning_rate: f64) -> Self {
        let m = model.params().iter().map(|p| p.zeros_like()).collect();
        let v = model.params().iter().map(|p| p.zeros_like()).collect();
        TrainState {
            model,
            m,
            v,
            step: 0,
            learning_rate,
        }
    }
}

/// One Adam update (β1 = 0.9, β2 = 0.999, ε = 1e-8) in place.
pub fn adam_step(state: &mut TrainState, grads: &Gradients) -> Result<(), NeuralError> {
    if !grads.is_finite() {
        return Err(NeuralError::BadGradient);
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    let lr = state.learning_rate;
    let mut params = state.model.params_mut();
    for (idx, p) in params.iter_mut().enumerate() {
        let g = &grads.0[idx];
        assert_eq!(
            (g.rows, g.cols),
            (p.rows, p.cols),
            "gradient layout mismatch"
        );
        for k in 0..p.data.len() {
            let gv = g.data[k];
            state.m[idx].data[k] = ADAM_BETA1 * state.m[idx].data[k] + (1.0 - ADAM_BETA1) * gv;
            state.v[idx].data[k] = ADAM_BETA2 * state.v[idx].data[k] + (1.0 - ADAM_BETA2) * gv * gv;
            let mhat = state.m[idx].data[k] / bc1;
            let vhat = state.v[idx].data[k] / bc2;
            p.data[k] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOptions {
    /// Embedding width `L`.
    pub width: usize,
    /// Head count `H`.
    pub heads: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Hinge margin for ranking training.
    pub margin: f64,
    /// Temperature for contrastive training.
    pub tau: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            width: 64,
            heads: 8,
            learning_rate: 1e-4,
            batch_size: 32,
            epochs: 1000,
            margin: DEFAULT_MARGIN,
            tau: DEFAULT_TAU,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub stats: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Train a fresh model on `train_set`, checkpointing on `val_set` loss.
/// Returns the best-validation model and the per-epoch loss curve. Items are
/// visited in a seeded shuffled order each epoch, so identical inputs and
/// options reproduce identical parameters.
pub fn train(
    train_set: &Dataset,
    val_set: &Dataset,
    opts: &TrainOptions,
) -> Result<(GatModel, TrainHistory), NeuralError> {
    train_set.validate()?;
    val_set.validate()?;
    if train_set.mode() != val_set.mode() {
        return Err(NeuralError::BadData(
            "training and validation sets have different task modes".into(),
        ));
    }
    if opts.batch_size == 0 || opts.epochs == 0 {
        return Err(NeuralError::BadOptions(
            "batch size and epoch count must be positive".into(),
        ));
    }
    if !(opts.learning_rate > 0.0) {
        return Err(NeuralError::BadOptions(
            "learning rate must be positive".into(),
        ));
    }

    let model = GatModel::new(train_set.mode(), opts.width, opts.heads, opts.seed)?;
    let mut state = TrainState::new(model, opts.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut best = state.model.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut stats = Vec::with_capacity(opts.epochs);

    for epoch in 0..opts.epochs {
        shuffle(&mut order, &mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(opts.batch_size).enumerate() {
            let mut grads = Gradients::zeros_like(&state.model);
            let mut batch_loss = 0.0;
            for &item in batch {
                let loss = item_loss_and_grads(&state.model, train_set, item, opts, &mut grads)?;
                batch_loss += loss;
            }
            if !batch_loss.is_finite() {
                return Err(NeuralError::Diverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut state, &grads)?;
            epoch_loss += batch_loss;
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let val_loss = dataset_loss(&state.model, val_set, opts)?;
        if !val_loss.is_finite() {
            return Err(NeuralError::Diverged { epoch, batch: 0 });
        }
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best = state.model.clone();
        }
        stats.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
    }

    Ok((
        best,
        TrainHistory {
            stats,
            best_epoch,
            best_val_loss: best_val,
        },
    ))
}

/// Mean loss of `model` over a dataset, without touching gradients.
pub fn dataset_loss(
    model: &GatModel,
    data: &Dataset,
    opts: &TrainOptions,
) -> Result<f64, NeuralError> {
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let mut total = 0.0;
    match data {
        Dataset::Rank(items) => {
            for item in items {
                let s1 = score_backdoor(model, &item.graph, &item.b1)?;
                let s2 = score_backdoor(model, &item.graph, &item.b2)?;
                // The hinge's max() would silently turn a NaN score into 0;
                // surface bad numerics instead of hiding them.
                if !(s1.is_finite() && s2.is_finite()) {
                    total += f64::NAN;
                } else {
                    total += rank_loss(s1, s2, item.y, opts.margin);
                }
            }
        }
        Dataset::Contrastive(items) => {
            for item in items {
                let pi = config_vector(model, &item.graph)?;
                total += info_nce_loss(&pi, &item.positives, &item.negatives, opts.tau)?;
            }
        }
    }
    Ok(total / data.len() as f64)
}

/// Convenience accessor: forward in `ConfigLogits` mode, returning the pooled
/// vector.
pub fn config_vector(model: &GatModel, graph: &BipartiteGraph) -> Result<Vec<f64>, NeuralError> {
    if model.mode != TaskMode::ConfigLogits {
        return Err(NeuralError::WrongMode {
            found: model.mode,
            needed: TaskMode::ConfigLogits,
        });
    }
    match model.forward(graph)? {
        ForwardOutput::ConfigVector(v) => Ok(v),
        ForwardOutput::VariableScores(_) => unreachable!("mode checked above"),
    }
}

fn item_loss_and_grads(
    model: &GatModel,
    data: &Dataset,
    index: usize,
    opts: &TrainOptions,
    grads: &mut Gradients,
) -> Result<f64, NeuralError> {
    match data {
        Dataset::Rank(items) => {
            let item = &items[index];
            let n = item.graph.var_features.len();
            let run = |members: &BTreeSet<usize>| -> Result<(ForwardPass, f64), NeuralError> {
                let mut marked = (*item.graph).clone();
                marked.set_membership(members.iter().copied()).unwrap();
                let pass = model.forward_pass(&marked)?;
                let s = members
                    .iter()
                    .map(|&j| pass.output_matrix().get(j, 0))
                    .sum::<f64>()
                    / members.len() as f64;
                Ok((pass, s))
            };
            let (pass1, s1) = run(&item.b1)?;
            let (pass2, s2) = run(&item.b2)?;
            if !(s1.is_finite() && s2.is_finite()) {
                return Ok(f64::NAN);
            }
            let loss = rank_loss(s1, s2, item.y, opts.margin);
            let (d1, d2) = rank_loss_grad(s1, s2, item.y, opts.margin);
            for (pass, members, d) in [(&pass1, &item.b1, d1), (&pass2, &item.b2, d2)] {
                if d == 0.0 {
                    continue;
                }
                let mut seed = Matrix::zeros(n, 1);
                let w = d / members.len() as f64;
                for &j in members {
                    seed.set(j, 0, w);
                }
                grads.add_scaled(&pass.backward(seed), 1.0);
            }
            Ok(loss)
        }
        Dataset::Contrastive(items) => {
            let item = &items[index];
            let pass = model.forward_pass(&item.graph)?;
            let pi = pass.output_matrix().data.clone();
            let loss = info_nce_loss(&pi, &item.positives, &item.negatives, opts.tau)?;
            let dpi = info_nce_grad(&pi, &item.positives, &item.negatives, opts.tau)?;
            let seed = Matrix::from_vec(1, dpi.len(), dpi);
            grads.add_scaled(&pass.backward(seed), 1.0);
            Ok(loss)
        }
    }
}

fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

// ---------------------------------------------------------------------------
// Evaluation helpers
// ---------------------------------------------------------------------------

/// Fraction of ranking samples where the model orders the pair the same way
/// as the label; ties count as wrong.
pub fn pairwise_accuracy(model: &GatModel, items: &[RankSample]) -> Result<f64, NeuralError> {
    if items.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let mut hits = 0usize;
    for item in items {
        let s1 = score_backdoor(model, &item.graph, &item.b1)?;
        let s2 = score_backdoor(model, &item.graph, &item.b2)?;
        if item.y * (s1 - s2) > 0.0 {
            hits += 1;
        }
    }
    Ok(hits as f64 / items.len() as f64)
}

/// Fraction of contrastive samples whose embedding is more similar (by mean
/// inner product) to the positives than to the negatives.
pub fn contrastive_accuracy(
    model: &GatModel,
    items: &[ContrastiveSample],
) -> Result<f64, NeuralError> {
    if items.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let mut hits = 0usize;
    for item in items {
        let pi = config_vector(model, &item.graph)?;
        let mean_sim = |set: &[Vec<f64>]| {
            set.iter().map(|a| dot(a, &pi)).sum::<f64>() / set.len() as f64
        };
        if mean_sim(&item.positives) > mean_sim(&item.negatives) {
            hits += 1;
        }
    }
    Ok(hits as f64 / items.len() as f64)
}

/// Scalar sigmoid, re-exported for hand checks.
pub fn sigmoid_scalar(x: f64) -> f64 {
    sigmoid(x)
}
