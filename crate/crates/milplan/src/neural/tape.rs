//! Reverse-mode automatic differentiation over dense 2-D matrices.
//!
//! A [`Tape`] records every operation as it computes forward values; calling
//! [`Tape::backward`] replays the record in reverse, accumulating gradients
//! for every node. The op set is exactly what the attention network needs —
//! dense linear algebra, row gather/concat, elementwise nonlinearities, and
//! the segment (per-destination) softmax/weighted-sum pair that implements
//! neighborhood attention.

use serde::{Deserialize, Serialize};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn zeros_like(&self) -> Self {
        Matrix::zeros(self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tensor(usize);

impl Tensor {
    /// Position of this node on its tape, usable as an index into the
    /// gradient vector returned by [`Tape::backward`].
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf,
    /// C = A · B
    MatMul(usize, usize),
    /// C = A + B (same shape)
    Add(usize, usize),
    /// C = X + b with b a 1×c row broadcast over X's rows.
    AddRow(usize, usize),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    /// Row i of the output is row `indices[i]` of the input.
    GatherRows(usize, Vec<usize>),
    LeakyRelu(usize, f64),
    Relu(usize),
    Sigmoid(usize),
    Scale(usize, f64),
    /// 1×c mean over rows.
    MeanRows(usize),
    /// Softmax of a K×1 score column within each segment.
    SegmentSoftmax { scores: usize, segments: Vec<usize>, n_segments: usize },
    /// Out row s = Σ_{k: seg(k)=s} w_k · message_k; weights K×1, messages K×d.
    SegmentWeightedSum {
        weights: usize,
        messages: usize,
        segments: Vec<usize>,
    },
}

struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn value(&self, t: Tensor) -> &Matrix {
        &self.nodes[t.0].value
    }

    fn push(&mut self, value: Matrix, op: Op) -> Tensor {
        self.nodes.push(Node { value, op });
        Tensor(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, m: Matrix) -> Tensor {
        self.push(m, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Tensor {
        let (ma, mb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ma.cols, mb.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(ma.rows, mb.cols);
        for i in 0..ma.rows {
            for k in 0..ma.cols {
                let aik = ma.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..mb.cols {
                    out.data[i * out.cols + j] += aik * mb.get(k, j);
                }
            }
        }
        self.push(out, Op::MatMul(a.0, b.0))
    }

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Tensor {
        let (ma, mb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!((ma.rows, ma.cols), (mb.rows, mb.cols), "add shape mismatch");
        let data = ma.data.iter().zip(&mb.data).map(|(x, y)| x + y).collect();
        let out = Matrix::from_vec(ma.rows, ma.cols, data);
        self.push(out, Op::Add(a.0, b.0))
    }

    /// `x + b` broadcasting the 1×c row `b` over every row of `x`.
    pub fn add_row(&mut self, x: Tensor, b: Tensor) -> Tensor {
        let (mx, mb) = (&self.nodes[x.0].value, &self.nodes[b.0].value);
        assert_eq!(mb.rows, 1, "broadcast addend must be a row");
        assert_eq!(mx.cols, mb.cols, "broadcast width mismatch");
        let mut out = mx.clone();
        for i in 0..out.rows {
            for j in 0..out.cols {
                out.data[i * out.cols + j] += mb.data[j];
            }
        }
        self.push(out, Op::AddRow(x.0, b.0))
    }

    pub fn concat_cols(&mut self, parts: &[Tensor]) -> Tensor {
        assert!(!parts.is_empty());
        let rows = self.nodes[parts[0].0].value.rows;
        let cols: usize = parts.iter().map(|t| self.nodes[t.0].value.cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut at = 0;
        for t in parts {
            let m = &self.nodes[t.0].value;
            assert_eq!(m.rows, rows, "concat_cols row mismatch");
            for i in 0..rows {
                out.data[i * cols + at..i * cols + at + m.cols].copy_from_slice(m.row(i));
            }
            at += m.cols;
        }
        self.push(out, Op::ConcatCols(parts.iter().map(|t| t.0).collect()))
    }

    pub fn concat_rows(&mut self, parts: &[Tensor]) -> Tensor {
        assert!(!parts.is_empty());
        let cols = self.nodes[parts[0].0].value.cols;
        let rows: usize = parts.iter().map(|t| self.nodes[t.0].value.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for t in parts {
            let m = &self.nodes[t.0].value;
            assert_eq!(m.cols, cols, "concat_rows column mismatch");
            data.extend_from_slice(&m.data);
        }
        let out = Matrix::from_vec(rows, cols, data);
        self.push(out, Op::ConcatRows(parts.iter().map(|t| t.0).collect()))
    }

    pub fn gather_rows(&mut self, x: Tensor, indices: &[usize]) -> Tensor {
        let m = &self.nodes[x.0].value;
        let mut out = Matrix::zeros(indices.len(), m.cols);
        for (i, &src) in indices.iter().enumerate() {
            out.data[i * m.cols..(i + 1) * m.cols].copy_from_slice(m.row(src));
        }
        self.push(out, Op::GatherRows(x.0, indices.to_vec()))
    }

    pub fn leaky_relu(&mut self, x: Tensor, alpha: f64) -> Tensor {
        let m = &self.nodes[x.0].value;
        let data = m
            .data
            .iter()
            .map(|&v| if v > 0.0 { v } else { alpha * v })
            .collect();
        let out = Matrix::from_vec(m.rows, m.cols, data);
        self.push(out, Op::LeakyRelu(x.0, alpha))
    }

    pub fn relu(&mut self, x: Tensor) -> Tensor {
        let m = &self.nodes[x.0].value;
        // Not max(0, v): IEEE max would swallow NaN inputs, hiding numerical
        // blow-ups from the divergence checks downstream.
        let data = m
            .data
            .iter()
            .map(|&v| if v.is_nan() { v } else { v.max(0.0) })
            .collect();
        let out = Matrix::from_vec(m.rows, m.cols, data);
        self.push(out, Op::Relu(x.0))
    }

    pub fn sigmoid(&mut self, x: Tensor) -> Tensor {
        let m = &self.nodes[x.0].value;
        let data = m.data.iter().map(|&v| sigmoid(v)).collect();
        let out = Matrix::from_vec(m.rows, m.cols, data);
        self.push(out, Op::Sigmoid(x.0))
    }

    pub fn scale(&mut self, x: Tensor, factor: f64) -> Tensor {
        let m = &self.nodes[x.0].value;
        let data = m.data.iter().map(|v| v * factor).collect();
        let out = Matrix::from_vec(m.rows, m.cols, data);
        self.push(out, Op::Scale(x.0, factor))
    }

    pub fn mean_rows(&mut self, x: Tensor) -> Tensor {
        let m = &self.nodes[x.0].value;
        assert!(m.rows > 0, "mean over zero rows");
        let mut out = Matrix::zeros(1, m.cols);
        for i in 0..m.rows {
            for j in 0..m.cols {
                out.data[j] += m.get(i, j);
            }
        }
        for v in &mut out.data {
            *v /= m.rows as f64;
        }
        self.push(out, Op::MeanRows(x.0))
    }

    /// Softmax of the K×1 `scores` within each segment. Rows of segment `s`
    /// sum to 1; empty segments contribute nothing.
    pub fn segment_softmax(&mut self, scores: Tensor, segments: &[usize], n_segments: usize) -> Tensor {
        let m = &self.nodes[scores.0].value;
        assert_eq!(m.cols, 1, "scores must be a column");
        assert_eq!(m.rows, segments.len(), "one segment id per score");
        let mut seg_max = vec![f64::NEG_INFINITY; n_segments];
        for (k, &s) in segments.iter().enumerate() {
            seg_max[s] = seg_max[s].max(m.data[k]);
        }
        let mut seg_sum = vec![0.0f64; n_segments];
        let mut expd = vec![0.0f64; m.rows];
        for (k, &s) in segments.iter().enumerate() {
            let e = (m.data[k] - seg_max[s]).exp();
            expd[k] = e;
            seg_sum[s] += e;
        }
        let data = segments
            .iter()
            .enumerate()
            .map(|(k, &s)| expd[k] / seg_sum[s])
            .collect();
        let out = Matrix::from_vec(m.rows, 1, data);
        self.push(
            out,
            Op::SegmentSoftmax {
                scores: scores.0,
                segments: segments.to_vec(),
                n_segments,
            },
        )
    }

    /// Per-segment weighted sum: out row `s` = Σ over rows `k` with
    /// `segments[k] == s` of `weights[k] * messages[k]`.
    pub fn segment_weighted_sum(
        &mut self,
        weights: Tensor,
        messages: Tensor,
        segments: &[usize],
        n_segments: usize,
    ) -> Tensor {
        let (mw, mm) = (&self.nodes[weights.0].value, &self.nodes[messages.0].value);
        assert_eq!(mw.cols, 1, "weights must be a column");
        assert_eq!(mw.rows, mm.rows, "one weight per message");
        assert_eq!(mw.rows, segments.len(), "one segment id per message");
        let mut out = Matrix::zeros(n_segments, mm.cols);
        for (k, &s) in segments.iter().enumerate() {
            let w = mw.data[k];
            for j in 0..mm.cols {
                out.data[s * mm.cols + j] += w * mm.get(k, j);
            }
        }
        self.push(
            out,
            Op::SegmentWeightedSum {
                weights: weights.0,
                messages: messages.0,
                segments: segments.to_vec(),
            },
        )
    }

    /// Reverse pass from `output` seeded with `seed` (same shape as the
    /// output value). Returns one gradient per node, zeros where no gradient
    /// flows; read leaf gradients off by their tensor handles.
    pub fn backward(&self, output: Tensor, seed: Matrix) -> Vec<Matrix> {
        let out_val = &self.nodes[output.0].value;
        assert_eq!(
            (seed.rows, seed.cols),
            (out_val.rows, out_val.cols),
            "seed shape mismatch"
        );
        let mut grads: Vec<Matrix> = self.nodes.iter().map(|n| n.value.zeros_like()).collect();
        grads[output.0] = seed;
        for id in (0..self.nodes.len()).rev() {
            if grads[id].data.iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = grads[id].clone();
            match &self.nodes[id].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (ma, mb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    // dA += G · Bᵀ
                    for i in 0..ma.rows {
                        for k in 0..ma.cols {
                            let mut acc = 0.0;
                            for j in 0..mb.cols {
                                acc += g.get(i, j) * mb.get(k, j);
                            }
                            grads[*a].data[i * ma.cols + k] += acc;
                        }
                    }
                    // dB += Aᵀ · G
                    for k in 0..mb.rows {
                        for j in 0..mb.cols {
                            let mut acc = 0.0;
                            for i in 0..ma.rows {
                                acc += ma.get(i, k) * g.get(i, j);
                            }
                            grads[*b].data[k * mb.cols + j] += acc;
                        }
                    }
                }
                Op::Add(a, b) => {
                    for (ga, gv) in grads[*a].data.iter_mut().zip(&g.data) {
                        *ga += gv;
                    }
                    for (gb, gv) in grads[*b].data.iter_mut().zip(&g.data) {
                        *gb += gv;
                    }
                }
                Op::AddRow(x, b) => {
                    for (gx, gv) in grads[*x].data.iter_mut().zip(&g.data) {
                        *gx += gv;
                    }
                    let cols = g.cols;
                    for i in 0..g.rows {
                        for j in 0..cols {
                            grads[*b].data[j] += g.get(i, j);
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let pc = self.nodes[p].value.cols;
                        for i in 0..g.rows {
                            for j in 0..pc {
                                grads[p].data[i * pc + j] += g.get(i, at + j);
                            }
                        }
                        at += pc;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let pr = self.nodes[p].value.rows;
                        let pc = self.nodes[p].value.cols;
                        for i in 0..pr {
                            for j in 0..pc {
                                grads[p].data[i * pc + j] += g.get(at + i, j);
                            }
                        }
                        at += pr;
                    }
                }
                Op::GatherRows(x, indices) => {
                    let cols = g.cols;
                    for (i, &src) in indices.iter().enumerate() {
                        for j in 0..cols {
                            grads[*x].data[src * cols + j] += g.get(i, j);
                        }
                    }
                }
                Op::LeakyRelu(x, alpha) => {
                    let vx = &self.nodes[*x].value;
                    for (k, gv) in g.data.iter().enumerate() {
                        let slope = if vx.data[k] > 0.0 { 1.0 } else { *alpha };
                        grads[*x].data[k] += gv * slope;
                    }
                }
                Op::Relu(x) => {
                    let vx = &self.nodes[*x].value;
                    for (k, gv) in g.data.iter().enumerate() {
                        if vx.data[k] > 0.0 {
                            grads[*x].data[k] += gv;
                        }
                    }
                }
                Op::Sigmoid(x) => {
                    let vy = &self.nodes[id].value;
                    for (k, gv) in g.data.iter().enumerate() {
                        let s = vy.data[k];
                        grads[*x].data[k] += gv * s * (1.0 - s);
                    }
                }
                Op::Scale(x, factor) => {
                    for (gx, gv) in grads[*x].data.iter_mut().zip(&g.data) {
                        *gx += gv * factor;
                    }
                }
                Op::MeanRows(x) => {
                    let rows = self.nodes[*x].value.rows as f64;
                    let cols = g.cols;
                    for i in 0..self.nodes[*x].value.rows {
                        for j in 0..cols {
                            grads[*x].data[i * cols + j] += g.data[j] / rows;
                        }
                    }
                }
                Op::SegmentSoftmax {
                    scores,
                    segments,
                    n_segments,
                } => {
                    let alpha = &self.nodes[id].value;
                    // ds_k = α_k (dα_k − Σ_{j in seg} α_j dα_j)
                    let mut seg_dot = vec![0.0f64; *n_segments];
                    for (k, &s) in segments.iter().enumerate() {
                        seg_dot[s] += alpha.data[k] * g.data[k];
                    }
                    for (k, &s) in segments.iter().enumerate() {
                        grads[*scores].data[k] += alpha.data[k] * (g.data[k] - seg_dot[s]);
                    }
                }
                Op::SegmentWeightedSum {
                    weights,
                    messages,
                    segments,
                } => {
                    let (mw, mm) = (&self.nodes[*weights].value, &self.nodes[*messages].value);
                    let cols = mm.cols;
                    for (k, &s) in segments.iter().enumerate() {
                        let mut acc = 0.0;
                        for j in 0..cols {
                            let gv = g.get(s, j);
                            acc += gv * mm.get(k, j);
                            grads[*messages].data[k * cols + j] += mw.data[k] * gv;
                        }
                        grads[*weights].data[k] += acc;
                    }
                }
            }
        }
        grads
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
