//! Tape-based reverse-mode differentiation over [`Mat`] values.
//!
//! Every operation appends a node to the [`Tape`]; node indices are a
//! topological order, so [`Tape::backward`] walks them in reverse once.
//! Parameters are borrowed rather than copied, which keeps per-session
//! tapes cheap even when the item table is large.

use std::borrow::Cow;

use rand::Rng;

use super::{Mat, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

const LAYER_NORM_EPS: f64 = 1e-12;
const L2_NORM_MIN: f64 = 1e-12;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    Affine(Var, f64),
    ConcatCols(Var, Var),
    SliceCols(Var, usize),
    ConcatRows(Vec<Var>),
    Gather(Var, Vec<usize>),
    ScatterAdd(Var, Vec<usize>),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    SoftmaxRow(Var),
    LayerNormRow(Var, Vec<f64>),
    Dropout(Var, Mat),
    L2NormalizeRow(Var, Vec<f64>),
    SumRows(Var),
    MeanRows(Var),
    RowDot(Var, Var),
    Reshape(Var),
    CrossEntropy(Var, usize, Mat),
}

struct Node<'p> {
    value: Cow<'p, Mat>,
    op: Op,
    requires_grad: bool,
}

/// Records a forward computation for later differentiation.
#[derive(Default)]
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Mat>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Mat> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn shape_err(op: &'static str, a: (usize, usize), b: (usize, usize)) -> TensorError {
    TensorError::ShapeMismatch { op, lhs: a, rhs: b }
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a borrowed trainable leaf.
    pub fn param(&mut self, value: &'p Mat) -> Var {
        self.push_leaf(Cow::Borrowed(value), true)
    }

    /// Registers an owned trainable leaf.
    pub fn param_owned(&mut self, value: Mat) -> Var {
        self.push_leaf(Cow::Owned(value), true)
    }

    /// Registers a leaf that never receives gradients.
    pub fn constant(&mut self, value: Mat) -> Var {
        self.push_leaf(Cow::Owned(value), false)
    }

    fn push_leaf(&mut self, value: Cow<'p, Mat>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn push(&mut self, name: &'static str, value: Mat, op: Op, inputs: &[Var]) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: name });
        }
        let requires_grad = self.needs(inputs);
        self.nodes.push(Node { value: Cow::Owned(value), op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(shape_err("matmul", sa, sb));
        }
        let out = self.value(a).matmul(self.value(b));
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).transpose();
        self.push("transpose", out, Op::Transpose(a), &[a])
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err(op, sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push("add", out, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push("sub", out, Op::Sub(a, b), &[a, b])
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("hadamard", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push("hadamard", out, Op::Hadamard(a, b), &[a, b])
    }

    /// Adds a `1 × c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, TensorError> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        if sr.0 != 1 || sr.1 != sa.1 {
            return Err(shape_err("add_row", sa, sr));
        }
        let mut out = self.value(a).clone();
        let r = self.value(row).as_slice();
        for i in 0..sa.0 {
            out.row_mut(i).iter_mut().zip(r).for_each(|(o, b)| *o += b);
        }
        self.push("add_row", out, Op::AddRow(a, row), &[a, row])
    }

    /// Scales row `i` of `a` by `col[i]`, where `col` is `r × 1`.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var, TensorError> {
        let (sa, sc) = (self.shape(a), self.shape(col));
        if sc.1 != 1 || sc.0 != sa.0 {
            return Err(shape_err("mul_col", sa, sc));
        }
        let mut out = self.value(a).clone();
        let c = self.value(col).as_slice();
        for (i, &s) in c.iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|o| *o *= s);
        }
        self.push("mul_col", out, Op::MulCol(a, col), &[a, col])
    }

    pub fn scalar_scale(&mut self, a: Var, s: f64) -> Result<Var, TensorError> {
        self.affine(a, s, 0.0)
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Result<Var, TensorError> {
        self.affine(a, -1.0, 1.0)
    }

    fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Result<Var, TensorError> {
        let out = self.value(a).map(|x| scale * x + shift);
        self.push("affine", out, Op::Affine(a, scale), &[a])
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.0 != sb.0 {
            return Err(shape_err("concat_cols", sa, sb));
        }
        let mut out = Mat::zeros(sa.0, sa.1 + sb.1);
        for i in 0..sa.0 {
            let row = out.row_mut(i);
            row[..sa.1].copy_from_slice(self.nodes[a.0].value.row(i));
            row[sa.1..].copy_from_slice(self.nodes[b.0].value.row(i));
        }
        self.push("concat_cols", out, Op::ConcatCols(a, b), &[a, b])
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let sa = self.shape(a);
        if start + len > sa.1 {
            return Err(TensorError::IndexOutOfRange { op: "slice_cols", index: start + len, bound: sa.1 + 1 });
        }
        let src = self.value(a);
        let mut out = Mat::zeros(sa.0, len);
        for i in 0..sa.0 {
            out.row_mut(i).copy_from_slice(&src.row(i)[start..start + len]);
        }
        self.push("slice_cols", out, Op::SliceCols(a, start), &[a])
    }

    /// Stacks the given matrices vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let Some(&first) = parts.first() else {
            return Err(TensorError::InvalidArgument("concat_rows of no inputs".into()));
        };
        let cols = self.shape(first).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.1 != cols {
                return Err(shape_err("concat_rows", self.shape(first), s));
            }
            data.extend_from_slice(self.value(p).as_slice());
            rows += s.0;
        }
        let out = Mat::from_vec(rows, cols, data);
        self.push("concat_rows", out, Op::ConcatRows(parts.to_vec()), parts)
    }

    /// Row gather; also serves as the embedding lookup.
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var, TensorError> {
        let (rows, cols) = self.shape(table);
        let src = self.value(table);
        let mut out = Mat::zeros(indices.len(), cols);
        for (k, &idx) in indices.iter().enumerate() {
            if idx >= rows {
                return Err(TensorError::IndexOutOfRange { op: "gather_rows", index: idx, bound: rows });
            }
            out.row_mut(k).copy_from_slice(src.row(idx));
        }
        self.push("gather_rows", out, Op::Gather(table, indices.to_vec()), &[table])
    }

    pub fn embedding_lookup(&mut self, table: Var, indices: &[usize]) -> Result<Var, TensorError> {
        self.gather_rows(table, indices)
    }

    /// Sums row `k` of `src` into output row `indices[k]`; the output has `n_out` rows.
    pub fn scatter_add_rows(&mut self, src: Var, indices: &[usize], n_out: usize) -> Result<Var, TensorError> {
        let (rows, cols) = self.shape(src);
        if indices.len() != rows {
            return Err(shape_err("scatter_add_rows", (rows, cols), (indices.len(), 1)));
        }
        let s = self.value(src);
        let mut out = Mat::zeros(n_out, cols);
        for (k, &idx) in indices.iter().enumerate() {
            if idx >= n_out {
                return Err(TensorError::IndexOutOfRange { op: "scatter_add_rows", index: idx, bound: n_out });
            }
            out.row_mut(idx).iter_mut().zip(s.row(k)).for_each(|(o, v)| *o += v);
        }
        self.push("scatter_add_rows", out, Op::ScatterAdd(src, indices.to_vec()), &[src])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).map(sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).map(f64::tanh);
        self.push("tanh", out, Op::Tanh(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push("relu", out, Op::Relu(a), &[a])
    }

    pub fn softmax_row(&mut self, a: Var) -> Result<Var, TensorError> {
        let mut out = self.value(a).clone();
        for i in 0..out.rows() {
            softmax_in_place(out.row_mut(i));
        }
        self.push("softmax_row", out, Op::SoftmaxRow(a), &[a])
    }

    /// Normalizes each row to zero mean and unit variance (no learned gain).
    pub fn layer_norm_row(&mut self, a: Var) -> Result<Var, TensorError> {
        let mut out = self.value(a).clone();
        let cols = out.cols() as f64;
        let mut inv_std = Vec::with_capacity(out.rows());
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            let mean = row.iter().sum::<f64>() / cols;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            row.iter_mut().for_each(|v| *v = (*v - mean) * is);
            inv_std.push(is);
        }
        self.push("layer_norm_row", out, Op::LayerNormRow(a, inv_std), &[a])
    }

    /// Inverted dropout. Returns `a` unchanged when `rng` is `None` (eval) or `p == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, p: f64, rng: Option<&mut R>) -> Result<Var, TensorError> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::InvalidArgument(format!("dropout probability {p} outside [0, 1)")));
        }
        let Some(rng) = rng else { return Ok(a) };
        if p == 0.0 {
            return Ok(a);
        }
        let (r, c) = self.shape(a);
        let keep = 1.0 / (1.0 - p);
        let mask = Mat::from_vec(r, c, (0..r * c).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect());
        let out = self.value(a).zip_map(&mask, |x, m| x * m);
        self.push("dropout", out, Op::Dropout(a, mask), &[a])
    }

    pub fn l2_normalize_row(&mut self, a: Var) -> Result<Var, TensorError> {
        let mut out = self.value(a).clone();
        let mut norms = Vec::with_capacity(out.rows());
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n < L2_NORM_MIN {
                return Err(TensorError::Degenerate {
                    op: "l2_normalize_row",
                    detail: format!("row {i} has zero norm"),
                });
            }
            row.iter_mut().for_each(|v| *v /= n);
            norms.push(n);
        }
        self.push("l2_normalize_row", out, Op::L2NormalizeRow(a, norms), &[a])
    }

    /// Column sums: `r × c → 1 × c`.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = column_sums(self.value(a));
        self.push("sum_rows", out, Op::SumRows(a), &[a])
    }

    /// Column means: `r × c → 1 × c`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var, TensorError> {
        let v = self.value(a);
        if v.rows() == 0 {
            return Err(TensorError::InvalidArgument("mean_rows of an empty matrix".into()));
        }
        let mut out = column_sums(v);
        out.scale_in_place(1.0 / v.rows() as f64);
        self.push("mean_rows", out, Op::MeanRows(a), &[a])
    }

    /// Per-row dot product: `r × c, r × c → r × 1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("row_dot", a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = (0..va.rows()).map(|i| va.row(i).iter().zip(vb.row(i)).map(|(x, y)| x * y).sum()).collect();
        let out = Mat::from_vec(va.rows(), 1, data);
        self.push("row_dot", out, Op::RowDot(a, b), &[a, b])
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, TensorError> {
        let s = self.shape(a);
        if s.0 * s.1 != rows * cols {
            return Err(shape_err("reshape", s, (rows, cols)));
        }
        let out = Mat::from_vec(rows, cols, self.value(a).as_slice().to_vec());
        self.push("reshape", out, Op::Reshape(a), &[a])
    }

    /// `-log softmax(logits)[target]` for a single `1 × c` row of logits.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var, TensorError> {
        let s = self.shape(logits);
        if s.0 != 1 {
            return Err(shape_err("cross_entropy", s, (1, s.1)));
        }
        if target >= s.1 {
            return Err(TensorError::IndexOutOfRange { op: "cross_entropy", index: target, bound: s.1 });
        }
        let row = self.value(logits).as_slice();
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - row[target];
        let probs = Mat::row_vector(row.iter().map(|v| (v - lse).exp()).collect());
        self.push("cross_entropy", Mat::from_vec(1, 1, vec![loss]), Op::CrossEntropy(logits, target, probs), &[logits])
    }

    /// Reverse pass from a `1 × 1` output.
    pub fn backward(&self, output: Var) -> Result<Gradients, TensorError> {
        let s = self.shape(output);
        if s != (1, 1) {
            return Err(TensorError::InvalidArgument(format!("backward needs a scalar output, got {}x{}", s.0, s.1)));
        }
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Mat::filled(1, 1, 1.0));
        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.backprop_node(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Mat>], v: Var, g: Mat) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn backprop_node(&self, node: &Node<'p>, g: &Mat, grads: &mut [Option<Mat>]) {
        let y = node.value.as_ref();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.nodes[a.0].requires_grad {
                    self.accumulate(grads, *a, g.matmul_t(self.value(*b)));
                }
                if self.nodes[b.0].requires_grad {
                    self.accumulate(grads, *b, self.value(*a).t_matmul(g));
                }
            }
            Op::Transpose(a) => self.accumulate(grads, *a, g.transpose()),
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|v| -v));
            }
            Op::Hadamard(a, b) => {
                self.accumulate(grads, *a, g.zip_map(self.value(*b), |x, y| x * y));
                self.accumulate(grads, *b, g.zip_map(self.value(*a), |x, y| x * y));
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *row, column_sums(g));
            }
            Op::MulCol(a, col) => {
                let c = self.value(*col);
                let mut ga = g.clone();
                for i in 0..ga.rows() {
                    let s = c.get(i, 0);
                    ga.row_mut(i).iter_mut().for_each(|v| *v *= s);
                }
                self.accumulate(grads, *a, ga);
                let av = self.value(*a);
                let data = (0..g.rows()).map(|i| g.row(i).iter().zip(av.row(i)).map(|(x, y)| x * y).sum()).collect();
                self.accumulate(grads, *col, Mat::from_vec(g.rows(), 1, data));
            }
            Op::Affine(a, scale) => self.accumulate(grads, *a, g.map(|v| v * scale)),
            Op::ConcatCols(a, b) => {
                let ca = self.shape(*a).1;
                let cb = g.cols() - ca;
                let mut ga = Mat::zeros(g.rows(), ca);
                let mut gb = Mat::zeros(g.rows(), cb);
                for i in 0..g.rows() {
                    ga.row_mut(i).copy_from_slice(&g.row(i)[..ca]);
                    gb.row_mut(i).copy_from_slice(&g.row(i)[ca..]);
                }
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::SliceCols(a, start) => {
                let (r, c) = self.shape(*a);
                let mut ga = Mat::zeros(r, c);
                for i in 0..r {
                    ga.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                }
                self.accumulate(grads, *a, ga);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let (r, c) = self.shape(*p);
                    let data = g.as_slice()[offset * c..(offset + r) * c].to_vec();
                    self.accumulate(grads, *p, Mat::from_vec(r, c, data));
                    offset += r;
                }
            }
            Op::Gather(table, indices) => {
                let (r, c) = self.shape(*table);
                let mut gt = Mat::zeros(r, c);
                for (k, &idx) in indices.iter().enumerate() {
                    gt.row_mut(idx).iter_mut().zip(g.row(k)).for_each(|(o, v)| *o += v);
                }
                self.accumulate(grads, *table, gt);
            }
            Op::ScatterAdd(src, indices) => {
                let (r, c) = self.shape(*src);
                let mut gs = Mat::zeros(r, c);
                for (k, &idx) in indices.iter().enumerate() {
                    gs.row_mut(k).copy_from_slice(g.row(idx));
                }
                self.accumulate(grads, *src, gs);
            }
            Op::Sigmoid(a) => self.accumulate(grads, *a, g.zip_map(y, |gv, s| gv * s * (1.0 - s))),
            Op::Tanh(a) => self.accumulate(grads, *a, g.zip_map(y, |gv, t| gv * (1.0 - t * t))),
            Op::Relu(a) => {
                self.accumulate(grads, *a, g.zip_map(self.value(*a), |gv, x| if x > 0.0 { gv } else { 0.0 }))
            }
            Op::SoftmaxRow(a) => {
                let mut ga = g.clone();
                for i in 0..ga.rows() {
                    let yr = y.row(i);
                    let dot: f64 = g.row(i).iter().zip(yr).map(|(a, b)| a * b).sum();
                    ga.row_mut(i).iter_mut().zip(yr).for_each(|(gv, s)| *gv = s * (*gv - dot));
                }
                self.accumulate(grads, *a, ga);
            }
            Op::LayerNormRow(a, inv_std) => {
                let mut ga = g.clone();
                let n = g.cols() as f64;
                for (i, &is) in inv_std.iter().enumerate() {
                    let yr = y.row(i);
                    let gr = g.row(i);
                    let mean_g = gr.iter().sum::<f64>() / n;
                    let mean_gy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / n;
                    for (j, out) in ga.row_mut(i).iter_mut().enumerate() {
                        *out = is * (gr[j] - mean_g - yr[j] * mean_gy);
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::Dropout(a, mask) => self.accumulate(grads, *a, g.zip_map(mask, |gv, m| gv * m)),
            Op::L2NormalizeRow(a, norms) => {
                let mut ga = g.clone();
                for (i, &n) in norms.iter().enumerate() {
                    let yr = y.row(i);
                    let dot: f64 = g.row(i).iter().zip(yr).map(|(a, b)| a * b).sum();
                    ga.row_mut(i).iter_mut().zip(yr).for_each(|(gv, u)| *gv = (*gv - u * dot) / n);
                }
                self.accumulate(grads, *a, ga);
            }
            Op::SumRows(a) | Op::MeanRows(a) => {
                let (r, c) = self.shape(*a);
                let scale = if matches!(node.op, Op::MeanRows(_)) { 1.0 / r as f64 } else { 1.0 };
                let mut ga = Mat::zeros(r, c);
                for i in 0..r {
                    ga.row_mut(i).iter_mut().zip(g.as_slice()).for_each(|(o, v)| *o = v * scale);
                }
                self.accumulate(grads, *a, ga);
            }
            Op::RowDot(a, b) => {
                let mut ga = self.value(*b).clone();
                let mut gb = self.value(*a).clone();
                for i in 0..g.rows() {
                    let s = g.get(i, 0);
                    ga.row_mut(i).iter_mut().for_each(|v| *v *= s);
                    gb.row_mut(i).iter_mut().for_each(|v| *v *= s);
                }
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::Reshape(a) => {
                let (r, c) = self.shape(*a);
                self.accumulate(grads, *a, Mat::from_vec(r, c, g.as_slice().to_vec()));
            }
            Op::CrossEntropy(logits, target, probs) => {
                let scale = g.get(0, 0);
                let mut gl = probs.clone();
                gl.as_mut_slice()[*target] -= 1.0;
                gl.scale_in_place(scale);
                self.accumulate(grads, *logits, gl);
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

fn column_sums(m: &Mat) -> Mat {
    let mut out = Mat::zeros(1, m.cols());
    for i in 0..m.rows() {
        out.as_mut_slice().iter_mut().zip(m.row(i)).for_each(|(o, v)| *o += v);
    }
    out
}
