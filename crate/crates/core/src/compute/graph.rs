//! Tape-based reverse-mode automatic differentiation over dense 2-D tensors.
//!
//! A [`Graph`] records every operation as a node in an append-only arena.
//! Nodes are addressed by [`Var`] handles, so inputs always have smaller
//! indices than the nodes that consume them and the backward pass is a
//! single reverse sweep over the arena.
//!
//! Parameters live outside the graph in a [`ParamStore`]. A graph copies the
//! current parameter values in when they are first referenced and writes
//! gradients back out in [`Graph::backward`].

use super::params::{ParamId, ParamStore};
use super::ComputeError;

/// Dense row-major matrix of `f64`. Scalars are `1 × 1`, row vectors `1 × n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ComputeError> {
        if rows * cols != data.len() {
            return Err(ComputeError::ShapeMismatch {
                op: "tensor",
                expected: format!("{} values for {rows}x{cols}", rows * cols),
                found: format!("{} values", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn scalar(value: f64) -> Self {
        Self { rows: 1, cols: 1, data: vec![value] }
    }

    pub fn row(values: Vec<f64>) -> Self {
        Self { rows: 1, cols: values.len(), data: values }
    }

    pub fn column(values: Vec<f64>) -> Self {
        Self { rows: values.len(), cols: 1, data: values }
    }

    /// Builds a tensor from a slice of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ComputeError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(ComputeError::ShapeMismatch {
                    op: "from_rows",
                    expected: format!("{cols} columns"),
                    found: format!("{} columns", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The single value of a `1 × 1` tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Affine(Var, f64),
    Exp(Var),
    Ln(Var),
    Softplus(Var),
    Sigmoid(Var),
    Relu(Var),
    Tanh(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    Sum(Var),
    SumCols(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    BroadcastCols(Var),
    CumsumCols(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients of a scalar with respect to every node of a graph.
pub struct Gradients {
    grads: Vec<Vec<f64>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient with respect to `v`, as a tensor shaped like `v`.
    pub fn wrt(&self, v: Var) -> Tensor {
        let (r, c) = self.shapes[v.0];
        let g = &self.grads[v.0];
        if g.is_empty() {
            Tensor::zeros(r, c)
        } else {
            Tensor { rows: r, cols: c, data: g.clone() }
        }
    }
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-subtracted softmax of one row.
pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Max-subtracted log-softmax of one row.
pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor { rows: t.rows, cols: t.cols, data: t.data.iter().map(|&v| f(v)).collect() }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor { rows: a.rows, cols: a.cols, data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect() }
}

fn accumulate(slot: &mut Vec<f64>, len: usize, f: impl Fn(usize) -> f64) {
    if slot.is_empty() {
        *slot = (0..len).map(f).collect();
    } else {
        for (i, s) in slot.iter_mut().enumerate() {
            *s += f(i);
        }
    }
}

/// Arena of recorded operations.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Records a value that receives no parameter gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant)
    }

    /// References a parameter; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let idx = id.index();
        if let Some(Some(v)) = self.param_vars.get(idx) {
            return *v;
        }
        let v = self.push(store.value(id).clone(), Op::Param(id));
        if self.param_vars.len() <= idx {
            self.param_vars.resize(idx + 1, None);
        }
        self.param_vars[idx] = Some(v);
        v
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert_eq!(sa, sb, "{op}: shape mismatch {sa:?} vs {sb:?}");
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.cols, tb.rows, "matmul: {:?} x {:?}", ta.shape(), tb.shape());
        let (n, k, m) = (ta.rows, ta.cols, tb.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let orow = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let av = ta.data[i * k + p];
                if av == 0.0 {
                    continue;
                }
                let brow = &tb.data[p * m..(p + 1) * m];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        self.push(Tensor { rows: n, cols: m, data: out }, Op::MatMul(a, b))
    }

    /// Adds the `1 × m` row `bias` to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(bias));
        assert!(tb.rows == 1 && tb.cols == ta.cols, "add_bias: {:?} + {:?}", ta.shape(), tb.shape());
        let m = ta.cols;
        let data = ta.data.iter().enumerate().map(|(i, v)| v + tb.data[i % m]).collect();
        self.push(Tensor { rows: ta.rows, cols: m, data }, Op::AddBias(a, bias))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.same_shape("add", a, b);
        let t = zip(self.value(a), self.value(b), |x, y| x + y);
        self.push(t, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.same_shape("sub", a, b);
        let t = zip(self.value(a), self.value(b), |x, y| x - y);
        self.push(t, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.same_shape("mul", a, b);
        let t = zip(self.value(a), self.value(b), |x, y| x * y);
        self.push(t, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.same_shape("div", a, b);
        let t = zip(self.value(a), self.value(b), |x, y| x / y);
        self.push(t, Op::Div(a, b))
    }

    /// `scale * a + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let t = map(self.value(a), |x| scale * x + shift);
        self.push(t, Op::Affine(a, scale))
    }

    pub fn scale(&mut self, a: Var, scale: f64) -> Var {
        self.affine(a, scale, 0.0)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.affine(a, -1.0, 0.0)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let t = map(self.value(a), f64::exp);
        self.push(t, Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let t = map(self.value(a), f64::ln);
        self.push(t, Op::Ln(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let t = map(self.value(a), softplus);
        self.push(t, Op::Softplus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = map(self.value(a), sigmoid);
        self.push(t, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = map(self.value(a), |x| x.max(0.0));
        self.push(t, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = map(self.value(a), f64::tanh);
        self.push(t, Op::Tanh(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let t = map(self.value(a), |x| x * x);
        self.push(t, Op::Square(a))
    }

    /// Elementwise clamp into `[lo, hi]`; gradient passes only inside the range.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let t = map(self.value(a), |x| x.clamp(lo, hi));
        self.push(t, Op::Clamp(a, lo, hi))
    }

    pub fn clamp_min(&mut self, a: Var, lo: f64) -> Var {
        self.clamp(a, lo, f64::INFINITY)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let mut data = Vec::with_capacity(ta.len());
        for r in 0..ta.rows {
            data.extend(softmax(ta.row_slice(r)));
        }
        let t = Tensor { rows: ta.rows, cols: ta.cols, data };
        self.push(t, Op::SoftmaxRows(a))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let mut data = Vec::with_capacity(ta.len());
        for r in 0..ta.rows {
            data.extend(log_softmax(ta.row_slice(r)));
        }
        let t = Tensor { rows: ta.rows, cols: ta.cols, data };
        self.push(t, Op::LogSoftmaxRows(a))
    }

    /// Sum of all entries, as a `1 × 1` tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Row sums: `n × m` to `n × 1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let data = (0..ta.rows).map(|r| ta.row_slice(r).iter().sum()).collect();
        let t = Tensor { rows: ta.rows, cols: 1, data };
        self.push(t, Op::SumCols(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols: no inputs");
        let rows = self.shape(parts[0]).0;
        let cols: usize = parts.iter().map(|p| self.shape(*p).1).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                let t = self.value(*p);
                assert_eq!(t.rows, rows, "concat_cols: row mismatch");
                data.extend_from_slice(t.row_slice(r));
            }
        }
        self.push(Tensor { rows, cols, data }, Op::ConcatCols(parts.to_vec()))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let ta = self.value(a);
        assert!(start < end && end <= ta.cols, "slice_cols: {start}..{end} of {}", ta.cols);
        let mut data = Vec::with_capacity(ta.rows * (end - start));
        for r in 0..ta.rows {
            data.extend_from_slice(&ta.row_slice(r)[start..end]);
        }
        let t = Tensor { rows: ta.rows, cols: end - start, data };
        self.push(t, Op::SliceCols(a, start))
    }

    /// Repeats an `n × 1` column `width` times.
    pub fn broadcast_cols(&mut self, a: Var, width: usize) -> Var {
        let ta = self.value(a);
        assert_eq!(ta.cols, 1, "broadcast_cols: input must be a column");
        let data = ta.data.iter().flat_map(|&v| std::iter::repeat_n(v, width)).collect();
        let t = Tensor { rows: ta.rows, cols: width, data };
        self.push(t, Op::BroadcastCols(a))
    }

    /// Running sum along each row.
    pub fn cumsum_cols(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let mut data = ta.data.clone();
        for r in 0..ta.rows {
            let row = &mut data[r * ta.cols..(r + 1) * ta.cols];
            for c in 1..row.len() {
                row[c] += row[c - 1];
            }
        }
        let t = Tensor { rows: ta.rows, cols: ta.cols, data };
        self.push(t, Op::CumsumCols(a))
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn gradients(&self, loss: Var) -> Result<Gradients, ComputeError> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(ComputeError::NonScalarLoss { rows: shape.0, cols: shape.1 });
        }
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); loss.0 + 1];
        grads[loss.0] = vec![1.0];
        for i in (0..=loss.0).rev() {
            let dy = std::mem::take(&mut grads[i]);
            if dy.is_empty() {
                continue;
            }
            self.propagate(i, &dy, &mut grads);
            grads[i] = dy;
        }
        grads.resize(self.nodes.len(), Vec::new());
        let shapes = self.nodes.iter().map(|n| n.value.shape()).collect();
        Ok(Gradients { grads, shapes })
    }

    /// Accumulates `∂loss/∂param` into the store for every referenced parameter.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<(), ComputeError> {
        let grads = self.gradients(loss)?;
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(id) = node.op {
                let g = &grads.grads[i];
                if !g.is_empty() {
                    store.accumulate_grad(id, g);
                }
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, dy: &[f64], grads: &mut [Vec<f64>]) {
        let node = &self.nodes[i];
        let y = &node.value;
        let n = dy.len();
        match &node.op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (rows, k, m) = (ta.rows, ta.cols, tb.cols);
                // dA = dY · Bᵀ
                let mut da = vec![0.0; rows * k];
                for r in 0..rows {
                    let dyr = &dy[r * m..(r + 1) * m];
                    for p in 0..k {
                        let brow = &tb.data[p * m..(p + 1) * m];
                        da[r * k + p] = dyr.iter().zip(brow).map(|(x, y)| x * y).sum();
                    }
                }
                // dB = Aᵀ · dY
                let mut db = vec![0.0; k * m];
                for r in 0..rows {
                    let dyr = &dy[r * m..(r + 1) * m];
                    for p in 0..k {
                        let av = ta.data[r * k + p];
                        if av == 0.0 {
                            continue;
                        }
                        let dbrow = &mut db[p * m..(p + 1) * m];
                        for (d, &g) in dbrow.iter_mut().zip(dyr) {
                            *d += av * g;
                        }
                    }
                }
                accumulate(&mut grads[a.0], da.len(), |j| da[j]);
                accumulate(&mut grads[b.0], db.len(), |j| db[j]);
            }
            Op::AddBias(a, b) => {
                let m = y.cols;
                accumulate(&mut grads[a.0], n, |j| dy[j]);
                let mut db = vec![0.0; m];
                for (j, g) in dy.iter().enumerate() {
                    db[j % m] += g;
                }
                accumulate(&mut grads[b.0], m, |j| db[j]);
            }
            Op::Add(a, b) => {
                accumulate(&mut grads[a.0], n, |j| dy[j]);
                accumulate(&mut grads[b.0], n, |j| dy[j]);
            }
            Op::Sub(a, b) => {
                accumulate(&mut grads[a.0], n, |j| dy[j]);
                accumulate(&mut grads[b.0], n, |j| -dy[j]);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&self.value(*a).data, &self.value(*b).data);
                accumulate(&mut grads[a.0], n, |j| dy[j] * vb[j]);
                accumulate(&mut grads[b.0], n, |j| dy[j] * va[j]);
            }
            Op::Div(a, b) => {
                let (va, vb) = (&self.value(*a).data, &self.value(*b).data);
                accumulate(&mut grads[a.0], n, |j| dy[j] / vb[j]);
                accumulate(&mut grads[b.0], n, |j| -dy[j] * va[j] / (vb[j] * vb[j]));
            }
            Op::Affine(a, s) => accumulate(&mut grads[a.0], n, |j| dy[j] * s),
            Op::Exp(a) => accumulate(&mut grads[a.0], n, |j| dy[j] * y.data[j]),
            Op::Ln(a) => {
                let va = &self.value(*a).data;
                accumulate(&mut grads[a.0], n, |j| dy[j] / va[j]);
            }
            Op::Softplus(a) => {
                let va = &self.value(*a).data;
                accumulate(&mut grads[a.0], n, |j| dy[j] * sigmoid(va[j]));
            }
            Op::Sigmoid(a) => {
                accumulate(&mut grads[a.0], n, |j| dy[j] * y.data[j] * (1.0 - y.data[j]));
            }
            Op::Relu(a) => {
                let va = &self.value(*a).data;
                accumulate(&mut grads[a.0], n, |j| if va[j] > 0.0 { dy[j] } else { 0.0 });
            }
            Op::Tanh(a) => {
                accumulate(&mut grads[a.0], n, |j| dy[j] * (1.0 - y.data[j] * y.data[j]));
            }
            Op::Square(a) => {
                let va = &self.value(*a).data;
                accumulate(&mut grads[a.0], n, |j| 2.0 * va[j] * dy[j]);
            }
            Op::Clamp(a, lo, hi) => {
                let va = &self.value(*a).data;
                accumulate(&mut grads[a.0], n, |j| if va[j] >= *lo && va[j] <= *hi { dy[j] } else { 0.0 });
            }
            Op::SoftmaxRows(a) => {
                let m = y.cols;
                let mut da = vec![0.0; n];
                for r in 0..y.rows {
                    let (yr, dyr) = (&y.data[r * m..(r + 1) * m], &dy[r * m..(r + 1) * m]);
                    let dot: f64 = yr.iter().zip(dyr).map(|(p, g)| p * g).sum();
                    for c in 0..m {
                        da[r * m + c] = yr[c] * (dyr[c] - dot);
                    }
                }
                accumulate(&mut grads[a.0], n, |j| da[j]);
            }
            Op::LogSoftmaxRows(a) => {
                let m = y.cols;
                let mut da = vec![0.0; n];
                for r in 0..y.rows {
                    let (yr, dyr) = (&y.data[r * m..(r + 1) * m], &dy[r * m..(r + 1) * m]);
                    let total: f64 = dyr.iter().sum();
                    for c in 0..m {
                        da[r * m + c] = dyr[c] - yr[c].exp() * total;
                    }
                }
                accumulate(&mut grads[a.0], n, |j| da[j]);
            }
            Op::Sum(a) => {
                let len = self.value(*a).len();
                accumulate(&mut grads[a.0], len, |_| dy[0]);
            }
            Op::SumCols(a) => {
                let ta = self.value(*a);
                let m = ta.cols;
                accumulate(&mut grads[a.0], ta.len(), |j| dy[j / m]);
            }
            Op::ConcatCols(parts) => {
                let total = y.cols;
                let mut offset = 0;
                for p in parts {
                    let w = self.shape(*p).1;
                    accumulate(&mut grads[p.0], y.rows * w, |j| {
                        let (r, c) = (j / w, j % w);
                        dy[r * total + offset + c]
                    });
                    offset += w;
                }
            }
            Op::SliceCols(a, start) => {
                let ta = self.value(*a);
                let (m, w, start) = (ta.cols, y.cols, *start);
                accumulate(&mut grads[a.0], ta.len(), |j| {
                    let (r, c) = (j / m, j % m);
                    if c >= start && c < start + w {
                        dy[r * w + c - start]
                    } else {
                        0.0
                    }
                });
            }
            Op::BroadcastCols(a) => {
                let w = y.cols;
                accumulate(&mut grads[a.0], y.rows, |r| dy[r * w..(r + 1) * w].iter().sum());
            }
            Op::CumsumCols(a) => {
                let m = y.cols;
                let mut da = dy.to_vec();
                for r in 0..y.rows {
                    let row = &mut da[r * m..(r + 1) * m];
                    for c in (0..m.saturating_sub(1)).rev() {
                        row[c] += row[c + 1];
                    }
                }
                accumulate(&mut grads[a.0], n, |j| da[j]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::scalar(3.0));
        let y = g.square(x);
        let l = g.sum(y);
        let grads = g.gradients(l).unwrap();
        assert_eq!(grads.wrt(x).item(), 6.0);
    }

    #[test]
    fn softplus_gradient_at_zero() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::scalar(0.0));
        let y = g.softplus(x);
        assert!((g.value(y).item() - 2f64.ln()).abs() < 1e-15);
        let grads = g.gradients(y).unwrap();
        assert!((grads.wrt(x).item() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(vec![1.0, 2.0]));
        assert!(matches!(g.gradients(x), Err(ComputeError::NonScalarLoss { .. })));
    }

    #[test]
    fn reused_node_accumulates() {
        // y = x * x via mul, dy/dx = 2x
        let mut g = Graph::new();
        let x = g.constant(Tensor::scalar(-1.5));
        let y = g.mul(x, x);
        let grads = g.gradients(y).unwrap();
        assert_eq!(grads.wrt(x).item(), -3.0);
    }

    #[test]
    fn cumsum_and_broadcast() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(vec![1.0, 2.0, 3.0]));
        let c = g.cumsum_cols(x);
        assert_eq!(g.value(c).data(), &[1.0, 3.0, 6.0]);
        let h = g.constant(Tensor::column(vec![2.0, -1.0]));
        let b = g.broadcast_cols(h, 3);
        assert_eq!(g.value(b).data(), &[2.0, 2.0, 2.0, -1.0, -1.0, -1.0]);
    }

    #[test]
    fn softmax_handles_large_logits() {
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
