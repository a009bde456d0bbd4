//! Define-by-run computation tape: every primitive appends a node holding
//! its forward value, and [`Tape::backward`] walks the nodes in reverse.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Result, TensorError};
use crate::param::{ParamId, ParamStore};
use crate::sparse::SparseMatrix;
use crate::tensor::{gemm, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub(crate) fn index(self) -> usize {
        self.0
    }
}

const NORM_EPS: f32 = 1e-12;
const LN_EPS: f32 = 1e-5;

#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    Const,
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    BatchMatMul { a: Var, b: Var, ta: bool, tb: bool },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow { a: Var, bias: Var },
    Scale(Var, f32),
    AddScalar(Var),
    Concat { parts: Vec<Var>, axis: usize },
    Slice { a: Var, axis: usize, start: usize },
    Gather { table: Var, indices: Vec<usize> },
    Reshape(Var),
    Permute { a: Var, perm: Vec<usize> },
    Unfold { a: Var, width: usize },
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Softmax { a: Var, axis: usize },
    MaskedSoftmax { a: Var },
    MaskedMax { a: Var, argmax: Vec<usize> },
    Mean { a: Var, axis: usize },
    SumAll(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f32>, inv_std: Vec<f32> },
    Normalize { a: Var, norms: Vec<f32> },
    RowDot(Var, Var),
    Cosine(Var, Var),
    Spmm { m: Arc<SparseMatrix>, b: Var },
    SoftmaxCe { logits: Var, targets: Vec<usize>, probs: Vec<f32> },
}

pub(crate) struct Node {
    pub(crate) value: Tensor,
    pub(crate) op: Op,
    pub(crate) needs_grad: bool,
}

/// Records primitives applied to [`Var`]s.
#[derive(Default)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
    pub(crate) params: HashMap<ParamId, Var>,
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

pub(crate) fn permute_data(src: &[f32], shape: &[usize], perm: &[usize]) -> Vec<f32> {
    let rank = shape.len();
    let mut strides = vec![1usize; rank];
    for i in (0..rank.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let src_strides: Vec<usize> = perm.iter().map(|&p| strides[p]).collect();
    let mut out = Vec::with_capacity(src.len());
    let mut idx = vec![0usize; rank];
    let mut offset = 0usize;
    for _ in 0..src.len() {
        out.push(src[offset]);
        for d in (0..rank).rev() {
            idx[d] += 1;
            offset += src_strides[d];
            if idx[d] < out_shape[d] {
                break;
            }
            offset -= src_strides[d] * idx[d];
            idx[d] = 0;
        }
    }
    out
}

fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Const,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf bound to a stored parameter; repeated calls reuse the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.leaf(store.value(id).clone());
        self.params.insert(id, v);
        v
    }

    fn rank2(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        match *self.shape(v) {
            [r, c] => Ok((r, c)),
            ref s => Err(TensorError::invalid(op, format!("expected rank 2, got {s:?}"))),
        }
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::mismatch(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn unary(&mut self, a: Var, f: impl Fn(f32) -> f32, op: Op) -> Var {
        let src = self.value(a);
        let data = src.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::new(src.shape().to_vec(), data).expect("same size");
        self.push(value, op, &[a])
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f32, f32) -> f32, op: Op, name: &'static str) -> Result<Var> {
        self.same_shape(a, b, name)?;
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(value, op, &[a, b]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, b, false, false)
    }

    /// `op(a) · op(b)` where `ta`/`tb` transpose the stored operand.
    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let (ar, ac) = self.rank2(a, "matmul")?;
        let (br, bc) = self.rank2(b, "matmul")?;
        let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
        let (k2, n) = if tb { (bc, br) } else { (br, bc) };
        if k != k2 {
            return Err(TensorError::mismatch("matmul", self.shape(a), self.shape(b)));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a).data(), ta, self.value(b).data(), tb, &mut out, 0.0);
        let value = Tensor::new(vec![m, n], out)?;
        Ok(self.push(value, Op::MatMul { a, b, ta, tb }, &[a, b]))
    }

    /// Batched `op(a[g]) · op(b[g])` over rank-3 operands.
    pub fn batch_matmul(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] {
            return Err(TensorError::mismatch("batch_matmul", &sa, &sb));
        }
        let g = sa[0];
        let (m, k) = if ta { (sa[2], sa[1]) } else { (sa[1], sa[2]) };
        let (k2, n) = if tb { (sb[2], sb[1]) } else { (sb[1], sb[2]) };
        if k != k2 {
            return Err(TensorError::mismatch("batch_matmul", &sa, &sb));
        }
        let mut out = vec![0.0; g * m * n];
        let (x, y) = (self.value(a).data(), self.value(b).data());
        for i in 0..g {
            gemm(
                m,
                k,
                n,
                &x[i * m * k..(i + 1) * m * k],
                ta,
                &y[i * k * n..(i + 1) * k * n],
                tb,
                &mut out[i * m * n..(i + 1) * m * n],
                0.0,
            );
        }
        let value = Tensor::new(vec![g, m, n], out)?;
        Ok(self.push(value, Op::BatchMatMul { a, b, ta, tb }, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b), "sub")
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b), "mul")
    }

    /// Adds a vector to every slice along the last axis.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let n = *self.shape(a).last().unwrap_or(&0);
        if self.shape(bias) != [n] {
            return Err(TensorError::mismatch("add_row", self.shape(a), self.shape(bias)));
        }
        let b = self.value(bias).data().to_vec();
        let src = self.value(a);
        let mut data = src.data().to_vec();
        for chunk in data.chunks_mut(n) {
            for (d, x) in chunk.iter_mut().zip(&b) {
                *d += x;
            }
        }
        let value = Tensor::new(src.shape().to_vec(), data)?;
        Ok(self.push(value, Op::AddRow { a, bias }, &[a, bias]))
    }

    pub fn scale(&mut self, a: Var, s: f32) -> Var {
        self.unary(a, |x| x * s, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: f32) -> Var {
        self.unary(a, |x| x + s, Op::AddScalar(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f32::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    /// Joins tensors that agree on every axis except `axis`.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::invalid("concat", "no inputs"))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(TensorError::invalid("concat", format!("axis {axis} out of range for {base:?}")));
        }
        let mut total = 0;
        for p in parts {
            let s = self.shape(*p);
            let ok = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !ok {
                return Err(TensorError::mismatch("concat", &base, s));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&base, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let v = self.value(*p);
                let block = v.shape()[axis] * inner;
                data.extend_from_slice(&v.data()[o * block..(o + 1) * block]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let value = Tensor::new(shape, data)?;
        Ok(self.push(
            value,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            parts,
        ))
    }

    /// `len` entries starting at `start` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() || start + len > shape[axis] {
            return Err(TensorError::invalid(
                "slice",
                format!("{start}..{} on axis {axis} of {shape:?}", start + len),
            ));
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * n + start) * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(value, Op::Slice { a, axis, start }, &[a]))
    }

    /// Rows of `table` selected by `indices` (embedding lookup).
    pub fn gather(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let shape = self.shape(table).to_vec();
        let Some((&rows, rest)) = shape.split_first() else {
            return Err(TensorError::invalid("gather", "scalar table"));
        };
        let width: usize = rest.iter().product();
        let src = self.value(table).data();
        let mut data = Vec::with_capacity(indices.len() * width);
        for &i in indices {
            if i >= rows {
                return Err(TensorError::invalid("gather", format!("index {i} >= {rows}")));
            }
            data.extend_from_slice(&src[i * width..(i + 1) * width]);
        }
        let mut out_shape = vec![indices.len()];
        out_shape.extend_from_slice(rest);
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(
            value,
            Op::Gather {
                table,
                indices: indices.to_vec(),
            },
            &[table],
        ))
    }

    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        self.gather(table, ids)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshaped(shape.to_vec())?;
        Ok(self.push(value, Op::Reshape(a), &[a]))
    }

    pub fn permute(&mut self, a: Var, perm: &[usize]) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let mut seen = vec![false; shape.len()];
        if perm.len() != shape.len() || perm.iter().any(|&p| p >= shape.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(TensorError::invalid("permute", format!("{perm:?} for {shape:?}")));
        }
        let data = permute_data(self.value(a).data(), &shape, perm);
        let out_shape = perm.iter().map(|&p| shape[p]).collect();
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(
            value,
            Op::Permute {
                a,
                perm: perm.to_vec(),
            },
            &[a],
        ))
    }

    /// Sliding windows over a `[batch, time, channels]` signal:
    /// row `(b, t)` holds `signal[b, t..t + width, :]` flattened.
    pub fn unfold(&mut self, a: Var, width: usize) -> Result<Var> {
        let [b, t, c] = *self.shape(a) else {
            return Err(TensorError::invalid("unfold", format!("expected rank 3, got {:?}", self.shape(a))));
        };
        if width == 0 || width > t {
            return Err(TensorError::invalid("unfold", format!("width {width} for length {t}")));
        }
        let windows = t - width + 1;
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(b * windows * width * c);
        for bi in 0..b {
            for ti in 0..windows {
                let start = (bi * t + ti) * c;
                data.extend_from_slice(&src[start..start + width * c]);
            }
        }
        let value = Tensor::new(vec![b * windows, width * c], data)?;
        Ok(self.push(value, Op::Unfold { a, width }, &[a]))
    }

    /// Valid-padding, stride-1 convolution of `[batch, time, c_in]` with
    /// `kernel: [width * c_in, c_out]` and `bias: [c_out]`, giving
    /// `[batch, time - width + 1, c_out]`.
    pub fn conv1d(&mut self, signal: Var, kernel: Var, bias: Var, width: usize) -> Result<Var> {
        let [b, t, _] = *self.shape(signal) else {
            return Err(TensorError::invalid("conv1d", format!("expected rank 3, got {:?}", self.shape(signal))));
        };
        let windows = self.unfold(signal, width)?;
        let y = self.matmul(windows, kernel)?;
        let y = self.add_row(y, bias)?;
        let c_out = self.shape(y)[1];
        self.reshape(y, &[b, t + 1 - width, c_out])
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(TensorError::invalid("softmax", format!("axis {axis} for {shape:?}")));
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let src = self.value(a).data();
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |k: usize| (o * n + k) * inner + i;
                let max = (0..n).map(|k| src[at(k)]).fold(f32::NEG_INFINITY, f32::max);
                let mut sum = 0.0;
                for k in 0..n {
                    let e = (src[at(k)] - max).exp();
                    out[at(k)] = e;
                    sum += e;
                }
                for k in 0..n {
                    out[at(k)] /= sum;
                }
            }
        }
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::Softmax { a, axis }, &[a]))
    }

    /// Softmax over the last axis of `[groups, rows, cols]` where columns at
    /// or beyond `lens[g]` get probability zero.
    pub fn masked_softmax(&mut self, a: Var, lens: &[usize]) -> Result<Var> {
        let [g, r, c] = *self.shape(a) else {
            return Err(TensorError::invalid("masked_softmax", format!("expected rank 3, got {:?}", self.shape(a))));
        };
        if lens.len() != g || lens.iter().any(|&l| l == 0 || l > c) {
            return Err(TensorError::invalid("masked_softmax", format!("lengths {lens:?} for {g}x{r}x{c}")));
        }
        let src = self.value(a).data();
        let mut out = vec![0.0; src.len()];
        for gi in 0..g {
            let len = lens[gi];
            for ri in 0..r {
                let base = (gi * r + ri) * c;
                let row = &src[base..base + len];
                let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                let mut sum = 0.0;
                for k in 0..len {
                    let e = (row[k] - max).exp();
                    out[base + k] = e;
                    sum += e;
                }
                for k in 0..len {
                    out[base + k] /= sum;
                }
            }
        }
        let value = Tensor::new(vec![g, r, c], out)?;
        Ok(self.push(value, Op::MaskedSoftmax { a }, &[a]))
    }

    /// Max over time of `[batch, time, channels]`, restricted to the first
    /// `lens[b]` steps of each sequence; gives `[batch, channels]`.
    pub fn masked_max_over_time(&mut self, a: Var, lens: &[usize]) -> Result<Var> {
        let [b, t, c] = *self.shape(a) else {
            return Err(TensorError::invalid("max_over_time", format!("expected rank 3, got {:?}", self.shape(a))));
        };
        if lens.len() != b || lens.iter().any(|&l| l == 0 || l > t) {
            return Err(TensorError::invalid("max_over_time", format!("lengths {lens:?} for {b}x{t}x{c}")));
        }
        let src = self.value(a).data();
        let mut out = vec![f32::NEG_INFINITY; b * c];
        let mut argmax = vec![0usize; b * c];
        for bi in 0..b {
            for ti in 0..lens[bi] {
                let base = (bi * t + ti) * c;
                for ci in 0..c {
                    let x = src[base + ci];
                    if x > out[bi * c + ci] {
                        out[bi * c + ci] = x;
                        argmax[bi * c + ci] = base + ci;
                    }
                }
            }
        }
        let value = Tensor::new(vec![b, c], out)?;
        Ok(self.push(value, Op::MaskedMax { a, argmax }, &[a]))
    }

    pub fn max_over_time(&mut self, a: Var) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if shape.len() != 3 {
            return Err(TensorError::invalid("max_over_time", format!("expected rank 3, got {shape:?}")));
        }
        self.masked_max_over_time(a, &vec![shape[1]; shape[0]])
    }

    /// Mean over `axis`, which is removed from the shape.
    pub fn mean_over_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(TensorError::invalid("mean", format!("axis {axis} for {shape:?}")));
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let src = self.value(a).data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..n {
                let row = &src[(o * n + k) * inner..(o * n + k + 1) * inner];
                for (d, x) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *d += x;
                }
            }
        }
        let inv = 1.0 / n as f32;
        out.iter_mut().for_each(|x| *x *= inv);
        let mut out_shape = shape;
        out_shape.remove(axis);
        let value = Tensor::new(out_shape, out)?;
        Ok(self.push(value, Op::Mean { a, axis }, &[a]))
    }

    /// Sum of all entries as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s: f32 = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1);
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f32)
    }

    /// Normalizes over the last axis, then applies `gamma` and `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let n = *self.shape(x).last().unwrap_or(&0);
        if self.shape(gamma) != [n] || self.shape(beta) != [n] {
            return Err(TensorError::mismatch("layer_norm", self.shape(x), self.shape(gamma)));
        }
        let src = self.value(x).data();
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let rows = src.len() / n.max(1);
        let mut xhat = Vec::with_capacity(src.len());
        let mut inv_std = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(src.len());
        for row in src.chunks(n) {
            let mean = row.iter().sum::<f32>() / n as f32;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n as f32;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(inv);
            for (k, v) in row.iter().enumerate() {
                let h = (v - mean) * inv;
                xhat.push(h);
                out.push(h * g[k] + b[k]);
            }
        }
        let value = Tensor::new(self.shape(x).to_vec(), out)?;
        Ok(self.push(
            value,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            &[x, gamma, beta],
        ))
    }

    /// Rows scaled to unit L2 norm.
    pub fn normalize_rows(&mut self, a: Var) -> Result<Var> {
        let (_, c) = self.rank2(a, "normalize_rows")?;
        let src = self.value(a).data();
        let mut norms = Vec::with_capacity(src.len() / c.max(1));
        let mut out = Vec::with_capacity(src.len());
        for row in src.chunks(c) {
            let norm = row.iter().map(|x| x * x).sum::<f32>().sqrt().max(NORM_EPS);
            norms.push(norm);
            out.extend(row.iter().map(|x| x / norm));
        }
        let value = Tensor::new(self.shape(a).to_vec(), out)?;
        Ok(self.push(value, Op::Normalize { a, norms }, &[a]))
    }

    /// Row-wise dot product of two `[rows, cols]` tensors, giving `[rows]`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "row_dot")?;
        let (r, c) = self.rank2(a, "row_dot")?;
        let (x, y) = (self.value(a).data(), self.value(b).data());
        let out = (0..r)
            .map(|i| dot(&x[i * c..(i + 1) * c], &y[i * c..(i + 1) * c]))
            .collect();
        let value = Tensor::new(vec![r], out)?;
        Ok(self.push(value, Op::RowDot(a, b), &[a, b]))
    }

    /// Row-wise cosine similarity, giving `[rows]`.
    pub fn cosine_similarity(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "cosine_similarity")?;
        let (r, c) = self.rank2(a, "cosine_similarity")?;
        let (x, y) = (self.value(a).data(), self.value(b).data());
        let out = (0..r)
            .map(|i| cosine(&x[i * c..(i + 1) * c], &y[i * c..(i + 1) * c]))
            .collect();
        let value = Tensor::new(vec![r], out)?;
        Ok(self.push(value, Op::Cosine(a, b), &[a, b]))
    }

    /// Constant sparse matrix times a dense `[cols, width]` tensor.
    pub fn spmm(&mut self, m: &Arc<SparseMatrix>, b: Var) -> Result<Var> {
        let (r, w) = self.rank2(b, "spmm")?;
        if r != m.cols() {
            return Err(TensorError::mismatch("spmm", &[m.rows(), m.cols()], self.shape(b)));
        }
        let mut out = vec![0.0; m.rows() * w];
        m.mul_dense(self.value(b).data(), w, &mut out);
        let value = Tensor::new(vec![m.rows(), w], out)?;
        Ok(self.push(value, Op::Spmm { m: Arc::clone(m), b }, &[b]))
    }

    /// Mean over rows of `-log softmax(logits)[target]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (b, c) = self.rank2(logits, "softmax_cross_entropy")?;
        if targets.len() != b || targets.iter().any(|&t| t >= c) {
            return Err(TensorError::invalid(
                "softmax_cross_entropy",
                format!("{} targets for logits {b}x{c}", targets.len()),
            ));
        }
        let src = self.value(logits).data();
        let mut probs = vec![0.0; b * c];
        let mut loss = 0.0f64;
        for i in 0..b {
            let row = &src[i * c..(i + 1) * c];
            let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let sum: f32 = row.iter().map(|x| (x - max).exp()).sum();
            for k in 0..c {
                probs[i * c + k] = (row[k] - max).exp() / sum;
            }
            loss += f64::from(max + sum.ln() - row[targets[i]]);
        }
        let value = Tensor::scalar((loss / b as f64) as f32);
        Ok(self.push(
            value,
            Op::SoftmaxCe {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            &[logits],
        ))
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn cosine(a: &[f32], b: &[f32]) -> f32 {
    let na = dot(a, a).sqrt().max(NORM_EPS);
    let nb = dot(b, b).sqrt().max(NORM_EPS);
    dot(a, b) / (na * nb)
}

pub(crate) const fn norm_eps() -> f32 {
    NORM_EPS
}
