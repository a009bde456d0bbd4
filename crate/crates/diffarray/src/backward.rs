use crate::error::{Result, TensorError};
use crate::param::{ParamId, ParamStore};
use crate::tape::{cosine, dot, norm_eps, permute_data, Node, Op, Tape, Var};
use crate::tensor::gemm;

/// Gradients of a scalar loss with respect to the tape's trainable leaves.
pub struct Gradients {
    grads: Vec<Option<Vec<f32>>>,
    params: Vec<(ParamId, Var)>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f32]> {
        self.grads.get(v.index())?.as_deref()
    }

    /// Adds every parameter gradient into the store's accumulators.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for &(id, v) in &self.params {
            if let Some(g) = self.get(v) {
                store.accumulate_grad(id, g);
            }
        }
    }
}

fn slot<'a>(grads: &'a mut [Option<Vec<f32>>], nodes: &[Node], v: Var) -> Option<&'a mut Vec<f32>> {
    let i = v.index();
    if !nodes[i].needs_grad {
        return None;
    }
    Some(grads[i].get_or_insert_with(|| vec![0.0; nodes[i].value.len()]))
}

impl Tape {
    /// Reverse pass from a scalar `loss`, consuming the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        let li = loss.index();
        let shape = self.nodes[li].value.shape();
        if self.nodes[li].value.len() != 1 {
            return Err(TensorError::NotScalar(shape.to_vec()));
        }
        if !self.nodes[li].needs_grad {
            return Err(TensorError::NoTape);
        }
        let nodes = &self.nodes;
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; nodes.len()];
        grads[li] = Some(vec![1.0]);
        for i in (0..=li).rev() {
            if !nodes[i].needs_grad || matches!(nodes[i].op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            propagate(nodes, i, &g, &mut grads);
        }
        let params = self.params.into_iter().collect();
        Ok(Gradients { grads, params })
    }
}

fn propagate(nodes: &[Node], i: usize, g: &[f32], grads: &mut [Option<Vec<f32>>]) {
    let out = &nodes[i].value;
    let val = |v: Var| &nodes[v.index()].value;
    macro_rules! with {
        ($v:expr, |$buf:ident| $body:expr) => {
            if let Some($buf) = slot(grads, nodes, $v) {
                $body
            }
        };
    }
    match &nodes[i].op {
        Op::Leaf | Op::Const => {}
        &Op::MatMul { a, b, ta, tb } => {
            let (av, bv) = (val(a), val(b));
            let (m, n) = (out.shape()[0], out.shape()[1]);
            let k = if ta { av.shape()[0] } else { av.shape()[1] };
            with!(a, |da| if ta {
                gemm(k, n, m, bv.data(), tb, g, true, da, 1.0)
            } else {
                gemm(m, n, k, g, false, bv.data(), !tb, da, 1.0)
            });
            with!(b, |db| if tb {
                gemm(n, m, k, g, true, av.data(), ta, db, 1.0)
            } else {
                gemm(k, m, n, av.data(), !ta, g, false, db, 1.0)
            });
        }
        &Op::BatchMatMul { a, b, ta, tb } => {
            let (av, bv) = (val(a), val(b));
            let (groups, m, n) = (out.shape()[0], out.shape()[1], out.shape()[2]);
            let k = if ta { av.shape()[1] } else { av.shape()[2] };
            let (mk, kn, mn) = (m * k, k * n, m * n);
            with!(a, |da| for q in 0..groups {
                let (gq, bq, dq) = (&g[q * mn..(q + 1) * mn], &bv.data()[q * kn..(q + 1) * kn], &mut da[q * mk..(q + 1) * mk]);
                if ta {
                    gemm(k, n, m, bq, tb, gq, true, dq, 1.0)
                } else {
                    gemm(m, n, k, gq, false, bq, !tb, dq, 1.0)
                }
            });
            with!(b, |db| for q in 0..groups {
                let (gq, aq, dq) = (&g[q * mn..(q + 1) * mn], &av.data()[q * mk..(q + 1) * mk], &mut db[q * kn..(q + 1) * kn]);
                if tb {
                    gemm(n, m, k, gq, true, aq, ta, dq, 1.0)
                } else {
                    gemm(k, m, n, aq, !ta, gq, false, dq, 1.0)
                }
            });
        }
        &Op::Add(a, b) => {
            with!(a, |d| axpy(d, g, 1.0));
            with!(b, |d| axpy(d, g, 1.0));
        }
        &Op::Sub(a, b) => {
            with!(a, |d| axpy(d, g, 1.0));
            with!(b, |d| axpy(d, g, -1.0));
        }
        &Op::Mul(a, b) => {
            let (av, bv) = (val(a).data(), val(b).data());
            with!(a, |d| for k in 0..d.len() {
                d[k] += g[k] * bv[k];
            });
            with!(b, |d| for k in 0..d.len() {
                d[k] += g[k] * av[k];
            });
        }
        &Op::AddRow { a, bias } => {
            with!(a, |d| axpy(d, g, 1.0));
            with!(bias, |d| {
                let n = d.len();
                for chunk in g.chunks(n) {
                    axpy(d, chunk, 1.0);
                }
            });
        }
        &Op::Scale(a, s) => with!(a, |d| axpy(d, g, s)),
        &Op::AddScalar(a) | &Op::Reshape(a) => with!(a, |d| axpy(d, g, 1.0)),
        Op::Concat { parts, axis } => {
            let shape = out.shape();
            let outer: usize = shape[..*axis].iter().product();
            let inner: usize = shape[axis + 1..].iter().product();
            let total = shape[*axis] * inner;
            let mut offset = 0;
            for &p in parts {
                let block = val(p).shape()[*axis] * inner;
                with!(p, |d| for o in 0..outer {
                    axpy(&mut d[o * block..(o + 1) * block], &g[o * total + offset..o * total + offset + block], 1.0);
                });
                offset += block;
            }
        }
        &Op::Slice { a, axis, start } => {
            let src_shape = val(a).shape();
            let outer: usize = src_shape[..axis].iter().product();
            let inner: usize = src_shape[axis + 1..].iter().product();
            let n = src_shape[axis];
            let len = out.shape()[axis];
            with!(a, |d| for o in 0..outer {
                let base = (o * n + start) * inner;
                axpy(&mut d[base..base + len * inner], &g[o * len * inner..(o + 1) * len * inner], 1.0);
            });
        }
        Op::Gather { table, indices } => {
            let width = val(*table).len() / val(*table).shape()[0].max(1);
            with!(*table, |d| for (r, &ix) in indices.iter().enumerate() {
                axpy(&mut d[ix * width..(ix + 1) * width], &g[r * width..(r + 1) * width], 1.0);
            });
        }
        Op::Permute { a, perm } => {
            let mut inverse = vec![0; perm.len()];
            for (k, &p) in perm.iter().enumerate() {
                inverse[p] = k;
            }
            let back = permute_data(g, out.shape(), &inverse);
            with!(*a, |d| axpy(d, &back, 1.0));
        }
        &Op::Unfold { a, width } => {
            let (t, c) = (val(a).shape()[1], val(a).shape()[2]);
            let windows = t - width + 1;
            let row = width * c;
            with!(a, |d| for (r, chunk) in g.chunks(row).enumerate() {
                let (bi, ti) = (r / windows, r % windows);
                let start = (bi * t + ti) * c;
                axpy(&mut d[start..start + row], chunk, 1.0);
            });
        }
        &Op::Tanh(a) => with!(a, |d| for k in 0..d.len() {
            let y = out.data()[k];
            d[k] += g[k] * (1.0 - y * y);
        }),
        &Op::Sigmoid(a) => with!(a, |d| for k in 0..d.len() {
            let y = out.data()[k];
            d[k] += g[k] * y * (1.0 - y);
        }),
        &Op::Relu(a) => with!(a, |d| for k in 0..d.len() {
            if out.data()[k] > 0.0 {
                d[k] += g[k];
            }
        }),
        &Op::Softmax { a, axis } => {
            let shape = out.shape();
            let outer: usize = shape[..axis].iter().product();
            let inner: usize = shape[axis + 1..].iter().product();
            let n = shape[axis];
            let y = out.data();
            with!(a, |d| for o in 0..outer {
                for i in 0..inner {
                    let at = |k: usize| (o * n + k) * inner + i;
                    let s: f32 = (0..n).map(|k| g[at(k)] * y[at(k)]).sum();
                    for k in 0..n {
                        d[at(k)] += y[at(k)] * (g[at(k)] - s);
                    }
                }
            });
        }
        &Op::MaskedSoftmax { a } => {
            let c = out.shape()[2];
            let y = out.data();
            with!(a, |d| for (r, (yr, gr)) in y.chunks(c).zip(g.chunks(c)).enumerate() {
                let s = dot(yr, gr);
                for k in 0..c {
                    d[r * c + k] += yr[k] * (gr[k] - s);
                }
            });
        }
        Op::MaskedMax { a, argmax } => with!(*a, |d| for (k, &src) in argmax.iter().enumerate() {
            d[src] += g[k];
        }),
        &Op::Mean { a, axis } => {
            let shape = val(a).shape();
            let outer: usize = shape[..axis].iter().product();
            let inner: usize = shape[axis + 1..].iter().product();
            let n = shape[axis];
            let inv = 1.0 / n as f32;
            with!(a, |d| for o in 0..outer {
                for k in 0..n {
                    axpy(&mut d[(o * n + k) * inner..(o * n + k + 1) * inner], &g[o * inner..(o + 1) * inner], inv);
                }
            });
        }
        &Op::SumAll(a) => with!(a, |d| d.iter_mut().for_each(|x| *x += g[0])),
        Op::LayerNorm {
            x,
            gamma,
            beta,
            xhat,
            inv_std,
        } => {
            let n = val(*gamma).len();
            let gm = val(*gamma).data();
            with!(*gamma, |d| for (gr, hr) in g.chunks(n).zip(xhat.chunks(n)) {
                for k in 0..n {
                    d[k] += gr[k] * hr[k];
                }
            });
            with!(*beta, |d| for gr in g.chunks(n) {
                axpy(d, gr, 1.0);
            });
            with!(*x, |d| for (r, (gr, hr)) in g.chunks(n).zip(xhat.chunks(n)).enumerate() {
                let dh: Vec<f32> = (0..n).map(|k| gr[k] * gm[k]).collect();
                let mean_dh = dh.iter().sum::<f32>() / n as f32;
                let mean_dh_h = dot(&dh, hr) / n as f32;
                for k in 0..n {
                    d[r * n + k] += inv_std[r] * (dh[k] - mean_dh - hr[k] * mean_dh_h);
                }
            });
        }
        Op::Normalize { a, norms } => {
            let c = out.shape()[1];
            with!(*a, |d| for (r, (yr, gr)) in out.data().chunks(c).zip(g.chunks(c)).enumerate() {
                let s = dot(yr, gr);
                let inv = 1.0 / norms[r];
                for k in 0..c {
                    d[r * c + k] += (gr[k] - yr[k] * s) * inv;
                }
            });
        }
        &Op::RowDot(a, b) => {
            let c = val(a).shape()[1];
            let (av, bv) = (val(a).data(), val(b).data());
            with!(a, |d| for (r, &gr) in g.iter().enumerate() {
                axpy(&mut d[r * c..(r + 1) * c], &bv[r * c..(r + 1) * c], gr);
            });
            with!(b, |d| for (r, &gr) in g.iter().enumerate() {
                axpy(&mut d[r * c..(r + 1) * c], &av[r * c..(r + 1) * c], gr);
            });
        }
        &Op::Cosine(a, b) => {
            let c = val(a).shape()[1];
            let (av, bv) = (val(a).data(), val(b).data());
            let rows = g.len();
            let mut da = vec![0.0; rows * c];
            let mut db = vec![0.0; rows * c];
            for r in 0..rows {
                let (x, y) = (&av[r * c..(r + 1) * c], &bv[r * c..(r + 1) * c]);
                let na = dot(x, x).sqrt().max(norm_eps());
                let nb = dot(y, y).sqrt().max(norm_eps());
                let cs = cosine(x, y);
                for k in 0..c {
                    da[r * c + k] = g[r] * (y[k] / (na * nb) - cs * x[k] / (na * na));
                    db[r * c + k] = g[r] * (x[k] / (na * nb) - cs * y[k] / (nb * nb));
                }
            }
            with!(a, |d| axpy(d, &da, 1.0));
            with!(b, |d| axpy(d, &db, 1.0));
        }
        Op::Spmm { m, b } => {
            let w = out.shape()[1];
            with!(*b, |d| m.mul_dense_transposed(g, w, d));
        }
        Op::SoftmaxCe {
            logits,
            targets,
            probs,
        } => {
            let c = val(*logits).shape()[1];
            let scale = g[0] / targets.len() as f32;
            with!(*logits, |d| {
                for (k, p) in probs.iter().enumerate() {
                    d[k] += scale * p;
                }
                for (r, &t) in targets.iter().enumerate() {
                    d[r * c + t] -= scale;
                }
            });
        }
    }
}

fn axpy(dst: &mut [f32], src: &[f32], alpha: f32) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}
