//! Token-sequence encoders: bag of tokens, CNN, LSTM and Transformer.

use std::sync::Arc;

use opspace_diffarray::{ParamId, ParamStore, SparseMatrix, Tape, Tensor, Var};
use rand_chacha::ChaCha8Rng;

use super::layers::{glorot, normal, Linear, Norm, EMBEDDING_STD};
use super::tokenizer::PAD;
use crate::error::Result;

fn embedding(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, rows: usize, dim: usize) -> ParamId {
    store.add(format!("{name}.embedding"), normal(rng, &[rows, dim], EMBEDDING_STD))
}

/// `[B, T]` ids padded with [`PAD`] to `max(longest, min_len)`.
fn pad_batch(seqs: &[&[usize]], min_len: usize) -> (Vec<usize>, usize) {
    let t = seqs.iter().map(|s| s.len()).max().unwrap_or(0).max(min_len);
    let mut ids = vec![PAD; seqs.len() * t];
    for (b, s) in seqs.iter().enumerate() {
        ids[b * t..b * t + s.len()].copy_from_slice(s);
    }
    (ids, t)
}

/// Averages each group's rows of a `[N, d]` tensor.
fn segment_mean(tape: &mut Tape, x: Var, groups: &[Vec<usize>]) -> Result<Var> {
    let n = tape.shape(x)[0];
    let m = Arc::new(SparseMatrix::segment_mean(groups, n));
    Ok(tape.spmm(&m, x)?)
}

#[derive(Debug, Clone)]
pub struct BagEncoder {
    embedding: ParamId,
    out: Linear,
}

impl BagEncoder {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, vocab: usize, dim: usize) -> Self {
        Self {
            embedding: embedding(store, rng, "bag", vocab, dim),
            out: Linear::new(store, rng, "bag.out", dim, dim),
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, seqs: &[&[usize]]) -> Result<Var> {
        let ids: Vec<usize> = seqs.iter().flat_map(|s| s.iter().copied()).collect();
        let mut groups = Vec::with_capacity(seqs.len());
        let mut at = 0;
        for s in seqs {
            groups.push((at..at + s.len()).collect());
            at += s.len();
        }
        let table = tape.param(store, self.embedding);
        let x = tape.embedding_lookup(table, &ids)?;
        let pooled = segment_mean(tape, x, &groups)?;
        self.out.forward(tape, store, pooled)
    }
}

#[derive(Debug, Clone)]
pub struct CnnEncoder {
    embedding: ParamId,
    dim: usize,
    /// `(width, kernel [width * dim, count], bias [count])`.
    filters: Vec<(usize, ParamId, ParamId)>,
    out: Linear,
}

impl CnnEncoder {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        vocab: usize,
        dim: usize,
        spec: &[(usize, usize)],
    ) -> Self {
        let embedding = embedding(store, rng, "cnn", vocab, dim);
        let filters = spec
            .iter()
            .map(|&(w, count)| {
                let k = store.add(format!("cnn.conv{w}.kernel"), glorot(rng, w * dim, count));
                let b = store.add(format!("cnn.conv{w}.bias"), Tensor::zeros(&[count]));
                (w, k, b)
            })
            .collect();
        let features = spec.iter().map(|&(_, c)| c).sum();
        Self {
            embedding,
            dim,
            filters,
            out: Linear::new(store, rng, "cnn.out", features, dim),
        }
    }

    fn max_width(&self) -> usize {
        self.filters.iter().map(|f| f.0).max().unwrap_or(1)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, seqs: &[&[usize]]) -> Result<Var> {
        let (ids, t) = pad_batch(seqs, self.max_width());
        let table = tape.param(store, self.embedding);
        let x = tape.embedding_lookup(table, &ids)?;
        let x = tape.reshape(x, &[seqs.len(), t, self.dim])?;
        let mut pooled = Vec::with_capacity(self.filters.len());
        for &(w, k, b) in &self.filters {
            let kv = tape.param(store, k);
            let bv = tape.param(store, b);
            let y = tape.conv1d(x, kv, bv, w)?;
            let y = tape.relu(y);
            // Windows that start past the sequence are padding only.
            let lens: Vec<usize> = seqs.iter().map(|s| (s.len() + 1).saturating_sub(w).max(1)).collect();
            pooled.push(tape.masked_max_over_time(y, &lens)?);
        }
        let features = tape.concat(&pooled, 1)?;
        self.out.forward(tape, store, features)
    }
}

#[derive(Debug, Clone)]
struct LstmLayer {
    input: ParamId,
    recurrent: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone)]
pub struct LstmEncoder {
    embedding: ParamId,
    hidden: usize,
    layers: Vec<LstmLayer>,
    out: Linear,
}

impl LstmEncoder {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, vocab: usize, dim: usize, layers: usize) -> Self {
        let embedding = embedding(store, rng, "lstm", vocab, dim);
        let layers = (0..layers)
            .map(|l| {
                let mut bias = Tensor::zeros(&[4 * dim]);
                // Gate order i, f, g, o; forget gates start open.
                bias.data_mut()[dim..2 * dim].fill(1.0);
                LstmLayer {
                    input: store.add(format!("lstm.l{l}.input"), glorot(rng, dim, 4 * dim)),
                    recurrent: store.add(format!("lstm.l{l}.recurrent"), glorot(rng, dim, 4 * dim)),
                    bias: store.add(format!("lstm.l{l}.bias"), bias),
                }
            })
            .collect();
        Self {
            embedding,
            hidden: dim,
            layers,
            out: Linear::new(store, rng, "lstm.out", dim, dim),
        }
    }

    fn cell(&self, tape: &mut Tape, gates: Var, c_prev: Var) -> Result<(Var, Var)> {
        let h = self.hidden;
        let i = tape.slice(gates, 1, 0, h)?;
        let f = tape.slice(gates, 1, h, h)?;
        let g = tape.slice(gates, 1, 2 * h, h)?;
        let o = tape.slice(gates, 1, 3 * h, h)?;
        let (i, f, g, o) = (tape.sigmoid(i), tape.sigmoid(f), tape.tanh(g), tape.sigmoid(o));
        let keep = tape.mul(f, c_prev)?;
        let write = tape.mul(i, g)?;
        let c = tape.add(keep, write)?;
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc)?;
        Ok((h, c))
    }

    /// Runs packed sequences: rows sorted by length so the active rows at
    /// every step form a prefix, and the top layer's last hidden state of
    /// each sequence is collected when it ends.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, seqs: &[&[usize]]) -> Result<Var> {
        let b = seqs.len();
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&x, &y| seqs[y].len().cmp(&seqs[x].len()).then(x.cmp(&y)));
        let t_max = seqs[order[0]].len();
        let active: Vec<usize> = (0..t_max)
            .map(|t| order.iter().take_while(|&&r| seqs[r].len() > t).count())
            .collect();
        let mut ids = Vec::with_capacity(seqs.iter().map(|s| s.len()).sum());
        for (t, &n) in active.iter().enumerate() {
            ids.extend(order[..n].iter().map(|&r| seqs[r][t]));
        }
        let table = tape.param(store, self.embedding);
        let x = tape.embedding_lookup(table, &ids)?;
        let l0 = &self.layers[0];
        let (w0, b0) = (tape.param(store, l0.input), tape.param(store, l0.bias));
        let xw = tape.matmul(x, w0)?;
        let xw = tape.add_row(xw, b0)?;

        let zeros = tape.constant(Tensor::zeros(&[b, self.hidden]));
        let mut state: Vec<(Var, Var)> = vec![(zeros, zeros); self.layers.len()];
        let mut finished: Vec<Var> = Vec::new();
        let mut offset = 0;
        for t in 0..t_max {
            let n = active[t];
            let rows_before = if t == 0 { b } else { active[t - 1] };
            if n < rows_before {
                let top = state.last().expect("at least one layer").0;
                finished.push(tape.slice(top, 0, n, rows_before - n)?);
            }
            let mut input = tape.slice(xw, 0, offset, n)?;
            offset += n;
            for (l, layer) in self.layers.iter().enumerate() {
                if l > 0 {
                    let w = tape.param(store, layer.input);
                    let bias = tape.param(store, layer.bias);
                    let below = state[l - 1].0;
                    let proj = tape.matmul(below, w)?;
                    input = tape.add_row(proj, bias)?;
                }
                let (h_prev, c_prev) = state[l];
                let (h_prev, c_prev) = if n < rows_before {
                    (tape.slice(h_prev, 0, 0, n)?, tape.slice(c_prev, 0, 0, n)?)
                } else {
                    (h_prev, c_prev)
                };
                let u = tape.param(store, layer.recurrent);
                let rec = tape.matmul(h_prev, u)?;
                let gates = tape.add(input, rec)?;
                state[l] = self.cell(tape, gates, c_prev)?;
            }
        }
        finished.push(state.last().expect("at least one layer").0);
        finished.reverse();
        let sorted = if finished.len() == 1 {
            finished[0]
        } else {
            tape.concat(&finished, 0)?
        };
        let mut inverse = vec![0; b];
        for (pos, &r) in order.iter().enumerate() {
            inverse[r] = pos;
        }
        let last = tape.gather(sorted, &inverse)?;
        self.out.forward(tape, store, last)
    }
}

#[derive(Debug, Clone)]
struct Block {
    qkv: Linear,
    proj: Linear,
    norm1: Norm,
    ff1: Linear,
    ff2: Linear,
    norm2: Norm,
}

#[derive(Debug, Clone)]
pub struct TransformerEncoder {
    embedding: ParamId,
    dim: usize,
    heads: usize,
    blocks: Vec<Block>,
    out: Linear,
}

fn sinusoid(t: usize, dim: usize) -> Vec<f32> {
    let mut pe = vec![0.0; t * dim];
    for pos in 0..t {
        for i in 0..dim {
            let k = (i / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * k / dim as f64);
            pe[pos * dim + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() } as f32;
        }
    }
    pe
}

impl TransformerEncoder {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        vocab: usize,
        dim: usize,
        layers: usize,
        heads: usize,
    ) -> Self {
        let embedding = embedding(store, rng, "transformer", vocab, dim);
        let blocks = (0..layers)
            .map(|l| {
                let n = format!("transformer.l{l}");
                Block {
                    qkv: Linear::new(store, rng, &format!("{n}.qkv"), dim, 3 * dim),
                    proj: Linear::new(store, rng, &format!("{n}.proj"), dim, dim),
                    norm1: Norm::new(store, &format!("{n}.norm1"), dim),
                    ff1: Linear::new(store, rng, &format!("{n}.ff1"), dim, 2 * dim),
                    ff2: Linear::new(store, rng, &format!("{n}.ff2"), 2 * dim, dim),
                    norm2: Norm::new(store, &format!("{n}.norm2"), dim),
                }
            })
            .collect();
        Self {
            embedding,
            dim,
            heads,
            blocks,
            out: Linear::new(store, rng, "transformer.out", dim, dim),
        }
    }

    /// `[B*T, d]` to `[B*H, T, d/H]`.
    fn split_heads(&self, tape: &mut Tape, x: Var, b: usize, t: usize) -> Result<Var> {
        let (h, dh) = (self.heads, self.dim / self.heads);
        let x = tape.reshape(x, &[b, t, h, dh])?;
        let x = tape.permute(x, &[0, 2, 1, 3])?;
        Ok(tape.reshape(x, &[b * h, t, dh])?)
    }

    fn attention(&self, tape: &mut Tape, store: &ParamStore, blk: &Block, x: Var, b: usize, t: usize, lens: &[usize]) -> Result<Var> {
        let d = self.dim;
        let qkv = blk.qkv.forward(tape, store, x)?;
        let q = tape.slice(qkv, 1, 0, d)?;
        let k = tape.slice(qkv, 1, d, d)?;
        let v = tape.slice(qkv, 1, 2 * d, d)?;
        let (q, k, v) = (
            self.split_heads(tape, q, b, t)?,
            self.split_heads(tape, k, b, t)?,
            self.split_heads(tape, v, b, t)?,
        );
        let scores = tape.batch_matmul(q, k, false, true)?;
        let scores = tape.scale(scores, 1.0 / ((d / self.heads) as f32).sqrt());
        let group_lens: Vec<usize> = lens.iter().flat_map(|&l| std::iter::repeat(l).take(self.heads)).collect();
        let attn = tape.masked_softmax(scores, &group_lens)?;
        let ctx = tape.batch_matmul(attn, v, false, false)?;
        let ctx = tape.reshape(ctx, &[b, self.heads, t, d / self.heads])?;
        let ctx = tape.permute(ctx, &[0, 2, 1, 3])?;
        let ctx = tape.reshape(ctx, &[b * t, d])?;
        blk.proj.forward(tape, store, ctx)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, seqs: &[&[usize]]) -> Result<Var> {
        let b = seqs.len();
        let (ids, t) = pad_batch(seqs, 1);
        let lens: Vec<usize> = seqs.iter().map(|s| s.len()).collect();
        let table = tape.param(store, self.embedding);
        let x = tape.embedding_lookup(table, &ids)?;
        let pe = sinusoid(t, self.dim);
        let pos = tape.constant(Tensor::new(vec![b * t, self.dim], pe.repeat(b))?);
        let mut x = tape.add(x, pos)?;
        for blk in &self.blocks {
            let a = self.attention(tape, store, blk, x, b, t, &lens)?;
            let r = tape.add(x, a)?;
            x = blk.norm1.forward(tape, store, r)?;
            let f = blk.ff1.forward(tape, store, x)?;
            let f = tape.relu(f);
            let f = blk.ff2.forward(tape, store, f)?;
            let r = tape.add(x, f)?;
            x = blk.norm2.forward(tape, store, r)?;
        }
        let groups: Vec<Vec<usize>> = (0..b).map(|i| (i * t..i * t + lens[i]).collect()).collect();
        let pooled = segment_mean(tape, x, &groups)?;
        self.out.forward(tape, store, pooled)
    }
}
