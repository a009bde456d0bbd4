//! Message-passing encoders over operation trees.

use std::sync::Arc;

use opspace_diffarray::{ParamId, ParamStore, SparseMatrix, Tape, Var};
use rand_chacha::ChaCha8Rng;

use super::layers::{normal, Linear, EMBEDDING_STD};
use crate::error::Result;

/// A batch of trees as one block-diagonal graph.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub labels: Vec<usize>,
    /// Undirected edges in batch-global node ids.
    pub edges: Vec<(usize, usize)>,
    /// Node ids of each graph.
    pub groups: Vec<Vec<usize>>,
}

impl GraphBatch {
    pub fn new(graphs: &[(&[usize], &[(usize, usize)])]) -> Self {
        let mut labels = Vec::new();
        let mut edges = Vec::new();
        let mut groups = Vec::with_capacity(graphs.len());
        for (l, e) in graphs {
            let base = labels.len();
            labels.extend_from_slice(l);
            edges.extend(e.iter().map(|&(p, c)| (base + p, base + c)));
            groups.push((base..base + l.len()).collect());
        }
        Self {
            labels,
            edges,
            groups,
        }
    }

    fn degrees(&self, self_loops: bool) -> Vec<f32> {
        let mut deg = vec![if self_loops { 1.0 } else { 0.0 }; self.labels.len()];
        for &(a, b) in &self.edges {
            deg[a] += 1.0;
            deg[b] += 1.0;
        }
        deg
    }

    /// `D^-1/2 (A + I) D^-1/2`.
    pub fn gcn_adjacency(&self) -> SparseMatrix {
        let n = self.labels.len();
        let deg = self.degrees(true);
        let mut t: Vec<(usize, usize, f32)> = (0..n).map(|i| (i, i, 1.0 / deg[i])).collect();
        for &(a, b) in &self.edges {
            let w = 1.0 / (deg[a] * deg[b]).sqrt();
            t.push((a, b, w));
            t.push((b, a, w));
        }
        SparseMatrix::from_triplets(n, n, t)
    }

    /// Row-normalized neighbour averaging; isolated nodes get a zero row.
    pub fn mean_adjacency(&self) -> SparseMatrix {
        let n = self.labels.len();
        let deg = self.degrees(false);
        let mut t = Vec::with_capacity(2 * self.edges.len());
        for &(a, b) in &self.edges {
            t.push((a, b, 1.0 / deg[a]));
            t.push((b, a, 1.0 / deg[b]));
        }
        SparseMatrix::from_triplets(n, n, t)
    }
}

fn label_embedding(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, rows: usize, dim: usize) -> ParamId {
    store.add(format!("{name}.embedding"), normal(rng, &[rows, dim], EMBEDDING_STD))
}

fn pool(tape: &mut Tape, x: Var, groups: &[Vec<usize>]) -> Result<Var> {
    let n = tape.shape(x)[0];
    let m = Arc::new(SparseMatrix::segment_mean(groups, n));
    Ok(tape.spmm(&m, x)?)
}

#[derive(Debug, Clone)]
pub struct GcnEncoder {
    embedding: ParamId,
    layers: Vec<Linear>,
    out: Linear,
}

impl GcnEncoder {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, labels: usize, dim: usize, layers: usize) -> Self {
        Self {
            embedding: label_embedding(store, rng, "gcn", labels, dim),
            layers: (0..layers)
                .map(|l| Linear::new(store, rng, &format!("gcn.l{l}"), dim, dim))
                .collect(),
            out: Linear::new(store, rng, "gcn.out", dim, dim),
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, batch: &GraphBatch) -> Result<Var> {
        let adj = Arc::new(batch.gcn_adjacency());
        let table = tape.param(store, self.embedding);
        let mut h = tape.embedding_lookup(table, &batch.labels)?;
        for layer in &self.layers {
            let w = tape.param(store, layer.weight);
            let b = tape.param(store, layer.bias);
            let hw = tape.matmul(h, w)?;
            let agg = tape.spmm(&adj, hw)?;
            let z = tape.add_row(agg, b)?;
            h = tape.relu(z);
        }
        let pooled = pool(tape, h, &batch.groups)?;
        self.out.forward(tape, store, pooled)
    }
}

#[derive(Debug, Clone)]
pub struct SageEncoder {
    embedding: ParamId,
    layers: Vec<Linear>,
    out: Linear,
}

impl SageEncoder {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, labels: usize, dim: usize, layers: usize) -> Self {
        Self {
            embedding: label_embedding(store, rng, "graphsage", labels, dim),
            layers: (0..layers)
                .map(|l| Linear::new(store, rng, &format!("graphsage.l{l}"), 2 * dim, dim))
                .collect(),
            out: Linear::new(store, rng, "graphsage.out", dim, dim),
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, batch: &GraphBatch) -> Result<Var> {
        let adj = Arc::new(batch.mean_adjacency());
        let table = tape.param(store, self.embedding);
        let mut h = tape.embedding_lookup(table, &batch.labels)?;
        for layer in &self.layers {
            let neigh = tape.spmm(&adj, h)?;
            let cat = tape.concat(&[h, neigh], 1)?;
            let z = layer.forward(tape, store, cat)?;
            h = tape.relu(z);
        }
        let pooled = pool(tape, h, &batch.groups)?;
        self.out.forward(tape, store, pooled)
    }
}
