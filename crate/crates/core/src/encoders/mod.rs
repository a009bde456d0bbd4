//! Expression and operation encoders.
//!
//! Sequence families read the LaTeX rendering through a [`TokenVocabulary`];
//! graph families read the operation tree, with node labels drawn from a
//! second vocabulary of the same type.

mod graph;
mod layers;
mod sequence;
mod tokenizer;
mod tree;

use std::fmt;
use std::str::FromStr;

use opspace_diffarray::{ParamId, ParamStore, Tape, Tensor, Var};
use opspace_symbolic::{to_latex, Expr, OperationKind};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use graph::{GcnEncoder, GraphBatch, SageEncoder};
pub use layers::{glorot, normal, Linear, Norm, EMBEDDING_STD};
pub use sequence::{BagEncoder, CnnEncoder, LstmEncoder, TransformerEncoder};
pub use tokenizer::{latex_tokens, TokenVocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};
pub use tree::{build_operation_tree, constant_label, OperationTree};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gcn,
    Graphsage,
    Cnn,
    Lstm,
    Transformer,
    Bag,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Gcn,
        Family::Graphsage,
        Family::Cnn,
        Family::Lstm,
        Family::Transformer,
        Family::Bag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gcn => "gcn",
            Family::Graphsage => "graphsage",
            Family::Cnn => "cnn",
            Family::Lstm => "lstm",
            Family::Transformer => "transformer",
            Family::Bag => "bag",
        }
    }

    pub fn is_graph(self) -> bool {
        matches!(self, Family::Gcn | Family::Graphsage)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown encoder family `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub family: Family,
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    /// `(width, count)` per convolution.
    pub filters: Vec<(usize, usize)>,
}

impl EncoderConfig {
    /// Family defaults at embedding size `dim`.
    pub fn new(family: Family, dim: usize) -> Self {
        let layers = match family {
            Family::Gcn | Family::Graphsage | Family::Transformer => 6,
            Family::Lstm => 2,
            Family::Cnn | Family::Bag => 1,
        };
        Self {
            family,
            dim,
            layers,
            heads: 8,
            filters: vec![(3, 100), (4, 100), (5, 100)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.layers == 0 {
            return Err(Error::Config("encoder dim and layers must be positive".into()));
        }
        if self.family == Family::Transformer && (self.heads == 0 || self.dim % self.heads != 0) {
            return Err(Error::Config(format!(
                "transformer dim {} is not divisible by {} heads",
                self.dim, self.heads
            )));
        }
        if self.family == Family::Cnn && (self.filters.is_empty() || self.filters.iter().any(|&(w, c)| w == 0 || c == 0)) {
            return Err(Error::Config("cnn needs non-empty filters".into()));
        }
        Ok(())
    }
}

/// Encoder input for one expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncoderInput {
    Tokens(Vec<usize>),
    Tree {
        labels: Vec<usize>,
        edges: Vec<(usize, usize)>,
    },
}

impl EncoderInput {
    pub fn len(&self) -> usize {
        match self {
            EncoderInput::Tokens(t) => t.len(),
            EncoderInput::Tree { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Turns expressions into encoder inputs for one family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Featurizer {
    pub graph: bool,
    pub vocab: TokenVocabulary,
}

impl Featurizer {
    /// Builds the vocabulary from `exprs` (the training split).
    pub fn fit<'a>(graph: bool, exprs: impl IntoIterator<Item = &'a Expr>) -> Self {
        let vocab = if graph {
            let mut labels = std::collections::BTreeSet::new();
            for e in exprs {
                labels.extend(build_operation_tree(e).labels);
            }
            TokenVocabulary::from_tokens(labels)
        } else {
            let texts: Vec<String> = exprs.into_iter().map(to_latex).collect();
            TokenVocabulary::build(texts.iter().map(String::as_str))
        };
        Self { graph, vocab }
    }

    pub fn featurize(&self, e: &Expr) -> EncoderInput {
        if self.graph {
            let tree = build_operation_tree(e);
            EncoderInput::Tree {
                labels: tree.labels.iter().map(|l| self.vocab.id(l)).collect(),
                edges: tree.edges,
            }
        } else {
            EncoderInput::Tokens(self.vocab.encode(&to_latex(e)))
        }
    }
}

#[derive(Debug, Clone)]
pub enum ExpressionEncoder {
    Gcn(GcnEncoder),
    Graphsage(SageEncoder),
    Cnn(CnnEncoder),
    Lstm(LstmEncoder),
    Transformer(TransformerEncoder),
    Bag(BagEncoder),
}

impl ExpressionEncoder {
    pub fn new(cfg: &EncoderConfig, vocab_size: usize, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.dim;
        Ok(match cfg.family {
            Family::Gcn => Self::Gcn(GcnEncoder::new(store, rng, vocab_size, d, cfg.layers)),
            Family::Graphsage => Self::Graphsage(SageEncoder::new(store, rng, vocab_size, d, cfg.layers)),
            Family::Cnn => Self::Cnn(CnnEncoder::new(store, rng, vocab_size, d, &cfg.filters)),
            Family::Lstm => Self::Lstm(LstmEncoder::new(store, rng, vocab_size, d, cfg.layers)),
            Family::Transformer => {
                Self::Transformer(TransformerEncoder::new(store, rng, vocab_size, d, cfg.layers, cfg.heads))
            }
            Family::Bag => Self::Bag(BagEncoder::new(store, rng, vocab_size, d)),
        })
    }

    /// Embeds a batch, giving `[inputs.len(), d]`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, inputs: &[&EncoderInput]) -> Result<Var> {
        if inputs.is_empty() || inputs.iter().any(|i| i.is_empty()) {
            return Err(Error::EmptyInput);
        }
        let graph = matches!(self, Self::Gcn(_) | Self::Graphsage(_));
        if graph {
            let mut parts = Vec::with_capacity(inputs.len());
            for i in inputs {
                match i {
                    EncoderInput::Tree { labels, edges } => parts.push((labels.as_slice(), edges.as_slice())),
                    EncoderInput::Tokens(_) => {
                        return Err(Error::Config("graph encoder given a token sequence".into()))
                    }
                }
            }
            let batch = GraphBatch::new(&parts);
            return match self {
                Self::Gcn(e) => e.forward(tape, store, &batch),
                Self::Graphsage(e) => e.forward(tape, store, &batch),
                _ => unreachable!(),
            };
        }
        let mut seqs = Vec::with_capacity(inputs.len());
        for i in inputs {
            match i {
                EncoderInput::Tokens(t) => seqs.push(t.as_slice()),
                EncoderInput::Tree { .. } => {
                    return Err(Error::Config("sequence encoder given a tree".into()))
                }
            }
        }
        match self {
            Self::Cnn(e) => e.forward(tape, store, &seqs),
            Self::Lstm(e) => e.forward(tape, store, &seqs),
            Self::Transformer(e) => e.forward(tape, store, &seqs),
            Self::Bag(e) => e.forward(tape, store, &seqs),
            _ => unreachable!(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperationEncoding {
    OneHot,
    Dense,
}

/// Lookup table with one row per operation id.
#[derive(Debug, Clone, Copy)]
pub enum OperationEncoder {
    OneHot,
    Dense { table: ParamId, dim: usize },
}

impl OperationEncoder {
    pub fn new(mode: OperationEncoding, dim: usize, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Self {
        match mode {
            OperationEncoding::OneHot => Self::OneHot,
            OperationEncoding::Dense => Self::Dense {
                table: store.add("operation.embedding", normal(rng, &[6, dim], EMBEDDING_STD)),
                dim,
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::OneHot => 6,
            Self::Dense { dim, .. } => *dim,
        }
    }

    /// Rows for `ops`, giving `[ops.len(), dim]`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, ops: &[OperationKind]) -> Result<Var> {
        let ids: Vec<usize> = ops.iter().map(|o| o.id()).collect();
        match self {
            Self::OneHot => {
                let eye = tape.constant(Tensor::from_fn(&[6, 6], |i| if i / 6 == i % 6 { 1.0 } else { 0.0 }));
                Ok(tape.gather(eye, &ids)?)
            }
            Self::Dense { table, .. } => {
                let t = tape.param(store, *table);
                Ok(tape.embedding_lookup(t, &ids)?)
            }
        }
    }

    /// Row for `t` as a plain vector.
    pub fn encode(&self, store: &ParamStore, t: OperationKind) -> Vec<f32> {
        match self {
            Self::OneHot => (0..6).map(|i| if i == t.id() { 1.0 } else { 0.0 }).collect(),
            Self::Dense { table, .. } => store.value(*table).row(t.id()).to_vec(),
        }
    }
}
