//! Projection and translation heads: how an operation moves a premise
//! embedding towards its conclusion.

use std::fmt;
use std::str::FromStr;

use opspace_diffarray::{ParamId, ParamStore, Tape, Var};
use opspace_symbolic::OperationKind;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoders::{normal, Linear, OperationEncoder, OperationEncoding};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Paradigm {
    #[serde(rename = "projection-onehot")]
    ProjectionOneHot,
    #[serde(rename = "projection-dense")]
    ProjectionDense,
    #[serde(rename = "translation")]
    Translation,
}

impl Paradigm {
    pub const ALL: [Paradigm; 3] = [Paradigm::ProjectionOneHot, Paradigm::ProjectionDense, Paradigm::Translation];

    pub fn name(self) -> &'static str {
        match self {
            Paradigm::ProjectionOneHot => "projection-onehot",
            Paradigm::ProjectionDense => "projection-dense",
            Paradigm::Translation => "translation",
        }
    }

    pub fn operation_encoding(self) -> OperationEncoding {
        match self {
            Paradigm::ProjectionOneHot => OperationEncoding::OneHot,
            _ => OperationEncoding::Dense,
        }
    }

    pub fn is_translation(self) -> bool {
        self == Paradigm::Translation
    }
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Paradigm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Paradigm::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown paradigm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranslationMode {
    /// `T_t ∘ e_x`, compared against `e_y + t`.
    Shifted,
    /// `T_t ∘ e_x − t`, a stand-alone conclusion embedding.
    Resolved,
}

/// `e_y' = concat(t, e_x) · W + b`, with `W` stored as `[op_dim + d, d]`.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionHead {
    pub linear: Linear,
    pub op_dim: usize,
    pub dim: usize,
}

/// One diagonal vector per operation, or a single shared one.
#[derive(Debug, Clone, Copy)]
pub struct TranslationHead {
    pub diag: ParamId,
    pub shared: bool,
    pub dim: usize,
}

impl TranslationHead {
    fn row(&self, t: OperationKind) -> usize {
        if self.shared {
            0
        } else {
            t.id()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Head {
    Projection(ProjectionHead),
    Translation(TranslationHead),
}

/// Standard deviation of the initial per-operation diagonals.
const DIAG_STD: f32 = 1.0;

fn check_len(what: &str, expected: usize, v: &[f32]) -> Result<()> {
    if v.len() != expected {
        return Err(Error::ShapeMismatch {
            what: what.into(),
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

/// Cosine of two vectors, accumulated in f64.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    check_len("cosine operand", a.len(), b)?;
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

/// `−(1 − cos)²`.
pub fn score_from_cosine(cos: f64) -> f64 {
    -(1.0 - cos).powi(2)
}

impl Head {
    pub fn new(
        paradigm: Paradigm,
        dim: usize,
        op_dim: usize,
        shared_translation: bool,
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        match paradigm {
            Paradigm::Translation => {
                if op_dim != dim {
                    return Err(Error::ShapeMismatch {
                        what: "translation operation embedding".into(),
                        expected: dim,
                        found: op_dim,
                    });
                }
                let rows = if shared_translation { 1 } else { 6 };
                Ok(Head::Translation(TranslationHead {
                    diag: store.add("head.translation.diag", normal(rng, &[rows, dim], DIAG_STD)),
                    shared: shared_translation,
                    dim,
                }))
            }
            _ => Ok(Head::Projection(ProjectionHead {
                linear: Linear::new(store, rng, "head.projection", op_dim + dim, dim),
                op_dim,
                dim,
            })),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Head::Projection(h) => h.dim,
            Head::Translation(h) => h.dim,
        }
    }

    /// Batched prediction: the projection output, or the shifted
    /// translation `T_t ∘ e_x`. `ex` is `[B, d]`, `t` is `[B, op_dim]`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, ex: Var, t: Var, ops: &[OperationKind]) -> Result<Var> {
        match self {
            Head::Projection(h) => {
                let cat = tape.concat(&[t, ex], 1)?;
                h.linear.forward(tape, store, cat)
            }
            Head::Translation(h) => {
                let table = tape.param(store, h.diag);
                let rows: Vec<usize> = ops.iter().map(|&o| h.row(o)).collect();
                let diag = tape.gather(table, &rows)?;
                Ok(tape.mul(diag, ex)?)
            }
        }
    }

    /// What a prediction is compared against: `e_y`, or `e_y + t`.
    pub fn target(&self, tape: &mut Tape, ey: Var, t: Var) -> Result<Var> {
        match self {
            Head::Projection(_) => Ok(ey),
            Head::Translation(_) => Ok(tape.add(ey, t)?),
        }
    }

    pub fn predict_projection(&self, store: &ParamStore, ex: &[f32], t: &[f32]) -> Result<Vec<f32>> {
        let Head::Projection(h) = self else {
            return Err(Error::Config("projection prediction from a translation head".into()));
        };
        check_len("premise embedding", h.dim, ex)?;
        check_len("operation embedding", h.op_dim, t)?;
        let w = store.value(h.linear.weight).data();
        let mut out = store.value(h.linear.bias).data().to_vec();
        for (i, &x) in t.iter().chain(ex).enumerate() {
            if x != 0.0 {
                for (o, &wv) in out.iter_mut().zip(&w[i * h.dim..(i + 1) * h.dim]) {
                    *o += x * wv;
                }
            }
        }
        Ok(out)
    }

    pub fn predict_translation(
        &self,
        store: &ParamStore,
        ops: &OperationEncoder,
        ex: &[f32],
        t: OperationKind,
        mode: TranslationMode,
    ) -> Result<Vec<f32>> {
        let Head::Translation(h) = self else {
            return Err(Error::Config("translation prediction from a projection head".into()));
        };
        check_len("premise embedding", h.dim, ex)?;
        let diag = store.value(h.diag).row(h.row(t));
        let mut out: Vec<f32> = diag.iter().zip(ex).map(|(a, b)| a * b).collect();
        if mode == TranslationMode::Resolved {
            let tv = ops.encode(store, t);
            check_len("operation embedding", h.dim, &tv)?;
            out.iter_mut().zip(&tv).for_each(|(o, s)| *o -= s);
        }
        Ok(out)
    }

    /// The prediction and comparison target used for ranking.
    pub fn ranking_pair(
        &self,
        store: &ParamStore,
        ops: &OperationEncoder,
        ex: &[f32],
        t: OperationKind,
    ) -> Result<(Vec<f32>, Option<Vec<f32>>)> {
        match self {
            Head::Projection(_) => Ok((self.predict_projection(store, ex, &ops.encode(store, t))?, None)),
            Head::Translation(_) => Ok((
                self.predict_translation(store, ops, ex, t, TranslationMode::Shifted)?,
                Some(ops.encode(store, t)),
            )),
        }
    }

    /// Cosine between the prediction for `(e_x, t)` and `e_y` (shifted by
    /// `t` for translation).
    pub fn cosine_to(&self, store: &ParamStore, ops: &OperationEncoder, ex: &[f32], t: OperationKind, ey: &[f32]) -> Result<f64> {
        let (pred, shift) = self.ranking_pair(store, ops, ex, t)?;
        match shift {
            None => cosine(&pred, ey),
            Some(s) => {
                check_len("conclusion embedding", s.len(), ey)?;
                let target: Vec<f32> = ey.iter().zip(&s).map(|(a, b)| a + b).collect();
                cosine(&pred, &target)
            }
        }
    }

    pub fn score(&self, store: &ParamStore, ops: &OperationEncoder, ex: &[f32], t: OperationKind, ey: &[f32]) -> Result<f64> {
        Ok(score_from_cosine(self.cosine_to(store, ops, ex, t, ey)?))
    }

    /// One prediction per operation, chained; returns `ops.len() + 1`
    /// embeddings starting with `e_x0`.
    pub fn propagate(
        &self,
        store: &ParamStore,
        op_encoder: &OperationEncoder,
        ex0: &[f32],
        ops: &[OperationKind],
    ) -> Result<Vec<Vec<f32>>> {
        if ops.len() > crate::datagen::MAX_CHAIN_STEPS {
            return Err(Error::Config(format!("{} propagation steps requested", ops.len())));
        }
        let mut out = vec![ex0.to_vec()];
        for &t in ops {
            let cur = out.last().expect("non-empty");
            let next = match self {
                Head::Projection(_) => self.predict_projection(store, cur, &op_encoder.encode(store, t))?,
                Head::Translation(_) => self.predict_translation(store, op_encoder, cur, t, TranslationMode::Resolved)?,
            };
            out.push(next);
        }
        Ok(out)
    }
}
