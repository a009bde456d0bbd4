//! An expression encoder, an operation encoder and a head over one
//! parameter store.

use opspace_diffarray::{ParamStore, Tape, Var};
use opspace_symbolic::{Expr, OperationKind};
use serde::{Deserialize, Serialize};

use crate::datagen::substream;
use crate::encoders::{EncoderConfig, EncoderInput, ExpressionEncoder, Family, Featurizer, OperationEncoder};
use crate::error::{Error, Result};
use crate::evaluation::LatentModel;
use crate::heads::{cosine, Head, Paradigm, TranslationMode};

const STREAM_INIT: u64 = 16;
const EMBED_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub paradigm: Paradigm,
    pub encoder: EncoderConfig,
    /// One diagonal shared by all operations (translation only).
    pub shared_translation: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            paradigm: Paradigm::Translation,
            encoder: EncoderConfig::new(Family::Lstm, 64),
            shared_translation: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub featurizer: Featurizer,
    pub store: ParamStore,
    pub encoder: ExpressionEncoder,
    pub operations: OperationEncoder,
    pub head: Head,
}

impl Model {
    pub fn new(config: ModelConfig, featurizer: Featurizer, seed: u64) -> Result<Self> {
        if featurizer.graph != config.encoder.family.is_graph() {
            return Err(Error::Config(format!(
                "featurizer does not match the {} encoder",
                config.encoder.family
            )));
        }
        let mut rng = substream(seed, STREAM_INIT, 0);
        let mut store = ParamStore::new();
        let d = config.encoder.dim;
        let encoder = ExpressionEncoder::new(&config.encoder, featurizer.vocab.len(), &mut store, &mut rng)?;
        let operations = OperationEncoder::new(config.paradigm.operation_encoding(), d, &mut store, &mut rng);
        let head = Head::new(config.paradigm, d, operations.dim(), config.shared_translation, &mut store, &mut rng)?;
        Ok(Self {
            config,
            featurizer,
            store,
            encoder,
            operations,
            head,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.encoder.dim
    }

    pub fn paradigm(&self) -> Paradigm {
        self.config.paradigm
    }

    pub fn forward(&self, tape: &mut Tape, inputs: &[&EncoderInput]) -> Result<Var> {
        self.encoder.forward(tape, &self.store, inputs)
    }

    pub fn embed_inputs(&self, inputs: &[&EncoderInput]) -> Result<Vec<Vec<f32>>> {
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(EMBED_CHUNK) {
            let mut tape = Tape::new();
            let v = self.forward(&mut tape, chunk)?;
            let t = tape.value(v);
            out.extend((0..chunk.len()).map(|i| t.row(i).to_vec()));
        }
        Ok(out)
    }

    /// Prediction and comparison target of the head, as plain vectors.
    pub fn transformed(&self, ex: &[f32], t: OperationKind, ey: &[f32]) -> Result<(Vec<f32>, Vec<f32>)> {
        let (pred, shift) = self.head.ranking_pair(&self.store, &self.operations, ex, t)?;
        let target = match shift {
            None => ey.to_vec(),
            Some(s) => ey.iter().zip(&s).map(|(a, b)| a + b).collect(),
        };
        Ok((pred, target))
    }
}

impl LatentModel for Model {
    fn embed(&self, exprs: &[&Expr]) -> Result<Vec<Vec<f32>>> {
        let inputs: Vec<EncoderInput> = exprs.iter().map(|e| self.featurizer.featurize(e)).collect();
        let refs: Vec<&EncoderInput> = inputs.iter().collect();
        self.embed_inputs(&refs)
    }

    fn ranking_cosine(&self, ex: &[f32], t: OperationKind, ey: &[f32]) -> Result<f64> {
        let (pred, target) = self.transformed(ex, t, ey)?;
        cosine(&pred, &target)
    }

    fn step(&self, ex: &[f32], t: OperationKind) -> Result<Vec<f32>> {
        match self.head {
            Head::Projection(_) => self
                .head
                .predict_projection(&self.store, ex, &self.operations.encode(&self.store, t)),
            Head::Translation(_) => {
                self.head
                    .predict_translation(&self.store, &self.operations, ex, t, TranslationMode::Resolved)
            }
        }
    }
}
