//! Contrastive training with in-batch negatives, dev-MAP model selection
//! and checkpoints.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use opspace_diffarray::{load_checkpoint, save_checkpoint, AdamConfig, Tape, Var};
use opspace_symbolic::Expr;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datagen::{substream, Dataset, DerivationTriple, EvalInstance, Mode};
use crate::encoders::{EncoderConfig, EncoderInput, Family, Featurizer, TokenVocabulary};
use crate::error::{Error, Result};
use crate::evaluation::{csv_error, eval_retrieval, LatentModel};
use crate::heads::{cosine, Paradigm};
use crate::model::{Model, ModelConfig};

const STREAM_SHUFFLE: u64 = 17;
const COLLAPSE_SAMPLE: usize = 64;
pub const MIN_COLLAPSE_BATCH: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    /// Similarity scale applied to cosines before the softmax.
    pub tau: f32,
    pub seed: u64,
    pub paradigm: Paradigm,
    pub encoder: EncoderConfig,
    pub shared_translation: bool,
    /// Global gradient-norm ceiling; 0 disables clipping.
    pub clip_norm: f32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 64,
            learning_rate: 1e-4,
            tau: 20.0,
            seed: 0,
            paradigm: Paradigm::Translation,
            encoder: EncoderConfig::new(Family::Lstm, 64),
            shared_translation: false,
            clip_norm: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn paper() -> Self {
        Self {
            epochs: 32,
            learning_rate: 1e-5,
            encoder: EncoderConfig::new(Family::Lstm, 300),
            ..Self::default()
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            paradigm: self.paradigm,
            encoder: self.encoder.clone(),
            shared_translation: self.shared_translation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::BatchTooSmall(self.batch_size));
        }
        if !(self.tau > 0.0) || !(self.learning_rate > 0.0) || !(self.clip_norm >= 0.0) {
            return Err(Error::Config("tau and learning_rate must be positive, clip_norm non-negative".into()));
        }
        self.encoder.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub dev_cross_map: f64,
    pub dev_intra_map: f64,
    pub avg_map: f64,
}

#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub model: Model,
    pub train: TrainConfig,
    /// Epochs completed.
    pub epoch: usize,
    pub history: Vec<EpochMetrics>,
}

#[derive(Serialize, Deserialize)]
struct BundleMeta {
    format: String,
    train: TrainConfig,
    epoch: usize,
    history: Vec<EpochMetrics>,
    graph: bool,
    vocabulary: Vec<String>,
    optimizer_step: u64,
}

const BUNDLE_FORMAT: &str = "opspace-bundle-1";

impl ModelBundle {
    pub fn new(train: TrainConfig, featurizer: Featurizer) -> Result<Self> {
        train.validate()?;
        let model = Model::new(train.model_config(), featurizer, train.seed)?;
        Ok(Self {
            model,
            train,
            epoch: 0,
            history: Vec::new(),
        })
    }

    pub fn save(&self, path: &Path, with_optimizer: bool) -> Result<()> {
        let meta = BundleMeta {
            format: BUNDLE_FORMAT.into(),
            train: self.train.clone(),
            epoch: self.epoch,
            history: self.history.clone(),
            graph: self.model.featurizer.graph,
            vocabulary: self.model.featurizer.vocab.tokens().to_vec(),
            optimizer_step: self.model.store.step(),
        };
        save_checkpoint(path, &self.model.store.export(with_optimizer), &serde_json::to_value(&meta)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt = load_checkpoint(path)?;
        let meta: BundleMeta = serde_json::from_value(ckpt.meta)?;
        if meta.format != BUNDLE_FORMAT {
            return Err(Error::Config(format!("unsupported checkpoint format `{}`", meta.format)));
        }
        let featurizer = Featurizer {
            graph: meta.graph,
            vocab: TokenVocabulary::from_tokens(meta.vocabulary),
        };
        let mut model = Model::new(meta.train.model_config(), featurizer, meta.train.seed)?;
        model.store.import(&ckpt.tensors, Some(meta.optimizer_step))?;
        Ok(Self {
            model,
            train: meta.train,
            epoch: meta.epoch,
            history: meta.history,
        })
    }

    pub fn best_avg_map(&self) -> Option<f64> {
        self.history.iter().map(|m| m.avg_map).reduce(f64::max)
    }
}

/// MNR loss over in-batch negatives: row `i` of `S = τ·cos(pred_i, target_ij)`
/// is scored against its diagonal, where `target_ij = e_yj`, or
/// `e_yj + t_i` when `shift` holds the operation embeddings `t`.
pub fn mnr_loss(tape: &mut Tape, pred: Var, ey: Var, shift: Option<Var>, tau: f32) -> Result<Var> {
    let b = tape.shape(pred)[0];
    if b < 2 {
        return Err(Error::BatchTooSmall(b));
    }
    let pn = tape.normalize_rows(pred)?;
    let logits = match shift {
        None => {
            let yn = tape.normalize_rows(ey)?;
            tape.matmul_t(pn, yn, false, true)?
        }
        Some(t) => {
            let rows: Vec<usize> = (0..b * b).map(|k| k / b).collect();
            let cols: Vec<usize> = (0..b * b).map(|k| k % b).collect();
            let y = tape.gather(ey, &cols)?;
            let s = tape.gather(t, &rows)?;
            let target = tape.add(y, s)?;
            let tn = tape.normalize_rows(target)?;
            let p = tape.gather(pn, &rows)?;
            let dots = tape.row_dot(p, tn)?;
            tape.reshape(dots, &[b, b])?
        }
    };
    let scaled = tape.scale(logits, tau);
    let targets: Vec<usize> = (0..b).collect();
    Ok(tape.softmax_cross_entropy(scaled, &targets)?)
}

/// Encoder inputs for every training triple, premises deduplicated.
pub struct TrainingSet {
    premises: Vec<EncoderInput>,
    /// `(premise index, conclusion input, operation)` per triple.
    items: Vec<(usize, EncoderInput, opspace_symbolic::OperationKind)>,
}

impl TrainingSet {
    pub fn new(featurizer: &Featurizer, triples: &[DerivationTriple]) -> Self {
        let mut index: HashMap<&Expr, usize> = HashMap::new();
        let mut premises = Vec::new();
        let mut items = Vec::with_capacity(triples.len());
        for t in triples {
            let p = *index.entry(&t.premise).or_insert_with(|| {
                premises.push(featurizer.featurize(&t.premise));
                premises.len() - 1
            });
            items.push((p, featurizer.featurize(&t.conclusion), t.operation));
        }
        Self { premises, items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Loss of one batch of training items on a fresh tape.
pub fn batch_loss(model: &Model, set: &TrainingSet, batch: &[usize], tau: f32) -> Result<(Tape, Var)> {
    let mut tape = Tape::new();
    let b = batch.len();
    let mut inputs: Vec<&EncoderInput> = batch.iter().map(|&i| &set.premises[set.items[i].0]).collect();
    inputs.extend(batch.iter().map(|&i| &set.items[i].1));
    let ops: Vec<_> = batch.iter().map(|&i| set.items[i].2).collect();
    let all = model.forward(&mut tape, &inputs)?;
    let ex = tape.slice(all, 0, 0, b)?;
    let ey = tape.slice(all, 0, b, b)?;
    let t = model.operations.forward(&mut tape, &model.store, &ops)?;
    let pred = model.head.forward(&mut tape, &model.store, ex, t, &ops)?;
    let shift = model.paradigm().is_translation().then_some(t);
    let loss = mnr_loss(&mut tape, pred, ey, shift, tau)?;
    Ok((tape, loss))
}

/// One optimizer step; returns the pre-update loss.
pub fn train_step(model: &mut Model, set: &TrainingSet, batch: &[usize], cfg: &TrainConfig) -> Result<f32> {
    let (tape, loss) = batch_loss(model, set, batch, cfg.tau)?;
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(Error::Config(format!("non-finite loss {value}")));
    }
    model.store.zero_grad();
    tape.backward(loss)?.accumulate_into(&mut model.store);
    if cfg.clip_norm > 0.0 {
        model.store.clip_grad_norm(cfg.clip_norm);
    }
    model.store.adam_step(&AdamConfig::with_lr(cfg.learning_rate))?;
    Ok(value)
}

/// True when the embeddings have (nearly) coincided: mean pairwise cosine
/// above 0.99, or every dimension's variance below 1e-8. Fewer than 32
/// embeddings are never judged.
pub fn detect_collapse(embeddings: &[Vec<f32>]) -> bool {
    collapse_diagnostic(embeddings).is_some()
}

fn collapse_diagnostic(embeddings: &[Vec<f32>]) -> Option<String> {
    let n = embeddings.len();
    if n < MIN_COLLAPSE_BATCH {
        return None;
    }
    let d = embeddings[0].len();
    let max_var = (0..d)
        .map(|j| {
            let mean = embeddings.iter().map(|e| e[j] as f64).sum::<f64>() / n as f64;
            embeddings.iter().map(|e| (e[j] as f64 - mean).powi(2)).sum::<f64>() / n as f64
        })
        .fold(0.0, f64::max);
    if max_var < 1e-8 {
        return Some(format!("largest per-dimension variance {max_var:.3e}"));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            total += cosine(&embeddings[i], &embeddings[j]).unwrap_or(1.0);
            pairs += 1;
        }
    }
    let mean = total / pairs as f64;
    (mean > 0.99).then(|| format!("mean pairwise cosine {mean:.5}"))
}

fn dev_metrics(model: &Model, dev: &[EvalInstance]) -> Result<(f64, f64)> {
    let reports = eval_retrieval(model, dev)?;
    let get = |mode| {
        reports
            .iter()
            .find(|r| r.key.mode == Some(mode))
            .map(|r| r.map)
            .unwrap_or(f64::NAN)
    };
    Ok((get(Mode::CrossOp), get(Mode::IntraOp)))
}

fn collapse_probe(dev: &[EvalInstance]) -> Vec<&Expr> {
    let mut seen = std::collections::HashSet::new();
    dev.iter()
        .flat_map(|i| std::iter::once(&i.premise).chain(&i.positives))
        .filter(|e| seen.insert(*e))
        .take(COLLAPSE_SAMPLE)
        .collect()
}

/// Result of [`train`]: the last state and the best by dev average MAP.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub last: ModelBundle,
    pub best: ModelBundle,
}

/// Hook run after every epoch with the new metrics, the current bundle and
/// whether it is the best so far.
pub trait EpochObserver {
    fn epoch_done(&mut self, metrics: &EpochMetrics, current: &ModelBundle, is_best: bool) -> Result<()>;
}

impl EpochObserver for () {
    fn epoch_done(&mut self, _: &EpochMetrics, _: &ModelBundle, _: bool) -> Result<()> {
        Ok(())
    }
}

impl<F: FnMut(&EpochMetrics, &ModelBundle, bool) -> Result<()>> EpochObserver for F {
    fn epoch_done(&mut self, metrics: &EpochMetrics, current: &ModelBundle, is_best: bool) -> Result<()> {
        self(metrics, current, is_best)
    }
}

/// Trains on `triples` for the epochs remaining after `start.epoch`,
/// selecting by dev average MAP. `best` is the previously selected bundle
/// when resuming.
pub fn train_from(
    start: ModelBundle,
    best: Option<ModelBundle>,
    triples: &[DerivationTriple],
    dev: &[EvalInstance],
    observer: &mut dyn EpochObserver,
) -> Result<TrainOutcome> {
    let cfg = start.train.clone();
    cfg.validate()?;
    let mut current = start;
    let mut best = best.unwrap_or_else(|| current.clone());
    if current.epoch >= cfg.epochs {
        return Ok(TrainOutcome { last: current, best });
    }
    if triples.is_empty() {
        return Err(Error::Dataset("no training triples".into()));
    }
    if dev.is_empty() {
        return Err(Error::Dataset("no dev instances".into()));
    }
    let set = TrainingSet::new(&current.model.featurizer, triples);
    let probe = collapse_probe(dev);
    for epoch in current.epoch + 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.shuffle(&mut substream(cfg.seed, STREAM_SHUFFLE, epoch as u64));
        let (mut total, mut steps) = (0.0f64, 0usize);
        for batch in order.chunks(cfg.batch_size).filter(|b| b.len() >= 2) {
            total += train_step(&mut current.model, &set, batch, &cfg)? as f64;
            steps += 1;
        }
        let (cross, intra) = dev_metrics(&current.model, dev)?;
        let metrics = EpochMetrics {
            epoch,
            loss: total / steps.max(1) as f64,
            dev_cross_map: cross,
            dev_intra_map: intra,
            avg_map: (cross + intra) / 2.0,
        };
        current.epoch = epoch;
        current.history.push(metrics);
        if let Some(detail) = collapse_diagnostic(&current.model.embed(&probe)?) {
            return Err(Error::CollapseDetected { epoch, detail });
        }
        let is_best = best.best_avg_map().is_none_or(|b| metrics.avg_map > b);
        if is_best {
            best = current.clone();
        } else {
            best.history = current.history.clone();
        }
        observer.epoch_done(&metrics, &current, is_best)?;
    }
    Ok(TrainOutcome { last: current, best })
}

/// Fits the vocabulary on the training split and trains from scratch.
pub fn train(cfg: &TrainConfig, data: &Dataset, observer: &mut dyn EpochObserver) -> Result<TrainOutcome> {
    let triples = data.train_triples();
    let featurizer = fit_featurizer(cfg.encoder.family, &triples);
    let start = ModelBundle::new(cfg.clone(), featurizer)?;
    train_from(start, None, &triples, &data.dev, observer)
}

pub fn fit_featurizer(family: Family, triples: &[DerivationTriple]) -> Featurizer {
    Featurizer::fit(
        family.is_graph(),
        triples.iter().flat_map(|t| [&t.premise, &t.conclusion]),
    )
}

#[derive(Serialize)]
struct MetricCsvRow {
    epoch: usize,
    loss: String,
    dev_cross_map: String,
    dev_intra_map: String,
    avg_map: String,
}

/// Per-epoch metric log with columns
/// `epoch, loss, dev_cross_map, dev_intra_map, avg_map`.
pub fn write_metric_log<W: Write>(out: W, history: &[EpochMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for m in history {
        w.serialize(MetricCsvRow {
            epoch: m.epoch,
            loss: format!("{:.6}", m.loss),
            dev_cross_map: format!("{:.2}", m.dev_cross_map),
            dev_intra_map: format!("{:.2}", m.dev_intra_map),
            avg_map: format!("{:.2}", m.avg_map),
        })
        .map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))?.flush()?;
    Ok(())
}
