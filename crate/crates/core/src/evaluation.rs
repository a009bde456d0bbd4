//! Ranking metrics and the evaluation protocols.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use opspace_symbolic::{Expr, OperationKind};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::datagen::{EvalInstance, Mode, MultiStepChain, NUM_NEGATIVES, NUM_POSITIVES};
use crate::error::{Error, Result};
use crate::heads::cosine;

/// What the protocols need from a trained system.
pub trait LatentModel {
    fn embed(&self, exprs: &[&Expr]) -> Result<Vec<Vec<f32>>>;
    /// Cosine used to rank `e_y` as a conclusion of `t` applied to `e_x`.
    fn ranking_cosine(&self, ex: &[f32], t: OperationKind, ey: &[f32]) -> Result<f64>;
    /// Next premise embedding after applying `t` in latent space.
    fn step(&self, ex: &[f32], t: OperationKind) -> Result<Vec<f32>>;
}

/// Relevance flags in ranked order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    pub relevant: Vec<bool>,
    /// Candidate indices in ranked order.
    pub order: Vec<usize>,
}

impl RankedList {
    /// Sorts by descending score; equal scores keep candidate order.
    pub fn rank(scores: &[f64], relevant: &[bool]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Self {
            relevant: order.iter().map(|&i| relevant[i]).collect(),
            order,
        }
    }
}

pub fn average_precision(list: &RankedList) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0.0;
    for (i, &rel) in list.relevant.iter().enumerate() {
        if rel {
            hits += 1;
            total += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        return Err(Error::NoRelevant);
    }
    Ok(total / hits as f64)
}

pub fn hit_at_k(list: &RankedList, k: usize) -> bool {
    list.relevant.iter().take(k).any(|&r| r)
}

/// Expected MAP ×100 of a uniformly random ranking, by Monte Carlo.
pub fn random_baseline_map(positives: usize, candidates: usize, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flags: Vec<bool> = (0..candidates).map(|i| i < positives).collect();
    let mut total = 0.0;
    for _ in 0..trials {
        flags.shuffle(&mut rng);
        let list = RankedList {
            relevant: flags.clone(),
            order: Vec::new(),
        };
        total += average_precision(&list).expect("at least one positive");
    }
    100.0 * total / trials as f64
}

/// One true conclusion, two cross-op and two intra-op negatives.
pub const MULTISTEP_CANDIDATES: usize = 5;

/// Baseline MAP for the retrieval instances: 4 positives among 24.
pub fn retrieval_baseline_map() -> f64 {
    random_baseline_map(NUM_POSITIVES, NUM_POSITIVES + NUM_NEGATIVES, 200_000, 0x5eed)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReportKey {
    pub mode: Option<Mode>,
    pub num_vars: Option<usize>,
    pub step: Option<usize>,
}

/// Means ×100.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub key: ReportKey,
    pub map: f64,
    pub hit_at_1: f64,
    pub hit_at_3: f64,
    pub instances: usize,
}

#[derive(Default)]
struct Accumulator {
    ap: f64,
    hit1: f64,
    hit3: f64,
    n: usize,
}

impl Accumulator {
    fn push(&mut self, list: &RankedList) -> Result<()> {
        self.ap += average_precision(list)?;
        self.hit1 += f64::from(u8::from(hit_at_k(list, 1)));
        self.hit3 += f64::from(u8::from(hit_at_k(list, 3)));
        self.n += 1;
        Ok(())
    }

    fn report(&self, key: ReportKey) -> MetricReport {
        let mean = |x: f64| if self.n == 0 { f64::NAN } else { 100.0 * x / self.n as f64 };
        MetricReport {
            key,
            map: mean(self.ap),
            hit_at_1: mean(self.hit1),
            hit_at_3: mean(self.hit3),
            instances: self.n,
        }
    }
}

/// Embeds every distinct expression once.
pub struct EmbeddingCache<'e> {
    index: HashMap<&'e Expr, usize>,
    vectors: Vec<Vec<f32>>,
}

impl<'e> EmbeddingCache<'e> {
    pub fn build<M: LatentModel + ?Sized>(model: &M, exprs: impl IntoIterator<Item = &'e Expr>) -> Result<Self> {
        let mut index = HashMap::new();
        let mut order = Vec::new();
        for e in exprs {
            index.entry(e).or_insert_with(|| {
                order.push(e);
                order.len() - 1
            });
        }
        let vectors = model.embed(&order)?;
        Ok(Self { index, vectors })
    }

    pub fn get(&self, e: &Expr) -> &[f32] {
        &self.vectors[self.index[e]]
    }
}

fn instance_exprs(instances: &[EvalInstance]) -> impl Iterator<Item = &Expr> {
    instances
        .iter()
        .flat_map(|i| std::iter::once(&i.premise).chain(i.candidates()))
}

/// Negatives first, so that exact score ties never favour a positive.
fn ranked_candidates<M: LatentModel + ?Sized>(model: &M, cache: &EmbeddingCache, inst: &EvalInstance) -> Result<RankedList> {
    let ex = cache.get(&inst.premise);
    let mut scores = Vec::with_capacity(inst.positives.len() + inst.negatives.len());
    let mut relevant = Vec::with_capacity(scores.capacity());
    for (e, rel) in inst
        .negatives
        .iter()
        .map(|e| (e, false))
        .chain(inst.positives.iter().map(|e| (e, true)))
    {
        scores.push(model.ranking_cosine(ex, inst.operation, cache.get(e))?);
        relevant.push(rel);
    }
    Ok(RankedList::rank(&scores, &relevant))
}

fn grouped_retrieval<M: LatentModel + ?Sized>(
    model: &M,
    instances: &[EvalInstance],
    key: impl Fn(&EvalInstance) -> ReportKey,
) -> Result<Vec<MetricReport>> {
    let cache = EmbeddingCache::build(model, instance_exprs(instances))?;
    let mut groups: std::collections::BTreeMap<ReportKey, Accumulator> = Default::default();
    for inst in instances {
        let list = ranked_candidates(model, &cache, inst)?;
        groups.entry(key(inst)).or_default().push(&list)?;
    }
    Ok(groups.iter().map(|(k, acc)| acc.report(*k)).collect())
}

/// MAP, Hit@1 and Hit@3 per mode.
pub fn eval_retrieval<M: LatentModel + ?Sized>(model: &M, instances: &[EvalInstance]) -> Result<Vec<MetricReport>> {
    grouped_retrieval(model, instances, |i| ReportKey {
        mode: Some(i.mode),
        ..Default::default()
    })
}

/// MAP per mode and premise variable count; groups 2..=5 are always present.
pub fn eval_length_generalisation<M: LatentModel + ?Sized>(model: &M, instances: &[EvalInstance]) -> Result<Vec<MetricReport>> {
    let mut reports = grouped_retrieval(model, instances, |i| ReportKey {
        mode: Some(i.mode),
        num_vars: Some(i.num_premise_vars()),
        step: None,
    })?;
    for mode in Mode::ALL {
        for v in 2..=5 {
            let key = ReportKey {
                mode: Some(mode),
                num_vars: Some(v),
                step: None,
            };
            if !reports.iter().any(|r| r.key == key) {
                reports.push(Accumulator::default().report(key));
            }
        }
    }
    reports.sort_by_key(|r| r.key);
    Ok(reports)
}

/// Hit@1 per step: the premise is propagated latently, each step ranks its
/// true conclusion against that step's cross- and intra-op negatives.
pub fn eval_multistep<M: LatentModel + ?Sized>(model: &M, chains: &[MultiStepChain]) -> Result<Vec<MetricReport>> {
    for (c, chain) in chains.iter().enumerate() {
        if chain.steps.is_empty() {
            return Err(Error::MissingCandidates { chain: c, step: 0 });
        }
        for (s, st) in chain.steps.iter().enumerate() {
            if st.cross_negatives.is_empty() || st.intra_negatives.is_empty() {
                return Err(Error::MissingCandidates { chain: c, step: s + 1 });
            }
        }
    }
    let cache = EmbeddingCache::build(
        model,
        chains.iter().flat_map(|c| {
            std::iter::once(&c.steps[0].triple.premise).chain(c.steps.iter().flat_map(|s| {
                std::iter::once(&s.triple.conclusion)
                    .chain(&s.cross_negatives)
                    .chain(&s.intra_negatives)
            }))
        }),
    )?;
    let max_steps = chains.iter().map(|c| c.steps.len()).max().unwrap_or(0);
    let mut acc: Vec<Accumulator> = (0..max_steps).map(|_| Accumulator::default()).collect();
    for chain in chains {
        let mut current = cache.get(&chain.steps[0].triple.premise).to_vec();
        for (k, st) in chain.steps.iter().enumerate() {
            let t = st.triple.operation;
            let mut scores = Vec::new();
            let mut relevant = Vec::new();
            for e in st.cross_negatives.iter().chain(&st.intra_negatives) {
                scores.push(model.ranking_cosine(&current, t, cache.get(e))?);
                relevant.push(false);
            }
            scores.push(model.ranking_cosine(&current, t, cache.get(&st.triple.conclusion))?);
            relevant.push(true);
            acc[k].push(&RankedList::rank(&scores, &relevant))?;
            current = model.step(&current, t)?;
        }
    }
    Ok(acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            a.report(ReportKey {
                step: Some(k + 1),
                ..Default::default()
            })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationReport {
    pub mode: Mode,
    /// Raw encoder geometry, ×100.
    pub before: f64,
    /// After the operation-specific transformation, ×100.
    pub after: f64,
    pub instances: usize,
}

fn mean_gap(pos: &[f64], neg: &[f64]) -> f64 {
    pos.iter().sum::<f64>() / pos.len() as f64 - neg.iter().sum::<f64>() / neg.len() as f64
}

/// Mean positive-minus-negative cosine per mode, before and after the head.
pub fn latent_separation<M: LatentModel + ?Sized>(model: &M, instances: &[EvalInstance]) -> Result<Vec<SeparationReport>> {
    let cache = EmbeddingCache::build(model, instance_exprs(instances))?;
    let mut out = Vec::new();
    for mode in Mode::ALL {
        let (mut before, mut after, mut n) = (0.0, 0.0, 0usize);
        for inst in instances.iter().filter(|i| i.mode == mode) {
            let ex = cache.get(&inst.premise);
            let raw = |es: &[Expr]| es.iter().map(|e| cosine(ex, cache.get(e))).collect::<Result<Vec<f64>>>();
            let moved = |es: &[Expr]| {
                es.iter()
                    .map(|e| model.ranking_cosine(ex, inst.operation, cache.get(e)))
                    .collect::<Result<Vec<f64>>>()
            };
            before += mean_gap(&raw(&inst.positives)?, &raw(&inst.negatives)?);
            after += mean_gap(&moved(&inst.positives)?, &moved(&inst.negatives)?);
            n += 1;
        }
        if n > 0 {
            out.push(SeparationReport {
                mode,
                before: 100.0 * before / n as f64,
                after: 100.0 * after / n as f64,
                instances: n,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedPoint {
    pub id: String,
    pub kind: String,
    pub x: f64,
    pub y: f64,
}

/// Top-two principal components of the rows, signs fixed so the largest
/// loading of each component is positive.
pub fn pca_2d(points: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    if points.len() < 3 {
        return Err(Error::EmptyInput);
    }
    let d = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != d) {
        return Err(Error::ShapeMismatch {
            what: "projected point".into(),
            expected: d,
            found: bad.len(),
        });
    }
    let n = points.len();
    let x = DMatrix::from_fn(n, d, |i, j| points[i][j]);
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    if cov.trace() <= 1e-18 {
        return Err(Error::DegenerateCovariance);
    }
    let eig = SymmetricEigen::new(cov);
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let component = |k: usize| {
        let mut v: Vec<f64> = eig.eigenvectors.column(idx[k]).iter().copied().collect();
        let pivot = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    let (c1, c2) = (component(0), component(1.min(d - 1)));
    Ok((0..n)
        .map(|i| {
            let row = centered.row(i);
            let p = |c: &[f64]| row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
            (p(&c1), if d > 1 { p(&c2) } else { 0.0 })
        })
        .collect())
}

/// Points before the head (premise, positives, negatives) and after it
/// (prediction and targets in the head's comparison frame), each phase
/// projected separately.
pub fn export_2d<M: LatentModel + ?Sized>(
    model: &M,
    instances: &[EvalInstance],
    transform: impl Fn(&[f32], OperationKind, &[f32]) -> Result<(Vec<f32>, Vec<f32>)>,
) -> Result<Vec<ProjectedPoint>> {
    let cache = EmbeddingCache::build(model, instance_exprs(instances))?;
    let mut before: Vec<(String, String, Vec<f64>)> = Vec::new();
    let mut after: Vec<(String, String, Vec<f64>)> = Vec::new();
    let wide = |v: &[f32]| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
    for (i, inst) in instances.iter().enumerate() {
        let ex = cache.get(&inst.premise);
        before.push((format!("{i}"), "premise".into(), wide(ex)));
        let mut predicted = None;
        for (j, (e, kind)) in inst
            .positives
            .iter()
            .map(|e| (e, "positive"))
            .chain(inst.negatives.iter().map(|e| (e, "negative")))
            .enumerate()
        {
            let ey = cache.get(e);
            before.push((format!("{i}.{j}"), kind.into(), wide(ey)));
            let (pred, target) = transform(ex, inst.operation, ey)?;
            after.push((format!("{i}.{j}"), kind.into(), wide(&target)));
            predicted.get_or_insert(pred);
        }
        if let Some(p) = predicted {
            after.push((format!("{i}"), "predicted".into(), wide(&p)));
        }
    }
    let mut out = Vec::with_capacity(before.len() + after.len());
    for (phase, rows) in [("before", before), ("after", after)] {
        let coords = pca_2d(&rows.iter().map(|r| r.2.clone()).collect::<Vec<_>>())?;
        for ((id, kind, _), (x, y)) in rows.into_iter().zip(coords) {
            out.push(ProjectedPoint {
                id,
                kind: format!("{phase}/{kind}"),
                x,
                y,
            });
        }
    }
    Ok(out)
}

/// Run identity attached to every report row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportContext {
    pub config_hash: String,
    pub paradigm: String,
    pub encoder: String,
}

#[derive(Serialize)]
struct MetricRow<'a> {
    config_hash: &'a str,
    paradigm: &'a str,
    encoder: &'a str,
    mode: &'a str,
    num_vars: String,
    step: String,
    instances: usize,
    map: String,
    hit_at_1: String,
    hit_at_3: String,
}

/// Fixed two-decimal form; values that round to zero print as `0.00`.
pub fn two_decimals(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn flush_csv<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner().map_err(|e| Error::Io(e.into_error()))?.flush()?;
    Ok(())
}

pub fn write_metric_reports<W: Write>(out: W, ctx: &ReportContext, reports: &[MetricReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(MetricRow {
            config_hash: &ctx.config_hash,
            paradigm: &ctx.paradigm,
            encoder: &ctx.encoder,
            mode: r.key.mode.map(Mode::name).unwrap_or(""),
            num_vars: opt(r.key.num_vars),
            step: opt(r.key.step),
            instances: r.instances,
            map: two_decimals(r.map),
            hit_at_1: two_decimals(r.hit_at_1),
            hit_at_3: two_decimals(r.hit_at_3),
        })
        .map_err(csv_error)?;
    }
    flush_csv(w)
}

#[derive(Serialize)]
struct SeparationRow<'a> {
    config_hash: &'a str,
    paradigm: &'a str,
    encoder: &'a str,
    mode: &'a str,
    instances: usize,
    before: String,
    after: String,
}

pub fn write_separation_reports<W: Write>(out: W, ctx: &ReportContext, reports: &[SeparationReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(SeparationRow {
            config_hash: &ctx.config_hash,
            paradigm: &ctx.paradigm,
            encoder: &ctx.encoder,
            mode: r.mode.name(),
            instances: r.instances,
            before: two_decimals(r.before),
            after: two_decimals(r.after),
        })
        .map_err(csv_error)?;
    }
    flush_csv(w)
}

pub fn write_projection<W: Write>(out: W, points: &[ProjectedPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p).map_err(csv_error)?;
    }
    flush_csv(w)
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Dataset(format!("csv: {other:?}")),
    }
}

/// Writes `path` via [`write_metric_reports`].
pub fn save_metric_reports(path: &Path, ctx: &ReportContext, reports: &[MetricReport]) -> Result<()> {
    write_metric_reports(std::fs::File::create(path)?, ctx, reports)
}
