//! Single-step triples, multi-step chains and premise splits.

use std::collections::HashSet;

use opspace_symbolic::{apply_operation, free_symbols, Expr, OperationKind, Vocabulary};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::premise::Chooser;
use super::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationTriple {
    pub premise: Expr,
    pub operation: OperationKind,
    pub operand: String,
    pub conclusion: Expr,
    pub num_premise_vars: usize,
    pub split: Split,
    pub flags: Vec<String>,
}

/// Operand tries per conclusion slot, counting the first.
pub const OPERAND_TRIES: usize = 10;

pub const FLAG_RESAMPLED: &str = "operand_resampled";
pub const FLAG_SHORT: &str = "short_conclusion_set";

/// Derives conclusions of `premise` for each operation, one per operand slot.
///
/// A slot whose conclusion fails, equals the premise, or repeats any earlier
/// conclusion of this premise (under any operation) draws a fresh operand
/// from `vocab`, up to [`OPERAND_TRIES`] attempts. Operations that end with
/// fewer conclusions than slots carry [`FLAG_SHORT`].
pub fn derive_conclusions(
    premise: &Expr,
    operations: &[OperationKind],
    operands: &[String],
    vocab: &Vocabulary,
    split: Split,
    chooser: &mut impl Chooser,
) -> Vec<DerivationTriple> {
    let num_vars = free_symbols(premise).len();
    let mut seen: HashSet<Expr> = HashSet::new();
    seen.insert(premise.clone());
    let mut out = Vec::new();
    for &t in operations {
        let start = out.len();
        for v in operands {
            let mut operand = v.clone();
            let mut flags = Vec::new();
            let mut found = None;
            for attempt in 0..OPERAND_TRIES {
                if attempt > 0 {
                    operand = vocab.names()[chooser.choose(vocab.len())].clone();
                    flags = vec![FLAG_RESAMPLED.to_string()];
                }
                if let Ok(y) = apply_operation(premise, t, &operand) {
                    if !seen.contains(&y) {
                        found = Some(y);
                        break;
                    }
                }
            }
            if let Some(y) = found {
                seen.insert(y.clone());
                out.push(DerivationTriple {
                    premise: premise.clone(),
                    operation: t,
                    operand,
                    conclusion: y,
                    num_premise_vars: num_vars,
                    split,
                    flags,
                });
            }
        }
        if out.len() - start < operands.len() {
            for tr in &mut out[start..] {
                tr.flags.push(FLAG_SHORT.to_string());
            }
        }
    }
    out
}

/// Draws `k` distinct operand names.
pub fn sample_operands(vocab: &Vocabulary, k: usize, chooser: &mut impl Chooser) -> Vec<String> {
    let mut pool: Vec<&String> = vocab.names().iter().collect();
    (0..k.min(pool.len()))
        .map(|_| pool.remove(chooser.choose(pool.len())).clone())
        .collect()
}

/// Applies all six operations to every premise with a per-premise operand
/// set of `v_size` names.
pub fn build_single_step_corpus(
    premises: &[(Expr, Split)],
    v_size: usize,
    vocab: &Vocabulary,
    seed: u64,
) -> Vec<DerivationTriple> {
    let mut out = Vec::new();
    for (i, (p, split)) in premises.iter().enumerate() {
        let mut rng = substream(seed, super::STREAM_OPERANDS, i as u64);
        let operands = sample_operands(vocab, v_size, &mut rng);
        out.extend(derive_conclusions(
            p,
            &OperationKind::ALL,
            &operands,
            vocab,
            *split,
            &mut rng,
        ));
    }
    out
}

pub fn filter_by_variable_count(corpus: &[DerivationTriple], k: usize) -> Vec<DerivationTriple> {
    corpus
        .iter()
        .filter(|t| t.num_premise_vars == k)
        .cloned()
        .collect()
}

/// Assigns splits to canonically distinct premises by a seeded shuffle.
///
/// Returns premises in their original order; duplicates are dropped before
/// splitting so no canonical premise lands in two splits.
pub fn split_premises(premises: &[Expr], fractions: (f64, f64), seed: u64) -> Vec<(Expr, Split)> {
    let mut seen = HashSet::new();
    let unique: Vec<&Expr> = premises.iter().filter(|p| seen.insert(*p)).collect();
    let n = unique.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, super::STREAM_SPLIT, 0));
    let n_train = (fractions.0 * n as f64).round() as usize;
    let n_dev = ((fractions.1 * n as f64).round() as usize).min(n - n_train.min(n));
    let mut split = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        split[i] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_dev {
            Split::Dev
        } else {
            Split::Test
        };
    }
    unique
        .into_iter()
        .zip(split)
        .map(|(p, s)| (p.clone(), s))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainStep {
    pub triple: DerivationTriple,
    /// Conclusions of other operations on this step's premise.
    pub cross_negatives: Vec<Expr>,
    /// Conclusions of this step's operation on other chains' premises.
    pub intra_negatives: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiStepChain {
    pub steps: Vec<ChainStep>,
}

pub const MAX_CHAIN_STEPS: usize = 6;
/// Conclusions larger than this many nodes count as stuck.
pub const MAX_CHAIN_NODES: usize = 400;

fn chain_step_ok(premise: &Expr, y: &Expr) -> bool {
    y != premise && y.node_count() <= MAX_CHAIN_NODES
}

/// Random walks of up to `max_steps` operations from each premise.
///
/// `count` chains are started from premises taken round-robin. Each chain
/// draws a fresh `(operation, operand)` per step and retries up to
/// [`OPERAND_TRIES`] times; a stuck chain is truncated, and only chains of
/// at least two steps are kept. Every step then gets two cross-operation
/// and two intra-operation negatives.
pub fn build_multistep_corpus(
    premises: &[(Expr, Split)],
    count: usize,
    max_steps: usize,
    vocab: &Vocabulary,
    seed: u64,
) -> Vec<MultiStepChain> {
    if premises.is_empty() {
        return Vec::new();
    }
    let max_steps = max_steps.min(MAX_CHAIN_STEPS);
    let mut chains: Vec<Vec<DerivationTriple>> = Vec::new();
    for c in 0..count {
        let (start, split) = &premises[c % premises.len()];
        let mut rng = substream(seed, super::STREAM_CHAINS, c as u64);
        let mut steps: Vec<DerivationTriple> = Vec::new();
        let mut current = start.clone();
        for _ in 0..max_steps {
            let mut next = None;
            for _ in 0..OPERAND_TRIES {
                let t = OperationKind::ALL[rng.choose(6)];
                let v = vocab.names()[rng.choose(vocab.len())].clone();
                if let Ok(y) = apply_operation(&current, t, &v) {
                    if chain_step_ok(&current, &y) {
                        next = Some((t, v, y));
                        break;
                    }
                }
            }
            let Some((t, v, y)) = next else { break };
            steps.push(DerivationTriple {
                premise: current.clone(),
                operation: t,
                operand: v,
                conclusion: y.clone(),
                num_premise_vars: free_symbols(&current).len(),
                split: *split,
                flags: Vec::new(),
            });
            current = y;
        }
        if steps.len() >= 2 {
            chains.push(steps);
        }
    }
    attach_candidates(chains, vocab, seed)
}

fn draw(premise: &Expr, t: OperationKind, vocab: &Vocabulary, rng: &mut impl Chooser) -> Option<Expr> {
    let v = &vocab.names()[rng.choose(vocab.len())];
    apply_operation(premise, t, v).ok()
}

fn attach_candidates(
    chains: Vec<Vec<DerivationTriple>>,
    vocab: &Vocabulary,
    seed: u64,
) -> Vec<MultiStepChain> {
    let mut out = Vec::with_capacity(chains.len());
    for (c, chain) in chains.iter().enumerate() {
        let mut rng = substream(seed, super::STREAM_CHAIN_NEGATIVES, c as u64);
        let mut steps = Vec::with_capacity(chain.len());
        for (k, tr) in chain.iter().enumerate() {
            let mut used: HashSet<Expr> = HashSet::from([tr.conclusion.clone()]);
            let mut cross = Vec::new();
            for _ in 0..20 * OPERAND_TRIES {
                if cross.len() == 2 {
                    break;
                }
                let mut others: Vec<OperationKind> = OperationKind::ALL
                    .into_iter()
                    .filter(|&o| o != tr.operation)
                    .collect();
                let t = others.swap_remove(rng.choose(others.len()));
                if let Some(y) = draw(&tr.premise, t, vocab, &mut rng) {
                    if y != tr.premise && used.insert(y.clone()) {
                        cross.push(y);
                    }
                }
            }
            let mut intra = Vec::new();
            if chains.len() > 1 {
                for _ in 0..20 * OPERAND_TRIES {
                    if intra.len() == 2 {
                        break;
                    }
                    let mut o = rng.choose(chains.len() - 1);
                    if o >= c {
                        o += 1;
                    }
                    let other = &chains[o];
                    let premise = &other[k.min(other.len() - 1)].premise;
                    if let Some(y) = draw(premise, tr.operation, vocab, &mut rng) {
                        if used.insert(y.clone()) {
                            intra.push(y);
                        }
                    }
                }
            }
            steps.push(ChainStep {
                triple: tr.clone(),
                cross_negatives: cross,
                intra_negatives: intra,
            });
        }
        out.push(MultiStepChain { steps });
    }
    out
}
