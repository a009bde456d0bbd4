//! Cross- and intra-operation retrieval instances.

use std::collections::{HashMap, HashSet};

use opspace_symbolic::{free_symbols, Expr, OperationKind};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::corpus::{DerivationTriple, Split};
use super::premise::Chooser;
use super::substream;

pub const NUM_POSITIVES: usize = 4;
pub const NUM_NEGATIVES: usize = 20;
const NEGATIVE_PREMISES: usize = 5;
const INTRA_TRIES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "cross-op")]
    CrossOp,
    #[serde(rename = "intra-op")]
    IntraOp,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::CrossOp, Mode::IntraOp];

    pub fn name(self) -> &'static str {
        match self {
            Mode::CrossOp => "cross-op",
            Mode::IntraOp => "intra-op",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalInstance {
    pub premise: Expr,
    pub operation: OperationKind,
    pub positives: Vec<Expr>,
    pub negatives: Vec<Expr>,
    pub mode: Mode,
}

impl EvalInstance {
    pub fn num_premise_vars(&self) -> usize {
        free_symbols(&self.premise).len()
    }

    /// Positives followed by negatives.
    pub fn candidates(&self) -> impl Iterator<Item = &Expr> {
        self.positives.iter().chain(&self.negatives)
    }
}

/// Conclusions of one premise, bucketed by operation id.
#[derive(Debug, Clone)]
pub struct PremiseGroup {
    pub premise: Expr,
    pub split: Split,
    pub conclusions: [Vec<Expr>; 6],
}

impl PremiseGroup {
    fn has_positives(&self, t: OperationKind) -> bool {
        self.conclusions[t.id()].len() >= NUM_POSITIVES
    }

    fn positives(&self, t: OperationKind) -> &[Expr] {
        &self.conclusions[t.id()][..NUM_POSITIVES]
    }
}

/// Groups a corpus by premise, keeping first-appearance order.
pub fn group_by_premise(corpus: &[DerivationTriple]) -> Vec<PremiseGroup> {
    let mut index: HashMap<&Expr, usize> = HashMap::new();
    let mut groups: Vec<PremiseGroup> = Vec::new();
    for t in corpus {
        let g = *index.entry(&t.premise).or_insert_with(|| {
            groups.push(PremiseGroup {
                premise: t.premise.clone(),
                split: t.split,
                conclusions: Default::default(),
            });
            groups.len() - 1
        });
        groups[g].conclusions[t.operation.id()].push(t.conclusion.clone());
    }
    groups
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSetStats {
    pub eligible: usize,
    pub emitted: usize,
    /// Premise-operation pairs dropped for lack of distinct positives.
    pub insufficient_positives: usize,
    /// Intra-operation pairs dropped for lack of disjoint negative premises.
    pub insufficient_negatives: usize,
}

/// Cross-operation instance for `(group, t)`, if every operation of the
/// premise has enough conclusions.
pub fn cross_op_instance(group: &PremiseGroup, t: OperationKind) -> Option<EvalInstance> {
    if !OperationKind::ALL.iter().all(|&o| group.has_positives(o)) {
        return None;
    }
    let positives = group.positives(t).to_vec();
    let negatives: Vec<Expr> = OperationKind::ALL
        .into_iter()
        .filter(|&o| o != t)
        .flat_map(|o| group.positives(o).iter().cloned())
        .collect();
    let pos: HashSet<&Expr> = positives.iter().collect();
    if negatives.iter().any(|n| pos.contains(n)) {
        return None;
    }
    Some(EvalInstance {
        premise: group.premise.clone(),
        operation: t,
        positives,
        negatives,
        mode: Mode::CrossOp,
    })
}

fn intra_op_instance(
    groups: &[PremiseGroup],
    members: &[usize],
    g: usize,
    t: OperationKind,
    chooser: &mut impl Chooser,
) -> Option<EvalInstance> {
    let group = &groups[g];
    let positives = group.positives(t).to_vec();
    let candidates: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&o| o != g && groups[o].has_positives(t))
        .collect();
    if candidates.len() < NEGATIVE_PREMISES {
        return None;
    }
    let mut used: HashSet<Expr> = positives.iter().cloned().collect();
    let mut picked: Vec<usize> = Vec::new();
    let mut negatives = Vec::with_capacity(NUM_NEGATIVES);
    for _ in 0..INTRA_TRIES {
        if picked.len() == NEGATIVE_PREMISES {
            break;
        }
        let o = candidates[chooser.choose(candidates.len())];
        if picked.contains(&o) {
            continue;
        }
        let ys = groups[o].positives(t);
        if ys.iter().any(|y| used.contains(y)) {
            continue;
        }
        used.extend(ys.iter().cloned());
        negatives.extend(ys.iter().cloned());
        picked.push(o);
    }
    (picked.len() == NEGATIVE_PREMISES).then(|| EvalInstance {
        premise: group.premise.clone(),
        operation: t,
        positives,
        negatives,
        mode: Mode::IntraOp,
    })
}

/// Builds up to `count` instances of `mode` from premises of `split`.
///
/// Eligible premise-operation pairs are shuffled with a seeded stream and
/// the first `count` are kept, then ordered by premise and operation.
pub fn build_eval_set(
    groups: &[PremiseGroup],
    split: Split,
    mode: Mode,
    count: usize,
    seed: u64,
) -> (Vec<EvalInstance>, EvalSetStats) {
    let members: Vec<usize> = (0..groups.len())
        .filter(|&g| groups[g].split == split)
        .collect();
    let mut stats = EvalSetStats::default();
    let mut built: Vec<(usize, EvalInstance)> = Vec::new();
    for &g in &members {
        for t in OperationKind::ALL {
            if !groups[g].has_positives(t) {
                stats.insufficient_positives += 1;
                continue;
            }
            let key = (g * 6 + t.id()) as u64;
            let stream = match mode {
                Mode::CrossOp => super::STREAM_EVAL_CROSS,
                Mode::IntraOp => super::STREAM_EVAL_INTRA,
            };
            let mut rng = substream(seed, stream, key);
            let inst = match mode {
                Mode::CrossOp => {
                    let i = cross_op_instance(&groups[g], t);
                    if i.is_none() {
                        stats.insufficient_positives += 1;
                    }
                    i
                }
                Mode::IntraOp => {
                    let i = intra_op_instance(groups, &members, g, t, &mut rng);
                    if i.is_none() {
                        stats.insufficient_negatives += 1;
                    }
                    i
                }
            };
            if let Some(i) = inst {
                built.push((g * 6 + t.id(), i));
            }
        }
    }
    stats.eligible = built.len();
    let stream = match mode {
        Mode::CrossOp => super::STREAM_EVAL_CROSS,
        Mode::IntraOp => super::STREAM_EVAL_INTRA,
    };
    built.shuffle(&mut substream(seed, stream, u64::MAX));
    built.truncate(count);
    built.sort_by_key(|(k, _)| *k);
    stats.emitted = built.len();
    (built.into_iter().map(|(_, i)| i).collect(), stats)
}

/// Every complete six-operation cross-operation family in `split`.
pub fn cross_op_families(groups: &[PremiseGroup], split: Split) -> Vec<[EvalInstance; 6]> {
    groups
        .iter()
        .filter(|g| g.split == split)
        .filter_map(|g| {
            let v: Vec<EvalInstance> = OperationKind::ALL
                .into_iter()
                .filter_map(|t| cross_op_instance(g, t))
                .collect();
            v.try_into().ok()
        })
        .collect()
}

/// Checks the structural invariants of an instance; returns a reason on
/// failure.
pub fn check_instance(inst: &EvalInstance) -> Result<(), String> {
    if inst.positives.len() != NUM_POSITIVES || inst.negatives.len() != NUM_NEGATIVES {
        return Err(format!(
            "expected {NUM_POSITIVES}/{NUM_NEGATIVES} candidates, found {}/{}",
            inst.positives.len(),
            inst.negatives.len()
        ));
    }
    let pos: HashSet<&Expr> = inst.positives.iter().collect();
    if pos.len() != NUM_POSITIVES {
        return Err("positives repeat".into());
    }
    if inst.negatives.iter().any(|n| pos.contains(n)) {
        return Err("a negative equals a positive".into());
    }
    Ok(())
}
