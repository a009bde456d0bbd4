//! Line-delimited JSON dataset files and the metadata sidecar.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use opspace_symbolic::{
    free_symbols, parse_functional, to_functional, to_latex, Expr, OperationKind, Vocabulary,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::corpus::{ChainStep, DerivationTriple, MultiStepChain, Split};
use super::eval_sets::{EvalInstance, EvalSetStats, Mode};
use super::{Dataset, GenerationConfig};
use crate::error::{Error, Result};

pub const TRIPLES_FILE: &str = "triples.jsonl";
pub const CHAINS_FILE: &str = "multistep.jsonl";
pub const EVAL_DEV_FILE: &str = "eval_dev.jsonl";
pub const EVAL_TEST_FILE: &str = "eval_test.jsonl";
pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleRecord {
    pub premise_latex: String,
    pub premise_fn: String,
    pub operation: String,
    pub operand: String,
    pub conclusion_latex: String,
    pub conclusion_fn: String,
    pub num_premise_vars: usize,
    pub split: Split,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainRecord {
    pub chain_id: usize,
    pub step_index: usize,
    #[serde(flatten)]
    pub triple: TripleRecord,
    pub cross_negatives_fn: Vec<String>,
    pub intra_negatives_fn: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRecord {
    pub premise_fn: String,
    pub operation: String,
    pub mode: Mode,
    pub positives_fn: Vec<String>,
    pub negatives_fn: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub p_r: f64,
    pub p_e: f64,
    pub vocabulary: Vec<String>,
    pub counts: BTreeMap<String, usize>,
    pub eval_sets: BTreeMap<String, EvalSetStats>,
    pub config: GenerationConfig,
}

impl Metadata {
    pub(super) fn describe(
        cfg: &GenerationConfig,
        seed: u64,
        vocab: &Vocabulary,
        premises: &[(Expr, Split)],
        triples: &[DerivationTriple],
        chains: &[MultiStepChain],
        eval_stats: Vec<(String, EvalSetStats)>,
    ) -> Self {
        let mut counts = BTreeMap::new();
        counts.insert("premises".to_string(), premises.len());
        for s in [Split::Train, Split::Dev, Split::Test] {
            counts.insert(
                format!("premises/{}", s.name()),
                premises.iter().filter(|(_, x)| *x == s).count(),
            );
            counts.insert(
                format!("triples/{}", s.name()),
                triples.iter().filter(|t| t.split == s).count(),
            );
        }
        for k in 2..=5 {
            counts.insert(
                format!("premises/vars={k}"),
                premises
                    .iter()
                    .filter(|(p, _)| free_symbols(p).len() == k)
                    .count(),
            );
        }
        counts.insert("triples".into(), triples.len());
        for flag in [super::FLAG_RESAMPLED, super::FLAG_SHORT] {
            counts.insert(
                format!("flagged/{flag}"),
                triples
                    .iter()
                    .filter(|t| t.flags.iter().any(|f| f == flag))
                    .count(),
            );
        }
        counts.insert("chains".into(), chains.len());
        counts.insert(
            "chain_steps".into(),
            chains.iter().map(|c| c.steps.len()).sum(),
        );
        Self {
            seed,
            p_r: cfg.p_r,
            p_e: cfg.p_e,
            vocabulary: vocab.names().to_vec(),
            counts,
            eval_sets: eval_stats.into_iter().collect(),
            config: cfg.clone(),
        }
    }
}

pub fn expr_from_fn(text: &str) -> Result<Expr> {
    Ok(parse_functional(text)?)
}

fn operation_from_name(name: &str) -> Result<OperationKind> {
    OperationKind::from_name(name).ok_or_else(|| Error::Dataset(format!("unknown operation `{name}`")))
}

impl TripleRecord {
    pub fn from_triple(t: &DerivationTriple) -> Self {
        Self {
            premise_latex: to_latex(&t.premise),
            premise_fn: to_functional(&t.premise),
            operation: t.operation.name().to_string(),
            operand: t.operand.clone(),
            conclusion_latex: to_latex(&t.conclusion),
            conclusion_fn: to_functional(&t.conclusion),
            num_premise_vars: t.num_premise_vars,
            split: t.split,
            flags: t.flags.clone(),
        }
    }

    pub fn to_triple(&self) -> Result<DerivationTriple> {
        Ok(DerivationTriple {
            premise: expr_from_fn(&self.premise_fn)?,
            operation: operation_from_name(&self.operation)?,
            operand: self.operand.clone(),
            conclusion: expr_from_fn(&self.conclusion_fn)?,
            num_premise_vars: self.num_premise_vars,
            split: self.split,
            flags: self.flags.clone(),
        })
    }
}

impl EvalRecord {
    pub fn from_instance(i: &EvalInstance) -> Self {
        Self {
            premise_fn: to_functional(&i.premise),
            operation: i.operation.name().to_string(),
            mode: i.mode,
            positives_fn: i.positives.iter().map(to_functional).collect(),
            negatives_fn: i.negatives.iter().map(to_functional).collect(),
        }
    }

    pub fn to_instance(&self) -> Result<EvalInstance> {
        let parse_all = |v: &[String]| v.iter().map(|s| expr_from_fn(s)).collect::<Result<Vec<_>>>();
        Ok(EvalInstance {
            premise: expr_from_fn(&self.premise_fn)?,
            operation: operation_from_name(&self.operation)?,
            positives: parse_all(&self.positives_fn)?,
            negatives: parse_all(&self.negatives_fn)?,
            mode: self.mode,
        })
    }
}

fn write_lines<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            Error::Dataset(format!("{}:{}: {e}", path.display(), n + 1))
        })?);
    }
    Ok(out)
}

pub fn write_triples(path: &Path, triples: &[DerivationTriple]) -> Result<()> {
    write_lines(path, triples.iter().map(TripleRecord::from_triple))
}

pub fn read_triples(path: &Path) -> Result<Vec<DerivationTriple>> {
    read_lines::<TripleRecord>(path)?
        .iter()
        .map(TripleRecord::to_triple)
        .collect()
}

pub fn write_eval_set(path: &Path, instances: &[EvalInstance]) -> Result<()> {
    write_lines(path, instances.iter().map(EvalRecord::from_instance))
}

pub fn read_eval_set(path: &Path) -> Result<Vec<EvalInstance>> {
    read_lines::<EvalRecord>(path)?
        .iter()
        .map(EvalRecord::to_instance)
        .collect()
}

pub fn write_chains(path: &Path, chains: &[MultiStepChain]) -> Result<()> {
    let records = chains.iter().enumerate().flat_map(|(c, chain)| {
        chain.steps.iter().enumerate().map(move |(k, s)| ChainRecord {
            chain_id: c,
            step_index: k,
            triple: TripleRecord::from_triple(&s.triple),
            cross_negatives_fn: s.cross_negatives.iter().map(to_functional).collect(),
            intra_negatives_fn: s.intra_negatives.iter().map(to_functional).collect(),
        })
    });
    write_lines(path, records)
}

pub fn read_chains(path: &Path) -> Result<Vec<MultiStepChain>> {
    let mut chains: Vec<MultiStepChain> = Vec::new();
    for r in read_lines::<ChainRecord>(path)? {
        if r.chain_id == chains.len() {
            chains.push(MultiStepChain { steps: Vec::new() });
        }
        let in_order = r.chain_id + 1 == chains.len();
        let chain = chains
            .last_mut()
            .filter(|_| in_order)
            .ok_or_else(|| Error::Dataset(format!("chain {} out of order", r.chain_id)))?;
        if r.step_index != chain.steps.len() {
            return Err(Error::Dataset(format!(
                "chain {} step {} out of order",
                r.chain_id, r.step_index
            )));
        }
        let parse_all = |v: &[String]| v.iter().map(|s| expr_from_fn(s)).collect::<Result<Vec<_>>>();
        chain.steps.push(ChainStep {
            triple: r.triple.to_triple()?,
            cross_negatives: parse_all(&r.cross_negatives_fn)?,
            intra_negatives: parse_all(&r.intra_negatives_fn)?,
        });
    }
    Ok(chains)
}

impl Dataset {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_triples(&dir.join(TRIPLES_FILE), &self.triples)?;
        write_chains(&dir.join(CHAINS_FILE), &self.chains)?;
        write_eval_set(&dir.join(EVAL_DEV_FILE), &self.dev)?;
        write_eval_set(&dir.join(EVAL_TEST_FILE), &self.test)?;
        let mut meta = serde_json::to_string_pretty(&self.metadata)?;
        meta.push('\n');
        std::fs::write(dir.join(METADATA_FILE), meta)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let triples = read_triples(&dir.join(TRIPLES_FILE))?;
        let mut seen = HashSet::new();
        let premises = triples
            .iter()
            .filter(|t| seen.insert(t.premise.clone()))
            .map(|t| (t.premise.clone(), t.split))
            .collect();
        let metadata: Metadata =
            serde_json::from_str(&std::fs::read_to_string(dir.join(METADATA_FILE))?)?;
        Ok(Self {
            premises,
            triples,
            chains: read_chains(&dir.join(CHAINS_FILE))?,
            dev: read_eval_set(&dir.join(EVAL_DEV_FILE))?,
            test: read_eval_set(&dir.join(EVAL_TEST_FILE))?,
            metadata,
        })
    }
}
