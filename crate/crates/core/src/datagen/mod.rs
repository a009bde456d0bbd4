//! Synthetic derivation corpora.
//!
//! Every random decision draws from a ChaCha stream keyed by
//! `(seed, purpose, index)`, so each premise, chain and instance is
//! reproducible on its own and independent of generation order.

mod corpus;
mod eval_sets;
mod io;
mod premise;

use std::collections::HashSet;

use opspace_symbolic::{Expr, Vocabulary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use corpus::{
    build_multistep_corpus, build_single_step_corpus, derive_conclusions, filter_by_variable_count,
    sample_operands, split_premises, ChainStep, DerivationTriple, MultiStepChain, Split,
    FLAG_RESAMPLED, FLAG_SHORT, MAX_CHAIN_NODES, MAX_CHAIN_STEPS, OPERAND_TRIES,
};
pub use eval_sets::{
    build_eval_set, check_instance, cross_op_families, cross_op_instance, group_by_premise,
    EvalInstance, EvalSetStats, Mode, PremiseGroup, NUM_NEGATIVES, NUM_POSITIVES,
};
pub use io::{
    expr_from_fn, read_chains, read_eval_set, read_triples, write_chains, write_eval_set,
    write_triples, ChainRecord, EvalRecord, Metadata, TripleRecord, CHAINS_FILE, EVAL_DEV_FILE,
    EVAL_TEST_FILE, METADATA_FILE, TRIPLES_FILE,
};
pub use premise::{
    build_premise, randomise_premise, randomise_symbols, Chooser, PoolOp, PremiseSpec,
    RandomisationConfig, ScriptedChooser, PREMISE_ATTEMPTS,
};

use crate::error::{Error, Result};

const STREAM_PREMISES: u64 = 1;
const STREAM_OPERANDS: u64 = 2;
const STREAM_SPLIT: u64 = 3;
const STREAM_CHAINS: u64 = 4;
const STREAM_CHAIN_NEGATIVES: u64 = 5;
const STREAM_EVAL_CROSS: u64 = 6;
const STREAM_EVAL_INTRA: u64 = 7;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for one `(purpose, index)` under `seed`.
pub fn substream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(purpose)));
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub premises: usize,
    pub min_vars: usize,
    pub max_vars: usize,
    pub construction_steps: usize,
    pub operator_pool: Vec<PoolOp>,
    pub p_r: f64,
    pub p_e: f64,
    pub constant_range: (i64, i64),
    /// Empty means the standard vocabulary.
    pub vocabulary: Vec<String>,
    pub operand_set_size: usize,
    pub train_fraction: f64,
    pub dev_fraction: f64,
    /// Instances per mode.
    pub dev_instances: usize,
    pub test_instances: usize,
    pub multistep_chains: usize,
    pub max_steps: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            premises: 2000,
            min_vars: 2,
            max_vars: 5,
            construction_steps: 3,
            operator_pool: PoolOp::ALL.to_vec(),
            p_r: 0.5,
            p_e: 0.25,
            constant_range: (2, 9),
            vocabulary: Vec::new(),
            operand_set_size: 4,
            train_fraction: 0.7,
            dev_fraction: 0.1,
            dev_instances: 600,
            test_instances: 1200,
            multistep_chains: 800,
            max_steps: 6,
        }
    }
}

impl GenerationConfig {
    /// Full-scale sizes.
    pub fn paper() -> Self {
        Self {
            premises: 12_800,
            dev_instances: 3000,
            test_instances: 6000,
            multistep_chains: 5000,
            ..Self::default()
        }
    }

    pub fn vocabulary(&self) -> Result<Vocabulary> {
        if self.vocabulary.is_empty() {
            Ok(Vocabulary::standard())
        } else {
            Vocabulary::new(self.vocabulary.clone(), self.constant_range)
                .map_err(|e| Error::Config(e.to_string()))
        }
    }

    pub fn randomisation(&self, seed: u64) -> RandomisationConfig {
        RandomisationConfig {
            p_r: self.p_r,
            p_e: self.p_e,
            constant_range: self.constant_range,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2 <= self.min_vars && self.min_vars <= self.max_vars && self.max_vars <= 5) {
            return Err(Error::Config(format!(
                "variable range {}..={} must lie within 2..=5",
                self.min_vars, self.max_vars
            )));
        }
        if self.operand_set_size < 4 {
            return Err(Error::Config("operand_set_size must be at least 4".into()));
        }
        let (a, b) = (self.train_fraction, self.dev_fraction);
        if !(a > 0.0 && b >= 0.0 && a + b <= 1.0) {
            return Err(Error::Config(format!("invalid split fractions {a}/{b}")));
        }
        if self.max_steps == 0 || self.max_steps > MAX_CHAIN_STEPS {
            return Err(Error::Config(format!(
                "max_steps must lie in 1..={MAX_CHAIN_STEPS}"
            )));
        }
        self.randomisation(0).odds()?;
        let vocab = self.vocabulary()?;
        if vocab.len() < self.max_vars.max(self.operand_set_size) {
            return Err(Error::Config("vocabulary too small".into()));
        }
        PremiseSpec {
            num_variables: self.min_vars,
            construction_steps: self.construction_steps,
            operator_pool: self.operator_pool.clone(),
        }
        .validate()
    }
}

/// A generated corpus with its evaluation sets.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub premises: Vec<(Expr, Split)>,
    pub triples: Vec<DerivationTriple>,
    pub chains: Vec<MultiStepChain>,
    pub dev: Vec<EvalInstance>,
    pub test: Vec<EvalInstance>,
    pub metadata: Metadata,
}

impl Dataset {
    pub fn train_triples(&self) -> Vec<DerivationTriple> {
        self.triples
            .iter()
            .filter(|t| t.split == Split::Train)
            .cloned()
            .collect()
    }
}

/// Draws `n` canonically distinct premises.
pub fn generate_premises(cfg: &GenerationConfig, seed: u64) -> Result<Vec<Expr>> {
    let vocab = cfg.vocabulary()?;
    let rcfg = cfg.randomisation(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(cfg.premises);
    let span = cfg.max_vars - cfg.min_vars + 1;
    let budget = 20 * cfg.premises.max(1);
    for i in 0..budget {
        if out.len() == cfg.premises {
            break;
        }
        let mut rng = substream(seed, STREAM_PREMISES, i as u64);
        let spec = PremiseSpec {
            num_variables: cfg.min_vars + rng.choose(span),
            construction_steps: cfg.construction_steps,
            operator_pool: cfg.operator_pool.clone(),
        };
        let base = match build_premise(&spec, &vocab, &mut rng) {
            Ok(e) => e,
            Err(Error::RetryExhausted { .. }) => continue,
            Err(e) => return Err(e),
        };
        let p = randomise_premise(&base, &rcfg, &mut rng)?;
        if seen.insert(p.clone()) {
            out.push(p);
        }
    }
    if out.len() < cfg.premises {
        return Err(Error::Config(format!(
            "only {} distinct premises after {budget} attempts",
            out.len()
        )));
    }
    Ok(out)
}

/// Runs the whole generation pipeline.
pub fn generate(cfg: &GenerationConfig, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let vocab = cfg.vocabulary()?;
    let raw = generate_premises(cfg, seed)?;
    let premises = split_premises(&raw, (cfg.train_fraction, cfg.dev_fraction), seed);
    let triples = build_single_step_corpus(&premises, cfg.operand_set_size, &vocab, seed);
    let test_premises: Vec<(Expr, Split)> = premises
        .iter()
        .filter(|(_, s)| *s == Split::Test)
        .cloned()
        .collect();
    let chains =
        build_multistep_corpus(&test_premises, cfg.multistep_chains, cfg.max_steps, &vocab, seed);
    let groups = group_by_premise(&triples);
    let mut dev = Vec::new();
    let mut test = Vec::new();
    let mut eval_stats = Vec::new();
    for mode in Mode::ALL {
        let (d, ds) = build_eval_set(&groups, Split::Dev, mode, cfg.dev_instances, seed);
        let (t, ts) = build_eval_set(&groups, Split::Test, mode, cfg.test_instances, seed);
        dev.extend(d);
        test.extend(t);
        eval_stats.push((format!("dev/{}", mode.name()), ds));
        eval_stats.push((format!("test/{}", mode.name()), ts));
    }
    let metadata = Metadata::describe(cfg, seed, &vocab, &premises, &triples, &chains, eval_stats);
    Ok(Dataset {
        premises,
        triples,
        chains,
        dev,
        test,
        metadata,
    })
}
