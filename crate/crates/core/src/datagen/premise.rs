//! Premise construction and symbol randomisation.

use opspace_symbolic::{free_symbols, substitute, Expr, Func, Vocabulary};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source of uniform index draws, so tests can script exact choices.
pub trait Chooser {
    /// Uniform index in `0..n`; `n > 0`.
    fn choose(&mut self, n: usize) -> usize;
}

impl<R: Rng> Chooser for R {
    fn choose(&mut self, n: usize) -> usize {
        self.gen_range(0..n)
    }
}

/// Replays a fixed list of draws, then panics.
#[derive(Debug, Clone)]
pub struct ScriptedChooser {
    draws: Vec<usize>,
    pos: usize,
}

impl ScriptedChooser {
    pub fn new(draws: Vec<usize>) -> Self {
        Self { draws, pos: 0 }
    }
}

impl Chooser for ScriptedChooser {
    fn choose(&mut self, n: usize) -> usize {
        let d = *self
            .draws
            .get(self.pos)
            .expect("scripted chooser ran out of draws");
        assert!(d < n, "scripted draw {d} out of range 0..{n}");
        self.pos += 1;
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomisationConfig {
    /// Symbol-replacement rate.
    pub p_r: f64,
    /// Exponentiation rate given replacement.
    pub p_e: f64,
    pub constant_range: (i64, i64),
    pub seed: u64,
}

impl Default for RandomisationConfig {
    fn default() -> Self {
        Self {
            p_r: 0.5,
            p_e: 0.25,
            constant_range: (2, 9),
            seed: 0,
        }
    }
}

fn odds(p: f64, field: &str) -> Result<usize> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Config(format!("{field} = {p} must lie in (0, 1]")));
    }
    let k = 1.0 / p - 1.0;
    if (k - k.round()).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "1/{field} - 1 = {k} must be a non-negative integer"
        )));
    }
    Ok(k.round() as usize)
}

impl RandomisationConfig {
    /// `(p, p_c)`: the number of zero entries in each selection list.
    pub fn odds(&self) -> Result<(usize, usize)> {
        let (lo, hi) = self.constant_range;
        if lo < 2 || hi > 9 || lo > hi {
            return Err(Error::Config(format!(
                "constant range {lo}..={hi} must lie within 2..=9"
            )));
        }
        Ok((odds(self.p_r, "p_r")?, odds(self.p_e, "p_e")?))
    }
}

/// Draws the replacement `s'` for every symbol, in the given order.
pub fn randomise_symbols(
    symbols: &[String],
    cfg: &RandomisationConfig,
    chooser: &mut impl Chooser,
) -> Result<Vec<(String, Expr)>> {
    let (p, p_c) = cfg.odds()?;
    let (lo, hi) = cfg.constant_range;
    let span = (hi - lo + 1) as usize;
    let mut out = Vec::with_capacity(symbols.len());
    for s in symbols {
        let sym = Expr::symbol(s.as_str());
        // choice([0]*p + [1]) is 1 only at the last index.
        let replaced = if chooser.choose(p + 1) == p {
            let exponentiate = chooser.choose(p_c + 1) == p_c;
            let mut c = lo + chooser.choose(span) as i64;
            if exponentiate {
                c = lo + chooser.choose(span) as i64;
                Expr::power(sym, Expr::integer(c))
            } else if chooser.choose(2) == 0 {
                sym * Expr::integer(c)
            } else {
                sym * Expr::rational(1, c)
            }
        } else {
            sym
        };
        out.push((s.clone(), replaced));
    }
    Ok(out)
}

/// Replaces each free symbol `s` by a scaled or exponentiated `s`.
pub fn randomise_premise(
    e: &Expr,
    cfg: &RandomisationConfig,
    chooser: &mut impl Chooser,
) -> Result<Expr> {
    let symbols: Vec<String> = free_symbols(e).into_iter().collect();
    let subs = randomise_symbols(&symbols, cfg, chooser)?;
    // Each s' mentions only s, so sequential substitution is simultaneous.
    Ok(subs
        .iter()
        .fold(e.clone(), |acc, (s, with)| substitute(&acc, s, with)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolOp {
    Sum,
    Product,
    Division,
    Cos,
    Sin,
    Log,
    Exp,
}

impl PoolOp {
    pub const ALL: [PoolOp; 7] = [
        PoolOp::Sum,
        PoolOp::Product,
        PoolOp::Division,
        PoolOp::Cos,
        PoolOp::Sin,
        PoolOp::Log,
        PoolOp::Exp,
    ];

    pub fn is_binary(self) -> bool {
        matches!(self, PoolOp::Sum | PoolOp::Product | PoolOp::Division)
    }

    fn func(self) -> Option<Func> {
        match self {
            PoolOp::Cos => Some(Func::Cos),
            PoolOp::Sin => Some(Func::Sin),
            PoolOp::Log => Some(Func::Log),
            PoolOp::Exp => Some(Func::Exp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiseSpec {
    pub num_variables: usize,
    pub construction_steps: usize,
    pub operator_pool: Vec<PoolOp>,
}

impl PremiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(2..=5).contains(&self.num_variables) {
            return Err(Error::Config(format!(
                "num_variables = {} must lie in 2..=5",
                self.num_variables
            )));
        }
        if self.construction_steps == 0 {
            return Err(Error::Config("construction_steps must be positive".into()));
        }
        if self.operator_pool.is_empty() {
            return Err(Error::Config("operator pool is empty".into()));
        }
        Ok(())
    }
}

pub const PREMISE_ATTEMPTS: usize = 50;

/// Builds a canonical expression over exactly `spec.num_variables` symbols.
///
/// Each step applies a pool operator: binary operators merge two pending
/// subexpressions, unary ones wrap one. Leftover subexpressions are then
/// merged with binary pool operators (sums if the pool has none).
pub fn build_premise(
    spec: &PremiseSpec,
    vocab: &Vocabulary,
    chooser: &mut impl Chooser,
) -> Result<Expr> {
    spec.validate()?;
    if vocab.len() < spec.num_variables {
        return Err(Error::Config(format!(
            "vocabulary of {} names cannot supply {} variables",
            vocab.len(),
            spec.num_variables
        )));
    }
    let binary: Vec<PoolOp> = spec
        .operator_pool
        .iter()
        .copied()
        .filter(|o| o.is_binary())
        .collect();
    for _ in 0..PREMISE_ATTEMPTS {
        let mut names: Vec<&String> = vocab.names().iter().collect();
        let mut items = Vec::with_capacity(spec.num_variables);
        for _ in 0..spec.num_variables {
            let k = chooser.choose(names.len());
            items.push(Expr::symbol(names.remove(k).as_str()));
        }
        for _ in 0..spec.construction_steps {
            let op = spec.operator_pool[chooser.choose(spec.operator_pool.len())];
            if op.is_binary() {
                if items.len() > 1 {
                    merge(&mut items, op, chooser);
                }
            } else {
                let k = chooser.choose(items.len());
                let arg = items.swap_remove(k);
                items.push(Expr::function(op.func().expect("unary"), arg));
            }
        }
        while items.len() > 1 {
            let op = if binary.is_empty() {
                PoolOp::Sum
            } else {
                binary[chooser.choose(binary.len())]
            };
            merge(&mut items, op, chooser);
        }
        let e = items.pop().expect("one item remains");
        if free_symbols(&e).len() == spec.num_variables {
            return Ok(e);
        }
    }
    Err(Error::RetryExhausted {
        wanted: spec.num_variables,
        attempts: PREMISE_ATTEMPTS,
    })
}

fn merge(items: &mut Vec<Expr>, op: PoolOp, chooser: &mut impl Chooser) {
    let a = items.remove(chooser.choose(items.len()));
    let b = items.remove(chooser.choose(items.len()));
    items.push(match op {
        PoolOp::Sum => a + b,
        PoolOp::Product => a * b,
        PoolOp::Division => a / b,
        _ => unreachable!("merge takes binary operators"),
    });
}
