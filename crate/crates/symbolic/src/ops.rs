//! The six atomic operators and conclusion-set enumeration.

use std::collections::HashSet;
use std::fmt;

use crate::calculus::{differentiate, integrate};
use crate::error::OpError;
use crate::expr::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OperationKind {
    Addition,
    Subtraction,
    Multiplication,
    Division,
    Differentiation,
    Integration,
}

impl OperationKind {
    pub const ALL: [OperationKind; 6] = [
        OperationKind::Addition,
        OperationKind::Subtraction,
        OperationKind::Multiplication,
        OperationKind::Division,
        OperationKind::Differentiation,
        OperationKind::Integration,
    ];

    /// Stable index used for one-hot and lookup-table encodings.
    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            OperationKind::Addition => "addition",
            OperationKind::Subtraction => "subtraction",
            OperationKind::Multiplication => "multiplication",
            OperationKind::Division => "division",
            OperationKind::Differentiation => "differentiation",
            OperationKind::Integration => "integration",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// True for the four operators that can never fail.
    pub fn is_arithmetic(self) -> bool {
        self.id() < 4
    }
}

impl fmt::Display for OperationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered, non-empty list of operand variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperandSet(Vec<String>);

impl OperandSet {
    /// Returns `None` for an empty list.
    pub fn new(vars: Vec<String>) -> Option<Self> {
        if vars.is_empty() {
            None
        } else {
            Some(Self(vars))
        }
    }

    pub fn vars(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConclusionSet {
    pub operation: OperationKind,
    /// `(operand, conclusion)` in operand order, canonically distinct.
    pub conclusions: Vec<(String, Expr)>,
}

/// `y = t(x, v)`.
pub fn apply_operation(e: &Expr, t: OperationKind, v: &str) -> Result<Expr, OpError> {
    let var = || Expr::symbol(v);
    Ok(match t {
        OperationKind::Addition => Expr::sum([e.clone(), var()]),
        OperationKind::Subtraction => Expr::sum([e.clone(), var().neg()]),
        OperationKind::Multiplication => Expr::product([e.clone(), var()]),
        OperationKind::Division => Expr::product([e.clone(), var().recip()]),
        OperationKind::Differentiation => differentiate(e, v),
        OperationKind::Integration => integrate(e, v)?,
    })
}

/// Applies `t` with every operand, dropping failures and repeated results.
pub fn enumerate_conclusions(
    e: &Expr,
    t: OperationKind,
    operands: &OperandSet,
) -> Result<ConclusionSet, OpError> {
    let mut seen = HashSet::new();
    let mut conclusions = Vec::new();
    for v in operands.vars() {
        let Ok(y) = apply_operation(e, t, v) else {
            continue;
        };
        if seen.insert(y.clone()) {
            conclusions.push((v.clone(), y));
        }
    }
    if conclusions.is_empty() {
        return Err(OpError::EmptyConclusionSet(t.name()));
    }
    Ok(ConclusionSet {
        operation: t,
        conclusions,
    })
}
