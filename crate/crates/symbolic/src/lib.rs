//! Canonical symbolic expressions and the derivation operators applied to
//! them.
//!
//! Every [`Expr`] built through the smart constructors ([`Expr::sum`],
//! [`Expr::product`], [`Expr::power`], [`Expr::function`]) is in canonical
//! form, so structural equality is algebraic equality under the implemented
//! rewrite rules.

mod calculus;
mod error;
mod eval;
mod expr;
mod number;
mod ops;
mod parse;
mod print;
mod simplify;
mod vocab;

pub use calculus::{differentiate, integrate};
pub use error::{EvalError, OpError, ParseError, VocabularyError};
pub use eval::{evaluate_numeric, Assignment};
pub use expr::{term_order, Expr, Func};
pub use number::Number;
pub use ops::{apply_operation, enumerate_conclusions, ConclusionSet, OperandSet, OperationKind};
pub use parse::parse_functional;
pub use print::{to_functional, to_latex};
pub use simplify::{contains_symbol, free_symbols, simplify, substitute};
pub use vocab::Vocabulary;
