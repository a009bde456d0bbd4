use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("symbol `{0}` has no value")]
    MissingSymbol(String),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpError {
    #[error("no integration rule applies to the integrand with respect to `{0}`")]
    NotIntegrable(String),
    #[error("every operand failed for {0}")]
    EmptyConclusionSet(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabularyError {
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("constant range {0}..={1} must lie within 2..=9")]
    ConstantRange(i64, i64),
    #[error("vocabulary is empty")]
    Empty,
}
