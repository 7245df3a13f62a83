use thiserror::Error;

/// Errors raised while building or analysing schemas, plans and grammars.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("unknown relation symbol `{0}`")]
    UnknownRelation(String),

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("duplicate function name `{0}`")]
    DuplicateFunction(String),

    #[error("invalid path function `{name}`: {reason}")]
    InvalidFunction { name: String, reason: String },

    #[error("malformed plan: {0}")]
    Structural(String),

    #[error("plan is redundant: {0}")]
    Redundant(String),

    #[error("plan is not well-filtering for the query")]
    NotWellFiltering,

    #[error("plan is not minimal filtering")]
    NotMinimalFiltering,

    #[error("unknown nonterminal `{0}`")]
    UnknownNonterminal(String),

    #[error("invalid grammar: {0}")]
    InvalidGrammar(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
