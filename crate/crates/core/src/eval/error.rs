use std::fmt;

use thiserror::Error;

/// Operand shapes attached to RANK/LENGTH/DOMAIN/INDEX errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operands {
    pub left: Option<Vec<usize>>,
    pub right: Vec<usize>,
}

impl fmt::Display for Operands {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.left {
            Some(l) => write!(f, "left shape {l:?}, right shape {:?}", self.right),
            None => write!(f, "right shape {:?}", self.right),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("RANK ERROR in {primitive} ({operands})")]
    Rank { primitive: String, operands: Operands },
    #[error("LENGTH ERROR in {primitive} ({operands})")]
    Length { primitive: String, operands: Operands },
    #[error("DOMAIN ERROR in {primitive} ({operands}){}", detail_suffix(.detail))]
    Domain {
        primitive: String,
        operands: Operands,
        detail: Option<String>,
    },
    #[error("INDEX ERROR in {primitive} ({operands})")]
    Index { primitive: String, operands: Operands },
    #[error("VALUE ERROR: {0}")]
    Value(String),
    #[error("SYNTAX ERROR: {0}")]
    Syntax(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("internal error: {0}")]
    Internal(String),
}

fn detail_suffix(detail: &Option<String>) -> String {
    detail.as_ref().map(|d| format!(": {d}")).unwrap_or_default()
}

impl EvalError {
    /// True for errors that come from the supported subset being exceeded.
    pub fn is_unsupported(&self) -> bool {
        matches!(self, EvalError::Unsupported(_))
    }
}

/// An evaluation error for one io case.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("case {index}, {part}: {source}")]
pub struct CaseError {
    /// 1-based io case index.
    pub index: usize,
    pub part: &'static str,
    #[source]
    pub source: EvalError,
}
