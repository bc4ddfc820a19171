use thiserror::Error;

use super::ast::Span;
use crate::operator::OperatorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LangErrorKind {
    Syntax,
    UnknownIdentifier,
    NonUnitary,
    IncompleteMeasurement,
    DimensionMismatch,
    InvalidPredicate,
    Invalid,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{span}: {message}")]
pub struct LangError {
    pub kind: LangErrorKind,
    pub span: Span,
    pub message: String,
}

impl LangError {
    pub fn new(kind: LangErrorKind, span: Span, message: impl Into<String>) -> Self {
        LangError { kind, span, message: message.into() }
    }

    pub fn from_operator(span: Span, e: OperatorError) -> Self {
        let kind = match e {
            OperatorError::UnknownVariable(_) => LangErrorKind::UnknownIdentifier,
            OperatorError::DimensionMismatch(_) | OperatorError::DimensionTooLarge { .. } => {
                LangErrorKind::DimensionMismatch
            }
            OperatorError::NotPredicate { .. } | OperatorError::NotHermitian { .. } => LangErrorKind::InvalidPredicate,
            _ => LangErrorKind::Invalid,
        };
        LangError::new(kind, span, e.to_string())
    }
}
