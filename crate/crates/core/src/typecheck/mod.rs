//! Index, Cartesian and linear typing judgments.

pub mod api;
pub mod checker;
pub mod context;
pub mod derivation;
pub mod subst;

use serde::Serialize;

use crate::syntax::ast::Span;

pub use api::ApiTable;
pub use checker::{check_cart, check_index, check_linear, check_program, check_select, CheckedProgram};
pub use context::{CartContext, IndexContext, LinEntry, LinearContext};
pub use derivation::{Derivation, DerivationNode};
pub use subst::{subst_index_lin, subst_index_program, subst_index_term, subst_term, IndexSubst, SubstKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ErrorKind {
    UnboundVariable,
    LinearVariableUnused,
    LinearVariableReused,
    LinearVariableUnavailableInSelect,
    TimeMismatch,
    SortMismatch,
    TypeMismatch,
    NonEmptyLinearContextUnderG,
    UnsolvedIndexMetavariable,
}

impl ErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::UnboundVariable => "UnboundVariable",
            ErrorKind::LinearVariableUnused => "LinearVariableUnused",
            ErrorKind::LinearVariableReused => "LinearVariableReused",
            ErrorKind::LinearVariableUnavailableInSelect => "LinearVariableUnavailableInSelect",
            ErrorKind::TimeMismatch => "TimeMismatch",
            ErrorKind::SortMismatch => "SortMismatch",
            ErrorKind::TypeMismatch => "TypeMismatch",
            ErrorKind::NonEmptyLinearContextUnderG => "NonEmptyLinearContextUnderG",
            ErrorKind::UnsolvedIndexMetavariable => "UnsolvedIndexMetavariable",
        }
    }
}

impl std::fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}:{}: {kind}: {message}", span.line, span.col)]
pub struct TypeError {
    pub kind: ErrorKind,
    pub span: Span,
    pub message: String,
}

impl TypeError {
    pub fn new(kind: ErrorKind, span: Span, message: impl Into<String>) -> Self {
        TypeError { kind, span, message: message.into() }
    }

    /// Machine-readable diagnostic record.
    pub fn to_json(&self, file: &str) -> serde_json::Value {
        serde_json::json!({
            "file": file,
            "kind": self.kind.name(),
            "line": self.span.line,
            "col": self.span.col,
            "start": self.span.start,
            "end": self.span.end,
            "message": self.message,
        })
    }
}
