//! Linear widget calculus: parsing, typing, denotational semantics and a push runtime.

pub mod runtime;
pub mod semantics;
pub mod syntax;
pub mod typecheck;

pub use syntax::ast::{CartType, Definition, IndexSort, IndexTerm, LinType, SourceProgram, Span, Symbol, Term, TermKind, Type};
pub use syntax::{desugar, parse, DesugarError, SyntaxError};
pub use typecheck::{check_program, CheckedProgram, ErrorKind, TypeError};

/// Any failure on the way from source text to a checked program.
#[derive(Debug, Clone, thiserror::Error)]
pub enum FrontendError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{}:{}: {}", .0.span.line, .0.span.col, .0.message)]
    Desugar(#[from] DesugarError),
    #[error("{} type error(s)", .0.len())]
    Type(Vec<TypeError>),
}

impl FrontendError {
    /// Stable name of the failure class; type errors report the first error's kind.
    pub fn kind(&self) -> &'static str {
        match self {
            FrontendError::Syntax(_) => "SyntaxError",
            FrontendError::Desugar(_) => "DesugarError",
            FrontendError::Type(es) => es.first().map_or("TypeError", |e| e.kind.name()),
        }
    }

    /// One diagnostic record per error, positioned in `file`.
    pub fn diagnostics(&self, file: &str) -> Vec<serde_json::Value> {
        let at = |kind: &str, span: Span, message: &str| {
            serde_json::json!({"file": file, "kind": kind, "line": span.line, "col": span.col, "start": span.start, "end": span.end, "message": message})
        };
        match self {
            FrontendError::Syntax(e) => vec![at("SyntaxError", e.span, &e.to_string())],
            FrontendError::Desugar(e) => vec![at("DesugarError", e.span, &e.message)],
            FrontendError::Type(es) => es.iter().map(|e| e.to_json(file)).collect(),
        }
    }
}

/// Parses, desugars and checks `src`.
pub fn check_source(src: &str) -> Result<CheckedProgram, FrontendError> {
    let parsed = parse(src)?;
    let core = desugar(&parsed)?;
    check_program(&core).map_err(FrontendError::Type)
}
