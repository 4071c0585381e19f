//! Surface syntax: lexing, parsing, desugaring and printing.

pub mod alpha;
pub mod ast;
pub mod desugar;
pub mod lexer;
pub mod parser;
pub mod pretty;

use std::fmt;

use ast::Span;

/// Parse failure with the position of the offending token.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct SyntaxError {
    pub span: Span,
    pub message: String,
    /// Token classes that would have been accepted here.
    pub expected: Vec<String>,
}

impl SyntaxError {
    pub fn new(span: Span, message: impl Into<String>, expected: Vec<String>) -> Self {
        SyntaxError { span, message: message.into(), expected }
    }
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.span.line, self.span.col, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

/// A nested pattern that cannot be expanded into primitive eliminations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}:{}: {message}", span.line, span.col)]
pub struct DesugarError {
    pub span: Span,
    pub message: String,
}

pub use alpha::{alpha_eq_program, alpha_eq, alpha_eq_cart, alpha_eq_term};
pub use desugar::desugar;
pub use parser::{parse, parse_lin_type, parse_term};
pub use pretty::{pretty_type, pretty_cart, pretty_index, pretty_lin, pretty_program, pretty_term};
