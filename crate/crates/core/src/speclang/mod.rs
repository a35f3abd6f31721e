//! The two textual languages: process models (`.psm`) and quantitative
//! formulas (`.qmf`). See `docs/grammar.ebnf`.

mod ast;
mod bounds;
mod lexer;
mod model;
mod parser;
mod pretty;

use std::fmt;

use thiserror::Error;

pub use ast::*;
pub use bounds::{support_interval, Interval};
pub use lexer::{tokenize, Tok, Token};
pub use model::{check_model, validate_model, ActionDef, Domain, Model, Proc, ProcDef};
pub use parser::{is_keyword, parse_expr, parse_formula, parse_model};
pub use pretty::{
    expr_to_string, formula_spec_to_string, formula_to_string, model_to_string, proc_to_string, sort_ref_to_string,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiagKind {
    UnknownName,
    TypeMismatch,
    ArityMismatch,
    UnboundedDistribution,
    InfiniteSort,
    DuplicateName,
    MissingEquation,
    RecursiveFunction,
    MissingInit,
    MultipleInit,
    SequentialComposition,
    MisplacedDist,
    Evaluation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagKind,
    pub message: String,
    pub span: Span,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}: {}", self.span, self.kind, self.message)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("syntax error at {line}:{col}: expected {expected}, found {found}")]
    Syntax {
        line: u32,
        col: u32,
        expected: String,
        found: String,
    },
    #[error("{}", render(.0))]
    Validation(Vec<Diagnostic>),
}

fn render(d: &[Diagnostic]) -> String {
    let lines: Vec<String> = d.iter().map(|d| d.to_string()).collect();
    format!("invalid specification:\n  {}", lines.join("\n  "))
}

/// Parses and validates a model.
pub fn load_model_text(text: &str) -> Result<Model, SpecError> {
    let spec = parse_model(text)?;
    check_model(&spec).map_err(SpecError::Validation)
}
