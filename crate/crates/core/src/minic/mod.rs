//! The mini-C host language: syntax tree, parser, type checker and printer.

pub mod ast;
pub mod lexer;
pub(crate) mod parser;
pub mod pretty;
pub mod types;

use thiserror::Error;

pub use ast::*;
pub use parser::{parse_program, parse_program_named};
pub use pretty::{pretty_print, render, render_function, AnnotationSource};
pub use types::{typecheck, Scope, Ty, TypeEnv, TypedProgram};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl ParseError {
    pub fn new(line: u32, col: u32, message: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct TypeError {
    /// 0 when no statement position applies.
    pub line: u32,
    pub message: String,
}

impl TypeError {
    pub fn new(message: impl Into<String>) -> Self {
        TypeError {
            line: 0,
            message: message.into(),
        }
    }

    pub fn at(line: u32, message: impl Into<String>) -> Self {
        TypeError {
            line,
            message: message.into(),
        }
    }
}
