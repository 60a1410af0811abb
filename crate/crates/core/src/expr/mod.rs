//! Scalar expression language: parsing, evaluation and forward-mode
//! differentiation.
//!
//! Every user-declared function of an analysis (flow and jump components,
//! `V`, the comparison functions, the envelope `h`) is written in this
//! language.

mod ast;
mod eval;
mod parser;

pub use ast::{BinOp, Expr, Func};
pub use eval::{Bindings, Compiled, Directional, Gradient};
pub use parser::parse_expression;
