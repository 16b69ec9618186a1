//! Mini-HDL frontend: a small synthesizable Verilog-like subset with
//! security pragmas in line comments.
//!
//! ```text
//! module ::= "module" ident "(" portdecl {"," portdecl} ")" ";" {item} "endmodule"
//! portdecl ::= ("input"|"output") ["reg"] ["[" int ":" "0" "]"] ident
//! item ::= "wire" [range] ident ";" | "reg" [range] ident ["=" literal] ";"
//!        | "assign" ident "=" expr ";" | "always" "@" "(" "posedge" ident ")" stmt
//! stmt ::= "begin" {stmt} "end" | "if" "(" expr ")" stmt ["else" stmt] | ident "<=" expr ";"
//! ```
//!
//! Pragmas: `// @secret a b`, `// @observable out done`, `// @start start`,
//! `// @done done`, and optionally `// @bound 32` for the default
//! exploration bound.

mod elab;
mod emit;
mod lexer;
mod parser;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ir::Diagnostic;

pub use elab::{elaborate, PragmaSet};
pub use emit::emit;
pub use parser::{parse, AstExpr, Item, PortDecl, Pragma, SourceModule, Stmt, UnaryOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ElabCode {
    Undeclared,
    Duplicate,
    WidthMismatch,
    MultipleDrivers,
    Undriven,
    NotAReg,
    NotAWire,
    BadReset,
    BadPragma,
    MissingStart,
    MissingDone,
    InvalidDesign,
}

impl fmt::Display for ElabCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).ok();
        write!(f, "{}", v.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HdlError {
    #[error("{pos}: illegal character {ch:?}")]
    Lex { pos: Pos, ch: char },
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: {code}: {msg}")]
    Elab { code: ElabCode, pos: Pos, msg: String },
    #[error("elaborated design is malformed: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

impl HdlError {
    pub fn elab_code(&self) -> Option<ElabCode> {
        match self {
            HdlError::Elab { code, .. } => Some(*code),
            HdlError::Invalid(_) => Some(ElabCode::InvalidDesign),
            _ => None,
        }
    }
}

/// Parses and elaborates in one step using the pragmas found in the source.
pub fn load(text: &str) -> Result<crate::ir::Design, HdlError> {
    let m = parse(text)?;
    let p = PragmaSet::from_module(&m)?;
    elaborate(&m, &p)
}
