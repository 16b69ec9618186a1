use super::lexer::{lex, Kw, Tok, Token};
use super::{HdlError, Pos};
use crate::ir::BinOp;

const MAX_NESTING: usize = 200;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AstExpr {
    Num { width: Option<u32>, value: u64, pos: Pos },
    Ident { name: String, pos: Pos },
    Unary { op: UnaryOp, arg: Box<AstExpr>, pos: Pos },
    Binary { op: BinOp, lhs: Box<AstExpr>, rhs: Box<AstExpr>, pos: Pos },
    Ternary { cond: Box<AstExpr>, then: Box<AstExpr>, otherwise: Box<AstExpr>, pos: Pos },
    Slice { name: String, hi: u32, lo: u32, pos: Pos },
    Concat { parts: Vec<AstExpr>, pos: Pos },
}

impl AstExpr {
    pub fn pos(&self) -> Pos {
        match self {
            AstExpr::Num { pos, .. }
            | AstExpr::Ident { pos, .. }
            | AstExpr::Unary { pos, .. }
            | AstExpr::Binary { pos, .. }
            | AstExpr::Ternary { pos, .. }
            | AstExpr::Slice { pos, .. }
            | AstExpr::Concat { pos, .. } => *pos,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Block(Vec<Stmt>),
    If { cond: AstExpr, then: Box<Stmt>, otherwise: Option<Box<Stmt>>, pos: Pos },
    Assign { target: String, expr: AstExpr, pos: Pos },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PortDecl {
    pub output: bool,
    pub is_reg: bool,
    pub width: u32,
    pub name: String,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Wire { name: String, width: u32, pos: Pos },
    Reg { name: String, width: u32, init: Option<AstExpr>, pos: Pos },
    Assign { target: String, expr: AstExpr, pos: Pos },
    Always { clock: String, body: Stmt, pos: Pos },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pragma {
    pub kind: String,
    pub args: Vec<String>,
    pub pos: Pos,
}

/// Parsed form of one mini-HDL module.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceModule {
    pub name: String,
    pub ports: Vec<PortDecl>,
    pub items: Vec<Item>,
    pub pragmas: Vec<Pragma>,
    pub pos: Pos,
}

pub fn parse(text: &str) -> Result<SourceModule, HdlError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0, depth: 0, pragmas: Vec::new() };
    let m = p.module()?;
    Ok(m)
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
    depth: usize,
    pragmas: Vec<Pragma>,
}

impl Parser {
    fn peek(&mut self) -> &Token {
        self.skip_pragmas();
        &self.toks[self.at]
    }

    fn skip_pragmas(&mut self) {
        while let Tok::Pragma { kind, args } = &self.toks[self.at].tok {
            self.pragmas.push(Pragma { kind: kind.clone(), args: args.clone(), pos: self.toks[self.at].pos });
            self.at += 1;
        }
    }

    fn next(&mut self) -> Token {
        self.skip_pragmas();
        let t = self.toks[self.at].clone();
        if t.tok != Tok::Eof {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, pos: Pos, msg: impl Into<String>) -> Result<T, HdlError> {
        Err(HdlError::Syntax { pos, msg: msg.into() })
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number { value, .. } => format!("number {value}"),
            Tok::Kw(k) => format!("keyword `{}`", format!("{k:?}").to_lowercase()),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Pragma { kind, .. } => format!("pragma @{kind}"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn expect_sym(&mut self, sym: &'static str) -> Result<Pos, HdlError> {
        let t = self.next();
        if t.tok == Tok::Sym(sym) {
            Ok(t.pos)
        } else {
            self.err(t.pos, format!("expected `{sym}`, found {}", Self::describe(&t.tok)))
        }
    }

    fn expect_kw(&mut self, kw: Kw) -> Result<Pos, HdlError> {
        let t = self.next();
        if t.tok == Tok::Kw(kw) {
            Ok(t.pos)
        } else {
            self.err(t.pos, format!("expected `{}`, found {}", format!("{kw:?}").to_lowercase(), Self::describe(&t.tok)))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), HdlError> {
        let t = self.next();
        match t.tok {
            Tok::Ident(s) => Ok((s, t.pos)),
            other => self.err(t.pos, format!("expected identifier, found {}", Self::describe(&other))),
        }
    }

    fn int(&mut self) -> Result<u32, HdlError> {
        let t = self.next();
        match t.tok {
            Tok::Number { value, .. } if value <= u32::MAX as u64 => Ok(value as u32),
            other => self.err(t.pos, format!("expected integer, found {}", Self::describe(&other))),
        }
    }

    fn is_sym(&mut self, sym: &str) -> bool {
        matches!(self.peek().tok, Tok::Sym(s) if s == sym)
    }

    fn is_kw(&mut self, kw: Kw) -> bool {
        self.peek().tok == Tok::Kw(kw)
    }

    /// `[hi:0]` → width; absent → 1.
    fn range(&mut self) -> Result<u32, HdlError> {
        if !self.is_sym("[") {
            return Ok(1);
        }
        let pos = self.expect_sym("[")?;
        let hi = self.int()?;
        self.expect_sym(":")?;
        let lo = self.int()?;
        self.expect_sym("]")?;
        if lo != 0 {
            return self.err(pos, "declared ranges must be [hi:0]");
        }
        if hi >= 64 {
            return self.err(pos, format!("width {} exceeds 64 bits", hi as u64 + 1));
        }
        Ok(hi + 1)
    }

    fn module(&mut self) -> Result<SourceModule, HdlError> {
        let pos = self.expect_kw(Kw::Module)?;
        let (name, _) = self.ident()?;
        self.expect_sym("(")?;
        let mut ports = Vec::new();
        if !self.is_sym(")") {
            loop {
                ports.push(self.port_decl()?);
                if self.is_sym(",") {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        self.expect_sym(";")?;
        let mut items = Vec::new();
        while !self.is_kw(Kw::Endmodule) {
            items.push(self.item()?);
        }
        self.expect_kw(Kw::Endmodule)?;
        let t = self.next();
        if t.tok != Tok::Eof {
            return self.err(t.pos, format!("trailing {} after endmodule", Self::describe(&t.tok)));
        }
        Ok(SourceModule { name, ports, items, pragmas: std::mem::take(&mut self.pragmas), pos })
    }

    fn port_decl(&mut self) -> Result<PortDecl, HdlError> {
        let t = self.next();
        let output = match t.tok {
            Tok::Kw(Kw::Input) => false,
            Tok::Kw(Kw::Output) => true,
            other => return self.err(t.pos, format!("expected `input` or `output`, found {}", Self::describe(&other))),
        };
        let is_reg = if self.is_kw(Kw::Reg) {
            self.next();
            true
        } else {
            false
        };
        if is_reg && !output {
            return self.err(t.pos, "inputs cannot be declared `reg`");
        }
        let width = self.range()?;
        let (name, pos) = self.ident()?;
        Ok(PortDecl { output, is_reg, width, name, pos })
    }

    fn item(&mut self) -> Result<Item, HdlError> {
        let t = self.next();
        match t.tok {
            Tok::Kw(Kw::Wire) => {
                let width = self.range()?;
                let (name, pos) = self.ident()?;
                self.expect_sym(";")?;
                Ok(Item::Wire { name, width, pos })
            }
            Tok::Kw(Kw::Reg) => {
                let width = self.range()?;
                let (name, pos) = self.ident()?;
                let init = if self.is_sym("=") {
                    self.next();
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect_sym(";")?;
                Ok(Item::Reg { name, width, init, pos })
            }
            Tok::Kw(Kw::Assign) => {
                let (target, pos) = self.ident()?;
                self.expect_sym("=")?;
                let expr = self.expr()?;
                self.expect_sym(";")?;
                Ok(Item::Assign { target, expr, pos })
            }
            Tok::Kw(Kw::Always) => {
                self.expect_sym("@")?;
                self.expect_sym("(")?;
                self.expect_kw(Kw::Posedge)?;
                let (clock, _) = self.ident()?;
                self.expect_sym(")")?;
                let body = self.stmt()?;
                Ok(Item::Always { clock, body, pos: t.pos })
            }
            other => self.err(t.pos, format!("expected a declaration, assign or always block, found {}", Self::describe(&other))),
        }
    }

    fn enter(&mut self, pos: Pos) -> Result<(), HdlError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return self.err(pos, "nesting too deep");
        }
        Ok(())
    }

    fn stmt(&mut self) -> Result<Stmt, HdlError> {
        let pos = self.peek().pos;
        self.enter(pos)?;
        let s = self.stmt_inner();
        self.depth -= 1;
        s
    }

    fn stmt_inner(&mut self) -> Result<Stmt, HdlError> {
        let t = self.next();
        match t.tok {
            Tok::Kw(Kw::Begin) => {
                let mut body = Vec::new();
                while !self.is_kw(Kw::End) {
                    if self.peek().tok == Tok::Eof {
                        return self.err(self.toks[self.at].pos, "unterminated `begin`");
                    }
                    body.push(self.stmt()?);
                }
                self.next();
                Ok(Stmt::Block(body))
            }
            Tok::Kw(Kw::If) => {
                self.expect_sym("(")?;
                let cond = self.expr()?;
                self.expect_sym(")")?;
                let then = Box::new(self.stmt()?);
                let otherwise = if self.is_kw(Kw::Else) {
                    self.next();
                    Some(Box::new(self.stmt()?))
                } else {
                    None
                };
                Ok(Stmt::If { cond, then, otherwise, pos: t.pos })
            }
            Tok::Ident(target) => {
                self.expect_sym("<=")?;
                let expr = self.expr()?;
                self.expect_sym(";")?;
                Ok(Stmt::Assign { target, expr, pos: t.pos })
            }
            other => self.err(t.pos, format!("expected a statement, found {}", Self::describe(&other))),
        }
    }

    pub fn expr(&mut self) -> Result<AstExpr, HdlError> {
        let pos = self.peek().pos;
        self.enter(pos)?;
        let e = self.ternary();
        self.depth -= 1;
        e
    }

    fn ternary(&mut self) -> Result<AstExpr, HdlError> {
        let cond = self.binary(0)?;
        if self.is_sym("?") {
            let pos = self.next().pos;
            let then = self.expr()?;
            self.expect_sym(":")?;
            let otherwise = self.expr()?;
            return Ok(AstExpr::Ternary {
                cond: Box::new(cond),
                then: Box::new(then),
                otherwise: Box::new(otherwise),
                pos,
            });
        }
        Ok(cond)
    }

    fn binop_at(&mut self, level: usize) -> Option<BinOp> {
        const LEVELS: &[&[(&str, BinOp)]] = &[
            &[("|", BinOp::Or)],
            &[("^", BinOp::Xor)],
            &[("&", BinOp::And)],
            &[("==", BinOp::Eq), ("!=", BinOp::Neq)],
            &[("<", BinOp::Lt)],
            &[("<<", BinOp::Shl), (">>", BinOp::Shr)],
            &[("+", BinOp::Add), ("-", BinOp::Sub)],
            &[("*", BinOp::Mul)],
        ];
        let Tok::Sym(s) = self.peek().tok else { return None };
        LEVELS[level].iter().find(|(sym, _)| *sym == s).map(|(_, op)| *op)
    }

    fn binary(&mut self, level: usize) -> Result<AstExpr, HdlError> {
        if level == 8 {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self.binop_at(level) {
            let pos = self.next().pos;
            let rhs = self.binary(level + 1)?;
            lhs = AstExpr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), pos };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<AstExpr, HdlError> {
        let op = match self.peek().tok {
            Tok::Sym("~") => Some(UnaryOp::Not),
            Tok::Sym("-") => Some(UnaryOp::Neg),
            _ => None,
        };
        if let Some(op) = op {
            let pos = self.next().pos;
            self.enter(pos)?;
            let arg = self.unary();
            self.depth -= 1;
            return Ok(AstExpr::Unary { op, arg: Box::new(arg?), pos });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<AstExpr, HdlError> {
        let t = self.next();
        match t.tok {
            Tok::Number { width, value } => Ok(AstExpr::Num { width, value, pos: t.pos }),
            Tok::Ident(name) => {
                if self.is_sym("[") {
                    self.next();
                    let hi = self.int()?;
                    let lo = if self.is_sym(":") {
                        self.next();
                        self.int()?
                    } else {
                        hi
                    };
                    self.expect_sym("]")?;
                    Ok(AstExpr::Slice { name, hi, lo, pos: t.pos })
                } else {
                    Ok(AstExpr::Ident { name, pos: t.pos })
                }
            }
            Tok::Sym("(") => {
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("{") => {
                let mut parts = vec![self.expr()?];
                while self.is_sym(",") {
                    self.next();
                    parts.push(self.expr()?);
                }
                self.expect_sym("}")?;
                Ok(AstExpr::Concat { parts, pos: t.pos })
            }
            other => self.err(t.pos, format!("expected an expression, found {}", Self::describe(&other))),
        }
    }
}
