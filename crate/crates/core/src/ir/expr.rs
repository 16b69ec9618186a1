use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{IrError, MAX_WIDTH};

/// Binary word operators. Comparisons yield a single bit; shifts keep the
/// width of the shifted operand; everything else requires equal widths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    And,
    Or,
    Xor,
    Add,
    Sub,
    Mul,
    Eq,
    Neq,
    Lt,
    Shl,
    Shr,
}

impl BinOp {
    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Neq | BinOp::Lt)
    }

    pub fn is_shift(self) -> bool {
        matches!(self, BinOp::Shl | BinOp::Shr)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Xor => "^",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Neq => "!=",
            BinOp::Lt => "<",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExprKind {
    Const(u64),
    Var(String),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// `cond ? then : else`
    Mux(Box<Expr>, Box<Expr>, Box<Expr>),
    Slice { arg: Box<Expr>, hi: u32, lo: u32 },
    /// Most significant part first, as in `{a, b}`.
    Concat(Vec<Expr>),
    Zext(Box<Expr>),
}

/// A width-annotated word-level expression. Width rules are enforced by the
/// constructors, so every `Expr` value is well-typed in isolation; whether
/// its variables exist with the stated widths is a property of the enclosing
/// design and is checked by `validate_design`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expr {
    kind: ExprKind,
    width: u32,
}

pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn check_width(width: u32) -> Result<(), IrError> {
    if width == 0 || width > MAX_WIDTH {
        Err(IrError::WidthOutOfRange(width))
    } else {
        Ok(())
    }
}

impl Expr {
    pub fn constant(value: u64, width: u32) -> Result<Expr, IrError> {
        check_width(width)?;
        if value & !mask(width) != 0 {
            return Err(IrError::ConstOverflow { value, width });
        }
        Ok(Expr { kind: ExprKind::Const(value), width })
    }

    pub fn bit(value: bool) -> Expr {
        Expr { kind: ExprKind::Const(value as u64), width: 1 }
    }

    pub fn var(name: impl Into<String>, width: u32) -> Result<Expr, IrError> {
        check_width(width)?;
        Ok(Expr { kind: ExprKind::Var(name.into()), width })
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(arg: Expr) -> Expr {
        let width = arg.width;
        Expr { kind: ExprKind::Not(Box::new(arg)), width }
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Result<Expr, IrError> {
        let width = if op.is_shift() {
            lhs.width
        } else {
            if lhs.width != rhs.width {
                return Err(IrError::OperandWidth {
                    op: op.symbol(),
                    lhs: lhs.width,
                    rhs: rhs.width,
                });
            }
            if op.is_comparison() {
                1
            } else {
                lhs.width
            }
        };
        Ok(Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), width })
    }

    pub fn mux(cond: Expr, then: Expr, otherwise: Expr) -> Result<Expr, IrError> {
        if cond.width != 1 {
            return Err(IrError::MuxCondition(cond.width));
        }
        if then.width != otherwise.width {
            return Err(IrError::OperandWidth { op: "?:", lhs: then.width, rhs: otherwise.width });
        }
        let width = then.width;
        Ok(Expr { kind: ExprKind::Mux(Box::new(cond), Box::new(then), Box::new(otherwise)), width })
    }

    pub fn slice(arg: Expr, hi: u32, lo: u32) -> Result<Expr, IrError> {
        if lo > hi || hi >= arg.width {
            return Err(IrError::SliceRange { hi, lo, width: arg.width });
        }
        Ok(Expr { kind: ExprKind::Slice { arg: Box::new(arg), hi, lo }, width: hi - lo + 1 })
    }

    pub fn concat(parts: Vec<Expr>) -> Result<Expr, IrError> {
        if parts.is_empty() {
            return Err(IrError::EmptyConcat);
        }
        let width: u32 = parts.iter().map(|p| p.width).sum();
        check_width(width)?;
        Ok(Expr { kind: ExprKind::Concat(parts), width })
    }

    /// Zero-extends to `width`; returns `arg` unchanged when already that wide.
    pub fn zext(arg: Expr, width: u32) -> Result<Expr, IrError> {
        check_width(width)?;
        if width < arg.width {
            return Err(IrError::Narrowing { from: arg.width, to: width });
        }
        if width == arg.width {
            return Ok(arg);
        }
        Ok(Expr { kind: ExprKind::Zext(Box::new(arg)), width })
    }

    pub fn kind(&self) -> &ExprKind {
        &self.kind
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn as_const(&self) -> Option<u64> {
        match self.kind {
            ExprKind::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Var(n) => Some(n),
            _ => None,
        }
    }

    /// Direct operands, in order.
    pub fn operands(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Const(_) | ExprKind::Var(_) => vec![],
            ExprKind::Not(a) | ExprKind::Zext(a) => vec![a],
            ExprKind::Slice { arg, .. } => vec![arg],
            ExprKind::Binary(_, a, b) => vec![a, b],
            ExprKind::Mux(c, t, e) => vec![c, t, e],
            ExprKind::Concat(parts) => parts.iter().collect(),
        }
    }

    pub fn visit_vars<'a>(&'a self, f: &mut impl FnMut(&'a str, u32)) {
        if let ExprKind::Var(name) = &self.kind {
            f(name, self.width);
        }
        for op in self.operands() {
            op.visit_vars(f);
        }
    }

    pub fn vars(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.visit_vars(&mut |n, _| {
            out.insert(n);
        });
        out
    }

    /// Renames variables according to `map`; unmapped names are kept.
    pub fn rename(&self, map: &BTreeMap<String, String>) -> Expr {
        let kind = match &self.kind {
            ExprKind::Const(v) => ExprKind::Const(*v),
            ExprKind::Var(n) => ExprKind::Var(map.get(n).cloned().unwrap_or_else(|| n.clone())),
            ExprKind::Not(a) => ExprKind::Not(Box::new(a.rename(map))),
            ExprKind::Zext(a) => ExprKind::Zext(Box::new(a.rename(map))),
            ExprKind::Slice { arg, hi, lo } => {
                ExprKind::Slice { arg: Box::new(arg.rename(map)), hi: *hi, lo: *lo }
            }
            ExprKind::Binary(op, a, b) => {
                ExprKind::Binary(*op, Box::new(a.rename(map)), Box::new(b.rename(map)))
            }
            ExprKind::Mux(c, t, e) => ExprKind::Mux(
                Box::new(c.rename(map)),
                Box::new(t.rename(map)),
                Box::new(e.rename(map)),
            ),
            ExprKind::Concat(parts) => ExprKind::Concat(parts.iter().map(|p| p.rename(map)).collect()),
        };
        Expr { kind, width: self.width }
    }

    /// Evaluates with variable values supplied by `lookup`. Reference
    /// semantics; the simulator compiles expressions instead of calling this.
    pub fn eval(&self, lookup: &impl Fn(&str) -> u64) -> u64 {
        let m = mask(self.width);
        match &self.kind {
            ExprKind::Const(v) => *v,
            ExprKind::Var(n) => lookup(n) & m,
            ExprKind::Not(a) => !a.eval(lookup) & m,
            ExprKind::Zext(a) => a.eval(lookup),
            ExprKind::Slice { arg, hi, lo } => (arg.eval(lookup) >> lo) & mask(hi - lo + 1),
            ExprKind::Mux(c, t, e) => {
                if c.eval(lookup) != 0 {
                    t.eval(lookup)
                } else {
                    e.eval(lookup)
                }
            }
            ExprKind::Concat(parts) => parts.iter().fold(0u64, |acc, p| {
                let shifted = if p.width >= 64 { 0 } else { acc << p.width };
                shifted | p.eval(lookup)
            }),
            ExprKind::Binary(op, a, b) => {
                let x = a.eval(lookup);
                let y = b.eval(lookup);
                apply_binop(*op, x, y, a.width) & m
            }
        }
    }
}

/// Word semantics shared by the reference evaluator and the simulator.
/// `operand_width` is the width of the left operand.
#[inline]
pub fn apply_binop(op: BinOp, x: u64, y: u64, operand_width: u32) -> u64 {
    match op {
        BinOp::And => x & y,
        BinOp::Or => x | y,
        BinOp::Xor => x ^ y,
        BinOp::Add => x.wrapping_add(y),
        BinOp::Sub => x.wrapping_sub(y),
        BinOp::Mul => x.wrapping_mul(y),
        BinOp::Eq => (x == y) as u64,
        BinOp::Neq => (x != y) as u64,
        BinOp::Lt => (x < y) as u64,
        BinOp::Shl => {
            if y >= operand_width as u64 {
                0
            } else {
                x << y
            }
        }
        BinOp::Shr => {
            if y >= operand_width as u64 {
                0
            } else {
                x >> y
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Const(v) => write!(f, "{}'h{:x}", self.width, v),
            ExprKind::Var(n) => write!(f, "{n}"),
            ExprKind::Not(a) => write!(f, "~{a}"),
            ExprKind::Zext(a) => write!(f, "zext{}({a})", self.width),
            ExprKind::Slice { arg, hi, lo } => write!(f, "({arg})[{hi}:{lo}]"),
            ExprKind::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            ExprKind::Mux(c, t, e) => write!(f, "({c} ? {t} : {e})"),
            ExprKind::Concat(parts) => {
                write!(f, "{{")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str, w: u32) -> Expr {
        Expr::var(n, w).unwrap()
    }

    #[test]
    fn comparison_yields_one_bit() {
        let e = Expr::binary(BinOp::Lt, v("a", 8), v("b", 8)).unwrap();
        assert_eq!(e.width(), 1);
    }

    #[test]
    fn mismatched_operands_rejected() {
        assert!(Expr::binary(BinOp::Add, v("a", 8), v("b", 4)).is_err());
        assert!(Expr::mux(v("c", 2), v("a", 1), v("b", 1)).is_err());
    }

    #[test]
    fn constant_must_fit() {
        assert!(Expr::constant(16, 4).is_err());
        assert!(Expr::constant(15, 4).is_ok());
        assert!(Expr::constant(u64::MAX, 64).is_ok());
        assert!(Expr::constant(0, 65).is_err());
    }

    #[test]
    fn eval_wraps_and_slices() {
        let sum = Expr::binary(BinOp::Add, v("a", 4), v("b", 4)).unwrap();
        let look = |_: &str| 9;
        assert_eq!(sum.eval(&look), 2);
        let cat = Expr::concat(vec![v("a", 4), Expr::constant(1, 2).unwrap()]).unwrap();
        assert_eq!(cat.eval(&look), (9 << 2) | 1);
        let sl = Expr::slice(cat, 5, 2).unwrap();
        assert_eq!(sl.eval(&look), 9);
        let shl = Expr::binary(BinOp::Shl, v("a", 4), Expr::constant(4, 3).unwrap()).unwrap();
        assert_eq!(shl.eval(&look), 0);
    }

    #[test]
    fn rename_touches_only_mapped() {
        let e = Expr::binary(BinOp::Xor, v("a", 1), v("b", 1)).unwrap();
        let map = BTreeMap::from([("a".to_string(), "z".to_string())]);
        assert_eq!(e.rename(&map).vars(), BTreeSet::from(["z", "b"]));
    }
}
