use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::parser::{AstExpr, Item, Pragma, SourceModule, Stmt, UnaryOp};
use super::{ElabCode, HdlError, Pos};
use crate::ir::{
    validate_design, BinOp, Design, Expr, IrError, NetDef, Port, PortRole, RegDef,
    SecurityAnnotations,
};

/// Security annotations as written in pragmas (or a sidecar file).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PragmaSet {
    pub secret: Vec<String>,
    pub observable: Vec<String>,
    pub start: Option<String>,
    pub done: Option<String>,
    pub bound: Option<u32>,
}

impl PragmaSet {
    pub fn from_module(m: &SourceModule) -> Result<PragmaSet, HdlError> {
        Self::from_pragmas(&m.pragmas)
    }

    pub fn from_pragmas(pragmas: &[Pragma]) -> Result<PragmaSet, HdlError> {
        let mut set = PragmaSet::default();
        for p in pragmas {
            let bad = |msg: String| HdlError::Elab { code: ElabCode::BadPragma, pos: p.pos, msg };
            let single = |what: &str| -> Result<String, HdlError> {
                match p.args.as_slice() {
                    [one] => Ok(one.clone()),
                    _ => Err(bad(format!("@{what} takes exactly one name"))),
                }
            };
            match p.kind.as_str() {
                "secret" => set.secret.extend(p.args.iter().cloned()),
                "observable" => set.observable.extend(p.args.iter().cloned()),
                "start" => {
                    if set.start.replace(single("start")?).is_some() {
                        return Err(bad("@start given twice".into()));
                    }
                }
                "done" => {
                    if set.done.replace(single("done")?).is_some() {
                        return Err(bad("@done given twice".into()));
                    }
                }
                "bound" => {
                    let n = single("bound")?;
                    set.bound = Some(n.parse().map_err(|_| bad(format!("@bound expects an integer, got `{n}`")))?);
                }
                other => return Err(bad(format!("unknown pragma @{other}"))),
            }
        }
        Ok(set)
    }

    /// Sidecar format: one pragma per line, with or without the leading `//`.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse_sidecar(text: &str) -> Result<PragmaSet, HdlError> {
        let mut pragmas = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let pos = Pos { line: i as u32 + 1, col: 1 };
            let line = raw.trim();
            let line = line.strip_prefix("//").map(str::trim).unwrap_or(line);
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some(rest) = line.strip_prefix('@') else {
                return Err(HdlError::Syntax { pos, msg: format!("expected a pragma, found `{line}`") });
            };
            let mut words = rest.split_whitespace();
            let kind = words.next().unwrap_or("").to_string();
            pragmas.push(Pragma { kind, args: words.map(str::to_string).collect(), pos });
        }
        Self::from_pragmas(&pragmas)
    }

    /// Fields present in `other` replace ours.
    pub fn overridden_by(mut self, other: &PragmaSet) -> PragmaSet {
        if !other.secret.is_empty() {
            self.secret = other.secret.clone();
        }
        if !other.observable.is_empty() {
            self.observable = other.observable.clone();
        }
        if other.start.is_some() {
            self.start = other.start.clone();
        }
        if other.done.is_some() {
            self.done = other.done.clone();
        }
        if other.bound.is_some() {
            self.bound = other.bound;
        }
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SymKind {
    Input,
    Wire,
    Reg,
}

#[derive(Clone, Copy, Debug)]
struct Sym {
    kind: SymKind,
    width: u32,
    pos: Pos,
}

struct Elab<'m> {
    syms: HashMap<&'m str, Sym>,
}

fn err<T>(code: ElabCode, pos: Pos, msg: impl Into<String>) -> Result<T, HdlError> {
    Err(HdlError::Elab { code, pos, msg: msg.into() })
}

fn ir(pos: Pos) -> impl Fn(IrError) -> HdlError {
    move |e| HdlError::Elab { code: ElabCode::WidthMismatch, pos, msg: e.to_string() }
}

fn bits_for(value: u64) -> u32 {
    (64 - value.leading_zeros()).max(1)
}

fn fit(e: Expr, ctx: Option<u32>, pos: Pos) -> Result<Expr, HdlError> {
    match ctx {
        Some(w) if w > e.width() => Expr::zext(e, w).map_err(ir(pos)),
        _ => Ok(e),
    }
}

fn max_opt(a: Option<u32>, b: Option<u32>) -> Option<u32> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl<'m> Elab<'m> {
    fn lookup(&self, name: &str, pos: Pos) -> Result<Sym, HdlError> {
        match self.syms.get(name) {
            Some(s) => Ok(*s),
            None => err(ElabCode::Undeclared, pos, format!("`{name}` is not declared")),
        }
    }

    /// Width an expression has on its own; `None` for unsized literals.
    fn self_width(&self, e: &AstExpr) -> Result<Option<u32>, HdlError> {
        Ok(match e {
            AstExpr::Num { width, .. } => *width,
            AstExpr::Ident { name, pos } => Some(self.lookup(name, *pos)?.width),
            AstExpr::Slice { hi, lo, .. } => Some(hi.saturating_sub(*lo) + 1),
            AstExpr::Unary { arg, .. } => self.self_width(arg)?,
            AstExpr::Binary { op, lhs, rhs, .. } => {
                if op.is_comparison() {
                    Some(1)
                } else if op.is_shift() {
                    self.self_width(lhs)?
                } else {
                    max_opt(self.self_width(lhs)?, self.self_width(rhs)?)
                }
            }
            AstExpr::Ternary { then, otherwise, .. } => {
                max_opt(self.self_width(then)?, self.self_width(otherwise)?)
            }
            AstExpr::Concat { parts, pos } => {
                let mut total = 0;
                for p in parts {
                    match self.self_width(p)? {
                        Some(w) => total += w,
                        None => return err(ElabCode::WidthMismatch, *pos, "unsized literal inside a concatenation"),
                    }
                }
                Some(total)
            }
        })
    }

    /// Width an operand tree settles at when `ctx` is the surrounding width.
    fn natural(&self, e: &AstExpr, ctx: Option<u32>) -> Result<u32, HdlError> {
        let w = match self.self_width(e)? {
            Some(w) => w,
            None => unsized_width(e),
        };
        Ok(w.max(ctx.unwrap_or(0)))
    }

    fn expr(&self, e: &AstExpr, ctx: Option<u32>) -> Result<Expr, HdlError> {
        let pos = e.pos();
        let out = match e {
            AstExpr::Num { width, value, .. } => {
                let w = width.unwrap_or_else(|| bits_for(*value).max(ctx.unwrap_or(1)));
                if w > 64 {
                    return err(ElabCode::WidthMismatch, pos, "literal wider than 64 bits");
                }
                Expr::constant(*value, w).map_err(ir(pos))?
            }
            AstExpr::Ident { name, .. } => {
                let s = self.lookup(name, pos)?;
                Expr::var(name.clone(), s.width).map_err(ir(pos))?
            }
            AstExpr::Slice { name, hi, lo, .. } => {
                let s = self.lookup(name, pos)?;
                let v = Expr::var(name.clone(), s.width).map_err(ir(pos))?;
                Expr::slice(v, *hi, *lo).map_err(ir(pos))?
            }
            AstExpr::Unary { op, arg, .. } => {
                let w = self.natural(e, ctx)?;
                let a = self.expr(arg, Some(w))?;
                match op {
                    UnaryOp::Not => Expr::not(a),
                    UnaryOp::Neg => {
                        Expr::binary(BinOp::Sub, Expr::constant(0, w).map_err(ir(pos))?, a).map_err(ir(pos))?
                    }
                }
            }
            AstExpr::Binary { op, lhs, rhs, .. } if op.is_comparison() => {
                let w = max_opt(self.self_width(lhs)?, self.self_width(rhs)?)
                    .unwrap_or_else(|| unsized_width(lhs).max(unsized_width(rhs)));
                let a = self.expr(lhs, Some(w))?;
                let b = self.expr(rhs, Some(w))?;
                Expr::binary(*op, a, b).map_err(ir(pos))?
            }
            AstExpr::Binary { op, lhs, rhs, .. } if op.is_shift() => {
                let a = self.expr(lhs, ctx)?;
                let b = self.expr(rhs, None)?;
                Expr::binary(*op, a, b).map_err(ir(pos))?
            }
            AstExpr::Binary { op, lhs, rhs, .. } => {
                let w = self.natural(e, ctx)?;
                let a = self.expr(lhs, Some(w))?;
                let b = self.expr(rhs, Some(w))?;
                Expr::binary(*op, a, b).map_err(ir(pos))?
            }
            AstExpr::Ternary { cond, then, otherwise, .. } => {
                let c = self.condition(cond)?;
                let w = self.natural(e, ctx)?;
                let t = self.expr(then, Some(w))?;
                let o = self.expr(otherwise, Some(w))?;
                Expr::mux(c, t, o).map_err(ir(pos))?
            }
            AstExpr::Concat { parts, .. } => {
                self.self_width(e)?;
                let parts = parts.iter().map(|p| self.expr(p, None)).collect::<Result<Vec<_>, _>>()?;
                Expr::concat(parts).map_err(ir(pos))?
            }
        };
        fit(out, ctx, pos)
    }

    fn condition(&self, e: &AstExpr) -> Result<Expr, HdlError> {
        let c = self.expr(e, None)?;
        if c.width() == 1 {
            return Ok(c);
        }
        let w = c.width();
        Expr::binary(BinOp::Neq, c, Expr::constant(0, w).map_err(ir(e.pos()))?).map_err(ir(e.pos()))
    }

    fn assign_rhs(&self, target: &str, width: u32, e: &AstExpr) -> Result<Expr, HdlError> {
        let rhs = self.expr(e, Some(width))?;
        if rhs.width() > width {
            return err(
                ElabCode::WidthMismatch,
                e.pos(),
                format!("{}-bit value assigned to {width}-bit `{target}`", rhs.width()),
            );
        }
        Ok(rhs)
    }

    fn lower(
        &self,
        stmt: &Stmt,
        env: &mut BTreeMap<String, Expr>,
        written: &mut BTreeSet<String>,
    ) -> Result<(), HdlError> {
        match stmt {
            Stmt::Block(body) => {
                for s in body {
                    self.lower(s, env, written)?;
                }
            }
            Stmt::Assign { target, expr, pos } => {
                let s = self.lookup(target, *pos)?;
                if s.kind != SymKind::Reg {
                    return err(ElabCode::NotAReg, *pos, format!("`{target}` is not a reg; use `assign`"));
                }
                let rhs = self.assign_rhs(target, s.width, expr)?;
                written.insert(target.clone());
                env.insert(target.clone(), rhs);
            }
            Stmt::If { cond, then, otherwise, .. } => {
                let c = self.condition(cond)?;
                let mut t_env = env.clone();
                self.lower(then, &mut t_env, written)?;
                let mut o_env = env.clone();
                if let Some(o) = otherwise {
                    self.lower(o, &mut o_env, written)?;
                }
                let keys: BTreeSet<String> = t_env.keys().chain(o_env.keys()).cloned().collect();
                for k in keys {
                    let hold = || {
                        let s = self.syms[k.as_str()];
                        Expr::var(k.clone(), s.width).expect("declared widths are valid")
                    };
                    let t = t_env.get(&k).cloned().unwrap_or_else(hold);
                    let o = o_env.get(&k).cloned().unwrap_or_else(hold);
                    let merged = if t == o { t } else { Expr::mux(c.clone(), t, o).map_err(ir(cond.pos()))? };
                    env.insert(k, merged);
                }
            }
        }
        Ok(())
    }
}

fn unsized_width(e: &AstExpr) -> u32 {
    match e {
        AstExpr::Num { width, value, .. } => width.unwrap_or_else(|| bits_for(*value)),
        AstExpr::Unary { arg, .. } => unsized_width(arg),
        AstExpr::Binary { op, .. } if op.is_comparison() => 1,
        AstExpr::Binary { lhs, rhs, op, .. } => {
            if op.is_shift() {
                unsized_width(lhs)
            } else {
                unsized_width(lhs).max(unsized_width(rhs))
            }
        }
        AstExpr::Ternary { then, otherwise, .. } => unsized_width(then).max(unsized_width(otherwise)),
        _ => 1,
    }
}

/// Peels `begin stmt end` wrappers with exactly one statement.
fn unwrap_single(mut s: &Stmt) -> &Stmt {
    while let Stmt::Block(body) = s {
        if body.len() != 1 {
            break;
        }
        s = &body[0];
    }
    s
}

fn collect_reset_assigns<'s>(s: &'s Stmt, out: &mut Vec<(&'s str, &'s AstExpr, Pos)>) -> Result<(), HdlError> {
    match s {
        Stmt::Block(body) => {
            for b in body {
                collect_reset_assigns(b, out)?;
            }
            Ok(())
        }
        Stmt::Assign { target, expr, pos } => {
            out.push((target, expr, *pos));
            Ok(())
        }
        Stmt::If { pos, .. } => err(ElabCode::BadReset, *pos, "reset branch may only contain constant assignments"),
    }
}

/// Lowers a parsed module to the IR. Register reset values come from either
/// a `reg x = literal;` initializer or a leading `if (rst) ... else ...` in
/// the clocked block.
pub fn elaborate(m: &SourceModule, p: &PragmaSet) -> Result<Design, HdlError> {
    let mut syms: HashMap<&str, Sym> = HashMap::new();
    let mut ports = Vec::new();
    let mut regs: Vec<(String, u32, Option<u64>, Pos)> = Vec::new();
    let mut wires: Vec<(String, u32, Pos)> = Vec::new();

    for pd in &m.ports {
        let kind = match (pd.output, pd.is_reg) {
            (false, _) => SymKind::Input,
            (true, false) => SymKind::Wire,
            (true, true) => SymKind::Reg,
        };
        let sym = Sym { kind, width: pd.width, pos: pd.pos };
        if syms.insert(pd.name.as_str(), sym).is_some() {
            return err(ElabCode::Duplicate, pd.pos, format!("`{}` declared twice", pd.name));
        }
        match kind {
            SymKind::Input => ports.push(Port::input(pd.name.clone(), pd.width)),
            SymKind::Wire => {
                ports.push(Port::output(pd.name.clone(), pd.width));
                wires.push((pd.name.clone(), pd.width, pd.pos));
            }
            SymKind::Reg => {
                ports.push(Port::output(pd.name.clone(), pd.width));
                regs.push((pd.name.clone(), pd.width, None, pd.pos));
            }
        }
    }
    for item in &m.items {
        let (name, sym) = match item {
            Item::Wire { name, width, pos } => {
                wires.push((name.clone(), *width, *pos));
                (name, Sym { kind: SymKind::Wire, width: *width, pos: *pos })
            }
            Item::Reg { name, width, pos, .. } => {
                regs.push((name.clone(), *width, None, *pos));
                (name, Sym { kind: SymKind::Reg, width: *width, pos: *pos })
            }
            _ => continue,
        };
        if syms.insert(name.as_str(), sym).is_some() {
            return err(ElabCode::Duplicate, sym.pos, format!("`{name}` declared twice"));
        }
    }
    let el = Elab { syms };

    // Clock and reset roles.
    let clocks: BTreeSet<(&str, Pos)> = m
        .items
        .iter()
        .filter_map(|i| match i {
            Item::Always { clock, pos, .. } => Some((clock.as_str(), *pos)),
            _ => None,
        })
        .collect();
    let mut clock_names: BTreeSet<&str> = clocks.iter().map(|(c, _)| *c).collect();
    if clock_names.len() > 1 {
        let pos = clocks.iter().next().map(|c| c.1).unwrap_or_default();
        return err(ElabCode::InvalidDesign, pos, "all clocked blocks must share one clock");
    }
    if clock_names.is_empty() && el.syms.contains_key("clk") {
        clock_names.insert("clk");
    }
    for (clock, pos) in &clocks {
        match el.syms.get(clock) {
            Some(s) if s.kind == SymKind::Input && s.width == 1 => {}
            _ => return err(ElabCode::Undeclared, *pos, format!("clock `{clock}` is not a 1-bit input")),
        }
    }
    let reset_name = ["rst", "reset"]
        .into_iter()
        .find(|n| el.syms.get(n).is_some_and(|s| s.kind == SymKind::Input))
        .map(str::to_string);
    for port in &mut ports {
        if clock_names.contains(port.name.as_str()) {
            port.role = PortRole::Clock;
        } else if Some(&port.name) == reset_name.as_ref() {
            port.role = PortRole::Reset;
        }
    }

    // Pragmas.
    let Some(done) = p.done.clone() else {
        return err(ElabCode::MissingDone, m.pos, "no `// @done <port>` pragma");
    };
    let Some(start) = p.start.clone() else {
        return err(ElabCode::MissingStart, m.pos, "no `// @start <port>` pragma");
    };
    for name in p.secret.iter().chain(&p.observable).chain([&start, &done]) {
        if !m.ports.iter().any(|pd| &pd.name == name) {
            return err(ElabCode::BadPragma, m.pos, format!("pragma names `{name}`, which is not a port"));
        }
    }

    // Continuous assignments.
    let mut net_exprs: HashMap<String, Expr> = HashMap::new();
    for item in &m.items {
        if let Item::Assign { target, expr, pos } = item {
            let s = el.lookup(target, *pos)?;
            if s.kind != SymKind::Wire {
                return err(ElabCode::NotAWire, *pos, format!("`{target}` is not a wire; assign it in a clocked block"));
            }
            let rhs = el.assign_rhs(target, s.width, expr)?;
            if net_exprs.insert(target.clone(), rhs).is_some() {
                return err(ElabCode::MultipleDrivers, *pos, format!("`{target}` assigned more than once"));
            }
        }
    }

    // Register initializers.
    let mut resets: HashMap<String, u64> = HashMap::new();
    for item in &m.items {
        if let Item::Reg { name, width, init: Some(init), pos } = item {
            let v = reset_literal(init, *width, *pos)?;
            resets.insert(name.clone(), v);
        }
    }

    // Clocked blocks.
    let mut next: BTreeMap<String, Expr> = BTreeMap::new();
    let mut owner: HashMap<String, Pos> = HashMap::new();
    for item in &m.items {
        let Item::Always { body, pos, .. } = item else { continue };
        let mut body = unwrap_single(body);
        let mut written = BTreeSet::new();
        if let (Stmt::If { cond: AstExpr::Ident { name, .. }, then, otherwise, .. }, Some(rst)) =
            (body, reset_name.as_ref())
        {
            if name == rst {
                let mut assigns = Vec::new();
                collect_reset_assigns(then, &mut assigns)?;
                for (target, e, apos) in assigns {
                    let s = el.lookup(target, apos)?;
                    if s.kind != SymKind::Reg {
                        return err(ElabCode::NotAReg, apos, format!("`{target}` is not a reg"));
                    }
                    let v = reset_literal(e, s.width, apos)?;
                    if let Some(prev) = resets.insert(target.to_string(), v) {
                        if prev != v {
                            return err(ElabCode::BadReset, apos, format!("conflicting reset values for `{target}`"));
                        }
                    }
                    written.insert(target.to_string());
                }
                match otherwise {
                    Some(o) => body = o,
                    None => body = &EMPTY,
                }
            }
        }
        let mut env = BTreeMap::new();
        el.lower(body, &mut env, &mut written)?;
        for r in &written {
            if owner.insert(r.clone(), *pos).is_some() {
                return err(ElabCode::MultipleDrivers, *pos, format!("`{r}` assigned in more than one clocked block"));
            }
        }
        next.extend(env);
    }

    let mut nets = Vec::new();
    for (name, width, pos) in &wires {
        match net_exprs.remove(name) {
            Some(expr) => nets.push(NetDef { name: name.clone(), width: *width, expr }),
            None => return err(ElabCode::Undriven, *pos, format!("wire `{name}` is never assigned")),
        }
    }
    let mut reg_defs = Vec::new();
    for (name, width, _, _) in &regs {
        reg_defs.push(RegDef { name: name.clone(), width: *width, reset: resets.get(name).copied().unwrap_or(0) });
        next.entry(name.clone()).or_insert_with(|| Expr::var(name.clone(), *width).expect("valid width"));
    }

    let d = Design {
        name: m.name.clone(),
        ports,
        regs: reg_defs,
        nets,
        next,
        annot: SecurityAnnotations {
            secret: p.secret.iter().cloned().collect(),
            observable: p.observable.iter().cloned().collect(),
            start,
            done,
        },
    };
    let diags = validate_design(&d);
    if !diags.is_empty() {
        return Err(HdlError::Invalid(diags));
    }
    Ok(d)
}

static EMPTY: Stmt = Stmt::Block(Vec::new());

fn reset_literal(e: &AstExpr, width: u32, pos: Pos) -> Result<u64, HdlError> {
    match e {
        AstExpr::Num { value, width: lw, .. } => {
            if lw.is_some_and(|lw| lw > width) || (width < 64 && value >> width != 0) {
                return err(ElabCode::BadReset, pos, format!("reset value {value} does not fit {width} bits"));
            }
            Ok(*value)
        }
        _ => err(ElabCode::BadReset, pos, "reset values must be literals"),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{load, parse};
    use super::*;
    use crate::ir::ExprKind;

    const HEADER: &str = "// @start start\n// @done done\n// @observable done\n";

    fn design(body: &str) -> Result<Design, HdlError> {
        load(&format!("{HEADER}{body}"))
    }

    #[test]
    fn toggler_lowers_to_not() {
        let d = design(
            "module t(input clk, input rst, input start, output reg q, output done);\n\
             assign done = q;\n\
             always @(posedge clk) q <= ~q;\nendmodule",
        )
        .unwrap();
        assert_eq!(d.next["q"], Expr::not(Expr::var("q", 1).unwrap()));
    }

    #[test]
    fn if_else_lowers_to_mux() {
        let d = design(
            "module t(input clk, input rst, input start, input en, input [3:0] a, input [3:0] b, output done);\n\
             reg [3:0] q;\nassign done = q == 0;\n\
             always @(posedge clk) if (en) q <= a; else q <= b;\nendmodule",
        )
        .unwrap();
        let expected = Expr::mux(
            Expr::var("en", 1).unwrap(),
            Expr::var("a", 4).unwrap(),
            Expr::var("b", 4).unwrap(),
        )
        .unwrap();
        assert_eq!(d.next["q"], expected);
    }

    #[test]
    fn missing_done_pragma() {
        let e = load("// @start start\nmodule t(input clk, input rst, input start, output done); assign done = start; endmodule")
            .unwrap_err();
        assert_eq!(e.elab_code(), Some(ElabCode::MissingDone));
    }

    #[test]
    fn reset_branch_sets_reset_values() {
        let d = design(
            "module t(input clk, input rst, input start, output done);\n\
             reg [3:0] c;\nassign done = c == 4'd9;\n\
             always @(posedge clk) begin if (rst) c <= 4'd7; else c <= c + 1; end\nendmodule",
        )
        .unwrap();
        assert_eq!(d.reg("c").unwrap().reset, 7);
        assert!(matches!(d.next["c"].kind(), ExprKind::Binary(BinOp::Add, _, _)));
        assert_eq!(d.reset_port().unwrap().name, "rst");
        assert_eq!(d.clock().unwrap().name, "clk");
    }

    #[test]
    fn narrower_rhs_is_zero_extended_wider_is_error() {
        let d = design(
            "module t(input clk, input rst, input start, input [1:0] a, output done);\n\
             wire [3:0] w;\nassign w = a;\nassign done = w[3];\nendmodule",
        )
        .unwrap();
        assert!(matches!(d.net("w").unwrap().expr.kind(), ExprKind::Zext(_)));
        let e = design(
            "module t(input clk, input rst, input start, input [5:0] a, output done);\n\
             wire [3:0] w;\nassign w = a;\nassign done = w[3];\nendmodule",
        )
        .unwrap_err();
        assert_eq!(e.elab_code(), Some(ElabCode::WidthMismatch));
    }

    #[test]
    fn multiple_drivers_rejected() {
        let e = design(
            "module t(input clk, input rst, input start, output reg done);\n\
             always @(posedge clk) done <= 1;\nalways @(posedge clk) done <= 0;\nendmodule",
        )
        .unwrap_err();
        assert_eq!(e.elab_code(), Some(ElabCode::MultipleDrivers));
        let e = design(
            "module t(input clk, input rst, input start, output done);\n\
             assign done = 1;\nassign done = 0;\nendmodule",
        )
        .unwrap_err();
        assert_eq!(e.elab_code(), Some(ElabCode::MultipleDrivers));
    }

    #[test]
    fn undeclared_name() {
        let e = design("module t(input clk, input rst, input start, output done); assign done = ghost; endmodule")
            .unwrap_err();
        assert_eq!(e.elab_code(), Some(ElabCode::Undeclared));
    }

    #[test]
    fn unsized_literal_takes_context_width() {
        let d = design(
            "module t(input clk, input rst, input start, output done);\n\
             reg [7:0] c;\nassign done = c == 200;\n\
             always @(posedge clk) c <= c + 1;\nendmodule",
        )
        .unwrap();
        let ExprKind::Binary(_, _, one) = d.next["c"].kind() else { panic!() };
        assert_eq!(one.width(), 8);
        assert_eq!(one.as_const(), Some(1));
    }

    #[test]
    fn sidecar_overrides_source_pragmas() {
        let m = parse(&format!("{HEADER}// @secret a\nmodule t(input clk, input rst, input start, input a, input b, output done); assign done = a; endmodule")).unwrap();
        let src = PragmaSet::from_module(&m).unwrap();
        let side = PragmaSet::parse_sidecar("# override\n@secret b\n// @bound 12\n").unwrap();
        let merged = src.overridden_by(&side);
        assert_eq!(merged.secret, vec!["b".to_string()]);
        assert_eq!(merged.bound, Some(12));
        assert_eq!(merged.done.as_deref(), Some("done"));
    }
}
