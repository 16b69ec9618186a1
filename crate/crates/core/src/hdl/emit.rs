use std::collections::HashSet;
use std::fmt::Write;

use crate::ir::{Design, Expr, ExprKind, PortDir};

struct Emitter<'d> {
    design: &'d Design,
    taken: HashSet<String>,
    aux: Vec<(String, u32, String)>,
    counter: usize,
}

impl Emitter<'_> {
    fn fresh(&mut self) -> String {
        loop {
            let name = format!("_t{}", self.counter);
            self.counter += 1;
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }

    fn expr(&mut self, e: &Expr) -> String {
        match e.kind() {
            ExprKind::Const(v) => format!("{}'h{:x}", e.width(), v),
            ExprKind::Var(n) => n.clone(),
            ExprKind::Not(a) => {
                let inner = self.expr(a);
                if matches!(a.kind(), ExprKind::Var(_) | ExprKind::Const(_)) {
                    format!("~{inner}")
                } else {
                    format!("~({inner})")
                }
            }
            ExprKind::Binary(op, a, b) => {
                format!("({} {} {})", self.expr(a), op.symbol(), self.expr(b))
            }
            ExprKind::Mux(c, t, f) => {
                format!("({} ? {} : {})", self.expr(c), self.expr(t), self.expr(f))
            }
            ExprKind::Slice { arg, hi, lo } => {
                let base = match arg.kind() {
                    ExprKind::Var(n) => n.clone(),
                    _ => {
                        let text = self.expr(arg);
                        let name = self.fresh();
                        self.aux.push((name.clone(), arg.width(), text));
                        name
                    }
                };
                if hi == lo {
                    format!("{base}[{hi}]")
                } else {
                    format!("{base}[{hi}:{lo}]")
                }
            }
            ExprKind::Concat(parts) => {
                let parts: Vec<String> = parts.iter().map(|p| self.expr(p)).collect();
                format!("{{{}}}", parts.join(", "))
            }
            ExprKind::Zext(a) => {
                let pad = e.width() - a.width();
                format!("{{{pad}'h0, {}}}", self.expr(a))
            }
        }
    }
}

fn range(width: u32) -> String {
    if width == 1 {
        String::new()
    } else {
        format!("[{}:0] ", width - 1)
    }
}

/// Renders a design as mini-HDL, pragmas included. Reset values are written
/// as a leading `if (rst)` branch of the single clocked block.
pub fn emit(d: &Design) -> String {
    let mut em = Emitter {
        design: d,
        taken: d.signal_names().into_iter().map(str::to_string).collect(),
        aux: Vec::new(),
        counter: 0,
    };
    let reg_names: HashSet<&str> = d.regs.iter().map(|r| r.name.as_str()).collect();

    let mut out = String::new();
    let a = &em.design.annot;
    if !a.secret.is_empty() {
        let _ = writeln!(out, "// @secret {}", a.secret.iter().cloned().collect::<Vec<_>>().join(" "));
    }
    let _ = writeln!(out, "// @observable {}", a.observable.iter().cloned().collect::<Vec<_>>().join(" "));
    let _ = writeln!(out, "// @start {}", a.start);
    let _ = writeln!(out, "// @done {}", a.done);

    let ports: Vec<String> = d
        .ports
        .iter()
        .map(|p| match p.dir {
            PortDir::Input => format!("input {}{}", range(p.width), p.name),
            PortDir::Output if reg_names.contains(p.name.as_str()) => {
                format!("output reg {}{}", range(p.width), p.name)
            }
            PortDir::Output => format!("output {}{}", range(p.width), p.name),
        })
        .collect();
    let _ = writeln!(out, "module {}(\n  {}\n);", d.name, ports.join(",\n  "));

    let port_names: HashSet<&str> = d.ports.iter().map(|p| p.name.as_str()).collect();
    let mut body = String::new();
    for r in &d.regs {
        if !port_names.contains(r.name.as_str()) {
            let _ = writeln!(body, "  reg {}{};", range(r.width), r.name);
        }
    }
    for n in &d.nets {
        if !port_names.contains(n.name.as_str()) {
            let _ = writeln!(body, "  wire {}{};", range(n.width), n.name);
        }
    }
    let mut assigns = String::new();
    for n in &d.nets {
        let rhs = em.expr(&n.expr);
        let _ = writeln!(assigns, "  assign {} = {};", n.name, rhs);
    }
    if !d.regs.is_empty() {
        let clock = d.clock().map(|p| p.name.as_str()).unwrap_or("clk");
        let reset = d.reset_port().map(|p| p.name.as_str()).unwrap_or("rst");
        let _ = writeln!(assigns, "  always @(posedge {clock}) begin");
        let _ = writeln!(assigns, "    if ({reset}) begin");
        for r in &d.regs {
            let _ = writeln!(assigns, "      {} <= {}'h{:x};", r.name, r.width, r.reset);
        }
        let _ = writeln!(assigns, "    end else begin");
        for r in &d.regs {
            let rhs = em.expr(&d.next[&r.name]);
            if rhs != r.name {
                let _ = writeln!(assigns, "      {} <= {};", r.name, rhs);
            }
        }
        let _ = writeln!(assigns, "    end\n  end");
    }
    for (name, width, _) in &em.aux {
        let _ = writeln!(body, "  wire {}{};", range(*width), name);
    }
    for (name, _, text) in &em.aux {
        let _ = writeln!(body, "  assign {name} = {text};");
    }
    out.push_str(&body);
    out.push_str(&assigns);
    out.push_str("endmodule\n");
    out
}
