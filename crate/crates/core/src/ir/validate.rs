use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{mask, Design, Expr, PortDir, PortRole, SignalKind, MAX_WIDTH};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagCode {
    DuplicateName,
    WidthRange,
    ResetOverflow,
    UnknownSignal,
    WidthMismatch,
    ClockInExpr,
    CombLoop,
    ClockCount,
    ResetCount,
    OutputUndriven,
    MissingNext,
    NextNotReg,
    SecretNotInput,
    ObservableNotOutput,
    StartInvalid,
    DoneInvalid,
    SecretObservableOverlap,
    DoneNotObservable,
}

impl fmt::Display for DiagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        write!(f, "{}", s.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagCode,
    pub name: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at `{}`: {}", self.code, self.name, self.message)
    }
}

struct Sink(Vec<Diagnostic>);

impl Sink {
    fn push(&mut self, code: DiagCode, name: &str, message: impl Into<String>) {
        self.0.push(Diagnostic { code, name: name.to_string(), message: message.into() });
    }
}

/// Checks every structural invariant of a design. An empty result means the
/// design is fit for simulation, unrolling and transformation.
pub fn validate_design(d: &Design) -> Vec<Diagnostic> {
    let mut out = Sink(Vec::new());

    // Names and widths.
    let mut seen = HashSet::new();
    let outputs: HashMap<&str, u32> =
        d.ports.iter().filter(|p| p.dir == PortDir::Output).map(|p| (p.name.as_str(), p.width)).collect();
    for p in &d.ports {
        if p.width == 0 || p.width > MAX_WIDTH {
            out.push(DiagCode::WidthRange, &p.name, format!("port width {}", p.width));
        }
        if p.dir == PortDir::Input && !seen.insert(p.name.as_str()) {
            out.push(DiagCode::DuplicateName, &p.name, "declared more than once");
        }
    }
    let mut seen_outputs = HashSet::new();
    for p in d.ports.iter().filter(|p| p.dir == PortDir::Output) {
        if !seen_outputs.insert(p.name.as_str()) || seen.contains(p.name.as_str()) {
            out.push(DiagCode::DuplicateName, &p.name, "output port declared more than once");
        }
    }
    for r in &d.regs {
        if !seen.insert(r.name.as_str()) {
            out.push(DiagCode::DuplicateName, &r.name, "declared more than once");
        }
        if r.width == 0 || r.width > MAX_WIDTH {
            out.push(DiagCode::WidthRange, &r.name, format!("register width {}", r.width));
        } else if r.reset & !mask(r.width) != 0 {
            out.push(DiagCode::ResetOverflow, &r.name, format!("reset value {:#x} exceeds width {}", r.reset, r.width));
        }
    }
    for n in &d.nets {
        if !seen.insert(n.name.as_str()) {
            out.push(DiagCode::DuplicateName, &n.name, "declared more than once");
        }
        if n.width == 0 || n.width > MAX_WIDTH {
            out.push(DiagCode::WidthRange, &n.name, format!("net width {}", n.width));
        }
    }

    // Clock and reset.
    let clocks: Vec<_> = d.ports.iter().filter(|p| p.role == PortRole::Clock).collect();
    if clocks.len() != 1 {
        out.push(DiagCode::ClockCount, &d.name, format!("expected one clock port, found {}", clocks.len()));
    }
    let resets: Vec<_> = d.ports.iter().filter(|p| p.role == PortRole::Reset).collect();
    if resets.len() != 1 {
        out.push(DiagCode::ResetCount, &d.name, format!("expected one reset port, found {}", resets.len()));
    }
    for p in clocks.iter().chain(resets.iter()) {
        if p.dir != PortDir::Input || p.width != 1 {
            out.push(DiagCode::WidthMismatch, &p.name, "clock and reset must be 1-bit inputs");
        }
    }
    let clock_names: HashSet<&str> = clocks.iter().map(|p| p.name.as_str()).collect();

    // Output drivers.
    let table = d.signal_table();
    for (&name, &width) in &outputs {
        match table.get(name) {
            Some(info) if info.kind != SignalKind::Input && info.width == width => {}
            Some(info) if info.kind != SignalKind::Input => out.push(
                DiagCode::WidthMismatch,
                name,
                format!("output is {width} bits but its driver is {} bits", info.width),
            ),
            _ => out.push(DiagCode::OutputUndriven, name, "no register or net drives this output"),
        }
    }

    // Expressions.
    let check_expr = |owner: &str, e: &Expr, expect: u32, out: &mut Sink| {
        if e.width() != expect {
            out.push(
                DiagCode::WidthMismatch,
                owner,
                format!("expression is {} bits, target is {expect}", e.width()),
            );
        }
        e.visit_vars(&mut |var, w| match table.get(var) {
            None => out.push(DiagCode::UnknownSignal, var, format!("referenced by `{owner}`")),
            Some(_) if clock_names.contains(var) => {
                out.push(DiagCode::ClockInExpr, var, format!("clock read by `{owner}`"))
            }
            Some(info) if info.width != w => out.push(
                DiagCode::WidthMismatch,
                var,
                format!("used as {w} bits in `{owner}` but declared {} bits", info.width),
            ),
            Some(_) => {}
        });
    };
    for n in &d.nets {
        check_expr(&n.name, &n.expr, n.width, &mut out);
    }
    for r in &d.regs {
        match d.next.get(&r.name) {
            Some(e) => check_expr(&r.name, e, r.width, &mut out),
            None => out.push(DiagCode::MissingNext, &r.name, "register has no next-state function"),
        }
    }
    for name in d.next.keys() {
        if d.reg(name).is_none() {
            out.push(DiagCode::NextNotReg, name, "next-state function for a non-register");
        }
    }

    for name in comb_loops(d) {
        out.push(DiagCode::CombLoop, &name, "combinational loop");
    }

    // Security annotations.
    let a = &d.annot;
    for s in &a.secret {
        match d.port(s) {
            Some(p) if p.dir == PortDir::Input && p.role == PortRole::Data && *s != a.start => {}
            _ => out.push(DiagCode::SecretNotInput, s, "secrets must be data input ports"),
        }
    }
    for o in &a.observable {
        if !outputs.contains_key(o.as_str()) {
            out.push(DiagCode::ObservableNotOutput, o, "observables must be output ports");
        }
        if a.secret.contains(o) {
            out.push(DiagCode::SecretObservableOverlap, o, "both secret and observable");
        }
    }
    match d.port(&a.start) {
        Some(p) if p.dir == PortDir::Input && p.width == 1 && p.role == PortRole::Data => {}
        _ => out.push(DiagCode::StartInvalid, &a.start, "start must be a 1-bit data input"),
    }
    match d.ports.iter().find(|p| p.name == a.done && p.dir == PortDir::Output) {
        Some(p) if p.width == 1 => {}
        _ => out.push(DiagCode::DoneInvalid, &a.done, "done must be a 1-bit output"),
    }
    if !a.observable.contains(&a.done) {
        out.push(DiagCode::DoneNotObservable, &a.done, "done must be observable");
    }

    out.0
}

/// One representative (the earliest declared member) per strongly connected
/// group of nets that forms a combinational cycle.
pub(crate) fn comb_loops(d: &Design) -> Vec<String> {
    let index: HashMap<&str, usize> =
        d.nets.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
    let deps: Vec<Vec<usize>> = d
        .nets
        .iter()
        .map(|n| n.expr.vars().into_iter().filter_map(|v| index.get(v).copied()).collect())
        .collect();
    let reach = |from: usize| -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = deps[from].clone();
        while let Some(x) = stack.pop() {
            if seen.insert(x) {
                stack.extend(deps[x].iter().copied());
            }
        }
        seen
    };
    let reaches: Vec<BTreeSet<usize>> = (0..d.nets.len()).map(reach).collect();
    let mut covered = HashSet::new();
    let mut reps = Vec::new();
    for i in 0..d.nets.len() {
        if covered.contains(&i) || !reaches[i].contains(&i) {
            continue;
        }
        for &j in &reaches[i] {
            if reaches[j].contains(&i) {
                covered.insert(j);
            }
        }
        reps.push(d.nets[i].name.clone());
    }
    reps
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::*;
    use super::*;

    fn codes(d: &Design) -> Vec<DiagCode> {
        validate_design(d).into_iter().map(|x| x.code).collect()
    }

    #[test]
    fn counter_is_clean() {
        assert_eq!(validate_design(&counter_design()), vec![]);
    }

    #[test]
    fn comb_loop_reported_once_at_first_member() {
        let mut d = counter_design();
        d.nets.push(NetDef { name: "a".into(), width: 1, expr: v("b", 1) });
        d.nets.push(NetDef { name: "b".into(), width: 1, expr: v("a", 1) });
        let diags = validate_design(&d);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, DiagCode::CombLoop);
        assert_eq!(diags[0].name, "a");
    }

    #[test]
    fn secret_must_be_input() {
        let mut d = counter_design();
        d.annot.secret.insert("done".into());
        let c = codes(&d);
        assert!(c.contains(&DiagCode::SecretNotInput));
    }

    #[test]
    fn undeclared_and_mis_sized_operands() {
        let mut d = counter_design();
        d.nets.push(NetDef { name: "x".into(), width: 4, expr: v("ghost", 4) });
        d.nets.push(NetDef { name: "y".into(), width: 2, expr: v("k", 2) });
        let c = codes(&d);
        assert!(c.contains(&DiagCode::UnknownSignal));
        assert!(c.contains(&DiagCode::WidthMismatch));
    }

    #[test]
    fn done_must_be_observable_one_bit_output() {
        let mut d = counter_design();
        d.annot.observable.clear();
        assert_eq!(codes(&d), vec![DiagCode::DoneNotObservable]);
        let mut d = counter_design();
        d.annot.done = "k".into();
        assert!(codes(&d).contains(&DiagCode::DoneInvalid));
    }

    #[test]
    fn missing_clock_and_reset() {
        let mut d = counter_design();
        d.ports.retain(|p| p.role == PortRole::Data);
        let c = codes(&d);
        assert!(c.contains(&DiagCode::ClockCount) && c.contains(&DiagCode::ResetCount));
    }

    #[test]
    fn validate_is_idempotent() {
        let mut d = counter_design();
        d.annot.secret.insert("done".into());
        assert_eq!(validate_design(&d), validate_design(&d));
    }
}
