//! Word-level sequential circuit IR.
//!
//! A [`Design`] is a flat, single-clock module: input ports, registers with
//! synchronous reset values, combinational nets, and a next-state function
//! per register. Output ports are not separate objects; an output port named
//! `x` is driven by the register or net called `x`.
//!
//! Semantics are two-valued and cycle-based. In every cycle the nets are
//! evaluated from the current register values and inputs; on the clock edge
//! every register simultaneously takes its next-state value, or its reset
//! value when the reset port is high.

mod expr;
mod validate;

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expr::{apply_binop, mask, BinOp, Expr, ExprKind};
pub use validate::{validate_design, DiagCode, Diagnostic};

pub const MAX_WIDTH: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrError {
    #[error("width {0} outside 1..=64")]
    WidthOutOfRange(u32),
    #[error("constant {value:#x} does not fit in {width} bits")]
    ConstOverflow { value: u64, width: u32 },
    #[error("operator `{op}` applied to widths {lhs} and {rhs}")]
    OperandWidth { op: &'static str, lhs: u32, rhs: u32 },
    #[error("mux condition must be 1 bit wide, got {0}")]
    MuxCondition(u32),
    #[error("slice [{hi}:{lo}] out of range for width {width}")]
    SliceRange { hi: u32, lo: u32, width: u32 },
    #[error("empty concatenation")]
    EmptyConcat,
    #[error("cannot zero-extend from {from} down to {to} bits")]
    Narrowing { from: u32, to: u32 },
    #[error("combinational loop through net `{0}`")]
    CombinationalLoop(String),
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortDir {
    Input,
    Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortRole {
    Clock,
    Reset,
    Data,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Port {
    pub name: String,
    pub dir: PortDir,
    pub width: u32,
    pub role: PortRole,
}

impl Port {
    pub fn input(name: impl Into<String>, width: u32) -> Port {
        Port { name: name.into(), dir: PortDir::Input, width, role: PortRole::Data }
    }

    pub fn output(name: impl Into<String>, width: u32) -> Port {
        Port { name: name.into(), dir: PortDir::Output, width, role: PortRole::Data }
    }

    pub fn clock(name: impl Into<String>) -> Port {
        Port { name: name.into(), dir: PortDir::Input, width: 1, role: PortRole::Clock }
    }

    pub fn reset(name: impl Into<String>) -> Port {
        Port { name: name.into(), dir: PortDir::Input, width: 1, role: PortRole::Reset }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RegDef {
    pub name: String,
    pub width: u32,
    pub reset: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NetDef {
    pub name: String,
    pub width: u32,
    pub expr: Expr,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityAnnotations {
    pub secret: BTreeSet<String>,
    pub observable: BTreeSet<String>,
    pub start: String,
    pub done: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignalKind {
    Input,
    Reg,
    Net,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignalInfo {
    pub kind: SignalKind,
    pub width: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Design {
    pub name: String,
    pub ports: Vec<Port>,
    pub regs: Vec<RegDef>,
    pub nets: Vec<NetDef>,
    pub next: BTreeMap<String, Expr>,
    pub annot: SecurityAnnotations,
}

impl Design {
    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn reg(&self, name: &str) -> Option<&RegDef> {
        self.regs.iter().find(|r| r.name == name)
    }

    pub fn net(&self, name: &str) -> Option<&NetDef> {
        self.nets.iter().find(|n| n.name == name)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.dir == PortDir::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.dir == PortDir::Output)
    }

    pub fn clock(&self) -> Option<&Port> {
        self.ports.iter().find(|p| p.role == PortRole::Clock)
    }

    pub fn reset_port(&self) -> Option<&Port> {
        self.ports.iter().find(|p| p.role == PortRole::Reset)
    }

    /// Inputs driven by the stimulus: everything except clock, reset and start.
    pub fn data_inputs(&self) -> impl Iterator<Item = &Port> {
        self.inputs()
            .filter(move |p| p.role == PortRole::Data && p.name != self.annot.start)
    }

    /// Data inputs that are not secret.
    pub fn public_inputs(&self) -> impl Iterator<Item = &Port> {
        self.data_inputs().filter(move |p| !self.annot.secret.contains(&p.name))
    }

    pub fn secret_inputs(&self) -> impl Iterator<Item = &Port> {
        self.data_inputs().filter(move |p| self.annot.secret.contains(&p.name))
    }

    /// Observable ports other than `done`.
    pub fn observable_data(&self) -> impl Iterator<Item = &Port> {
        self.outputs().filter(move |p| {
            self.annot.observable.contains(&p.name) && p.name != self.annot.done
        })
    }

    /// Every named signal: input ports, registers and nets. Output ports are
    /// not listed separately since they alias a register or net.
    pub fn signal_table(&self) -> HashMap<&str, SignalInfo> {
        let mut table = HashMap::new();
        for p in self.inputs() {
            table.insert(p.name.as_str(), SignalInfo { kind: SignalKind::Input, width: p.width });
        }
        for r in &self.regs {
            table.insert(r.name.as_str(), SignalInfo { kind: SignalKind::Reg, width: r.width });
        }
        for n in &self.nets {
            table.insert(n.name.as_str(), SignalInfo { kind: SignalKind::Net, width: n.width });
        }
        table
    }

    pub fn signal(&self, name: &str) -> Option<SignalInfo> {
        if let Some(p) = self.inputs().find(|p| p.name == name) {
            return Some(SignalInfo { kind: SignalKind::Input, width: p.width });
        }
        if let Some(r) = self.reg(name) {
            return Some(SignalInfo { kind: SignalKind::Reg, width: r.width });
        }
        self.net(name).map(|n| SignalInfo { kind: SignalKind::Net, width: n.width })
    }

    /// Names every signal in declaration order (inputs, registers, nets).
    pub fn signal_names(&self) -> Vec<&str> {
        self.inputs()
            .map(|p| p.name.as_str())
            .chain(self.regs.iter().map(|r| r.name.as_str()))
            .chain(self.nets.iter().map(|n| n.name.as_str()))
            .collect()
    }

    pub fn total_secret_width(&self) -> u32 {
        self.secret_inputs().map(|p| p.width).sum()
    }
}

/// Evaluation order for the nets: every net follows the nets it reads.
/// Among nets that are ready at the same time, declaration order wins.
pub fn comb_topo_order(d: &Design) -> Result<Vec<String>, IrError> {
    let index: HashMap<&str, usize> =
        d.nets.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
    let mut pending = vec![0usize; d.nets.len()];
    let mut readers: Vec<Vec<usize>> = vec![Vec::new(); d.nets.len()];
    for (i, net) in d.nets.iter().enumerate() {
        for dep in net.expr.vars() {
            if let Some(&j) = index.get(dep) {
                pending[i] += 1;
                readers[j].push(i);
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..d.nets.len()).filter(|&i| pending[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(d.nets.len());
    while let Some(Reverse(i)) = ready.pop() {
        order.push(d.nets[i].name.clone());
        for &r in &readers[i] {
            pending[r] -= 1;
            if pending[r] == 0 {
                ready.push(Reverse(r));
            }
        }
    }
    if order.len() != d.nets.len() {
        let name = validate::comb_loops(d).into_iter().next().unwrap_or_default();
        return Err(IrError::CombinationalLoop(name));
    }
    Ok(order)
}

/// Signals whose current or past values can influence `target`: the
/// transitive fan-in through nets and register next-state functions,
/// including `target` itself.
pub fn cone_of_influence(d: &Design, target: &str) -> Result<BTreeSet<String>, IrError> {
    cone_of_influence_many(d, [target])
}

pub fn cone_of_influence_many<'a>(
    d: &Design,
    targets: impl IntoIterator<Item = &'a str>,
) -> Result<BTreeSet<String>, IrError> {
    let table = d.signal_table();
    let mut cone = BTreeSet::new();
    let mut work: Vec<String> = Vec::new();
    for t in targets {
        if !table.contains_key(t) {
            return Err(IrError::UnknownSignal(t.to_string()));
        }
        work.push(t.to_string());
    }
    while let Some(s) = work.pop() {
        if !cone.insert(s.clone()) {
            continue;
        }
        let fanin = match table.get(s.as_str()).map(|i| i.kind) {
            Some(SignalKind::Net) => d.net(&s).map(|n| &n.expr),
            Some(SignalKind::Reg) => d.next.get(&s),
            _ => None,
        };
        if let Some(e) = fanin {
            for v in e.vars() {
                if !cone.contains(v) {
                    work.push(v.to_string());
                }
            }
        }
    }
    Ok(cone)
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    fn net(name: &str, w: u32, e: Expr) -> NetDef {
        NetDef { name: name.into(), width: w, expr: e }
    }

    #[test]
    fn topo_single() {
        let mut d = counter_design();
        d.ports.push(Port::input("x", 4));
        d.nets.push(net("y", 4, bin(BinOp::Add, v("x", 4), c(1, 4))));
        assert_eq!(comb_topo_order(&d).unwrap(), vec!["done", "y"]);
    }

    #[test]
    fn topo_chain_respects_dependencies_over_declaration() {
        let mut d = counter_design();
        d.nets.clear();
        d.nets.push(net("c", 1, v("b", 1)));
        d.nets.push(net("b", 1, v("start", 1)));
        d.nets.push(net("done", 1, v("c", 1)));
        assert_eq!(comb_topo_order(&d).unwrap(), vec!["b", "c", "done"]);
    }

    #[test]
    fn topo_detects_two_cycle() {
        let mut d = counter_design();
        d.nets.push(net("a", 1, v("c", 1)));
        d.nets.push(net("c", 1, v("a", 1)));
        assert!(matches!(comb_topo_order(&d), Err(IrError::CombinationalLoop(_))));
    }

    #[test]
    fn cone_of_disconnected_secret() {
        let d = counter_design();
        let cone = cone_of_influence(&d, "done").unwrap();
        assert!(cone.contains("cnt") && cone.contains("run") && cone.contains("start"));
        assert!(!cone.contains("k"));
    }

    #[test]
    fn cone_of_input_is_itself() {
        let d = counter_design();
        assert_eq!(cone_of_influence(&d, "k").unwrap(), BTreeSet::from(["k".to_string()]));
        assert!(matches!(cone_of_influence(&d, "nope"), Err(IrError::UnknownSignal(_))));
    }
}
