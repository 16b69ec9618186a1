//! Cycle-accurate two-valued interpreter.
//!
//! Every run follows the same protocol: registers power up at 0, one reset
//! cycle (`rst = 1`) loads the reset values, then cycle 0 samples
//! `start = 1` and every later cycle has `start = 0`. All other inputs hold
//! the stimulus values throughout. The latency of a run is the index of the
//! first cycle `t >= 1` in which `done` is high; a `done` level during cycle
//! 0 is ignored because it is concurrent with the start pulse.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{
    apply_binop, comb_topo_order, mask, validate_design, BinOp, Design, Diagnostic, Expr,
    ExprKind, PortRole,
};

pub type Valuation = BTreeMap<String, u64>;

/// Default cap on the total secret width the exhaustive oracle will enumerate.
pub const ORACLE_MAX_SECRET_BITS: u32 = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("design is malformed: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidDesign(Vec<Diagnostic>),
    #[error("value {value:#x} does not fit {width}-bit port `{port}`")]
    StimulusWidthMismatch { port: String, value: u64, width: u32 },
    #[error("`{0}` is not a data input of the design")]
    UnknownPort(String),
    #[error("`{0}` is not a signal of the design")]
    UnknownSignal(String),
    #[error("secret domain of {bits} bits exceeds the {limit}-bit limit (use force to override)")]
    DomainTooLarge { bits: u32, limit: u32 },
    #[error("{count} secret valuation(s) never completed within the bound; first: {examples:?}")]
    NonCompletion { count: u64, examples: Vec<Valuation> },
    #[error("designs are not comparable: {0}")]
    SignatureMismatch(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stimulus {
    pub public: Valuation,
    pub secret: Valuation,
    pub bound: u32,
}

impl Stimulus {
    pub fn new(public: Valuation, secret: Valuation, bound: u32) -> Stimulus {
        Stimulus { public, secret, bound: bound.max(1) }
    }
}

/// One concrete execution, recorded up to the completion cycle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceWitness {
    pub stimulus: Stimulus,
    pub signals: Vec<String>,
    /// `cycles[t][i]` is the value of `signals[i]` in cycle `t`.
    pub cycles: Vec<Vec<u64>>,
    pub latency: Option<u32>,
}

impl TraceWitness {
    pub fn completed(&self) -> bool {
        self.latency.is_some()
    }

    pub fn waveform(&self, signal: &str) -> Option<Vec<u64>> {
        let i = self.signals.iter().position(|s| s == signal)?;
        Some(self.cycles.iter().map(|c| c[i]).collect())
    }

    /// Textual dump, one `cycle signal value` triple per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (t, vals) in self.cycles.iter().enumerate() {
            for (name, v) in self.signals.iter().zip(vals) {
                let _ = writeln!(out, "{t} {name} {v:#x}");
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
enum Node {
    Const(u64),
    Slot(usize),
    Not(Box<Node>, u64),
    Bin { op: BinOp, a: Box<Node>, b: Box<Node>, width: u32, mask: u64 },
    Mux(Box<Node>, Box<Node>, Box<Node>),
    Slice(Box<Node>, u32, u64),
    Concat(Vec<(Node, u32)>),
    Zext(Box<Node>),
}

impl Node {
    fn compile(e: &Expr, slots: &HashMap<String, usize>) -> Node {
        match e.kind() {
            ExprKind::Const(v) => Node::Const(*v),
            ExprKind::Var(n) => Node::Slot(slots[n]),
            ExprKind::Not(a) => Node::Not(Box::new(Node::compile(a, slots)), mask(e.width())),
            ExprKind::Zext(a) => Node::Zext(Box::new(Node::compile(a, slots))),
            ExprKind::Slice { arg, hi, lo } => {
                Node::Slice(Box::new(Node::compile(arg, slots)), *lo, mask(hi - lo + 1))
            }
            ExprKind::Binary(op, a, b) => Node::Bin {
                op: *op,
                a: Box::new(Node::compile(a, slots)),
                b: Box::new(Node::compile(b, slots)),
                width: a.width(),
                mask: mask(e.width()),
            },
            ExprKind::Mux(c, t, f) => Node::Mux(
                Box::new(Node::compile(c, slots)),
                Box::new(Node::compile(t, slots)),
                Box::new(Node::compile(f, slots)),
            ),
            ExprKind::Concat(parts) => {
                Node::Concat(parts.iter().map(|p| (Node::compile(p, slots), p.width())).collect())
            }
        }
    }

    fn eval(&self, vals: &[u64]) -> u64 {
        match self {
            Node::Const(v) => *v,
            Node::Slot(i) => vals[*i],
            Node::Not(a, m) => !a.eval(vals) & m,
            Node::Zext(a) => a.eval(vals),
            Node::Slice(a, lo, m) => (a.eval(vals) >> lo) & m,
            Node::Bin { op, a, b, width, mask } => apply_binop(*op, a.eval(vals), b.eval(vals), *width) & mask,
            Node::Mux(c, t, f) => {
                if c.eval(vals) != 0 {
                    t.eval(vals)
                } else {
                    f.eval(vals)
                }
            }
            Node::Concat(parts) => parts.iter().fold(0u64, |acc, (p, w)| {
                let shifted = if *w >= 64 { 0 } else { acc << w };
                shifted | p.eval(vals)
            }),
        }
    }
}

/// A compiled design plus its current state.
pub struct Simulator<'d> {
    design: &'d Design,
    slots: HashMap<String, usize>,
    nets: Vec<(usize, Node)>,
    regs: Vec<(usize, Node, u64)>,
    vals: Vec<u64>,
    scratch: Vec<u64>,
    reset_slot: Option<usize>,
    start_slot: usize,
    done_slot: usize,
}

impl<'d> Simulator<'d> {
    pub fn new(design: &'d Design) -> Result<Simulator<'d>, SimError> {
        let diags = validate_design(design);
        if !diags.is_empty() {
            return Err(SimError::InvalidDesign(diags));
        }
        let slots: HashMap<String, usize> =
            design.signal_names().into_iter().enumerate().map(|(i, n)| (n.to_string(), i)).collect();
        let order = comb_topo_order(design).expect("validated designs have no combinational loops");
        let nets = order
            .iter()
            .map(|n| (slots[n], Node::compile(&design.net(n).expect("net in order").expr, &slots)))
            .collect();
        let regs = design
            .regs
            .iter()
            .map(|r| (slots[&r.name], Node::compile(&design.next[&r.name], &slots), r.reset))
            .collect();
        let n = slots.len();
        Ok(Simulator {
            design,
            reset_slot: design.reset_port().map(|p| slots[&p.name]),
            start_slot: slots[&design.annot.start],
            done_slot: slots[&design.annot.done],
            slots,
            nets,
            regs,
            vals: vec![0; n],
            scratch: Vec::new(),
        })
    }

    pub fn design(&self) -> &'d Design {
        self.design
    }

    /// Zeroes every signal, as at power-up.
    pub fn power_on(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0);
    }

    pub fn set_input(&mut self, name: &str, value: u64) -> Result<(), SimError> {
        let port = self
            .design
            .inputs()
            .find(|p| p.name == name)
            .ok_or_else(|| SimError::UnknownPort(name.to_string()))?;
        if value & !mask(port.width) != 0 {
            return Err(SimError::StimulusWidthMismatch { port: name.to_string(), value, width: port.width });
        }
        self.vals[self.slots[name]] = value;
        Ok(())
    }

    /// Re-evaluates every net from the current registers and inputs.
    pub fn settle(&mut self) {
        for (slot, node) in &self.nets {
            let v = node.eval(&self.vals);
            self.vals[*slot] = v;
        }
    }

    pub fn peek(&self, name: &str) -> Result<u64, SimError> {
        self.slots
            .get(name)
            .map(|&i| self.vals[i])
            .ok_or_else(|| SimError::UnknownSignal(name.to_string()))
    }

    /// Clock edge: registers take their next-state values (or reset values
    /// while reset is high). Call after `settle`.
    pub fn clock(&mut self) {
        let in_reset = self.reset_slot.is_some_and(|s| self.vals[s] != 0);
        self.scratch.clear();
        for (_, node, reset) in &self.regs {
            self.scratch.push(if in_reset { *reset } else { node.eval(&self.vals) });
        }
        for ((slot, _, _), v) in self.regs.iter().zip(&self.scratch) {
            self.vals[*slot] = *v;
        }
    }

    fn apply_stimulus(&mut self, s: &Stimulus) -> Result<(), SimError> {
        for (name, v) in s.public.iter().chain(&s.secret) {
            let is_data = self.design.data_inputs().any(|p| &p.name == name);
            if !is_data {
                return Err(SimError::UnknownPort(name.clone()));
            }
            self.set_input(name, *v)?;
        }
        Ok(())
    }

    /// Power-up, one reset cycle, stimulus applied; leaves the simulator at
    /// the start of cycle 0 (not yet settled).
    pub fn begin(&mut self, s: &Stimulus) -> Result<(), SimError> {
        self.power_on();
        self.apply_stimulus(s)?;
        if let Some(r) = self.reset_slot {
            self.vals[r] = 1;
        }
        self.settle();
        self.clock();
        if let Some(r) = self.reset_slot {
            self.vals[r] = 0;
        }
        Ok(())
    }

    /// Runs the start protocol and records `signals` in every cycle up to
    /// completion (or the bound).
    pub fn run_recording(&mut self, s: &Stimulus, signals: &[String]) -> Result<TraceWitness, SimError> {
        let idx: Vec<usize> = signals
            .iter()
            .map(|n| self.slots.get(n).copied().ok_or_else(|| SimError::UnknownSignal(n.clone())))
            .collect::<Result<_, _>>()?;
        self.begin(s)?;
        let mut cycles = Vec::new();
        let mut latency = None;
        for t in 0..=s.bound {
            self.vals[self.start_slot] = (t == 0) as u64;
            self.settle();
            cycles.push(idx.iter().map(|&i| self.vals[i]).collect());
            if t >= 1 && self.vals[self.done_slot] != 0 {
                latency = Some(t);
                break;
            }
            self.clock();
        }
        Ok(TraceWitness { stimulus: s.clone(), signals: signals.to_vec(), cycles, latency })
    }

    /// Latency only; no recording.
    pub fn latency(&mut self, s: &Stimulus) -> Result<Option<u32>, SimError> {
        self.begin(s)?;
        for t in 0..=s.bound {
            self.vals[self.start_slot] = (t == 0) as u64;
            self.settle();
            if t >= 1 && self.vals[self.done_slot] != 0 {
                return Ok(Some(t));
            }
            self.clock();
        }
        Ok(None)
    }

    /// Runs to completion and returns the values of `ports` in the
    /// completion cycle, or `None` if the run never completes.
    pub fn data_at_done(&mut self, s: &Stimulus, ports: &[String]) -> Result<Option<(u32, Vec<u64>)>, SimError> {
        let idx: Vec<usize> = ports
            .iter()
            .map(|n| self.slots.get(n).copied().ok_or_else(|| SimError::UnknownSignal(n.clone())))
            .collect::<Result<_, _>>()?;
        Ok(self.latency(s)?.map(|t| (t, idx.iter().map(|&i| self.vals[i]).collect())))
    }
}

impl Simulator<'_> {
    /// Records `signals` for exactly `cycles` cycles after reset, ignoring
    /// `done`; inputs other than start are held at the stimulus values.
    pub fn run_cycles(&mut self, s: &Stimulus, cycles: u32, signals: &[String]) -> Result<Vec<Vec<u64>>, SimError> {
        let idx: Vec<usize> = signals
            .iter()
            .map(|n| self.slots.get(n).copied().ok_or_else(|| SimError::UnknownSignal(n.clone())))
            .collect::<Result<_, _>>()?;
        self.begin(s)?;
        let mut out = Vec::with_capacity(cycles as usize);
        for t in 0..cycles {
            self.vals[self.start_slot] = (t == 0) as u64;
            self.settle();
            out.push(idx.iter().map(|&i| self.vals[i]).collect());
            self.clock();
        }
        Ok(out)
    }
}

/// Signals recorded by default: start, done, then the other observables.
pub fn default_signals(d: &Design) -> Vec<String> {
    let mut sigs = vec![d.annot.start.clone(), d.annot.done.clone()];
    sigs.extend(d.observable_data().map(|p| p.name.clone()));
    sigs
}

pub fn run(d: &Design, s: &Stimulus) -> Result<TraceWitness, SimError> {
    Simulator::new(d)?.run_recording(s, &default_signals(d))
}

/// Enumeration of every valuation of a design's secret inputs, optionally
/// skipping the all-zero valuation.
#[derive(Clone, Debug)]
pub struct SecretDomain {
    ports: Vec<(String, u32)>,
    pub skip_zero: bool,
}

impl SecretDomain {
    pub fn of(d: &Design) -> SecretDomain {
        SecretDomain { ports: d.secret_inputs().map(|p| (p.name.clone(), p.width)).collect(), skip_zero: false }
    }

    pub fn nonzero(d: &Design) -> SecretDomain {
        SecretDomain { skip_zero: true, ..SecretDomain::of(d) }
    }

    pub fn bits(&self) -> u32 {
        self.ports.iter().map(|(_, w)| *w).sum()
    }

    fn index_range(&self) -> std::ops::Range<u64> {
        let end = if self.bits() >= 64 { u64::MAX } else { 1u64 << self.bits() };
        (self.skip_zero as u64)..end
    }

    pub fn len(&self) -> u64 {
        let r = self.index_range();
        r.end - r.start
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Valuation for a packed index; the first port occupies the low bits.
    pub fn valuation(&self, mut index: u64) -> Valuation {
        let mut v = Valuation::new();
        for (name, w) in &self.ports {
            v.insert(name.clone(), index & mask(*w));
            index = if *w >= 64 { 0 } else { index >> w };
        }
        v
    }

    pub fn iter(&self) -> impl Iterator<Item = Valuation> + '_ {
        self.index_range().map(|i| self.valuation(i))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTally {
    pub count: u64,
    /// First secret valuation (in domain order) observed with this latency.
    pub example: Valuation,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OracleClasses {
    pub classes: BTreeMap<u32, ClassTally>,
}

impl OracleClasses {
    pub fn latencies(&self) -> Vec<u32> {
        self.classes.keys().copied().collect()
    }

    /// Multiset union; on ties the example from `self` (earlier chunk) wins.
    pub fn merge(mut self, other: OracleClasses) -> OracleClasses {
        for (lat, tally) in other.classes {
            self.classes
                .entry(lat)
                .and_modify(|t| t.count += tally.count)
                .or_insert(tally);
        }
        self
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OracleOptions {
    /// Skip the secret-width guard.
    pub force: bool,
    /// Number of contiguous chunks the domain is split into for workers.
    pub chunks: usize,
}

/// Brute force: one simulation per secret valuation, public inputs fixed.
pub fn exhaustive_classes(
    d: &Design,
    public: &Valuation,
    domain: &SecretDomain,
    bound: u32,
    opts: OracleOptions,
) -> Result<OracleClasses, SimError> {
    if !opts.force && domain.bits() > ORACLE_MAX_SECRET_BITS {
        return Err(SimError::DomainTooLarge { bits: domain.bits(), limit: ORACLE_MAX_SECRET_BITS });
    }
    Simulator::new(d)?;
    let range = domain.index_range();
    let chunks = opts.chunks.max(1) as u64;
    let span = (range.end - range.start).div_ceil(chunks).max(1);
    let pieces: Vec<(u64, u64)> = (0..chunks)
        .map(|i| (range.start + i * span, (range.start + (i + 1) * span).min(range.end)))
        .filter(|(a, b)| a < b)
        .collect();

    type Chunk = (OracleClasses, u64, Vec<Valuation>);
    let results: Vec<Result<Chunk, SimError>> = pieces
        .par_iter()
        .map(|&(lo, hi)| {
            let mut sim = Simulator::new(d)?;
            let mut out = OracleClasses::default();
            let mut stuck = 0u64;
            let mut examples = Vec::new();
            for i in lo..hi {
                let secret = domain.valuation(i);
                let stim = Stimulus::new(public.clone(), secret, bound);
                match sim.latency(&stim)? {
                    Some(t) => {
                        out.classes
                            .entry(t)
                            .and_modify(|c| c.count += 1)
                            .or_insert(ClassTally { count: 1, example: stim.secret });
                    }
                    None => {
                        stuck += 1;
                        if examples.len() < 8 {
                            examples.push(stim.secret);
                        }
                    }
                }
            }
            Ok((out, stuck, examples))
        })
        .collect();

    let mut merged = OracleClasses::default();
    let mut stuck = 0;
    let mut examples = Vec::new();
    for r in results {
        let (classes, s, ex) = r?;
        merged = merged.merge(classes);
        stuck += s;
        examples.extend(ex);
    }
    if stuck > 0 {
        examples.truncate(8);
        return Err(SimError::NonCompletion { count: stuck, examples });
    }
    Ok(merged)
}

/// Random valuation of every data input, secret and public.
pub fn random_stimulus(d: &Design, rng: &mut impl Rng, bound: u32) -> Stimulus {
    let mut public = Valuation::new();
    let mut secret = Valuation::new();
    for p in d.data_inputs() {
        let v = rng.random::<u64>() & mask(p.width);
        if d.annot.secret.contains(&p.name) {
            secret.insert(p.name.clone(), v);
        } else {
            public.insert(p.name.clone(), v);
        }
    }
    Stimulus::new(public, secret, bound)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CosimVerdict {
    /// `skipped` counts stimuli on which the reference never completed.
    Pass { checked: usize, skipped: usize },
    Fail { stimulus: Stimulus, port: String, expected: Option<u64>, actual: Option<u64> },
}

impl CosimVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, CosimVerdict::Pass { .. })
    }
}

fn check_signature(a: &Design, b: &Design) -> Result<Vec<String>, SimError> {
    let sig = |d: &Design| -> Vec<(String, u32, bool)> {
        d.data_inputs().map(|p| (p.name.clone(), p.width, d.annot.secret.contains(&p.name))).collect()
    };
    let (mut sa, mut sb) = (sig(a), sig(b));
    sa.sort();
    sb.sort();
    if sa != sb {
        return Err(SimError::SignatureMismatch(format!("input ports differ: {sa:?} vs {sb:?}")));
    }
    let mut ports = Vec::new();
    for p in a.observable_data() {
        match b.outputs().find(|q| q.name == p.name) {
            Some(q) if q.width == p.width && b.annot.observable.contains(&q.name) => ports.push(p.name.clone()),
            _ => {
                return Err(SimError::SignatureMismatch(format!("observable `{}` missing or resized", p.name)));
            }
        }
    }
    Ok(ports)
}

/// Co-simulation on random stimuli comparing the observable data ports at
/// each design's own completion cycle. Stimuli on which `a` never completes
/// carry no reference value; they are skipped and replaced by fresh draws,
/// up to `10 * samples` draws in total.
pub fn cosim_equiv(a: &Design, b: &Design, samples: usize, bound: u32, seed: u64) -> Result<CosimVerdict, SimError> {
    let ports = check_signature(a, b)?;
    let mut sa = Simulator::new(a)?;
    let mut sb = Simulator::new(b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut skipped) = (0, 0);
    while checked < samples && checked + skipped < samples.saturating_mul(10) {
        let stim = random_stimulus(a, &mut rng, bound);
        let Some((_, va)) = sa.data_at_done(&stim, &ports)? else {
            skipped += 1;
            continue;
        };
        let Some((_, vb)) = sb.data_at_done(&stim, &ports)? else {
            return Ok(CosimVerdict::Fail {
                stimulus: stim,
                port: b.annot.done.clone(),
                expected: Some(1),
                actual: None,
            });
        };
        if let Some(i) = (0..ports.len()).find(|&i| va[i] != vb[i]) {
            return Ok(CosimVerdict::Fail {
                stimulus: stim,
                port: ports[i].clone(),
                expected: Some(va[i]),
                actual: Some(vb[i]),
            });
        }
        checked += 1;
    }
    Ok(CosimVerdict::Pass { checked, skipped })
}

/// Clock and reset role ports are not stimulus inputs.
pub fn is_control(d: &Design, name: &str) -> bool {
    d.port(name).is_some_and(|p| p.role != PortRole::Data) || name == d.annot.start
}
