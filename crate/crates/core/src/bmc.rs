//! Bit-level time-frame expansion of a design into CNF.
//!
//! Words are little-endian literal vectors. Gates are structurally hashed and
//! constant-folded before any clause is emitted, so frames whose state is
//! still constant (the first few after reset) cost almost nothing.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::ir::{cone_of_influence, comb_topo_order, validate_design, BinOp, Design, Diagnostic, Expr, ExprKind};
use crate::sat::{Cnf, Lit};

pub type Word = Vec<Lit>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BmcError {
    #[error("design is malformed: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidDesign(Vec<Diagnostic>),
    #[error("formula exceeds the clause budget of {budget} (at cycle {cycle})")]
    CapacityExceeded { budget: usize, cycle: u32 },
    #[error("bound must be at least 1")]
    ZeroBound,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum GateKey {
    And(Lit, Lit),
    Xor(Lit, Lit),
    Mux(Lit, Lit, Lit),
}

/// Tseitin encoder with structural hashing over a shared CNF.
pub struct Blaster {
    pub cnf: Cnf,
    table: HashMap<GateKey, Lit>,
}

impl Default for Blaster {
    fn default() -> Self {
        Blaster::new()
    }
}

const T: Lit = Cnf::TRUE;
const F: Lit = Cnf::FALSE;

impl Blaster {
    pub fn new() -> Blaster {
        Blaster { cnf: Cnf::new(), table: HashMap::new() }
    }

    pub fn constant(b: bool) -> Lit {
        if b {
            T
        } else {
            F
        }
    }

    pub fn and(&mut self, a: Lit, b: Lit) -> Lit {
        if a == F || b == F || a == !b {
            return F;
        }
        if a == T || a == b {
            return b;
        }
        if b == T {
            return a;
        }
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        if let Some(&o) = self.table.get(&GateKey::And(a, b)) {
            return o;
        }
        let o = self.cnf.new_lit();
        self.cnf.add_clause(&[!o, a]);
        self.cnf.add_clause(&[!o, b]);
        self.cnf.add_clause(&[o, !a, !b]);
        self.table.insert(GateKey::And(a, b), o);
        o
    }

    pub fn or(&mut self, a: Lit, b: Lit) -> Lit {
        !self.and(!a, !b)
    }

    pub fn xor(&mut self, a: Lit, b: Lit) -> Lit {
        if a == F {
            return b;
        }
        if b == F {
            return a;
        }
        if a == T {
            return !b;
        }
        if b == T {
            return !a;
        }
        if a == b {
            return F;
        }
        if a == !b {
            return T;
        }
        // Normalize polarity so xor(a,b), xor(!a,b) share one gate.
        let flip = a.is_neg() != b.is_neg();
        let (a, b) = (strip(a), strip(b));
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let o = match self.table.get(&GateKey::Xor(a, b)) {
            Some(&o) => o,
            None => {
                let o = self.cnf.new_lit();
                self.cnf.add_clause(&[!o, a, b]);
                self.cnf.add_clause(&[!o, !a, !b]);
                self.cnf.add_clause(&[o, !a, b]);
                self.cnf.add_clause(&[o, a, !b]);
                self.table.insert(GateKey::Xor(a, b), o);
                o
            }
        };
        if flip {
            !o
        } else {
            o
        }
    }

    pub fn mux(&mut self, s: Lit, t: Lit, e: Lit) -> Lit {
        if s == T || t == e {
            return t;
        }
        if s == F {
            return e;
        }
        if t == T || t == s {
            return self.or(s, e);
        }
        if t == F || t == !s {
            return self.and(!s, e);
        }
        if e == T || e == !s {
            return self.or(!s, t);
        }
        if e == F || e == s {
            return self.and(s, t);
        }
        if t == !e {
            return !self.xor(s, t);
        }
        let (s, t, e) = if s.is_neg() { (!s, e, t) } else { (s, t, e) };
        if let Some(&o) = self.table.get(&GateKey::Mux(s, t, e)) {
            return o;
        }
        let o = self.cnf.new_lit();
        self.cnf.add_clause(&[!s, !t, o]);
        self.cnf.add_clause(&[!s, t, !o]);
        self.cnf.add_clause(&[s, !e, o]);
        self.cnf.add_clause(&[s, e, !o]);
        // redundant but helps propagation
        self.cnf.add_clause(&[!t, !e, o]);
        self.cnf.add_clause(&[t, e, !o]);
        self.table.insert(GateKey::Mux(s, t, e), o);
        o
    }

    pub fn and_all(&mut self, lits: &[Lit]) -> Lit {
        lits.iter().fold(T, |acc, &l| self.and(acc, l))
    }

    pub fn or_all(&mut self, lits: &[Lit]) -> Lit {
        lits.iter().fold(F, |acc, &l| self.or(acc, l))
    }

    pub fn const_word(value: u64, width: u32) -> Word {
        (0..width).map(|i| Blaster::constant((value >> i) & 1 == 1)).collect()
    }

    pub fn fresh_word(&mut self, width: u32) -> Word {
        (0..width).map(|_| self.cnf.new_lit()).collect()
    }

    fn add(&mut self, a: &[Lit], b: &[Lit], mut carry: Lit) -> Word {
        let mut out = Vec::with_capacity(a.len());
        for (&x, &y) in a.iter().zip(b) {
            let p = self.xor(x, y);
            out.push(self.xor(p, carry));
            let g = self.and(x, y);
            let c = self.and(p, carry);
            carry = self.or(g, c);
        }
        out
    }

    /// Carry-out of `a + ~b + 1`, i.e. `a >= b` unsigned.
    fn geq(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let mut carry = T;
        for (&x, &y) in a.iter().zip(b) {
            let ny = !y;
            let p = self.xor(x, ny);
            let g = self.and(x, ny);
            let c = self.and(p, carry);
            carry = self.or(g, c);
        }
        carry
    }

    fn eq(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let bits: Vec<Lit> = a.iter().zip(b).map(|(&x, &y)| !self.xor(x, y)).collect();
        self.and_all(&bits)
    }

    fn mul(&mut self, a: &[Lit], b: &[Lit]) -> Word {
        let w = a.len();
        let mut acc = vec![F; w];
        for (i, &bi) in b.iter().enumerate() {
            if bi == F {
                continue;
            }
            let mut row = vec![F; w];
            for j in 0..w - i {
                row[i + j] = self.and(a[j], bi);
            }
            acc = self.add(&acc, &row, F);
        }
        acc
    }

    fn shift(&mut self, a: &[Lit], amount: &[Lit], left: bool) -> Word {
        let w = a.len();
        let mut cur = a.to_vec();
        for (i, &s) in amount.iter().enumerate() {
            if s == F {
                continue;
            }
            let dist = if i < 63 { 1u64 << i } else { u64::MAX };
            let shifted: Word = (0..w)
                .map(|k| {
                    if dist >= w as u64 {
                        F
                    } else if left {
                        if (k as u64) >= dist {
                            cur[k - dist as usize]
                        } else {
                            F
                        }
                    } else if (k as u64) + dist < w as u64 {
                        cur[k + dist as usize]
                    } else {
                        F
                    }
                })
                .collect();
            cur = (0..w).map(|k| self.mux(s, shifted[k], cur[k])).collect();
        }
        cur
    }

    pub fn binop(&mut self, op: BinOp, a: &[Lit], b: &[Lit]) -> Word {
        match op {
            BinOp::And => a.iter().zip(b).map(|(&x, &y)| self.and(x, y)).collect(),
            BinOp::Or => a.iter().zip(b).map(|(&x, &y)| self.or(x, y)).collect(),
            BinOp::Xor => a.iter().zip(b).map(|(&x, &y)| self.xor(x, y)).collect(),
            BinOp::Add => self.add(a, b, F),
            BinOp::Sub => {
                let nb: Word = b.iter().map(|&y| !y).collect();
                self.add(a, &nb, T)
            }
            BinOp::Mul => self.mul(a, b),
            BinOp::Eq => vec![self.eq(a, b)],
            BinOp::Neq => vec![!self.eq(a, b)],
            BinOp::Lt => vec![!self.geq(a, b)],
            BinOp::Shl => self.shift(a, b, true),
            BinOp::Shr => self.shift(a, b, false),
        }
    }

    /// Blasts `e` reading variables from `env`.
    pub fn expr(&mut self, e: &Expr, env: &impl Fn(&str) -> Word) -> Word {
        match e.kind() {
            ExprKind::Const(v) => Blaster::const_word(*v, e.width()),
            ExprKind::Var(n) => env(n),
            ExprKind::Not(a) => self.expr(a, env).into_iter().map(|l| !l).collect(),
            ExprKind::Binary(op, a, b) => {
                let (x, y) = (self.expr(a, env), self.expr(b, env));
                self.binop(*op, &x, &y)
            }
            ExprKind::Mux(c, t, f) => {
                let s = self.expr(c, env)[0];
                let (x, y) = (self.expr(t, env), self.expr(f, env));
                x.iter().zip(&y).map(|(&p, &q)| self.mux(s, p, q)).collect()
            }
            ExprKind::Slice { arg, hi, lo } => self.expr(arg, env)[*lo as usize..=*hi as usize].to_vec(),
            ExprKind::Concat(parts) => {
                let mut out = Vec::with_capacity(e.width() as usize);
                for p in parts.iter().rev() {
                    out.extend(self.expr(p, env));
                }
                out
            }
            ExprKind::Zext(a) => {
                let mut out = self.expr(a, env);
                out.resize(e.width() as usize, F);
                out
            }
        }
    }
}

fn strip(l: Lit) -> Lit {
    if l.is_neg() {
        !l
    } else {
        l
    }
}

/// Literal map for an unrolled design: `frames[t][signal]` is the word of
/// `signal` in cycle `t`, restricted to the cone of `done`.
#[derive(Clone, Debug)]
pub struct Unrolling {
    pub bound: u32,
    pub inputs: BTreeMap<String, Word>,
    pub frames: Vec<BTreeMap<String, Word>>,
    /// `done` per cycle.
    pub done: Vec<Lit>,
    /// `first[t]`: done rises for the first time (ignoring cycle 0) at `t`.
    /// `first[0]` is constant false.
    pub first: Vec<Lit>,
}

impl Unrolling {
    /// Decodes the data-input valuation from a model.
    pub fn input_values(&self, model: &[bool]) -> BTreeMap<String, u64> {
        self.inputs.iter().map(|(n, w)| (n.clone(), decode(w, model))).collect()
    }

    /// Cycle whose `first` literal is true in the model.
    pub fn latency(&self, model: &[bool]) -> Option<u32> {
        (1..self.first.len()).find(|&t| lit_value(self.first[t], model)).map(|t| t as u32)
    }
}

pub fn lit_value(l: Lit, model: &[bool]) -> bool {
    if l == T {
        return true;
    }
    if l == F {
        return false;
    }
    model.get(l.var().index()).copied().unwrap_or(false) != l.is_neg()
}

pub fn decode(w: &[Lit], model: &[bool]) -> u64 {
    w.iter().enumerate().fold(0, |acc, (i, &l)| acc | ((lit_value(l, model) as u64) << i))
}

/// Unrolls `d` for cycles `0..=bound` into `blaster`. Data inputs present
/// in `shared` reuse those literals (for self-composition); the others get
/// fresh variables that stay constant across frames.
pub fn unroll(
    d: &Design,
    blaster: &mut Blaster,
    bound: u32,
    shared: &BTreeMap<String, Word>,
    clause_budget: Option<usize>,
) -> Result<Unrolling, BmcError> {
    if bound == 0 {
        return Err(BmcError::ZeroBound);
    }
    let diags = validate_design(d);
    if !diags.is_empty() {
        return Err(BmcError::InvalidDesign(diags));
    }
    let done_name = d.annot.done.as_str();
    let cone = cone_of_influence(d, done_name).expect("done is declared");
    let nets: Vec<&crate::ir::NetDef> = comb_topo_order(d)
        .expect("validated")
        .into_iter()
        .filter(|n| cone.contains(n))
        .map(|n| d.net(&n).expect("net"))
        .collect();
    let regs: Vec<&crate::ir::RegDef> = d.regs.iter().filter(|r| cone.contains(&r.name)).collect();

    let mut inputs = BTreeMap::new();
    for p in d.data_inputs() {
        let w = match shared.get(&p.name) {
            Some(w) => w.clone(),
            None => blaster.fresh_word(p.width),
        };
        inputs.insert(p.name.clone(), w);
    }

    let mut frames: Vec<BTreeMap<String, Word>> = Vec::with_capacity(bound as usize + 1);
    let mut state: BTreeMap<String, Word> =
        regs.iter().map(|r| (r.name.clone(), Blaster::const_word(r.reset, r.width))).collect();
    let mut done = Vec::new();
    let mut first = vec![F];
    let mut none_yet = T;

    for t in 0..=bound {
        let mut env = state.clone();
        for (n, w) in &inputs {
            if cone.contains(n) {
                env.insert(n.clone(), w.clone());
            }
        }
        env.insert(d.annot.start.clone(), vec![Blaster::constant(t == 0)]);
        if let Some(r) = d.reset_port() {
            env.insert(r.name.clone(), vec![F]);
        }
        if let Some(c) = d.clock() {
            env.insert(c.name.clone(), vec![F]);
        }
        for n in &nets {
            let w = {
                let look = |s: &str| env[s].clone();
                blaster.expr(&n.expr, &look)
            };
            env.insert(n.name.clone(), w);
        }
        let dt = env[done_name][0];
        done.push(dt);
        if t >= 1 {
            let f = blaster.and(dt, none_yet);
            first.push(f);
            none_yet = blaster.and(none_yet, !dt);
        }
        if t < bound {
            let mut next = BTreeMap::new();
            for r in &regs {
                let w = {
                    let look = |s: &str| env[s].clone();
                    blaster.expr(&d.next[&r.name], &look)
                };
                next.insert(r.name.clone(), w);
            }
            state = next;
        }
        frames.push(env);
        if let Some(budget) = clause_budget {
            if blaster.cnf.num_clauses() > budget {
                return Err(BmcError::CapacityExceeded { budget, cycle: t });
            }
        }
    }
    Ok(Unrolling { bound, inputs, frames, done, first })
}

/// Standalone formula for `d` up to `bound`, with the target clause
/// "done rises for the first time at some cycle in 1..=bound" and the
/// blocked latencies as assumption literals (negated first-done literals).
#[derive(Clone, Debug)]
pub struct UnrolledFormula {
    pub cnf: Cnf,
    pub unrolling: Unrolling,
    pub assumptions: Vec<Lit>,
}

pub fn unroll_and_blast(
    d: &Design,
    bound: u32,
    blocked: &[u32],
    clause_budget: Option<usize>,
) -> Result<UnrolledFormula, BmcError> {
    let mut b = Blaster::new();
    let u = unroll(d, &mut b, bound, &BTreeMap::new(), clause_budget)?;
    let target: Vec<Lit> = u.first[1..].to_vec();
    b.cnf.add_clause(&target);
    let assumptions = blocked
        .iter()
        .filter_map(|&x| u.first.get(x as usize).map(|&l| !l))
        .collect();
    Ok(UnrolledFormula { cnf: b.cnf, unrolling: u, assumptions })
}
