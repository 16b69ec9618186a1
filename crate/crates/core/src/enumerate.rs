//! Timing-class enumeration by bounded model checking.
//!
//! Each query asks for a trace whose first `done` (after the start cycle)
//! lands on a latency not yet found. Found latencies are blocked and the
//! query repeats until it is unsatisfiable, which proves the class set
//! complete up to the bound. Two encodings are available:
//!
//! * `Property`: the design is unrolled once; blocking adds the unit clause
//!   "done does not first rise at cycle X" to a persistent solver.
//! * `Instrumented`: the design is extended with a cycle counter, a
//!   first-done latch and a comparator excluding the blocked latencies, and
//!   the extended design is unrolled afresh for every query.
//!
//! Every satisfying assignment is decoded into a stimulus and replayed on
//! the simulator before it is reported.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bmc::{lit_value, unroll, unroll_and_blast, BmcError, Blaster, Unrolling, Word};
use crate::ir::{mask, BinOp, Design, Expr, NetDef, Port, RegDef};
use crate::sat::{Cnf, ExternalSolver, Limits, Lit, SatError, SolveResult, Solver};
use crate::sim::{default_signals, SimError, Simulator, Stimulus, TraceWitness, Valuation};

pub type BlockedSet = BTreeSet<u32>;

/// Signal names introduced by [`build_modified_duv`] (before de-duplication).
pub const HIT_NAME: &str = "pascal_hit";
pub const COUNTER_NAME: &str = "pascal_cnt";
pub const SEEN_NAME: &str = "pascal_seen";
pub const UNION_NAME: &str = "pascal_union";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineMode {
    #[default]
    Property,
    Instrumented,
}

#[derive(Clone, Debug, Default)]
pub enum Backend {
    #[default]
    BuiltIn,
    External(ExternalSolver),
}

#[derive(Clone, Debug)]
pub struct EnumOptions {
    pub bound: u32,
    pub mode: EngineMode,
    pub backend: Backend,
    /// Per-query wall-clock limit; exceeding it makes the result inconclusive.
    pub query_timeout: Option<Duration>,
    pub conflict_limit: Option<u64>,
    pub clause_budget: Option<usize>,
    /// Public inputs held at fixed values instead of left free.
    pub pinned: Valuation,
}

impl EnumOptions {
    pub fn new(bound: u32) -> EnumOptions {
        EnumOptions {
            bound,
            mode: EngineMode::Property,
            backend: Backend::BuiltIn,
            query_timeout: None,
            conflict_limit: None,
            clause_budget: None,
            pinned: Valuation::new(),
        }
    }

    pub fn with_mode(mut self, mode: EngineMode) -> EnumOptions {
        self.mode = mode;
        self
    }

    pub fn with_pinned(mut self, pinned: Valuation) -> EnumOptions {
        self.pinned = pinned;
        self
    }
}

#[derive(Debug, Error)]
pub enum EnumError {
    #[error("blocked latency {latency} exceeds the bound {bound}")]
    BoundTooSmall { latency: u32, bound: u32 },
    #[error("`{0}` is not a public data input")]
    PinNotPublic(String),
    #[error("solver model claims latency {claimed:?} but replay gives {replayed:?}")]
    ReplayMismatch { claimed: Option<u32>, replayed: Option<u32>, stimulus: Stimulus },
    #[error(transparent)]
    Bmc(#[from] BmcError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Sat(#[from] SatError),
}

/// Outcome of a single witness query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Query {
    Witness(TraceWitness),
    /// No trace with an unblocked latency exists up to the bound.
    Exhausted,
    /// The solver hit a resource limit.
    Inconclusive,
}

/// Bits needed to count `0..=max`.
pub fn counter_width(max: u32) -> u32 {
    (u32::BITS - max.leading_zeros()).max(1)
}

fn fresh_name(d: &Design, base: &str) -> String {
    let taken: BTreeSet<&str> = d.signal_names().into_iter().collect();
    if !taken.contains(base) {
        return base.to_string();
    }
    (1..).map(|i| format!("{base}_{i}")).find(|n| !taken.contains(n.as_str())).expect("unbounded")
}

/// The design plus a cycle counter (1 in the cycle after start), a latch
/// recording whether `done` already rose, and an output that is high
/// exactly when `done` rises for the first time at a latency outside
/// `blocked`. That output becomes the design's `done`.
pub fn build_modified_duv(d: &Design, blocked: &BlockedSet, bound: u32) -> Result<Design, EnumError> {
    if let Some(&x) = blocked.iter().find(|&&x| x > bound) {
        return Err(EnumError::BoundTooSmall { latency: x, bound });
    }
    let w = counter_width(bound);
    let mut m = d.clone();
    let cnt = fresh_name(&m, COUNTER_NAME);
    m.regs.push(RegDef { name: cnt.clone(), width: w, reset: 0 });
    let seen = fresh_name(&m, SEEN_NAME);
    m.regs.push(RegDef { name: seen.clone(), width: 1, reset: 0 });
    let union = fresh_name(&m, UNION_NAME);
    m.nets.push(NetDef { name: union.clone(), width: 1, expr: Expr::bit(true) });
    let hit = fresh_name(&m, HIT_NAME);

    let v = |n: &str, w: u32| Expr::var(n, w).expect("width in range");
    let k = |x: u64, w: u32| Expr::constant(x, w).expect("fits");
    let b = |op, x, y| Expr::binary(op, x, y).expect("widths agree");
    let start = v(&d.annot.start, 1);
    let done = v(&d.annot.done, 1);
    let running = b(BinOp::Neq, v(&cnt, w), k(0, w));

    let union_expr = blocked
        .iter()
        .map(|&x| b(BinOp::Neq, v(&cnt, w), k(x as u64, w)))
        .reduce(|acc, e| b(BinOp::And, acc, e))
        .unwrap_or_else(|| Expr::bit(true));
    m.nets.last_mut().expect("just pushed").expr = union_expr;

    let hit_expr = b(
        BinOp::And,
        b(BinOp::And, done.clone(), Expr::not(v(&seen, 1))),
        b(BinOp::And, running.clone(), v(&union, 1)),
    );
    m.nets.push(NetDef { name: hit.clone(), width: 1, expr: hit_expr });
    m.ports.push(Port::output(hit.clone(), 1));

    let advance = b(BinOp::And, running.clone(), b(BinOp::Neq, v(&cnt, w), k(mask(w), w)));
    let cnt_next = Expr::mux(
        start.clone(),
        k(1, w),
        Expr::mux(advance, b(BinOp::Add, v(&cnt, w), k(1, w)), v(&cnt, w)).expect("mux"),
    )
    .expect("mux");
    m.next.insert(cnt, cnt_next);
    let seen_next = Expr::mux(
        start,
        Expr::bit(false),
        b(BinOp::Or, v(&seen, 1), b(BinOp::And, done, running)),
    )
    .expect("mux");
    m.next.insert(seen, seen_next);

    m.annot.observable.insert(hit.clone());
    m.annot.done = hit;
    Ok(m)
}

fn check_pins(d: &Design, pinned: &Valuation) -> Result<(), EnumError> {
    for (name, &value) in pinned {
        let Some(p) = d.public_inputs().find(|p| &p.name == name) else {
            return Err(EnumError::PinNotPublic(name.clone()));
        };
        if value & !mask(p.width) != 0 {
            return Err(SimError::StimulusWidthMismatch { port: name.clone(), value, width: p.width }.into());
        }
    }
    Ok(())
}

fn pin_clauses(cnf: &mut Cnf, inputs: &BTreeMap<String, Word>, pinned: &Valuation) {
    for (name, &value) in pinned {
        if let Some(w) = inputs.get(name) {
            for (i, &l) in w.iter().enumerate() {
                cnf.add_clause(&[if (value >> i) & 1 == 1 { l } else { !l }]);
            }
        }
    }
}

fn stimulus_from(d: &Design, u: &Unrolling, model: &[bool], bound: u32) -> Stimulus {
    let mut public = Valuation::new();
    let mut secret = Valuation::new();
    for (name, value) in u.input_values(model) {
        if d.annot.secret.contains(&name) {
            secret.insert(name, value);
        } else {
            public.insert(name, value);
        }
    }
    Stimulus::new(public, secret, bound)
}

/// Replays a decoded stimulus; the simulator must agree with the solver.
fn replay(d: &Design, stim: Stimulus, claimed: Option<u32>) -> Result<TraceWitness, EnumError> {
    let w = Simulator::new(d)?.run_recording(&stim, &default_signals(d))?;
    if w.latency != claimed {
        return Err(EnumError::ReplayMismatch { claimed, replayed: w.latency, stimulus: stim });
    }
    Ok(w)
}

struct Backing {
    solver: Option<Solver>,
    cnf: Cnf,
}

impl Backing {
    fn new(cnf: Cnf, backend: &Backend) -> Backing {
        match backend {
            Backend::BuiltIn => Backing { solver: Some(Solver::from_cnf(&cnf)), cnf },
            Backend::External(_) => Backing { solver: None, cnf },
        }
    }

    /// Blocks a literal for all later queries.
    fn add_unit(&mut self, l: Lit) {
        self.cnf.add_clause(&[l]);
        if let Some(s) = &mut self.solver {
            s.add_clause(&[l]);
        }
    }

    fn solve(&mut self, opts: &EnumOptions) -> Result<(SolveResult, Vec<bool>), EnumError> {
        match (&mut self.solver, &opts.backend) {
            (Some(s), _) => {
                let limits = Limits {
                    conflicts: opts.conflict_limit.map(|c| s.stats.conflicts + c),
                    deadline: opts.query_timeout.map(|t| Instant::now() + t),
                };
                let r = s.solve_limited(&[], &limits);
                Ok((r, s.model().to_vec()))
            }
            (None, Backend::External(ext)) => {
                let mut ext = ext.clone();
                if opts.query_timeout.is_some() {
                    ext.timeout = opts.query_timeout;
                }
                Ok(ext.solve(&self.cnf, &[])?)
            }
            (None, Backend::BuiltIn) => unreachable!("built-in backend always has a solver"),
        }
    }
}

/// Incremental property-mode session: one unrolling, one solver.
struct PropertySession {
    unrolling: Unrolling,
    backing: Backing,
}

impl PropertySession {
    fn new(d: &Design, opts: &EnumOptions) -> Result<PropertySession, EnumError> {
        let mut b = Blaster::new();
        let u = unroll(d, &mut b, opts.bound, &BTreeMap::new(), opts.clause_budget)?;
        b.cnf.add_clause(&u.first[1..]);
        pin_clauses(&mut b.cnf, &u.inputs, &opts.pinned);
        Ok(PropertySession { backing: Backing::new(b.cnf, &opts.backend), unrolling: u })
    }

    fn block(&mut self, latency: u32) {
        let l = self.unrolling.first[latency as usize];
        self.backing.add_unit(!l);
    }

    fn query(&mut self, d: &Design, opts: &EnumOptions) -> Result<Query, EnumError> {
        let (r, model) = self.backing.solve(opts)?;
        match r {
            SolveResult::Unsat => Ok(Query::Exhausted),
            SolveResult::Unknown => Ok(Query::Inconclusive),
            SolveResult::Sat => {
                let claimed = self.unrolling.latency(&model);
                let stim = stimulus_from(d, &self.unrolling, &model, opts.bound);
                Ok(Query::Witness(replay(d, stim, claimed)?))
            }
        }
    }
}

fn instrumented_query(d: &Design, blocked: &BlockedSet, opts: &EnumOptions) -> Result<Query, EnumError> {
    let m = build_modified_duv(d, blocked, opts.bound)?;
    let mut f = unroll_and_blast(&m, opts.bound, &[], opts.clause_budget)?;
    pin_clauses(&mut f.cnf, &f.unrolling.inputs, &opts.pinned);
    let mut backing = Backing::new(f.cnf, &opts.backend);
    let (r, model) = backing.solve(opts)?;
    match r {
        SolveResult::Unsat => Ok(Query::Exhausted),
        SolveResult::Unknown => Ok(Query::Inconclusive),
        SolveResult::Sat => {
            let claimed = f.unrolling.latency(&model);
            let stim = stimulus_from(d, &f.unrolling, &model, opts.bound);
            let w = replay(d, stim, claimed)?;
            if w.latency.is_some_and(|l| blocked.contains(&l)) {
                return Err(EnumError::ReplayMismatch { claimed, replayed: w.latency, stimulus: w.stimulus });
            }
            Ok(Query::Witness(w))
        }
    }
}

/// One query: a replayed trace completing at a latency outside `blocked`,
/// or proof that none exists up to the bound.
pub fn find_witness(d: &Design, blocked: &BlockedSet, opts: &EnumOptions) -> Result<Query, EnumError> {
    check_pins(d, &opts.pinned)?;
    if let Some(&x) = blocked.iter().find(|&&x| x > opts.bound) {
        return Err(EnumError::BoundTooSmall { latency: x, bound: opts.bound });
    }
    match opts.mode {
        EngineMode::Instrumented => instrumented_query(d, blocked, opts),
        EngineMode::Property => {
            let mut s = PropertySession::new(d, opts)?;
            for &x in blocked {
                s.block(x);
            }
            s.query(d, opts)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineId {
    Bmc,
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingClass {
    pub latency: u32,
    pub witness: TraceWitness,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IterationOutcome {
    Found,
    Exhausted,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub index: usize,
    pub outcome: IterationOutcome,
    pub latency: Option<u32>,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingClassReport {
    /// In discovery order.
    pub classes: Vec<TimingClass>,
    pub t_max: Option<u32>,
    pub bound: u32,
    pub engine: EngineId,
    pub mode: Option<EngineMode>,
    /// The last query was unsatisfiable: the class set is complete up to the bound.
    pub exhausted: bool,
    /// Exhausted without a single completing trace.
    pub never_completes: bool,
    pub iterations: Vec<Iteration>,
}

impl TimingClassReport {
    pub fn latencies(&self) -> BTreeSet<u32> {
        self.classes.iter().map(|c| c.latency).collect()
    }

    pub fn inconclusive(&self) -> bool {
        !self.exhausted
    }
}

/// The blocking loop. Terminates after at most `bound + 1` queries since
/// every found latency lies in `1..=bound` and is blocked afterwards.
pub fn enumerate_classes(d: &Design, opts: &EnumOptions) -> Result<TimingClassReport, EnumError> {
    check_pins(d, &opts.pinned)?;
    let mut blocked = BlockedSet::new();
    let mut classes = Vec::new();
    let mut iterations = Vec::new();
    let mut session = match opts.mode {
        EngineMode::Property => Some(PropertySession::new(d, opts)?),
        EngineMode::Instrumented => None,
    };
    let exhausted = loop {
        let t0 = Instant::now();
        let q = match &mut session {
            Some(s) => s.query(d, opts)?,
            None => instrumented_query(d, &blocked, opts)?,
        };
        let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        let index = iterations.len();
        match q {
            Query::Witness(w) => {
                let lat = w.latency.expect("replayed witnesses complete");
                log::info!("iteration {index}: latency {lat} ({wall_ms:.1} ms)");
                assert!(blocked.insert(lat), "latency {lat} found twice");
                if let Some(s) = &mut session {
                    s.block(lat);
                }
                iterations.push(Iteration { index, outcome: IterationOutcome::Found, latency: Some(lat), wall_ms });
                classes.push(TimingClass { latency: lat, witness: w });
                assert!(iterations.len() <= opts.bound as usize, "more classes than cycles");
            }
            Query::Exhausted => {
                log::info!("iteration {index}: exhausted ({wall_ms:.1} ms)");
                iterations.push(Iteration { index, outcome: IterationOutcome::Exhausted, latency: None, wall_ms });
                break true;
            }
            Query::Inconclusive => {
                log::warn!("iteration {index}: solver limit reached");
                iterations.push(Iteration {
                    index,
                    outcome: IterationOutcome::Inconclusive,
                    latency: None,
                    wall_ms,
                });
                break false;
            }
        }
    };
    Ok(TimingClassReport {
        t_max: classes.iter().map(|c| c.latency).max(),
        never_completes: exhausted && classes.is_empty(),
        classes,
        bound: opts.bound,
        engine: EngineId::Bmc,
        mode: Some(opts.mode),
        exhausted,
        iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Noninterference {
    /// No pair of runs with equal public inputs completes at different
    /// latencies within the bound.
    Secure { bound: u32 },
    Leak { a: Box<TraceWitness>, b: Box<TraceWitness> },
    Inconclusive { bound: u32 },
}

impl Noninterference {
    pub fn is_secure(&self) -> bool {
        matches!(self, Noninterference::Secure { .. })
    }
}

/// Self-composition: two copies of `d` share their public input literals;
/// the query asks for both to complete, at different cycles.
pub fn check_noninterference(d: &Design, opts: &EnumOptions) -> Result<Noninterference, EnumError> {
    check_pins(d, &opts.pinned)?;
    let mut b = Blaster::new();
    let ua = unroll(d, &mut b, opts.bound, &BTreeMap::new(), opts.clause_budget)?;
    let shared: BTreeMap<String, Word> = d
        .public_inputs()
        .filter_map(|p| ua.inputs.get(&p.name).map(|w| (p.name.clone(), w.clone())))
        .collect();
    let ub = unroll(d, &mut b, opts.bound, &shared, opts.clause_budget)?;
    b.cnf.add_clause(&ua.first[1..]);
    b.cnf.add_clause(&ub.first[1..]);
    for t in 1..ua.first.len() {
        b.cnf.add_clause(&[!ua.first[t], !ub.first[t]]);
    }
    pin_clauses(&mut b.cnf, &ua.inputs, &opts.pinned);
    let mut backing = Backing::new(b.cnf, &opts.backend);
    let (r, model) = backing.solve(opts)?;
    match r {
        SolveResult::Unsat => Ok(Noninterference::Secure { bound: opts.bound }),
        SolveResult::Unknown => Ok(Noninterference::Inconclusive { bound: opts.bound }),
        SolveResult::Sat => {
            let wa = replay(d, stimulus_from(d, &ua, &model, opts.bound), ua.latency(&model))?;
            let wb = replay(d, stimulus_from(d, &ub, &model, opts.bound), ub.latency(&model))?;
            debug_assert!(ua.first.iter().chain(&ub.first).any(|&l| lit_value(l, &model)));
            debug_assert_eq!(wa.stimulus.public, wb.stimulus.public);
            Ok(Noninterference::Leak { a: Box::new(wa), b: Box::new(wb) })
        }
    }
}
