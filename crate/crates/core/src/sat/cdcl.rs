use std::time::Instant;

use super::{Cnf, Lit, SolveResult, Var};

const NO_REASON: u32 = u32::MAX;
const RESTART_UNIT: u64 = 100;
const VAR_DECAY: f64 = 0.95;

#[derive(Clone, Copy, Debug, Default)]
pub struct Limits {
    pub conflicts: Option<u64>,
    pub deadline: Option<Instant>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SolverStats {
    pub solves: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub restarts: u64,
    pub reductions: u64,
}

struct Clause {
    lits: Vec<Lit>,
    lbd: u32,
    deleted: bool,
}

#[derive(Clone, Copy)]
struct Watcher {
    cref: u32,
    blocker: Lit,
}

/// Max-heap of variables keyed by activity.
#[derive(Default)]
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<i32>,
}

impl VarHeap {
    fn grow(&mut self, n: usize) {
        self.pos.resize(n, -1);
    }

    fn contains(&self, v: u32) -> bool {
        self.pos[v as usize] >= 0
    }

    fn insert(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.pos[v as usize] = self.heap.len() as i32;
        self.heap.push(v);
        self.up(self.heap.len() - 1, act);
    }

    fn bumped(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            self.up(self.pos[v as usize] as usize, act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<u32> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().expect("nonempty");
        self.pos[top as usize] = -1;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = 0;
            self.down(0, act);
        }
        Some(top)
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.heap[parent];
            if act[p as usize] >= act[v as usize] {
                break;
            }
            self.heap[i] = p;
            self.pos[p as usize] = i as i32;
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i as i32;
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        loop {
            let l = 2 * i + 1;
            if l >= self.heap.len() {
                break;
            }
            let r = l + 1;
            let child = if r < self.heap.len() && act[self.heap[r] as usize] > act[self.heap[l] as usize] {
                r
            } else {
                l
            };
            let c = self.heap[child];
            if act[c as usize] <= act[v as usize] {
                break;
            }
            self.heap[i] = c;
            self.pos[c as usize] = i as i32;
            i = child;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i as i32;
    }
}

fn luby(mut x: u64) -> u64 {
    let (mut size, mut seq) = (1u64, 0u32);
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    1 << seq
}

enum Status {
    Sat,
    Unsat,
    Restart,
    Unknown,
}

/// Incremental CDCL solver: two watched literals with blockers, VSIDS,
/// first-UIP learning with local minimization, phase saving, Luby restarts,
/// glue-based learnt clause reduction and solving under assumptions.
pub struct Solver {
    clauses: Vec<Clause>,
    learnts: Vec<u32>,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<u32>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    heap: VarHeap,
    phase: Vec<bool>,
    seen: Vec<bool>,
    ok: bool,
    model: Vec<bool>,
    next_reduce: u64,
    pub stats: SolverStats,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new()
    }
}

impl Solver {
    pub fn new() -> Solver {
        Solver {
            clauses: Vec::new(),
            learnts: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: Vec::new(),
            var_inc: 1.0,
            heap: VarHeap::default(),
            phase: Vec::new(),
            seen: Vec::new(),
            ok: true,
            model: Vec::new(),
            next_reduce: 2000,
            stats: SolverStats::default(),
        }
    }

    pub fn from_cnf(cnf: &Cnf) -> Solver {
        let mut s = Solver::new();
        s.ensure_vars(cnf.num_vars());
        for c in cnf.clauses() {
            s.add_clause(c);
        }
        s
    }

    pub fn num_vars(&self) -> u32 {
        self.assigns.len() as u32
    }

    pub fn ensure_vars(&mut self, n: u32) {
        let n = n as usize;
        if n <= self.assigns.len() {
            return;
        }
        let old = self.assigns.len();
        self.assigns.resize(n, 0);
        self.level.resize(n, 0);
        self.reason.resize(n, NO_REASON);
        self.activity.resize(n, 0.0);
        self.phase.resize(n, false);
        self.seen.resize(n, false);
        self.watches.resize(2 * n, Vec::new());
        self.heap.grow(n);
        for v in old..n {
            self.heap.insert(v as u32, &self.activity);
        }
    }

    pub fn new_var(&mut self) -> Var {
        let v = self.num_vars();
        self.ensure_vars(v + 1);
        Var(v)
    }

    fn lit_value(&self, l: Lit) -> i8 {
        let a = self.assigns[l.var().index()];
        if l.is_neg() {
            -a
        } else {
            a
        }
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    /// False once the clause set is known unsatisfiable without assumptions.
    pub fn is_ok(&self) -> bool {
        self.ok
    }

    /// Adds a clause at decision level 0. Returns false if the formula
    /// became trivially unsatisfiable.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        debug_assert_eq!(self.decision_level(), 0);
        if !self.ok {
            return false;
        }
        if let Some(max) = lits.iter().map(|l| l.var().0).max() {
            self.ensure_vars(max + 1);
        }
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort();
        c.dedup();
        for w in c.windows(2) {
            if w[0] == !w[1] {
                return true;
            }
        }
        let mut kept = Vec::with_capacity(c.len());
        for l in c {
            match self.lit_value(l) {
                1 => return true,
                -1 => {}
                _ => kept.push(l),
            }
        }
        match kept.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.enqueue(kept[0], NO_REASON);
                if self.propagate().is_some() {
                    self.ok = false;
                }
                self.ok
            }
            _ => {
                self.attach(kept, false, 0);
                true
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool, lbd: u32) -> u32 {
        let cref = self.clauses.len() as u32;
        self.watches[lits[0].index()].push(Watcher { cref, blocker: lits[1] });
        self.watches[lits[1].index()].push(Watcher { cref, blocker: lits[0] });
        self.clauses.push(Clause { lits, lbd, deleted: false });
        if learnt {
            self.learnts.push(cref);
        }
        cref
    }

    fn enqueue(&mut self, l: Lit, reason: u32) {
        let v = l.var().index();
        self.assigns[v] = if l.is_neg() { -1 } else { 1 };
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Unit propagation; returns a conflicting clause if one arises.
    fn propagate(&mut self) -> Option<u32> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.index()]);
            let (mut i, mut j) = (0, 0);
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.lit_value(w.blocker) == 1 {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref as usize;
                if self.clauses[cref].deleted {
                    continue;
                }
                {
                    let lits = &mut self.clauses[cref].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.clauses[cref].lits[0];
                let nw = Watcher { cref: w.cref, blocker: first };
                if first != w.blocker && self.lit_value(first) == 1 {
                    ws[j] = nw;
                    j += 1;
                    continue;
                }
                let len = self.clauses[cref].lits.len();
                let mut moved = false;
                for k in 2..len {
                    let lk = self.clauses[cref].lits[k];
                    if self.lit_value(lk) != -1 {
                        self.clauses[cref].lits.swap(1, k);
                        self.watches[lk.index()].push(nw);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = nw;
                j += 1;
                if self.lit_value(first) == -1 {
                    conflict = Some(w.cref);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        i += 1;
                        j += 1;
                    }
                } else {
                    self.enqueue(first, w.cref);
                }
            }
            ws.truncate(j);
            self.watches[false_lit.index()] = ws;
            if conflict.is_some() {
                break;
            }
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(v as u32, &self.activity);
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first, highest remaining level second), backjump level, glue.
    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, usize, u32) {
        let mut learnt = vec![Lit(0)];
        let mut path = 0;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        let current = self.decision_level() as u32;
        loop {
            let start = if p.is_some() { 1 } else { 0 };
            let n = self.clauses[confl as usize].lits.len();
            for k in start..n {
                let q = self.clauses[confl as usize].lits[k];
                let v = q.var().index();
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().index()] {
                    break;
                }
            }
            let lit = self.trail[index];
            let v = lit.var().index();
            self.seen[v] = false;
            path -= 1;
            p = Some(lit);
            if path == 0 {
                break;
            }
            confl = self.reason[v];
        }
        learnt[0] = !p.expect("conflict at level > 0 has a UIP");

        // Drop literals implied by other literals of the clause.
        let mut kept = vec![learnt[0]];
        for &q in &learnt[1..] {
            let r = self.reason[q.var().index()];
            let redundant = r != NO_REASON
                && self.clauses[r as usize].lits[1..].iter().all(|x| {
                    let xv = x.var().index();
                    self.seen[xv] || self.level[xv] == 0
                });
            if !redundant {
                kept.push(q);
            }
        }
        for q in &learnt[1..] {
            self.seen[q.var().index()] = false;
        }
        let mut learnt = kept;

        let bt = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for k in 2..learnt.len() {
                if self.level[learnt[k].var().index()] > self.level[learnt[max_i].var().index()] {
                    max_i = k;
                }
            }
            learnt.swap(1, max_i);
            self.level[learnt[1].var().index()] as usize
        };
        let mut levels: Vec<u32> = learnt.iter().map(|l| self.level[l.var().index()]).collect();
        levels.sort_unstable();
        levels.dedup();
        (learnt, bt, levels.len() as u32)
    }

    fn cancel_until(&mut self, lvl: usize) {
        if self.decision_level() <= lvl {
            return;
        }
        let stop = self.trail_lim[lvl];
        for k in (stop..self.trail.len()).rev() {
            let l = self.trail[k];
            let v = l.var().index();
            self.assigns[v] = 0;
            self.reason[v] = NO_REASON;
            self.phase[v] = !l.is_neg();
            self.heap.insert(v as u32, &self.activity);
        }
        self.trail.truncate(stop);
        self.trail_lim.truncate(lvl);
        self.qhead = stop;
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.assigns[v as usize] == 0 {
                return Some(Lit::new(Var(v), !self.phase[v as usize]));
            }
        }
        None
    }

    fn locked(&self, cref: u32) -> bool {
        let l0 = self.clauses[cref as usize].lits[0];
        self.reason[l0.var().index()] == cref && self.lit_value(l0) == 1
    }

    fn reduce_db(&mut self) {
        self.stats.reductions += 1;
        let mut cands: Vec<u32> = self
            .learnts
            .iter()
            .copied()
            .filter(|&c| self.clauses[c as usize].lbd > 2 && !self.locked(c))
            .collect();
        cands.sort_by_key(|&c| (std::cmp::Reverse(self.clauses[c as usize].lbd), c));
        let drop = cands.len() / 2;
        for &c in &cands[..drop] {
            let cl = &mut self.clauses[c as usize];
            cl.deleted = true;
            cl.lits = Vec::new();
        }
        self.learnts.retain(|&c| !self.clauses[c as usize].deleted);
        let clauses = &self.clauses;
        for ws in &mut self.watches {
            ws.retain(|w| !clauses[w.cref as usize].deleted);
        }
    }

    fn search(&mut self, budget: u64, assumptions: &[Lit], limits: &Limits) -> Status {
        let mut conflicts = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                conflicts += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Status::Unsat;
                }
                let (learnt, bt, lbd) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], NO_REASON);
                } else {
                    let l0 = learnt[0];
                    let cref = self.attach(learnt, true, lbd);
                    self.enqueue(l0, cref);
                }
                self.var_inc /= VAR_DECAY;
                if limits.conflicts.is_some_and(|m| self.stats.conflicts >= m)
                    || (self.stats.conflicts.is_multiple_of(64) && limits.deadline.is_some_and(|d| Instant::now() >= d))
                {
                    return Status::Unknown;
                }
            } else {
                if conflicts >= budget {
                    return Status::Restart;
                }
                if self.stats.conflicts >= self.next_reduce {
                    self.next_reduce = self.stats.conflicts + 2000 + 300 * self.stats.reductions;
                    self.reduce_db();
                }
                let mut next = None;
                while self.decision_level() < assumptions.len() {
                    let a = assumptions[self.decision_level()];
                    match self.lit_value(a) {
                        1 => self.trail_lim.push(self.trail.len()),
                        -1 => return Status::Unsat,
                        _ => {
                            next = Some(a);
                            break;
                        }
                    }
                }
                if next.is_none() {
                    self.stats.decisions += 1;
                    next = self.pick_branch();
                }
                let Some(l) = next else {
                    return Status::Sat;
                };
                self.trail_lim.push(self.trail.len());
                self.enqueue(l, NO_REASON);
            }
        }
    }

    pub fn solve(&mut self, assumptions: &[Lit]) -> SolveResult {
        self.solve_limited(assumptions, &Limits::default())
    }

    pub fn solve_limited(&mut self, assumptions: &[Lit], limits: &Limits) -> SolveResult {
        self.stats.solves += 1;
        self.model.clear();
        if !self.ok {
            return SolveResult::Unsat;
        }
        if let Some(max) = assumptions.iter().map(|l| l.var().0).max() {
            self.ensure_vars(max + 1);
        }
        let mut round = 0;
        let result = loop {
            match self.search(luby(round) * RESTART_UNIT, assumptions, limits) {
                Status::Sat => {
                    self.model = self.assigns.iter().map(|&a| a == 1).collect();
                    break SolveResult::Sat;
                }
                Status::Unsat => break SolveResult::Unsat,
                Status::Unknown => break SolveResult::Unknown,
                Status::Restart => {
                    self.stats.restarts += 1;
                    round += 1;
                    self.cancel_until(0);
                    if limits.deadline.is_some_and(|d| Instant::now() >= d) {
                        break SolveResult::Unknown;
                    }
                }
            }
        };
        self.cancel_until(0);
        result
    }

    /// Assignment of the last satisfiable call.
    pub fn model(&self) -> &[bool] {
        &self.model
    }

    pub fn model_value(&self, l: Lit) -> bool {
        self.model.get(l.var().index()).copied().unwrap_or(false) != l.is_neg()
    }
}
