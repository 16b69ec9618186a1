//! Propositional satisfiability: literals, CNF containers, a conflict-driven
//! clause-learning solver, DIMACS I/O and an external-solver adapter.

mod cdcl;
mod dimacs;
mod external;

use std::fmt;
use std::ops::Not;

pub use cdcl::{Limits, Solver, SolverStats};
pub use dimacs::{parse_dimacs, parse_solver_output, write_dimacs};
pub use external::ExternalSolver;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// `var << 1 | negated`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(v: Var, negated: bool) -> Lit {
        Lit(v.0 << 1 | negated as u32)
    }

    pub fn pos(v: Var) -> Lit {
        Lit::new(v, false)
    }

    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    pub fn is_neg(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// DIMACS numbering is 1-based.
    pub fn to_dimacs(self) -> i64 {
        let n = self.var().0 as i64 + 1;
        if self.is_neg() {
            -n
        } else {
            n
        }
    }

    pub fn from_dimacs(x: i64) -> Option<Lit> {
        if x == 0 || x.unsigned_abs() > u32::MAX as u64 / 2 {
            return None;
        }
        Some(Lit::new(Var(x.unsigned_abs() as u32 - 1), x < 0))
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveResult {
    Sat,
    Unsat,
    /// A resource limit was hit before a verdict.
    Unknown,
}

#[derive(Debug, Error)]
pub enum SatError {
    #[error("DIMACS line {line}: {msg}")]
    Dimacs { line: usize, msg: String },
    #[error("external solver `{cmd}`: {msg}")]
    External { cmd: String, msg: String },
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Growable clause set. Variable 0 is reserved as constant true.
#[derive(Clone, Debug)]
pub struct Cnf {
    num_vars: u32,
    clauses: Vec<Vec<Lit>>,
}

impl Default for Cnf {
    fn default() -> Self {
        Cnf::new()
    }
}

impl Cnf {
    pub fn new() -> Cnf {
        let mut c = Cnf { num_vars: 1, clauses: Vec::new() };
        c.clauses.push(vec![Cnf::TRUE]);
        c
    }

    /// Formula without the reserved constant, as read from a DIMACS file.
    pub fn raw(num_vars: u32) -> Cnf {
        Cnf { num_vars, clauses: Vec::new() }
    }

    pub const TRUE: Lit = Lit(0);
    pub const FALSE: Lit = Lit(1);

    pub fn new_var(&mut self) -> Var {
        self.num_vars += 1;
        Var(self.num_vars - 1)
    }

    pub fn new_lit(&mut self) -> Lit {
        Lit::pos(self.new_var())
    }

    pub fn add_clause(&mut self, lits: &[Lit]) {
        for l in lits {
            if l.var().0 >= self.num_vars {
                self.num_vars = l.var().0 + 1;
            }
        }
        self.clauses.push(lits.to_vec());
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Evaluates every clause under a full assignment.
    pub fn satisfied_by(&self, model: &[bool]) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().any(|l| model.get(l.var().index()).copied().unwrap_or(false) != l.is_neg()))
    }
}
