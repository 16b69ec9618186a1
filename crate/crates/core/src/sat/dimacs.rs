use std::io::{self, Write};

use super::{Cnf, Lit, SatError, SolveResult};

/// Writes `cnf` in DIMACS form; assumptions become unit clauses.
pub fn write_dimacs(cnf: &Cnf, assumptions: &[Lit], out: &mut impl Write) -> io::Result<()> {
    let nvars = assumptions.iter().map(|l| l.var().0 + 1).max().unwrap_or(0).max(cnf.num_vars());
    writeln!(out, "p cnf {} {}", nvars, cnf.num_clauses() + assumptions.len())?;
    let mut line = String::new();
    for c in cnf.clauses().iter().map(Vec::as_slice).chain(assumptions.iter().map(std::slice::from_ref)) {
        line.clear();
        for l in c {
            line.push_str(&l.to_dimacs().to_string());
            line.push(' ');
        }
        line.push('0');
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn parse_dimacs(text: &str) -> Result<Cnf, SatError> {
    let mut header: Option<(u32, usize)> = None;
    let mut cnf = Cnf::raw(0);
    let mut clause = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |msg: &str| SatError::Dimacs { line: i + 1, msg: msg.to_string() };
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 || f[1] != "cnf" || header.is_some() {
                return Err(err("malformed problem line"));
            }
            let nv = f[2].parse().map_err(|_| err("bad variable count"))?;
            let nc = f[3].parse().map_err(|_| err("bad clause count"))?;
            header = Some((nv, nc));
            cnf = Cnf::raw(nv);
            continue;
        }
        let Some((nv, _)) = header else {
            return Err(err("clause before problem line"));
        };
        for tok in line.split_whitespace() {
            let x: i64 = tok.parse().map_err(|_| err(&format!("bad literal `{tok}`")))?;
            if x == 0 {
                cnf.add_clause(&clause);
                clause.clear();
            } else {
                if x.unsigned_abs() > nv as u64 {
                    return Err(err(&format!("literal {x} exceeds declared variable count")));
                }
                clause.push(Lit::from_dimacs(x).expect("nonzero"));
            }
        }
    }
    if !clause.is_empty() {
        cnf.add_clause(&clause);
    }
    if header.is_none() {
        return Err(SatError::Dimacs { line: 0, msg: "missing problem line".into() });
    }
    Ok(cnf)
}

/// Reads the conventional `s ...` / `v ...` solver output. The model is
/// indexed by variable; unmentioned variables are false.
pub fn parse_solver_output(text: &str, num_vars: u32) -> Result<(SolveResult, Vec<bool>), SatError> {
    let mut status = None;
    let mut model = vec![false; num_vars as usize];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(s) = line.strip_prefix("s ") {
            status = Some(match s.trim() {
                "SATISFIABLE" => SolveResult::Sat,
                "UNSATISFIABLE" => SolveResult::Unsat,
                _ => SolveResult::Unknown,
            });
        } else if let Some(vals) = line.strip_prefix("v ") {
            for tok in vals.split_whitespace() {
                let x: i64 = tok
                    .parse()
                    .map_err(|_| SatError::Dimacs { line: i + 1, msg: format!("bad model literal `{tok}`") })?;
                if let Some(l) = Lit::from_dimacs(x) {
                    if let Some(slot) = model.get_mut(l.var().index()) {
                        *slot = !l.is_neg();
                    }
                }
            }
        }
    }
    match status {
        Some(s) => Ok((s, model)),
        None => Err(SatError::Dimacs { line: 0, msg: "no `s` status line in solver output".into() }),
    }
}
