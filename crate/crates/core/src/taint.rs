//! Static secret-reachability over a two-point lattice.
//!
//! A net or register is tainted as soon as any signal its defining
//! expression reads is tainted. Mux selects are ordinary operands here, so
//! control dependence is covered by the same rule.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ir::{cone_of_influence_many, Design};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Clean,
    Tainted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintState {
    pub labels: BTreeMap<String, Label>,
    /// `history[i]` lists the signals that became tainted in round `i`;
    /// round 0 holds the secrets.
    pub history: Vec<Vec<String>>,
    /// Rounds that tainted something, round 0 included.
    pub iterations: usize,
}

impl TaintState {
    pub fn is_tainted(&self, name: &str) -> bool {
        self.labels.get(name) == Some(&Label::Tainted)
    }

    pub fn tainted(&self) -> BTreeSet<String> {
        self.labels.iter().filter(|(_, l)| **l == Label::Tainted).map(|(n, _)| n.clone()).collect()
    }

    /// Round in which `name` became tainted.
    pub fn round_of(&self, name: &str) -> Option<usize> {
        self.history.iter().position(|r| r.iter().any(|s| s == name))
    }
}

/// Least fixpoint from the secret inputs. Each round reads the labels of
/// the previous round only, so `history` records a breadth-first frontier.
pub fn propagate(d: &Design) -> TaintState {
    let mut labels: BTreeMap<String, Label> =
        d.signal_names().into_iter().map(|n| (n.to_string(), Label::Clean)).collect();
    let mut history = vec![Vec::new()];
    for s in &d.annot.secret {
        labels.insert(s.clone(), Label::Tainted);
        history[0].push(s.clone());
    }

    let defs: Vec<(&str, &crate::ir::Expr)> = d
        .nets
        .iter()
        .map(|n| (n.name.as_str(), &n.expr))
        .chain(d.regs.iter().filter_map(|r| d.next.get(&r.name).map(|e| (r.name.as_str(), e))))
        .collect();

    loop {
        let fresh: Vec<String> = defs
            .iter()
            .filter(|(name, _)| labels.get(*name) == Some(&Label::Clean))
            .filter(|(_, e)| e.vars().into_iter().any(|v| labels.get(v) == Some(&Label::Tainted)))
            .map(|(name, _)| name.to_string())
            .collect();
        if fresh.is_empty() {
            break;
        }
        for n in &fresh {
            labels.insert(n.clone(), Label::Tainted);
        }
        history.push(fresh);
    }
    let iterations = history.len();
    TaintState { labels, history, iterations }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PathVerdict {
    PathExists,
    NoPath,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityPath {
    pub verdict: PathVerdict,
    pub tainted_observables: Vec<String>,
    /// Tainted signals inside the fan-in of the tainted observables.
    pub cone: BTreeSet<String>,
}

impl SecurityPath {
    pub fn exists(&self) -> bool {
        self.verdict == PathVerdict::PathExists
    }

    pub fn from_state(d: &Design, state: &TaintState) -> SecurityPath {
        let hit: Vec<String> = d.annot.observable.iter().filter(|o| state.is_tainted(o)).cloned().collect();
        let cone = if hit.is_empty() {
            BTreeSet::new()
        } else {
            let fanin = cone_of_influence_many(d, hit.iter().map(String::as_str))
                .expect("observables are declared signals");
            fanin.into_iter().filter(|s| state.is_tainted(s)).collect()
        };
        SecurityPath {
            verdict: if hit.is_empty() { PathVerdict::NoPath } else { PathVerdict::PathExists },
            tainted_observables: hit,
            cone,
        }
    }
}

pub fn has_security_path(d: &Design) -> SecurityPath {
    SecurityPath::from_state(d, &propagate(d))
}
