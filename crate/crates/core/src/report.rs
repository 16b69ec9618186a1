//! Machine-readable run reports: a versioned JSON document and a per-class
//! discovery-time CSV.
//!
//! JSON layout (`"schema": 1`):
//!
//! ```text
//! schema            1
//! tool              producer name and version
//! design            { name, file, sha256 }         sha256 of the source text
//! bound             exploration bound in cycles
//! taint             { verdict, tainted_observables, cone }
//! timing            class report or null           classes with witnesses,
//!                                                  iterations with wall_ms
//! noninterference   { verdict: SECURE|LEAK|INCONCLUSIVE, ... } or null
//! compensator       bound compensator spec or null
//! overhead          overhead figures or null
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::compensator::{CompensatorSpec, OverheadReport};
use crate::enumerate::{IterationOutcome, Noninterference, TimingClassReport};
use crate::taint::{PathVerdict, SecurityPath};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("report is inconsistent: {}", .0.join("; "))]
    Inconsistent(Vec<String>),
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignIdentity {
    pub name: String,
    pub file: Option<String>,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaintSummary {
    pub verdict: PathVerdict,
    pub tainted_observables: Vec<String>,
    pub cone: Vec<String>,
}

impl From<&SecurityPath> for TaintSummary {
    fn from(p: &SecurityPath) -> Self {
        TaintSummary {
            verdict: p.verdict,
            tainted_observables: p.tainted_observables.clone(),
            cone: p.cone.iter().cloned().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub schema: u32,
    pub tool: String,
    pub design: DesignIdentity,
    pub bound: u32,
    pub taint: TaintSummary,
    pub timing: Option<TimingClassReport>,
    pub noninterference: Option<Noninterference>,
    pub compensator: Option<CompensatorSpec>,
    pub overhead: Option<OverheadReport>,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl ReportDocument {
    pub fn new(name: &str, file: Option<&Path>, source: &str, bound: u32, taint: &SecurityPath) -> ReportDocument {
        ReportDocument {
            schema: SCHEMA_VERSION,
            tool: format!("pascal {}", env!("CARGO_PKG_VERSION")),
            design: DesignIdentity {
                name: name.to_string(),
                file: file.map(|p| p.display().to_string()),
                sha256: sha256_hex(source),
            },
            bound,
            taint: taint.into(),
            timing: None,
            noninterference: None,
            compensator: None,
            overhead: None,
        }
    }

    /// Internal consistency checks; returns every violation found.
    pub fn validate(&self) -> Result<(), ReportError> {
        let mut errs = Vec::new();
        if self.schema != SCHEMA_VERSION {
            errs.push(format!("schema {} is not {SCHEMA_VERSION}", self.schema));
        }
        if self.design.sha256.len() != 64 || !self.design.sha256.bytes().all(|b| b.is_ascii_hexdigit()) {
            errs.push("design.sha256 is not a hex SHA-256 digest".into());
        }
        if (self.taint.verdict == PathVerdict::PathExists) == self.taint.tainted_observables.is_empty() {
            errs.push("taint verdict disagrees with tainted_observables".into());
        }
        if let Some(t) = &self.timing {
            if t.bound != self.bound {
                errs.push(format!("timing.bound {} differs from bound {}", t.bound, self.bound));
            }
            let lats = t.latencies();
            if lats.len() != t.classes.len() {
                errs.push("duplicate latencies in timing.classes".into());
            }
            if t.t_max != lats.iter().max().copied() {
                errs.push(format!("t_max {:?} does not match classes", t.t_max));
            }
            for c in &t.classes {
                if c.witness.latency != Some(c.latency) {
                    errs.push(format!("witness for class {} reports {:?}", c.latency, c.witness.latency));
                }
                if c.latency == 0 || c.latency > t.bound {
                    errs.push(format!("class {} outside 1..={}", c.latency, t.bound));
                }
            }
            let found = t.iterations.iter().filter(|i| i.outcome == IterationOutcome::Found).count();
            if found != t.classes.len() {
                errs.push(format!("{found} successful iterations for {} classes", t.classes.len()));
            }
            let last_exhausted = t.iterations.last().is_some_and(|i| i.outcome == IterationOutcome::Exhausted);
            if t.exhausted != last_exhausted {
                errs.push("exhausted flag disagrees with the final iteration".into());
            }
            if let Some(c) = &self.compensator {
                if t.t_max.is_some_and(|m| c.t_max < m) {
                    errs.push(format!("compensator t_max {} below class t_max {:?}", c.t_max, t.t_max));
                }
            }
        }
        if let Some(c) = &self.compensator {
            if c.counter_width != crate::enumerate::counter_width(c.t_max) {
                errs.push("compensator counter width does not fit t_max".into());
            }
            if let Some(o) = &self.overhead {
                if o.t_max != c.t_max || o.counter_flops != c.counter_width {
                    errs.push("overhead disagrees with compensator".into());
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ReportError::Inconsistent(errs))
        }
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<ReportDocument, ReportError> {
        let doc: ReportDocument = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }
}

/// Columns: class_index, latency_cycles, discovery_wall_ms,
/// discovery_normalized. Rows follow discovery order. The normalized column
/// divides each discovery time by the sum over all classes; if that sum is
/// zero every class gets an equal share.
pub fn timing_csv(r: &TimingClassReport) -> Result<String, ReportError> {
    let found: Vec<(u32, f64)> = r
        .iterations
        .iter()
        .filter(|i| i.outcome == IterationOutcome::Found)
        .map(|i| (i.latency.expect("found iterations carry a latency"), i.wall_ms))
        .collect();
    let total: f64 = found.iter().map(|(_, ms)| ms).sum();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["class_index", "latency_cycles", "discovery_wall_ms", "discovery_normalized"])?;
    for (i, (lat, ms)) in found.iter().enumerate() {
        let norm = if total > 0.0 { ms / total } else { 1.0 / found.len() as f64 };
        w.write_record([i.to_string(), lat.to_string(), format!("{ms:.3}"), format!("{norm:.12}")])?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Io { path: PathBuf::from("<csv>"), source: e.into_error() })?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn write(path: &Path, text: &str) -> Result<(), ReportError> {
    std::fs::write(path, text).map_err(|e| ReportError::Io { path: path.to_path_buf(), source: e })
}

/// Writes `<stem>.report.json` and, with a timing section, `<stem>.timing.csv`.
pub fn emit_report(doc: &ReportDocument, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, ReportError> {
    doc.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| ReportError::Io { path: dir.to_path_buf(), source: e })?;
    let json = dir.join(format!("{stem}.report.json"));
    write(&json, &doc.to_json()?)?;
    let mut out = vec![json];
    if let Some(t) = &doc.timing {
        let csv_path = dir.join(format!("{stem}.timing.csv"));
        write(&csv_path, &timing_csv(t)?)?;
        out.push(csv_path);
    }
    Ok(out)
}
