//! Fixed-latency output stage.
//!
//! The hardened design keeps the original logic under renamed internal
//! signals and adds:
//!
//! * a counter that loads 1 on `start`, counts to `t_max` and returns to 0;
//! * `done` driven by `counter == t_max`;
//! * per observable data port, a holding register that captures the value
//!   present when the internal `done` first rises;
//! * a capture flag, cleared by `start`;
//! * data ports driven only in the `t_max` cycle (zero otherwise), so the
//!   moment the internal result appears is not visible either;
//! * an overrun net that flags an internal `done` arriving after the window.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enumerate::{counter_width, TimingClassReport};
use crate::ir::{validate_design, BinOp, Design, Diagnostic, Expr, NetDef, RegDef};

pub const COUNTER_NAME: &str = "comp_cnt";
pub const CAPTURED_NAME: &str = "comp_captured";
pub const OVERRUN_NAME: &str = "comp_overrun";
const RENAME_RETRIES: usize = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompError {
    #[error("class report is not exhausted; refusing to harden from a partial enumeration")]
    NotExhaustive,
    #[error("class report has no timing classes")]
    EmptyReport,
    #[error("could not find a free name for `{0}`")]
    PortCollision(String),
    #[error("t_max {t_max} is below reported latency {latency}")]
    TmaxTooSmall { t_max: u32, latency: u32 },
    #[error("spec was bound to a different design (missing `{0}`)")]
    SpecMismatch(String),
    #[error("hardened design is malformed: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatedPort {
    pub port: String,
    pub width: u32,
    /// Name the original driver of `port` is moved to.
    pub internal: String,
    pub hold: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompensatorSpec {
    pub t_max: u32,
    pub counter_width: u32,
    /// Signal that restarts the counter; empty until bound to a design.
    pub reset_on: String,
    pub done_port: String,
    pub done_internal: String,
    pub counter: String,
    pub captured: String,
    pub overrun: String,
    pub gated: Vec<GatedPort>,
}

impl CompensatorSpec {
    pub fn new(t_max: u32) -> CompensatorSpec {
        CompensatorSpec {
            t_max,
            counter_width: counter_width(t_max),
            reset_on: String::new(),
            done_port: String::new(),
            done_internal: String::new(),
            counter: String::new(),
            captured: String::new(),
            overrun: String::new(),
            gated: Vec::new(),
        }
    }

    pub fn is_bound(&self) -> bool {
        !self.reset_on.is_empty()
    }

    /// Picks collision-free names for every signal the transform adds or
    /// renames, based on `d`.
    pub fn bind(&self, d: &Design) -> Result<CompensatorSpec, CompError> {
        let mut taken: BTreeSet<String> = d.signal_names().into_iter().map(str::to_string).collect();
        let mut claim = |base: String| -> Result<String, CompError> {
            let name = std::iter::once(base.clone())
                .chain((1..=RENAME_RETRIES).map(|i| format!("{base}_{i}")))
                .find(|n| !taken.contains(n))
                .ok_or_else(|| CompError::PortCollision(base.clone()))?;
            taken.insert(name.clone());
            Ok(name)
        };
        let mut s = CompensatorSpec::new(self.t_max);
        s.reset_on = d.annot.start.clone();
        s.done_port = d.annot.done.clone();
        s.done_internal = claim(format!("{}_int", d.annot.done))?;
        s.counter = claim(COUNTER_NAME.into())?;
        s.captured = claim(CAPTURED_NAME.into())?;
        s.overrun = claim(OVERRUN_NAME.into())?;
        for p in d.observable_data() {
            s.gated.push(GatedPort {
                port: p.name.clone(),
                width: p.width,
                internal: claim(format!("{}_int", p.name))?,
                hold: claim(format!("{}_hold", p.name))?,
            });
        }
        Ok(s)
    }

    /// Original name → internal name, for done and every gated port.
    pub fn rename_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert(self.done_port.clone(), self.done_internal.clone());
        for g in &self.gated {
            m.insert(g.port.clone(), g.internal.clone());
        }
        m
    }

    /// Flops the transform adds: counter, holding registers, capture flag.
    pub fn added_flops(&self) -> u32 {
        self.counter_width + self.gated.iter().map(|g| g.width).sum::<u32>() + 1
    }
}

pub fn synthesize_spec(r: &TimingClassReport) -> Result<CompensatorSpec, CompError> {
    if !r.exhausted {
        return Err(CompError::NotExhaustive);
    }
    let t_max = r.classes.iter().map(|c| c.latency).max().ok_or(CompError::EmptyReport)?;
    Ok(CompensatorSpec::new(t_max))
}

/// Splices the compensator onto `d`. An unbound spec is bound first.
pub fn harden(d: &Design, spec: &CompensatorSpec) -> Result<Design, CompError> {
    let diags = validate_design(d);
    if !diags.is_empty() {
        return Err(CompError::Invalid(diags));
    }
    let spec = if spec.is_bound() { spec.clone() } else { spec.bind(d)? };
    if spec.done_port != d.annot.done || spec.reset_on != d.annot.start {
        return Err(CompError::SpecMismatch(spec.done_port.clone()));
    }
    for g in &spec.gated {
        if d.port(&g.port).is_none() {
            return Err(CompError::SpecMismatch(g.port.clone()));
        }
    }
    let map = spec.rename_map();
    let rn = |n: &str| map.get(n).cloned().unwrap_or_else(|| n.to_string());

    let mut h = d.clone();
    h.name = format!("{}_hardened", d.name);
    for r in &mut h.regs {
        r.name = rn(&r.name);
    }
    for n in &mut h.nets {
        n.name = rn(&n.name);
        n.expr = n.expr.rename(&map);
    }
    h.next = d.next.iter().map(|(k, e)| (rn(k), e.rename(&map))).collect();

    let w = spec.counter_width;
    let v = |n: &str, w: u32| Expr::var(n, w).expect("width in range");
    let k = |x: u64, w: u32| Expr::constant(x, w).expect("fits");
    let b = |op, x, y| Expr::binary(op, x, y).expect("widths agree");
    let mux = |c, t, e| Expr::mux(c, t, e).expect("mux widths agree");
    let cnt = v(&spec.counter, w);
    let at_max = b(BinOp::Eq, cnt.clone(), k(spec.t_max as u64, w));
    let live = b(BinOp::Neq, cnt.clone(), k(0, w));
    let start = v(&spec.reset_on, 1);
    let done_int = v(&spec.done_internal, 1);
    let captured = v(&spec.captured, 1);
    let first = b(BinOp::And, b(BinOp::And, done_int.clone(), Expr::not(captured.clone())), live.clone());

    h.regs.push(RegDef { name: spec.counter.clone(), width: w, reset: 0 });
    let idle = b(BinOp::Or, Expr::not(live.clone()), at_max.clone());
    h.next.insert(
        spec.counter.clone(),
        mux(start.clone(), k(1, w), mux(idle, k(0, w), b(BinOp::Add, cnt.clone(), k(1, w)))),
    );

    // Reset to 1 so that no overrun is reported before the first start.
    h.regs.push(RegDef { name: spec.captured.clone(), width: 1, reset: 1 });
    h.next.insert(
        spec.captured.clone(),
        mux(start.clone(), Expr::bit(false), b(BinOp::Or, captured.clone(), first.clone())),
    );

    h.nets.push(NetDef { name: spec.done_port.clone(), width: 1, expr: at_max.clone() });
    let overrun = b(
        BinOp::And,
        b(BinOp::And, done_int, Expr::not(captured)),
        b(BinOp::And, Expr::not(live), Expr::not(start.clone())),
    );
    h.nets.push(NetDef { name: spec.overrun.clone(), width: 1, expr: overrun });

    for g in &spec.gated {
        let data = v(&g.internal, g.width);
        let hold = v(&g.hold, g.width);
        h.regs.push(RegDef { name: g.hold.clone(), width: g.width, reset: 0 });
        h.next.insert(
            g.hold.clone(),
            mux(start.clone(), k(0, g.width), mux(first.clone(), data.clone(), hold.clone())),
        );
        let value = mux(first.clone(), data, hold);
        h.nets.push(NetDef { name: g.port.clone(), width: g.width, expr: mux(at_max.clone(), value, k(0, g.width)) });
    }

    let diags = validate_design(&h);
    if !diags.is_empty() {
        return Err(CompError::Invalid(diags));
    }
    Ok(h)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralChange {
    pub signal: String,
    pub detail: String,
}

/// Every original net and next-state function must appear in `hardened`
/// under its (possibly renamed) name with the same defining expression,
/// modulo the rename. Returns the violations.
pub fn structural_diff(original: &Design, hardened: &Design, rename: &BTreeMap<String, String>) -> Vec<StructuralChange> {
    let rn = |n: &str| rename.get(n).cloned().unwrap_or_else(|| n.to_string());
    let mut out = Vec::new();
    for n in &original.nets {
        let want = n.expr.rename(rename);
        match hardened.net(&rn(&n.name)) {
            Some(h) if h.expr == want && h.width == n.width => {}
            Some(h) => out.push(StructuralChange {
                signal: n.name.clone(),
                detail: format!("net changed: `{}` became `{}`", want, h.expr),
            }),
            None => out.push(StructuralChange { signal: n.name.clone(), detail: "net missing".into() }),
        }
    }
    for r in &original.regs {
        let name = rn(&r.name);
        let want = original.next[&r.name].rename(rename);
        match (hardened.reg(&name), hardened.next.get(&name)) {
            (Some(h), Some(e)) if *e == want && h.width == r.width && h.reset == r.reset => {}
            (Some(_), Some(e)) => out.push(StructuralChange {
                signal: r.name.clone(),
                detail: format!("next-state changed: `{want}` became `{e}`"),
            }),
            _ => out.push(StructuralChange { signal: r.name.clone(), detail: "register missing".into() }),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverheadReport {
    pub t_max: u32,
    pub classes: usize,
    pub counter_flops: u32,
    pub holding_flops: u32,
    pub total_added_flops: u32,
    /// Σ (t_max − tᵢ): one delay register per missing cycle per class.
    pub path_balanced_unit: u64,
    /// `path_balanced_unit` × total observable data width.
    pub path_balanced_datapath: u64,
    /// k²/2 for k classes, the quadratic figure quoted for balancing.
    pub path_balanced_quadratic: u64,
    /// `path_balanced_unit / counter_flops`, or 1 when nothing needs balancing.
    pub savings_ratio: f64,
    pub note: Option<String>,
}

pub fn overhead(r: &TimingClassReport, d: &Design) -> Result<OverheadReport, CompError> {
    let spec = synthesize_spec(r)?;
    let data_width: u32 = d.observable_data().map(|p| p.width).sum();
    let unit: u64 = r.classes.iter().map(|c| (spec.t_max - c.latency) as u64).sum();
    let k = r.classes.len() as u64;
    let (ratio, note) = if unit == 0 {
        (1.0, Some("single timing class: path balancing needs no registers".to_string()))
    } else {
        (unit as f64 / spec.counter_width as f64, None)
    };
    Ok(OverheadReport {
        t_max: spec.t_max,
        classes: r.classes.len(),
        counter_flops: spec.counter_width,
        holding_flops: data_width,
        total_added_flops: spec.counter_width + data_width + 1,
        path_balanced_unit: unit,
        path_balanced_datapath: unit * data_width as u64,
        path_balanced_quadratic: k * k / 2,
        savings_ratio: ratio,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{generate, RsaParams};
    use crate::enumerate::{EngineId, TimingClass};
    use crate::hdl::load;
    use crate::ir::testutil::*;
    use crate::sim::{cosim_equiv, Simulator, Stimulus, TraceWitness, Valuation};

    fn report(lats: &[u32], exhausted: bool) -> TimingClassReport {
        let w = TraceWitness { stimulus: Stimulus::default(), signals: vec![], cycles: vec![], latency: None };
        TimingClassReport {
            classes: lats.iter().map(|&l| TimingClass { latency: l, witness: w.clone() }).collect(),
            t_max: lats.iter().copied().max(),
            bound: 100,
            engine: EngineId::Oracle,
            mode: None,
            exhausted,
            never_completes: false,
            iterations: vec![],
        }
    }

    #[test]
    fn spec_from_report() {
        let s = synthesize_spec(&report(&(33..=64).collect::<Vec<_>>(), true)).unwrap();
        assert_eq!((s.t_max, s.counter_width), (64, 7));
        let s = synthesize_spec(&report(&[5], true)).unwrap();
        assert_eq!((s.t_max, s.counter_width), (5, 3));
        let s = synthesize_spec(&report(&(9..=16).collect::<Vec<_>>(), true)).unwrap();
        assert_eq!((s.t_max, s.counter_width), (16, 5));
        assert_eq!(synthesize_spec(&report(&[5], false)), Err(CompError::NotExhaustive));
        assert_eq!(synthesize_spec(&report(&[], true)), Err(CompError::EmptyReport));
    }

    #[test]
    fn overhead_figures() {
        let d = load(&generate(&RsaParams::new(32)).unwrap()).unwrap();
        let o = overhead(&report(&(33..=64).collect::<Vec<_>>(), true), &d).unwrap();
        assert_eq!(o.counter_flops, 7);
        assert_eq!(o.path_balanced_unit, 496);
        assert_eq!(o.path_balanced_quadratic, 512);
        assert_eq!(o.total_added_flops, 7 + 32 + 1);
        let one = overhead(&report(&[5], true), &counter_design()).unwrap();
        assert_eq!(one.path_balanced_unit, 0);
        assert_eq!(one.savings_ratio, 1.0);
        assert!(one.note.is_some());
    }

    #[test]
    fn constant_design_keeps_latency() {
        let d = counter_design();
        let h = harden(&d, &CompensatorSpec::new(6)).unwrap();
        assert!(structural_diff(&d, &h, &CompensatorSpec::new(6).bind(&d).unwrap().rename_map()).is_empty());
        let s = Stimulus::new(Valuation::new(), Valuation::from([("k".to_string(), 9)]), 20);
        assert_eq!(Simulator::new(&h).unwrap().latency(&s).unwrap(), Some(6));
        assert!(cosim_equiv(&d, &h, 50, 20, 1).unwrap().passed());
    }

    #[test]
    fn lying_spec_raises_overrun() {
        let d = counter_design();
        let spec = CompensatorSpec::new(3).bind(&d).unwrap();
        let h = harden(&d, &spec).unwrap();
        let s = Stimulus::new(Valuation::new(), Valuation::from([("k".to_string(), 0)]), 10);
        let w = Simulator::new(&h).unwrap().run_recording(&s, &[spec.overrun.clone(), "done".into()]).unwrap();
        assert_eq!(w.latency, Some(3));
        let mut sim = Simulator::new(&h).unwrap();
        sim.begin(&s).unwrap();
        let mut flagged = false;
        for t in 0..10 {
            sim.set_input("start", (t == 0) as u64).unwrap();
            sim.settle();
            flagged |= sim.peek(&spec.overrun).unwrap() == 1;
            sim.clock();
        }
        assert!(flagged);
    }

    #[test]
    fn names_avoid_collisions() {
        let mut d = counter_design();
        d.regs.push(RegDef { name: "done_int".into(), width: 1, reset: 0 });
        d.next.insert("done_int".into(), v("done_int", 1));
        let spec = CompensatorSpec::new(6).bind(&d).unwrap();
        assert_eq!(spec.done_internal, "done_int_1");
        harden(&d, &spec).unwrap();
    }
}
