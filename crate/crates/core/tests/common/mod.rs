#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use pascal_core::hdl::{self, PragmaSet};
use pascal_core::ir::{validate_design, BinOp, Design, Expr, NetDef, Port, RegDef, SecurityAnnotations};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct CorpusEntry {
    pub name: String,
    pub source: String,
    pub design: Design,
    pub bound: u32,
}

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus() -> Vec<CorpusEntry> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "mhdl"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let source = std::fs::read_to_string(&p).unwrap();
            let m = hdl::parse(&source).unwrap();
            let pragmas = PragmaSet::from_module(&m).unwrap();
            CorpusEntry {
                name: p.file_stem().unwrap().to_string_lossy().into_owned(),
                design: hdl::elaborate(&m, &pragmas).unwrap(),
                bound: pragmas.bound.expect("corpus files carry @bound"),
                source,
            }
        })
        .collect()
}

pub fn corpus_entry(name: &str) -> CorpusEntry {
    corpus().into_iter().find(|e| e.name == name).unwrap_or_else(|| panic!("no corpus file {name}"))
}

fn fit(e: Expr, width: u32, rng: &mut ChaCha8Rng) -> Expr {
    let w = e.width();
    if w == width {
        e
    } else if w < width {
        Expr::zext(e, width).unwrap()
    } else {
        let lo = rng.random_range(0..=w - width);
        Expr::slice(e, lo + width - 1, lo).unwrap()
    }
}

const OPS: [BinOp; 8] = [BinOp::And, BinOp::Or, BinOp::Xor, BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Shl, BinOp::Shr];
const CMPS: [BinOp; 3] = [BinOp::Eq, BinOp::Neq, BinOp::Lt];

pub struct ExprGen<'a> {
    pub leaves: &'a [(String, u32)],
    pub rng: &'a mut ChaCha8Rng,
}

impl ExprGen<'_> {
    fn leaf(&mut self, width: u32) -> Expr {
        if self.rng.random_bool(0.2) {
            let v = self.rng.random::<u64>() & pascal_core::ir::mask(width);
            return Expr::constant(v, width).unwrap();
        }
        let (name, w) = self.leaves.choose(self.rng).unwrap().clone();
        fit(Expr::var(name, w).unwrap(), width, self.rng)
    }

    pub fn expr(&mut self, width: u32, depth: u32) -> Expr {
        if depth == 0 || self.rng.random_bool(0.25) {
            return self.leaf(width);
        }
        match self.rng.random_range(0..6) {
            0 => Expr::not(self.expr(width, depth - 1)),
            1 => {
                let op = *OPS.choose(self.rng).unwrap();
                Expr::binary(op, self.expr(width, depth - 1), self.expr(width, depth - 1)).unwrap()
            }
            2 => {
                let op = *CMPS.choose(self.rng).unwrap();
                let w = self.rng.random_range(1..=8);
                let cmp = Expr::binary(op, self.expr(w, depth - 1), self.expr(w, depth - 1)).unwrap();
                fit(cmp, width, self.rng)
            }
            3 => Expr::mux(self.expr(1, depth - 1), self.expr(width, depth - 1), self.expr(width, depth - 1)).unwrap(),
            4 if width >= 2 => {
                let hi = self.rng.random_range(1..width);
                Expr::concat(vec![self.expr(hi, depth - 1), self.expr(width - hi, depth - 1)]).unwrap()
            }
            _ => {
                let wide = width + self.rng.random_range(0..=4);
                fit(self.expr(wide.min(64), depth - 1), width, self.rng)
            }
        }
    }
}

/// A random valid design: inputs `start`, public `a`/`b`, secret `s`,
/// observable outputs `done` and `y`, a cycle counter `tm`, a few registers and nets declared in
/// shuffled order. Every net only reads earlier-generated nets.
pub fn random_design(seed: u64) -> Design {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths = [1u32, 3, 4, 8];
    let mut leaves: Vec<(String, u32)> =
        vec![("start".into(), 1), ("a".into(), 8), ("b".into(), 4), ("s".into(), 8)];
    // `tm` counts cycles since start so that `done` often depends on data.
    let mut regs = vec![RegDef { name: "tm".into(), width: 4, reset: 0 }];
    leaves.push(("tm".into(), 4));
    let nregs = rng.random_range(0..=3);
    for i in 0..nregs {
        let w = *widths.choose(&mut rng).unwrap();
        let reset = rng.random::<u64>() & pascal_core::ir::mask(w);
        regs.push(RegDef { name: format!("r{i}"), width: w, reset });
        leaves.push((format!("r{i}"), w));
    }
    let nnets = rng.random_range(0..=5);
    let mut nets = Vec::new();
    for i in 0..nnets {
        let w = *widths.choose(&mut rng).unwrap();
        let expr = ExprGen { leaves: &leaves, rng: &mut rng }.expr(w, 3);
        nets.push(NetDef { name: format!("n{i}"), width: w, expr });
        leaves.push((format!("n{i}"), w));
    }
    let done = if rng.random_bool(0.6) {
        let target = ExprGen { leaves: &leaves, rng: &mut rng }.expr(4, 2);
        Expr::binary(BinOp::Eq, Expr::var("tm", 4).unwrap(), target).unwrap()
    } else {
        ExprGen { leaves: &leaves, rng: &mut rng }.expr(1, 3)
    };
    let y = ExprGen { leaves: &leaves, rng: &mut rng }.expr(8, 3);
    nets.push(NetDef { name: "done".into(), width: 1, expr: done });
    nets.push(NetDef { name: "y".into(), width: 8, expr: y });
    leaves.push(("done".into(), 1));
    let mut next = BTreeMap::new();
    let tick = Expr::binary(BinOp::Add, Expr::var("tm", 4).unwrap(), Expr::constant(1, 4).unwrap()).unwrap();
    let tm_next = Expr::mux(Expr::var("start", 1).unwrap(), Expr::constant(0, 4).unwrap(), tick).unwrap();
    next.insert("tm".to_string(), tm_next);
    for r in regs.iter().skip(1) {
        let e = ExprGen { leaves: &leaves, rng: &mut rng }.expr(r.width, 3);
        next.insert(r.name.clone(), e);
    }
    nets.shuffle(&mut rng);
    let d = Design {
        name: format!("rnd{seed}"),
        ports: vec![
            Port::clock("clk"),
            Port::reset("rst"),
            Port::input("start", 1),
            Port::input("a", 8),
            Port::input("b", 4),
            Port::input("s", 8),
            Port::output("done", 1),
            Port::output("y", 8),
        ],
        regs,
        nets,
        next,
        annot: SecurityAnnotations {
            secret: BTreeSet::from(["s".to_string()]),
            observable: BTreeSet::from(["done".to_string(), "y".to_string()]),
            start: "start".into(),
            done: "done".into(),
        },
    };
    let diags = validate_design(&d);
    assert!(diags.is_empty(), "generator produced an invalid design: {diags:?}");
    d
}
