mod common;

use std::collections::{BTreeMap, BTreeSet};

use pascal_core::ir::{comb_topo_order, cone_of_influence, mask, BinOp, Design, Expr};
use pascal_core::taint::{has_security_path, propagate};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{corpus, random_design};

/// Kahn's algorithm picking uniformly among ready nets.
fn random_topo_order(d: &Design, rng: &mut ChaCha8Rng) -> Vec<String> {
    let nets: BTreeSet<&str> = d.nets.iter().map(|n| n.name.as_str()).collect();
    let mut deps: BTreeMap<&str, BTreeSet<&str>> = d
        .nets
        .iter()
        .map(|n| (n.name.as_str(), n.expr.vars().into_iter().filter(|v| nets.contains(v)).collect()))
        .collect();
    let mut order = Vec::new();
    while !deps.is_empty() {
        let ready: Vec<&str> = deps.iter().filter(|(_, s)| s.is_empty()).map(|(n, _)| *n).collect();
        let pick = *ready.choose(rng).expect("acyclic");
        deps.remove(pick);
        for s in deps.values_mut() {
            s.remove(pick);
        }
        order.push(pick.to_string());
    }
    order
}

fn evaluate(d: &Design, order: &[String], base: &BTreeMap<String, u64>) -> BTreeMap<String, u64> {
    let mut vals = base.clone();
    for name in order {
        let net = d.net(name).unwrap();
        let v = net.expr.eval(&|n: &str| *vals.get(n).unwrap_or_else(|| panic!("{n} read before it is computed")));
        vals.insert(name.clone(), v);
    }
    vals
}

/// `d` with one extra operand XORed into a random net or next-state
/// function. The operand is an input or register, so no cycle appears.
fn add_operand(d: &Design, rng: &mut ChaCha8Rng) -> Design {
    let mut out = d.clone();
    let sources: Vec<(String, u32)> = d
        .inputs()
        .filter(|p| p.role == pascal_core::ir::PortRole::Data)
        .map(|p| (p.name.clone(), p.width))
        .chain(d.regs.iter().map(|r| (r.name.clone(), r.width)))
        .collect();
    let (src, sw) = sources.choose(rng).unwrap().clone();
    let widen = |e: &Expr| {
        let w = e.width();
        let v = Expr::var(src.clone(), sw).unwrap();
        let v = if sw < w {
            Expr::zext(v, w).unwrap()
        } else if sw > w {
            Expr::slice(v, w - 1, 0).unwrap()
        } else {
            v
        };
        Expr::binary(BinOp::Xor, e.clone(), v).unwrap()
    };
    let k = rng.random_range(0..d.nets.len() + d.regs.len());
    if k < d.nets.len() {
        out.nets[k].expr = widen(&d.nets[k].expr);
    } else {
        let r = &d.regs[k - d.nets.len()].name;
        out.next.insert(r.clone(), widen(&d.next[r]));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn topo_order_is_evaluation_order_independent(seed in any::<u64>()) {
        let d = random_design(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut base = BTreeMap::new();
        for p in d.inputs() {
            base.insert(p.name.clone(), rng.random::<u64>() & mask(p.width));
        }
        for r in &d.regs {
            base.insert(r.name.clone(), rng.random::<u64>() & mask(r.width));
        }
        let order = comb_topo_order(&d).unwrap();
        prop_assert_eq!(order.iter().collect::<BTreeSet<_>>(), d.nets.iter().map(|n| &n.name).collect::<BTreeSet<_>>());
        let want = evaluate(&d, &order, &base);
        for _ in 0..4 {
            let alt = random_topo_order(&d, &mut rng);
            prop_assert_eq!(&evaluate(&d, &alt, &base), &want);
        }
    }

    #[test]
    fn cones_contain_target_and_grow_with_operands(seed in any::<u64>()) {
        let d = random_design(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = add_operand(&d, &mut rng);
        for s in d.signal_names() {
            let before = cone_of_influence(&d, s).unwrap();
            prop_assert!(before.contains(s), "cone of {} misses itself", s);
            let after = cone_of_influence(&e, s).unwrap();
            prop_assert!(after.is_superset(&before), "cone of {} shrank", s);
        }
    }

    #[test]
    fn taint_is_monotone_and_terminates(seed in any::<u64>()) {
        let d = random_design(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = add_operand(&d, &mut rng);
        let (sd, se) = (propagate(&d), propagate(&e));
        prop_assert!(sd.iterations <= d.signal_names().len());
        prop_assert!(se.tainted().is_superset(&sd.tainted()));
        for s in &d.annot.secret {
            prop_assert!(sd.is_tainted(s));
        }
        if has_security_path(&d).exists() {
            prop_assert!(has_security_path(&e).exists());
        }
    }
}

#[test]
fn corpus_taint_terminates_within_signal_count() {
    for e in corpus() {
        let s = propagate(&e.design);
        assert!(s.iterations <= e.design.signal_names().len(), "{}", e.name);
    }
}
