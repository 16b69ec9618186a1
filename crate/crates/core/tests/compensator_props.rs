mod common;

use std::collections::BTreeSet;

use pascal_core::compensator::{harden, overhead, structural_diff, synthesize_spec};
use pascal_core::enumerate::{check_noninterference, counter_width, enumerate_classes, EnumOptions};
use pascal_core::hdl::{emit, load};
use pascal_core::sim::{cosim_equiv, CosimVerdict};
use pascal_core::taint::has_security_path;
use proptest::prelude::*;

use common::{corpus, random_design};

/// Smallest w with 2^w > t, i.e. enough bits to count 0..=t.
fn bits_to_count(t: u32) -> u32 {
    let mut w = 0;
    while (1u64 << w) <= t as u64 {
        w += 1;
    }
    w
}

#[test]
fn counter_width_law() {
    for t in 1..=1_000_000u32 {
        assert_eq!(counter_width(t), bits_to_count(t), "t_max {t}");
        assert_eq!(counter_width(t), (t as f64 + 1.0).log2().ceil() as u32, "t_max {t}");
    }
}

#[test]
fn corpus_hardening_end_to_end() {
    for e in corpus() {
        if !has_security_path(&e.design).exists() {
            continue;
        }
        let opts = EnumOptions::new(e.bound);
        let r = enumerate_classes(&e.design, &opts).unwrap();
        let spec = synthesize_spec(&r).unwrap().bind(&e.design).unwrap();
        let h = load(&emit(&harden(&e.design, &spec).unwrap())).unwrap();
        assert!(structural_diff(&e.design, &h, &spec.rename_map()).is_empty(), "{}", e.name);
        let hr = enumerate_classes(&h, &opts).unwrap();
        assert_eq!(hr.latencies(), BTreeSet::from([spec.t_max]), "{}", e.name);
        assert!(check_noninterference(&h, &opts).unwrap().is_secure(), "{}", e.name);
        let v = cosim_equiv(&e.design, &h, 1000, e.bound, 21).unwrap();
        assert!(matches!(v, CosimVerdict::Pass { checked: 1000, .. }), "{}: {v:?}", e.name);
        let o = overhead(&r, &e.design).unwrap();
        assert_eq!(o.total_added_flops, spec.added_flops(), "{}", e.name);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 120, failure_persistence: None, ..ProptestConfig::default() })]

    /// Whatever `done` does in the original, the hardened design completes
    /// at exactly t_max and reports the same data.
    #[test]
    fn random_designs_harden_to_one_class(seed in any::<u64>()) {
        let d = random_design(seed);
        let opts = EnumOptions::new(10);
        let r = enumerate_classes(&d, &opts).unwrap();
        prop_assume!(!r.classes.is_empty());
        let spec = synthesize_spec(&r).unwrap().bind(&d).unwrap();
        let h = harden(&d, &spec).unwrap();
        prop_assert!(structural_diff(&d, &h, &spec.rename_map()).is_empty());
        let hr = enumerate_classes(&h, &opts).unwrap();
        prop_assert_eq!(hr.latencies(), BTreeSet::from([spec.t_max]));
        prop_assert!(check_noninterference(&h, &opts).unwrap().is_secure());
        let v = cosim_equiv(&d, &h, 64, 10, seed).unwrap();
        prop_assert!(v.passed(), "{:?}", v);
    }
}
