mod common;

use std::collections::BTreeSet;

use pascal_core::bench::{generate, RsaParams};
use pascal_core::enumerate::{
    check_noninterference, enumerate_classes, EngineMode, EnumOptions, IterationOutcome, Noninterference,
};
use pascal_core::hdl::load;
use pascal_core::ir::{mask, Design};
use pascal_core::sim::{exhaustive_classes, OracleOptions, SecretDomain, Simulator, Stimulus, Valuation};
use pascal_core::taint::has_security_path;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{corpus, random_design, CorpusEntry};

fn small_corpus() -> Vec<CorpusEntry> {
    corpus().into_iter().filter(|e| e.design.total_secret_width() <= 16).collect()
}

fn random_public(d: &Design, rng: &mut ChaCha8Rng) -> Valuation {
    d.public_inputs().map(|p| (p.name.clone(), rng.random::<u64>() & mask(p.width))).collect()
}

/// Key 0 never starts the RSA schedule; every other corpus design
/// completes for every secret.
fn domain(e: &CorpusEntry) -> SecretDomain {
    if e.name.starts_with("rsa") {
        SecretDomain::nonzero(&e.design)
    } else {
        SecretDomain::of(&e.design)
    }
}

/// Latencies over every secret by direct simulation, ignoring runs that
/// never complete.
fn simulated_classes(d: &Design, public: &Valuation, bound: u32) -> BTreeSet<u32> {
    let mut sim = Simulator::new(d).unwrap();
    SecretDomain::of(d)
        .iter()
        .filter_map(|secret| sim.latency(&Stimulus::new(public.clone(), secret, bound)).unwrap())
        .collect()
}

#[test]
fn bmc_matches_exhaustive_oracle_on_corpus() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for e in small_corpus() {
        for _ in 0..2 {
            let public = random_public(&e.design, &mut rng);
            let oracle = exhaustive_classes(&e.design, &public, &domain(&e), e.bound, OracleOptions::default())
                .unwrap_or_else(|err| panic!("{}: {err}", e.name));
            let opts = EnumOptions::new(e.bound).with_pinned(public.clone());
            let r = enumerate_classes(&e.design, &opts).unwrap();
            assert!(r.exhausted, "{}", e.name);
            let want: BTreeSet<u32> = oracle.latencies().into_iter().collect();
            assert_eq!(r.latencies(), want, "{} with {public:?}", e.name);
        }
    }
}

#[test]
fn partitioned_oracle_equals_unpartitioned() {
    let public_rng = &mut ChaCha8Rng::seed_from_u64(3);
    for e in small_corpus() {
        let public = random_public(&e.design, public_rng);
        let run = |chunks| {
            exhaustive_classes(&e.design, &public, &domain(&e), e.bound, OracleOptions { force: false, chunks }).unwrap()
        };
        let whole = run(1);
        assert_eq!(run(7), whole, "{}", e.name);
        assert_eq!(run(64), whole, "{}", e.name);
        assert_eq!(whole.classes.values().map(|t| t.count).sum::<u64>(), domain(&e).len());
    }
}

#[test]
fn engine_modes_agree_on_corpus() {
    for e in small_corpus() {
        let p = enumerate_classes(&e.design, &EnumOptions::new(e.bound)).unwrap();
        let i = enumerate_classes(&e.design, &EnumOptions::new(e.bound).with_mode(EngineMode::Instrumented)).unwrap();
        assert!(p.exhausted && i.exhausted, "{}", e.name);
        assert_eq!(p.latencies(), i.latencies(), "{}", e.name);
    }
}

#[test]
fn blocking_loop_terminates_within_bound() {
    for e in corpus() {
        for mode in [EngineMode::Property, EngineMode::Instrumented] {
            let r = enumerate_classes(&e.design, &EnumOptions::new(e.bound).with_mode(mode)).unwrap();
            let found: Vec<u32> = r.iterations.iter().filter_map(|i| i.latency).collect();
            assert!(found.len() as u32 <= e.bound, "{}", e.name);
            assert!(r.iterations.len() as u32 <= e.bound + 1, "{}", e.name);
            assert_eq!(found.iter().collect::<BTreeSet<_>>().len(), found.len(), "{}: a latency repeated", e.name);
            assert_eq!(r.iterations.last().unwrap().outcome, IterationOutcome::Exhausted);
        }
    }
}

#[test]
fn noninterference_matches_oracle_disagreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for e in small_corpus() {
        let ni = check_noninterference(&e.design, &EnumOptions::new(e.bound)).unwrap();
        let split = (0..3).any(|_| {
            let public = random_public(&e.design, &mut rng);
            exhaustive_classes(&e.design, &public, &domain(&e), e.bound, OracleOptions::default())
                .unwrap()
                .classes
                .len()
                > 1
        });
        match ni {
            Noninterference::Leak { a, b } => {
                assert_eq!(a.stimulus.public, b.stimulus.public, "{}", e.name);
                assert_ne!(a.latency, b.latency, "{}", e.name);
                assert!(a.completed() && b.completed(), "{}", e.name);
                assert!(split, "{}: solver leak but the oracle never split", e.name);
            }
            Noninterference::Secure { .. } => assert!(!split, "{}: oracle split but solver says secure", e.name),
            Noninterference::Inconclusive { .. } => panic!("{}: no limits were set", e.name),
        }
    }
}

/// Outcome per secret: latency and observable data at done, or None.
fn behaviours(d: &Design, public: &Valuation, bound: u32) -> BTreeSet<Option<(u32, Vec<u64>)>> {
    let ports: Vec<String> = d.observable_data().map(|p| p.name.clone()).collect();
    let mut sim = Simulator::new(d).unwrap();
    SecretDomain::of(d)
        .iter()
        .map(|secret| sim.data_at_done(&Stimulus::new(public.clone(), secret, bound), &ports).unwrap())
        .collect()
}

#[test]
fn taint_has_no_false_negatives_on_corpus() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for e in small_corpus() {
        let path = has_security_path(&e.design);
        let publics = if e.design.total_secret_width() > 12 { 2 } else { 6 };
        for _ in 0..publics {
            let public = random_public(&e.design, &mut rng);
            let distinct = behaviours(&e.design, &public, e.bound).len();
            assert!(distinct == 1 || path.exists(), "{}: secrets change behaviour but taint says NO_PATH", e.name);
        }
    }
}

#[test]
fn disconnected_secret_is_behaviourally_invisible() {
    let e = common::corpus_entry("const5");
    assert!(!has_security_path(&e.design).exists());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..8 {
        assert_eq!(behaviours(&e.design, &random_public(&e.design, &mut rng), e.bound).len(), 1);
    }
    // wiring the secret register into the output is caught both ways
    let leaky = e.source.replace("assign y = yr;", "assign y = yr ^ sink;");
    let d = load(&leaky).unwrap();
    assert!(has_security_path(&d).exists());
    assert!(behaviours(&d, &random_public(&d, &mut rng), e.bound).len() > 1);
}

fn rsa_closed_form(n: u32, cs: u32, cm: u32, key: u64) -> u32 {
    n * cs + key.count_ones() * cm
}

#[test]
fn rsa_latency_closed_form_for_every_key() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [8u32, 12] {
        let p = RsaParams::new(n);
        let d = load(&generate(&p).unwrap()).unwrap();
        let mut sim = Simulator::new(&d).unwrap();
        for key in 1..(1u64 << n) {
            let ct = rng.random::<u64>() & mask(n);
            let s = Stimulus::new(
                Valuation::from([("ct".to_string(), ct)]),
                Valuation::from([("key".to_string(), key)]),
                p.default_bound(),
            );
            assert_eq!(sim.latency(&s).unwrap(), Some(rsa_closed_form(n, 1, 1, key)), "n={n} key={key:#x}");
        }
        let zero = Stimulus::new(Valuation::from([("ct".to_string(), 1)]), Valuation::from([("key".to_string(), 0)]), 80);
        assert_eq!(sim.latency(&zero).unwrap(), None);
    }
}

#[test]
fn rsa_class_set_law() {
    for (cs, cm) in [(1, 1), (2, 1), (1, 2)] {
        let p = RsaParams { n: 8, cycles_square: cs, cycles_multiply: cm, setup_cycles: 1 };
        let d = load(&generate(&p).unwrap()).unwrap();
        let r = enumerate_classes(&d, &EnumOptions::new(p.default_bound())).unwrap();
        let want: BTreeSet<u32> = (1..=8).map(|pc| 8 * cs + pc * cm).collect();
        assert!(r.exhausted);
        assert_eq!(r.latencies(), want, "cs={cs} cm={cm}");
    }
}

#[test]
fn witnesses_replay_cycle_for_cycle() {
    let e = common::corpus_entry("rsa8");
    let r = enumerate_classes(&e.design, &EnumOptions::new(32)).unwrap();
    assert_eq!(r.classes.len(), 8);
    for c in &r.classes {
        let w = &c.witness;
        let replay = Simulator::new(&e.design).unwrap().run_recording(&w.stimulus, &w.signals).unwrap();
        assert_eq!(replay.cycles, w.cycles, "class {}", c.latency);
        let done = w.waveform("done").unwrap();
        let first = done.iter().skip(1).position(|&v| v == 1).map(|t| t as u32 + 1);
        assert_eq!(first, Some(c.latency));
        assert_eq!(c.latency, rsa_closed_form(8, 1, 1, w.stimulus.secret["key"]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 150, failure_persistence: None, ..ProptestConfig::default() })]

    /// Random designs have arbitrary `done` logic, which exercises the
    /// bit-blaster on every operator.
    #[test]
    fn bmc_matches_simulation_on_random_designs(seed in any::<u64>()) {
        let d = random_design(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let public = random_public(&d, &mut rng);
        let bound = 10;
        let want = simulated_classes(&d, &public, bound);
        for mode in [EngineMode::Property, EngineMode::Instrumented] {
            let opts = EnumOptions::new(bound).with_mode(mode).with_pinned(public.clone());
            let r = enumerate_classes(&d, &opts).unwrap();
            prop_assert!(r.exhausted);
            prop_assert_eq!(&r.latencies(), &want, "{:?}", mode);
        }
    }
}
