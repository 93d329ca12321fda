mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use common::*;
use probecheck::expr::{Assignment, SymbolKind, SymbolTable};
use probecheck::gadgets::{gen_random_circuit, RandomParams};
use probecheck::manager::{self, Granularity, LeakReport, LeakageModel, RunOptions};
use probecheck::sim::{consistency_check, Simulator};
use probecheck::verify::{
    check, check_enumeration, check_substitution, ExprSet, Strategy, Verdict, Witness,
};

#[test]
fn substitution_secure_implies_enumeration_secure() {
    let labels = small_labels();
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        ..Config::default()
    });
    let secure = std::cell::Cell::new(0usize);
    runner
        .run(&expr_set(), |set| {
            if check_substitution(&set, &labels).is_secure() {
                secure.set(secure.get() + 1);
                let exact = check_enumeration(&set, &labels, 20).unwrap();
                prop_assert!(exact.is_secure(), "{:?}: {exact}", set.renderings());
            }
            Ok(())
        })
        .unwrap();
    assert!(secure.get() >= 100, "only {} secure samples", secure.get());
}

/// Re-derives the witness counts by brute force over the masks of the set.
fn recount(set: &ExprSet, labels: &SymbolTable, w: &Witness, secret: &Assignment) -> u64 {
    let masks: Vec<String> = set
        .symbols()
        .into_iter()
        .filter(|s| matches!(labels.get(s).map(|i| &i.kind), Some(SymbolKind::Mask)))
        .collect();
    let mut sub = SymbolTable::new();
    for m in &masks {
        let info = labels.get(m).unwrap();
        sub.declare(m, info.width, info.kind.clone()).unwrap();
    }
    assignments(&sub)
        .into_iter()
        .filter(|a| {
            let mut full = a.clone();
            full.extend(w.fixed.clone());
            full.extend(secret.clone());
            set.members()
                .iter()
                .zip(&w.observation)
                .all(|(e, &o)| e.eval_concrete(&full).unwrap().bits() == o)
        })
        .count() as u64
}

proptest! {
    #![proptest_config(Config { cases: 300, ..Config::default() })]

    #[test]
    fn enumeration_witness_counts_are_reproducible(set in expr_set()) {
        let labels = small_labels();
        // Shares are re-parameterised by the engine; keep to plain symbols.
        prop_assume!(set.symbols().iter().all(|s| !s.starts_with('x')));
        if let Verdict::Leaks(w) = check_enumeration(&set, &labels, 20).unwrap() {
            prop_assert_ne!(w.count_a, w.count_b);
            prop_assert_eq!(recount(&set, &labels, &w, &w.secret_a), w.count_a);
            prop_assert_eq!(recount(&set, &labels, &w, &w.secret_b), w.count_b);
        }
    }

    #[test]
    fn check_agrees_with_enumeration(set in expr_set()) {
        let labels = small_labels();
        let exact = check_enumeration(&set, &labels, 20).unwrap();
        let combined = check(&set, &labels, Strategy::default());
        prop_assert_eq!(exact.is_secure(), combined.is_secure());
    }

    #[test]
    fn superset_of_leaking_set_leaks(a in expr_set(), b in expr_set()) {
        let labels = small_labels();
        if check_enumeration(&a, &labels, 20).unwrap().is_leak() {
            let u = a.union(&b);
            prop_assert!(check_enumeration(&u, &labels, 20).unwrap().is_leak());
        }
    }
}

fn leaks(r: &LeakReport) -> BTreeSet<(usize, String)> {
    r.findings().map(|e| (e.cycle, e.wire.clone())).collect()
}

fn run_all(seed: u64, model: LeakageModel) -> LeakReport {
    let f = gen_random_circuit(seed, &RandomParams::default());
    let options = RunOptions {
        all_wires: true,
        ..RunOptions::default()
    };
    manager::run(&f.circuit, &f.stimuli, &f.labels, &model, &options).unwrap()
}

proptest! {
    #![proptest_config(Config { cases: 40, ..Config::default() })]

    #[test]
    fn adding_transitions_only_adds_findings(seed in any::<u64>()) {
        for g in [false, true] {
            let without = leaks(&run_all(seed, LeakageModel::new(g, false)));
            let with = leaks(&run_all(seed, LeakageModel::new(g, true)));
            prop_assert!(without.is_subset(&with), "g={g}: {:?} vs {:?}", without, with);
        }
    }

    #[test]
    fn support_wise_covers_bit_findings(seed in any::<u64>()) {
        for (g, t) in [(false, false), (true, false), (false, true), (true, true)] {
            let bit = run_all(seed, LeakageModel::new(g, t).with_granularity(Granularity::Bit));
            let sw = leaks(&run_all(seed, LeakageModel::new(g, t)));
            for (cycle, name) in leaks(&bit) {
                let wire = name.split('[').next().unwrap().to_string();
                prop_assert!(sw.contains(&(cycle, wire.clone())), "({g},{t}) {name}@{cycle}");
            }
        }
    }

    #[test]
    fn cache_is_transparent(seed in any::<u64>()) {
        let f = gen_random_circuit(seed, &RandomParams::default());
        let model = LeakageModel::rr1sw();
        let run = |cache| {
            let o = RunOptions { cache, ..RunOptions::default() };
            manager::run(&f.circuit, &f.stimuli, &f.labels, &model, &o).unwrap()
        };
        let (on, off) = (run(true), run(false));
        prop_assert_eq!(on.verdict_multiset(), off.verdict_multiset());
        prop_assert_eq!(on.to_jsonl(), run(true).to_jsonl());
    }
}

#[test]
fn reduced_wire_set_matches_all_wires() {
    let mismatches: Vec<String> = (0..200).filter_map(|s| reduction_agrees(s).err()).collect();
    assert!(mismatches.is_empty(), "{mismatches:#?}");
}

#[test]
fn leaksets_cover_toggled_values() {
    let mut checked = 0;
    for seed in 0..150 {
        let f = gen_random_circuit(seed, &toggle_params());
        let s = toggle_oracle(&f);
        assert!(s.lset_misses.is_empty(), "seed {seed}: {:?}", s.lset_misses);
        assert!(s.stab_misses.is_empty(), "seed {seed}: {:?}", s.stab_misses);
        if s.cycles > 0 {
            checked += 1;
        }
    }
    assert!(checked >= 100, "only {checked} circuits had toggling bits");
}

#[test]
fn random_circuits_stay_coherent() {
    for seed in 0..200 {
        let f = gen_random_circuit(seed, &RandomParams::default());
        let mut sim = Simulator::with_defaults(&f.circuit, f.stimuli.witness.clone()).unwrap();
        for frame in &f.stimuli.frames {
            sim.step(frame).unwrap();
            consistency_check(&f.circuit, sim.state(), &f.stimuli.witness)
                .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        }
    }
}
