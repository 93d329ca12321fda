//! One pass/fail line per acceptance criterion. Run with `--nocapture` to
//! see the lines; the test fails if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use proptest::test_runner::{Config, TestRunner};

use common::*;
use probecheck::expr::Expr;
use probecheck::gadgets::{
    all_fixtures, fig5, fig6, fig7, gen_dom_and, gen_isw_and, gen_random_circuit, Fixture,
    RandomParams,
};
use probecheck::manager::{
    self, probe_positions, verify_order, DupletMode, Granularity, LeakReport, LeakageModel,
    RunOptions,
};
use probecheck::sim::{consistency_check, LeakSet, Simulator, Valuation};
use probecheck::verify::{check_enumeration, check_ni, check_sni, check_substitution, Strategy};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn leaks(r: &LeakReport) -> Vec<(usize, String)> {
    r.findings().map(|e| (e.cycle, e.wire.clone())).collect()
}

fn run(f: &Fixture, model: LeakageModel, options: &RunOptions) -> Result<LeakReport, String> {
    manager::run(&f.circuit, &f.stimuli, &f.labels, &model, options).map_err(|e| e.to_string())
}

fn trace(f: &Fixture) -> Vec<Vec<Valuation>> {
    let mut sim = Simulator::with_defaults(&f.circuit, f.stimuli.witness.clone()).unwrap();
    let mut out = Vec::new();
    sim.run(&f.stimuli, |s| {
        out.push(s.current().to_vec());
        Ok(true)
    })
    .unwrap();
    out
}

fn k() -> Expr {
    Expr::symbol("k", 1)
}

fn m() -> Expr {
    Expr::symbol("m", 1)
}

fn criterion_1() -> Outcome {
    let f = fig5();
    let rows = trace(&f);
    let km = Expr::xor(&k(), &m());
    let set = |items: &[Expr]| -> LeakSet { items.iter().cloned().collect() };
    // (wire, cycle, symb, lset, stable)
    let table = [
        ("i0", 0, Expr::zero(1), set(&[]), false),
        ("i1", 0, km.clone(), set(&[km.clone()]), false),
        ("o0", 0, Expr::zero(1), set(&[km.clone()]), false),
        ("i0", 1, Expr::const_bits(1, 1), set(&[]), false),
        ("i1", 1, m(), set(&[m()]), false),
        ("o0", 1, m(), set(&[m()]), false),
    ];
    for (wire, t, symb, lset, stable) in &table {
        let v = &rows[*t][f.circuit.wire_id(wire).unwrap()];
        ensure(&v.symb == symb, format!("{wire}@{t} symb"))?;
        ensure(&v.lset[0] == lset, format!("{wire}@{t} lset"))?;
        ensure(v.is_stable(0) == *stable, format!("{wire}@{t} stab"))?;
    }
    for (g, t) in [(false, true), (true, true)] {
        let r = run(&f, LeakageModel::new(g, t), &RunOptions::default())?;
        ensure(
            leaks(&r) == vec![(1, "i1".to_string())],
            format!("({},{}) flagged {:?}", u8::from(g), u8::from(t), leaks(&r)),
        )?;
    }
    Ok("18 table cells exact; (0,1) and (1,1) flag only i1 at cycle t".into())
}

fn criterion_2() -> Outcome {
    let f = fig6();
    let sw = run(&f, LeakageModel::new(true, false), &RunOptions::default())?;
    let found = leaks(&sw);
    ensure(!found.is_empty(), "support-wise run found nothing")?;
    ensure(
        found.iter().all(|(_, w)| w == "i"),
        format!("support-wise flagged {found:?}"),
    )?;
    let km = Expr::xor(&k(), &m());
    let rows = trace(&f);
    let parent = manager::recombine_split(manager::virtual_parents(&f.circuit)[0], &rows[0]);
    ensure(
        parent.symb == Expr::concat(vec![m(), km.clone()]),
        format!("parent symb {:?}", parent.symb),
    )?;
    let entry = sw.entries.iter().find(|e| e.wire == "i").unwrap();
    let want = probecheck::verify::ExprSet::new([km, m()]).renderings();
    ensure(entry.exprs == want, format!("parent set {:?}", entry.exprs))?;
    let bit = LeakageModel::new(true, false).with_granularity(Granularity::Bit);
    let r = run(&f, bit, &RunOptions::default())?;
    ensure(!r.has_findings(), format!("bit run flagged {:?}", leaks(&r)))?;
    Ok(format!("sw flags parent i at cycles {:?}; bit flags nothing", sw.leaking_cycle_set()))
}

fn criterion_3() -> Outcome {
    let f = fig7();
    let r = run(&f, LeakageModel::rr1sw(), &RunOptions::default())?;
    ensure(
        leaks(&r) == vec![(1, "i1".to_string())],
        format!("rr1sw flagged {:?}", leaks(&r)),
    )?;
    let off = RunOptions {
        past_stability: false,
        ..RunOptions::default()
    };
    let r = run(&f, LeakageModel::rr1sw(), &off)?;
    ensure(!r.has_findings(), format!("control flagged {:?}", leaks(&r)))?;
    Ok("i1 flagged at cycle t; negative control without the t-1 rule flags nothing".into())
}

fn criterion_4() -> Outcome {
    let expected = [
        ("DOM", gen_dom_and(2), [true, true, true, false]),
        ("ISW", gen_isw_and(2), [true, false, true, false]),
    ];
    let mut cells = Vec::new();
    for (name, g, want) in expected {
        // NI without, NI with, SNI without, SNI with
        let got = [
            check_ni(&g, 2, false),
            check_ni(&g, 2, true),
            check_sni(&g, 2, false),
            check_sni(&g, 2, true),
        ];
        for (i, (v, secure)) in got.into_iter().zip(want).enumerate() {
            let v = v.map_err(|e| e.to_string())?;
            let label = format!("{name} {} g={}", ["NI", "NI", "SNI", "SNI"][i], i % 2);
            ensure(v.is_secure() == secure, format!("{label}: {v}"))?;
            if !secure {
                let w = v.witness().ok_or(format!("{label}: no witness"))?;
                ensure(
                    !w.probes.is_empty() && w.count_a != w.count_b,
                    format!("{label}: empty witness"),
                )?;
            }
            cells.push(format!("{label}:{}", if secure { "ok" } else { "x" }));
        }
    }
    Ok(cells.join(" "))
}

fn choose(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

fn criterion_5() -> Outcome {
    let model = LeakageModel::new(true, false);
    let mut notes = Vec::new();
    for (order, d, want_secure) in [(1, 2, false), (2, 2, true), (2, 3, false)] {
        let g = gen_dom_and(order);
        let pos = probe_positions(&g.circuit, &g.stimuli, &model, &RunOptions::default())
            .map_err(|e| e.to_string())?;
        let r = verify_order(&pos, &g.labels, d, DupletMode::Spatial, Strategy::default(), 1 << 40, false)
            .map_err(|e| e.to_string())?;
        ensure(
            r.verdict.is_secure() == want_secure,
            format!("order {order} d={d}: {}", r.verdict),
        )?;
        let cycles: BTreeSet<usize> = pos.iter().map(|p| p.cycle).collect();
        let expected: u128 = cycles
            .iter()
            .map(|c| choose(pos.iter().filter(|p| p.cycle == *c).count() as u128, d as u128))
            .sum();
        ensure(
            r.checked == expected,
            format!("order {order} d={d}: {} d-uplets, expected {expected}", r.checked),
        )?;
        for (_, p, n) in &r.groups {
            ensure(*n == choose(*p as u128, d as u128), "group count")?;
        }
        notes.push(format!("o{order}/d{d}:{}({})", if want_secure { "ok" } else { "x" }, r.checked));
    }
    Ok(notes.join(" "))
}

fn criterion_6() -> Outcome {
    let labels = small_labels();
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let secure = std::cell::Cell::new(0usize);
    runner
        .run(&expr_set(), |set| {
            if check_substitution(&set, &labels).is_secure() {
                secure.set(secure.get() + 1);
                let exact = check_enumeration(&set, &labels, 20).unwrap();
                proptest::prop_assert!(exact.is_secure(), "{:?}", set.renderings());
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    ensure(secure.get() > 0, "no substitution-secure samples")?;
    Ok(format!("1000 sets, {} substitution-secure, 0 violations", secure.get()))
}

fn criterion_7() -> Outcome {
    let mismatches: Vec<String> = (0..200).filter_map(|s| reduction_agrees(s).err()).collect();
    ensure(mismatches.is_empty(), format!("{mismatches:?}"))?;
    Ok("200 circuits x 4 cycles under (1,0), 0 mismatches".into())
}

fn criterion_8() -> Outcome {
    let mut circuits = 0;
    let mut patterns = 0;
    let mut widest = 0;
    for seed in 0..150 {
        let f = gen_random_circuit(seed, &toggle_params());
        let s = toggle_oracle(&f);
        ensure(s.lset_misses.is_empty(), format!("seed {seed}: {:?}", s.lset_misses))?;
        ensure(s.stab_misses.is_empty(), format!("seed {seed}: {:?}", s.stab_misses))?;
        if s.cycles > 0 {
            circuits += 1;
        }
        patterns += s.patterns;
        widest = widest.max(s.max_toggling);
    }
    ensure(circuits >= 100, format!("only {circuits} circuits toggled"))?;
    Ok(format!(
        "{circuits} circuits with toggling bits (max {widest}), {patterns} patterns, 0 misses"
    ))
}

fn coherent(f: &Fixture) -> Result<(), String> {
    let mut sim = Simulator::with_defaults(&f.circuit, f.stimuli.witness.clone())
        .map_err(|e| e.to_string())?;
    for frame in &f.stimuli.frames {
        sim.step(frame).map_err(|e| format!("{}: {e}", f.name))?;
        consistency_check(&f.circuit, sim.state(), &f.stimuli.witness)
            .map_err(|e| format!("{}: {e}", f.name))?;
    }
    Ok(())
}

fn criterion_9() -> Outcome {
    let fixtures = all_fixtures();
    for f in &fixtures {
        coherent(f)?;
    }
    for seed in 0..200 {
        coherent(&gen_random_circuit(seed, &RandomParams::default()))?;
    }
    Ok(format!("{} fixtures and 200 random circuits coherent", fixtures.len()))
}

fn criterion_10() -> Outcome {
    let mut subjects: Vec<Fixture> = all_fixtures();
    subjects.extend((0..20).map(|s| gen_random_circuit(s, &RandomParams::default())));
    let models = [
        LeakageModel::new(false, false),
        LeakageModel::new(false, true),
        LeakageModel::new(true, false),
        LeakageModel::rr1sw(),
    ];
    let mut runs = 0;
    for f in &subjects {
        for model in models {
            let on = run(f, model, &RunOptions::default())?;
            let off = run(
                f,
                model,
                &RunOptions {
                    cache: false,
                    ..RunOptions::default()
                },
            )?;
            ensure(
                on.verdict_multiset() == off.verdict_multiset(),
                format!("{}: cache changed verdicts", f.name),
            )?;
            let again = run(
                f,
                model,
                &RunOptions {
                    jobs: 4,
                    ..RunOptions::default()
                },
            )?;
            ensure(on.to_jsonl() == again.to_jsonl(), format!("{}: reports differ", f.name))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} runs: cache on/off identical, reruns byte-identical"))
}

#[test]
fn acceptance() {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 10] = [
        (1, "fig5 table and flags", Duration::from_secs(1), criterion_1),
        (2, "fig6 split parent", Duration::from_secs(1), criterion_2),
        (3, "fig7 past stability", Duration::from_secs(1), criterion_3),
        (4, "NI/SNI gadget verdicts", Duration::from_secs(300), criterion_4),
        (5, "higher-order verdicts", Duration::from_secs(600), criterion_5),
        (6, "substitution soundness", Duration::MAX, criterion_6),
        (7, "wire-reduction equivalence", Duration::MAX, criterion_7),
        (8, "glitch over-approximation", Duration::MAX, criterion_8),
        (9, "domain coherence", Duration::MAX, criterion_9),
        (10, "cache transparency and determinism", Duration::MAX, criterion_10),
    ];
    let mut failed = Vec::new();
    for (n, name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f)
            .unwrap_or_else(|_| Err("panicked".into()))
            .and_then(|detail| {
                let took = start.elapsed();
                if took > budget {
                    Err(format!("took {took:.2?}, budget {budget:.0?}"))
                } else {
                    Ok(detail)
                }
            });
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS {name} [{took:.2?}]: {detail}"),
            Err(why) => {
                println!("criterion {n:>2} FAIL {name} [{took:.2?}]: {why}");
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
