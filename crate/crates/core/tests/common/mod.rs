//! Generators and brute-force oracles shared by the property suites and
//! the acceptance target.
#![allow(dead_code)]

use std::collections::HashMap;

use proptest::prelude::*;

use probecheck::bitvec::BitVec;
use probecheck::expr::{Assignment, Expr, SymbolKind, SymbolTable};
use probecheck::gadgets::{gen_random_circuit, Fixture, RandomParams};
use probecheck::manager::{self, LeakageModel, RunOptions};
use probecheck::netlist::{validate_and_schedule, Driver};
use probecheck::sim::{eval_gate, Simulator, Valuation};
use probecheck::verify::ExprSet;

/// Fifteen symbolic bits: two secrets, four masks, a public and a
/// two-share secret.
pub fn small_labels() -> SymbolTable {
    let mut t = SymbolTable::new();
    t.declare("k", 2, SymbolKind::Secret).unwrap();
    t.declare("s", 1, SymbolKind::Secret).unwrap();
    t.declare("m0", 2, SymbolKind::Mask).unwrap();
    t.declare("m1", 2, SymbolKind::Mask).unwrap();
    t.declare("m2", 2, SymbolKind::Mask).unwrap();
    t.declare("m3", 1, SymbolKind::Mask).unwrap();
    t.declare("p", 1, SymbolKind::Public).unwrap();
    for index in 0..2 {
        let kind = SymbolKind::Share {
            secret: "x".into(),
            index,
        };
        t.declare(&format!("x{index}"), 2, kind).unwrap();
    }
    t
}

const SYMS: &[(&str, u32)] = &[
    ("k", 2),
    ("s", 1),
    ("m0", 2),
    ("m1", 2),
    ("m2", 2),
    ("m3", 1),
    ("p", 1),
    ("x0", 2),
    ("x1", 2),
];

#[derive(Debug, Clone)]
pub enum Tree {
    Sym(usize, u32),
    Const(u64),
    Not(Box<Tree>),
    Xor(Box<Tree>, Box<Tree>),
    And(Box<Tree>, Box<Tree>),
    Or(Box<Tree>, Box<Tree>),
    Add(Box<Tree>, Box<Tree>),
    Concat(Box<Tree>, Box<Tree>),
}

impl Tree {
    /// The term at `width` bits, slicing or extending symbols as needed.
    pub fn build(&self, width: u32) -> Expr {
        match self {
            Tree::Sym(i, lo) => {
                let (name, w) = SYMS[*i];
                let s = Expr::symbol(name, w);
                if w > width {
                    let lo = (*lo).min(w - width);
                    s.extract(lo + width - 1, lo)
                } else if w < width {
                    s.zext(width)
                } else {
                    s
                }
            }
            Tree::Const(c) => Expr::const_bits(width, c & ((1 << width) - 1)),
            Tree::Not(a) => Expr::not(&a.build(width)),
            Tree::Xor(a, b) => Expr::xor(&a.build(width), &b.build(width)),
            Tree::And(a, b) => Expr::and(&a.build(width), &b.build(width)),
            Tree::Or(a, b) => Expr::or(&a.build(width), &b.build(width)),
            Tree::Add(a, b) => Expr::add(&a.build(width), &b.build(width)),
            Tree::Concat(a, b) if width == 2 => Expr::concat(vec![a.build(1), b.build(1)]),
            Tree::Concat(a, b) => Expr::xor(&a.build(width), &b.build(width)),
        }
    }
}

pub fn tree() -> impl Strategy<Value = Tree> {
    let leaf = prop_oneof![
        4 => (0..SYMS.len(), 0..2u32).prop_map(|(i, lo)| Tree::Sym(i, lo)),
        1 => (0..4u64).prop_map(Tree::Const),
    ];
    leaf.prop_recursive(4, 16, 2, |inner| {
        let pair = (inner.clone(), inner.clone());
        prop_oneof![
            4 => pair.clone().prop_map(|(a, b)| Tree::Xor(Box::new(a), Box::new(b))),
            1 => pair.clone().prop_map(|(a, b)| Tree::And(Box::new(a), Box::new(b))),
            1 => pair.clone().prop_map(|(a, b)| Tree::Or(Box::new(a), Box::new(b))),
            1 => pair.clone().prop_map(|(a, b)| Tree::Add(Box::new(a), Box::new(b))),
            1 => pair.prop_map(|(a, b)| Tree::Concat(Box::new(a), Box::new(b))),
            1 => inner.prop_map(|a| Tree::Not(Box::new(a))),
        ]
    })
}

/// Sets of one to three terms of a common width.
pub fn expr_set() -> impl Strategy<Value = ExprSet> {
    (prop::collection::vec(tree(), 1..=3), 1..=2u32)
        .prop_map(|(trees, w)| ExprSet::new(trees.iter().map(|t| t.build(w))))
}

/// Every assignment of `labels`, in counter order.
pub fn assignments(labels: &SymbolTable) -> Vec<Assignment> {
    let syms: Vec<(String, u32)> = labels.iter().map(|(n, i)| (n.to_string(), i.width)).collect();
    let bits: u32 = syms.iter().map(|(_, w)| w).sum();
    assert!(bits <= 16, "{bits} symbolic bits is too many to enumerate");
    (0..1u64 << bits)
        .map(|mut code| {
            syms.iter()
                .map(|(n, w)| {
                    let v = code & ((1 << w) - 1);
                    code >>= w;
                    (n.clone(), BitVec::new(*w, v))
                })
                .collect()
        })
        .collect()
}

/// Small random circuits for the toggle oracle: at most eight symbolic bits
/// and at most six register bits that can toggle.
pub fn toggle_params() -> RandomParams {
    RandomParams {
        symbols: 4,
        max_width: 2,
        inputs: 2,
        registers: 3,
        cycles: 4,
        ..RandomParams::default()
    }
}

#[derive(Debug, Default)]
pub struct ToggleStats {
    /// Cycles with at least one toggling bit.
    pub cycles: usize,
    pub max_toggling: usize,
    pub patterns: usize,
    /// Wire bits whose glitch value is not a function of their LeakSet.
    pub lset_misses: Vec<String>,
    /// Wire bits marked stable whose value moves under some toggle.
    pub stab_misses: Vec<String>,
}

/// Brute-force glitch oracle. At each cycle t >= 1, every unstable
/// register-output bit independently takes its value at t-1 or at t, with
/// primary inputs at their cycle-t value. For each pattern, each wire bit's
/// value must be determined by the values of its LeakSet members across all
/// symbol assignments, and stable bits must keep their cycle-t value.
pub fn toggle_oracle(f: &Fixture) -> ToggleStats {
    let c = &f.circuit;
    let schedule = validate_and_schedule(c).unwrap();
    let mut sim = Simulator::with_defaults(c, f.stimuli.witness.clone()).unwrap();
    let mut history: Vec<Vec<Valuation>> = Vec::new();
    sim.run(&f.stimuli, |s| {
        history.push(s.current().to_vec());
        Ok(true)
    })
    .unwrap();
    let all = assignments(&f.labels);
    let mut stats = ToggleStats::default();
    for t in 1..history.len() {
        let (prev, cur) = (&history[t - 1], &history[t]);
        let toggling: Vec<(usize, u32)> = c
            .registers()
            .iter()
            .flat_map(|r| {
                let q = r.output;
                (0..cur[q].width())
                    .filter(move |&i| !cur[q].is_stable(i))
                    .map(move |i| (q, i))
            })
            .collect();
        if toggling.is_empty() {
            continue;
        }
        assert!(toggling.len() <= 10);
        stats.cycles += 1;
        stats.max_toggling = stats.max_toggling.max(toggling.len());
        let patterns = 1usize << toggling.len();
        stats.patterns += patterns;
        // (pattern, wire, bit, member values) -> observed bit
        let mut seen: HashMap<(usize, usize, u32, Vec<u64>), u64> = HashMap::new();
        for a in &all {
            let new: Vec<u64> = cur.iter().map(|v| v.symb.eval_concrete(a).unwrap().bits()).collect();
            let old: Vec<u64> = prev.iter().map(|v| v.symb.eval_concrete(a).unwrap().bits()).collect();
            let members: Vec<Vec<Vec<u64>>> = cur
                .iter()
                .map(|v| {
                    v.lset
                        .iter()
                        .map(|s| s.iter().map(|e| e.eval_concrete(a).unwrap().bits()).collect())
                        .collect()
                })
                .collect();
            for p in 0..patterns {
                let mut vals: Vec<Option<u64>> = vec![None; c.wires().len()];
                for (w, v) in vals.iter_mut().enumerate() {
                    if !matches!(c.driver(w), Driver::Gate(_)) {
                        *v = Some(new[w]);
                    }
                }
                for (k, &(q, i)) in toggling.iter().enumerate() {
                    if p >> k & 1 == 1 {
                        let v = vals[q].unwrap();
                        let bit = old[q] >> i & 1;
                        vals[q] = Some(v & !(1 << i) | bit << i);
                    }
                }
                for &g in &schedule.order {
                    let gate = &c.gates()[g];
                    let ins: Vec<BitVec> = gate
                        .inputs
                        .iter()
                        .map(|&w| BitVec::new(c.wire(w).width, vals[w].expect("scheduled")))
                        .collect();
                    let out = c.wire(gate.output).width;
                    vals[gate.output] = Some(eval_gate(gate, &ins, out).bits());
                }
                for (w, v) in vals.iter().enumerate() {
                    let v = v.expect("every wire driven");
                    for i in 0..cur[w].width() {
                        let bit = v >> i & 1;
                        let name = format!("{}[{i}]@{t}", c.wire(w).name);
                        if cur[w].is_stable(i) && bit != new[w] >> i & 1 {
                            stats.stab_misses.push(name.clone());
                        }
                        let key = (p, w, i, members[w][i as usize].clone());
                        if let Some(&prior) = seen.get(&key) {
                            if prior != bit {
                                stats.lset_misses.push(name);
                            }
                        } else {
                            seen.insert(key, bit);
                        }
                    }
                }
            }
        }
    }
    stats.lset_misses.sort();
    stats.lset_misses.dedup();
    stats.stab_misses.sort();
    stats.stab_misses.dedup();
    stats
}

/// Whether the reduced (1,0) wire set flags the same cycles as checking
/// every wire.
pub fn reduction_agrees(seed: u64) -> Result<(), String> {
    let f = gen_random_circuit(seed, &RandomParams::default());
    let model = LeakageModel::new(true, false);
    let run = |all_wires| {
        let options = RunOptions {
            all_wires,
            ..RunOptions::default()
        };
        manager::run(&f.circuit, &f.stimuli, &f.labels, &model, &options).unwrap()
    };
    let (reduced, full) = (run(false), run(true));
    if reduced.leaking_cycle_set() == full.leaking_cycle_set() {
        Ok(())
    } else {
        Err(format!(
            "seed {seed}: reduced {:?} vs all wires {:?}",
            reduced.leaking_cycle_set(),
            full.leaking_cycle_set()
        ))
    }
}
