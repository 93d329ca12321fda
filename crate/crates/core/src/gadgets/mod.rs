//! Generators for masked gadgets, the counterexample fixtures and random
//! circuits.

mod random;

use std::collections::BTreeSet;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bitvec::BitVec;
use crate::expr::{Assignment, Expr, SymbolKind, SymbolTable};
use crate::netlist::{Circuit, CircuitBuilder, GateKind, WireId};
use crate::sim::{InputValue, Stimuli};
use crate::verify::GadgetSpec;

pub use random::{gen_random_circuit, RandomParams};

/// A circuit with labels and stimuli, ready to simulate or to write out.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub circuit: Circuit,
    pub labels: SymbolTable,
    pub stimuli: Stimuli,
}

impl Fixture {
    /// Writes `<name>.json`, `<name>.labels.json` and `<name>.stim.jsonl`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let base = dir.join(&self.name);
        std::fs::write(base.with_extension("json"), self.circuit.to_json())?;
        std::fs::write(
            dir.join(format!("{}.labels.json", self.name)),
            self.labels.to_json(),
        )?;
        std::fs::write(
            dir.join(format!("{}.stim.jsonl", self.name)),
            self.stimuli.to_jsonl(),
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Dom,
    Isw,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GadgetConfig {
    pub scheme: Scheme,
    pub order: u32,
    /// Register the refreshed cross-domain products (DOM style).
    pub register_cross_terms: bool,
    /// Prefix of the fresh mask names; `z` gives `z01`, `z02`, ...
    pub mask_prefix: String,
}

impl GadgetConfig {
    pub fn dom(order: u32) -> Self {
        GadgetConfig {
            scheme: Scheme::Dom,
            order,
            register_cross_terms: true,
            mask_prefix: "z".into(),
        }
    }

    pub fn isw(order: u32) -> Self {
        GadgetConfig {
            scheme: Scheme::Isw,
            order,
            register_cross_terms: false,
            mask_prefix: "z".into(),
        }
    }

    pub fn name(&self) -> String {
        match self.scheme {
            Scheme::Dom => format!("dom_and_d{}", self.order),
            Scheme::Isw => format!("isw_and_d{}", self.order),
        }
    }

    /// Number of fresh masks: one per share pair.
    pub fn mask_count(&self) -> usize {
        let n = self.order as usize + 1;
        n * (n - 1) / 2
    }
}

/// Masked AND of `a` and `b` over `order + 1` shares, run for two cycles
/// with the inputs held.
pub fn gen_gadget(cfg: &GadgetConfig) -> GadgetSpec {
    assert!(cfg.order >= 1, "gadget order must be at least 1");
    let n = cfg.order as usize + 1;
    let mut b = CircuitBuilder::new();
    let mut labels = SymbolTable::new();
    let share = |s: &str, i: usize| format!("{s}{i}");
    let mask = |i: usize, j: usize| format!("{}{i}{j}", cfg.mask_prefix);

    let mut a = Vec::new();
    let mut bb = Vec::new();
    for (secret, wires) in [("a", &mut a), ("b", &mut bb)] {
        for i in 0..n {
            let name = share(secret, i);
            wires.push(b.input(&name, 1));
            labels
                .declare(
                    &name,
                    1,
                    SymbolKind::Share {
                        secret: secret.into(),
                        index: i as u32,
                    },
                )
                .expect("fresh label");
        }
    }
    let mut z = vec![vec![None; n]; n];
    let mut randomness = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let name = mask(i, j);
            let w = b.input(&name, 1);
            labels.declare(&name, 1, SymbolKind::Mask).expect("fresh label");
            z[i][j] = Some(w);
            z[j][i] = Some(w);
            randomness.push(name);
        }
    }

    let mut p = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            p[i][j] = b.op(GateKind::BitAnd, &[a[i], bb[j]], &format!("p{i}{j}"), 1);
        }
    }

    // Cross-domain terms entering the compression of share i.
    let mut cross: Vec<Vec<WireId>> = vec![Vec::new(); n];
    match cfg.scheme {
        Scheme::Dom => {
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    let zij = z[i][j].expect("mask");
                    let f = b.op(GateKind::BitXor, &[p[i][j], zij], &format!("f{i}{j}"), 1);
                    let term = if cfg.register_cross_terms {
                        let q = b.wire(&format!("q{i}{j}"), 1);
                        b.register(f, q, BitVec::zero(1));
                        q
                    } else {
                        f
                    };
                    cross[i].push(term);
                }
            }
        }
        Scheme::Isw => {
            let mut r = vec![vec![None; n]; n];
            for i in 0..n {
                for j in i + 1..n {
                    let zij = z[i][j].expect("mask");
                    let u = b.op(GateKind::BitXor, &[zij, p[i][j]], &format!("u{i}{j}"), 1);
                    let v = b.op(GateKind::BitXor, &[u, p[j][i]], &format!("v{j}{i}"), 1);
                    let v = if cfg.register_cross_terms {
                        let q = b.wire(&format!("q{j}{i}"), 1);
                        b.register(v, q, BitVec::zero(1));
                        q
                    } else {
                        v
                    };
                    r[i][j] = Some(zij);
                    r[j][i] = Some(v);
                }
            }
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    cross[i].push(r[i][j].expect("term"));
                }
            }
        }
    }

    let mut outputs = Vec::new();
    for (i, terms) in cross.iter().enumerate() {
        let mut acc = p[i][i];
        for (k, &t) in terms.iter().enumerate() {
            let name = if k + 1 == terms.len() {
                format!("c{i}")
            } else {
                format!("s{i}{k}")
            };
            acc = b.op(GateKind::BitXor, &[acc, t], &name, 1);
        }
        b.mark_output(acc);
        outputs.push(acc);
    }
    let circuit = b.finish().expect("generated gadget is well formed");

    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(cfg.order) * 2 + cfg.scheme as u64);
    let witness: Assignment = labels
        .iter()
        .map(|(name, _)| (name.to_string(), BitVec::new(1, rng.gen_range(0..2))))
        .collect();
    let mut stimuli = Stimuli::new(witness);
    for _ in 0..2 {
        stimuli.push(
            labels
                .iter()
                .map(|(name, _)| (name.to_string(), InputValue::Symbol(name.to_string()))),
        );
    }
    GadgetSpec {
        circuit,
        labels,
        stimuli,
        inputs: ["a", "b"]
            .iter()
            .map(|s| (s.to_string(), (0..n).map(|i| share(s, i)).collect()))
            .collect(),
        outputs,
        randomness,
        order: cfg.order,
    }
}

pub fn gen_dom_and(order: u32) -> GadgetSpec {
    gen_gadget(&GadgetConfig::dom(order))
}

pub fn gen_isw_and(order: u32) -> GadgetSpec {
    gen_gadget(&GadgetConfig::isw(order))
}

/// Reads the share interface of a gadget off its labels: every secret with
/// shares is an input, every mask is randomness, primary outputs are the
/// output shares.
pub fn gadget_from_parts(
    circuit: Circuit,
    labels: SymbolTable,
    stimuli: Stimuli,
    order: u32,
) -> GadgetSpec {
    let secrets: BTreeSet<String> = labels
        .iter()
        .filter_map(|(_, i)| match &i.kind {
            SymbolKind::Share { secret, .. } => Some(secret.clone()),
            _ => None,
        })
        .collect();
    let inputs = secrets
        .into_iter()
        .map(|s| {
            let shares = labels
                .shares_of(&s)
                .into_iter()
                .map(|(_, n)| n.to_string())
                .collect();
            (s, shares)
        })
        .collect();
    let randomness = labels
        .iter()
        .filter(|(_, i)| i.kind == SymbolKind::Mask)
        .map(|(n, _)| n.to_string())
        .collect();
    GadgetSpec {
        outputs: circuit.outputs().to_vec(),
        circuit,
        labels,
        stimuli,
        inputs,
        randomness,
        order,
    }
}

impl From<(&str, GadgetSpec)> for Fixture {
    fn from((name, g): (&str, GadgetSpec)) -> Fixture {
        Fixture {
            name: name.to_string(),
            circuit: g.circuit,
            labels: g.labels,
            stimuli: g.stimuli,
        }
    }
}

fn km_labels() -> SymbolTable {
    SymbolTable::new()
        .with("k", 1, SymbolKind::Secret)
        .with("m", 1, SymbolKind::Mask)
}

fn km_witness() -> Assignment {
    [("k", 1), ("m", 0)]
        .into_iter()
        .map(|(n, v)| (n.to_string(), BitVec::new(1, v)))
        .collect()
}

fn km() -> Expr {
    Expr::xor(&Expr::symbol("k", 1), &Expr::symbol("m", 1))
}

fn konst(v: u64) -> InputValue {
    InputValue::Const(BitVec::new(1, v))
}

/// `o0 = i0 & i1`; `i1` carries `k^m` then `m`, so `i1` leaks under
/// transitions while `o0` does not.
pub fn fig5() -> Fixture {
    let mut b = CircuitBuilder::new();
    let i0 = b.input("i0", 1);
    let i1 = b.input("i1", 1);
    let o0 = b.op(GateKind::BitAnd, &[i0, i1], "o0", 1);
    b.mark_output(o0);
    let mut stimuli = Stimuli::new(km_witness());
    stimuli.push([
        ("i0".to_string(), konst(0)),
        ("i1".to_string(), InputValue::Expr(km())),
    ]);
    stimuli.push([
        ("i0".to_string(), konst(1)),
        ("i1".to_string(), InputValue::Symbol("m".into())),
    ]);
    Fixture {
        name: "fig5".into(),
        circuit: b.finish().expect("fig5"),
        labels: km_labels(),
        stimuli,
    }
}

/// A 2-bit value `CONCAT(m, k^m)` split into two 1-bit register inputs.
pub fn fig6() -> Fixture {
    let mut b = CircuitBuilder::new();
    let lo = b.input("i_0", 1);
    let hi = b.input("i_1", 1);
    let r0 = b.wire("r0", 1);
    let r1 = b.wire("r1", 1);
    b.register(lo, r0, BitVec::zero(1));
    b.register(hi, r1, BitVec::zero(1));
    b.mark_output(r0);
    b.mark_output(r1);
    b.split("i", 2, vec![(lo, 0), (hi, 1)]);
    let mut stimuli = Stimuli::new(km_witness());
    for _ in 0..2 {
        stimuli.push([
            ("i_0".to_string(), InputValue::Expr(km())),
            ("i_1".to_string(), InputValue::Symbol("m".into())),
        ]);
    }
    Fixture {
        name: "fig6".into(),
        circuit: b.finish().expect("fig6"),
        labels: km_labels(),
        stimuli,
    }
}

/// Like [`fig5`], but `i0` is a register output: stable `0` at the first
/// cycle, so the AND gate is stable then and hides `i1`.
pub fn fig7() -> Fixture {
    let mut b = CircuitBuilder::new();
    let d = b.input("i0_d", 1);
    let i0 = b.wire("i0", 1);
    b.register(d, i0, BitVec::zero(1));
    let i1 = b.input("i1", 1);
    let o0 = b.op(GateKind::BitAnd, &[i0, i1], "o0", 1);
    b.mark_output(o0);
    let mut stimuli = Stimuli::new(km_witness());
    stimuli.push([
        ("i0_d".to_string(), konst(1)),
        ("i1".to_string(), InputValue::Expr(km())),
    ]);
    stimuli.push([
        ("i0_d".to_string(), konst(1)),
        ("i1".to_string(), InputValue::Symbol("m".into())),
    ]);
    Fixture {
        name: "fig7".into(),
        circuit: b.finish().expect("fig7"),
        labels: km_labels(),
        stimuli,
    }
}

pub fn gen_counterexamples() -> Vec<Fixture> {
    vec![fig5(), fig6(), fig7()]
}

/// Every named fixture: the counterexamples and the gadgets at orders 1-2.
pub fn all_fixtures() -> Vec<Fixture> {
    let mut out = gen_counterexamples();
    for order in 1..=2 {
        for cfg in [GadgetConfig::dom(order), GadgetConfig::isw(order)] {
            out.push(Fixture::from((cfg.name().as_str(), gen_gadget(&cfg))));
        }
    }
    out
}

/// Looks up a fixture by name, including gadgets of any order
/// (`dom_and_d3`).
pub fn fixture(name: &str) -> Option<Fixture> {
    match name {
        "fig5" => Some(fig5()),
        "fig6" => Some(fig6()),
        "fig7" => Some(fig7()),
        _ => {
            let (cfg, order) = if let Some(d) = name.strip_prefix("dom_and_d") {
                (GadgetConfig::dom as fn(u32) -> GadgetConfig, d)
            } else {
                (GadgetConfig::isw as fn(u32) -> GadgetConfig, name.strip_prefix("isw_and_d")?)
            };
            let order: u32 = order.parse().ok().filter(|d| (1..=6).contains(d))?;
            Some(Fixture::from((name, gen_gadget(&cfg(order)))))
        }
    }
}
