//! Expression sets per leakage model and the wires that need them.

use std::collections::BTreeSet;

use super::{Granularity, LeakageModel};
use crate::bitvec::BitVec;
use crate::expr::Expr;
use crate::netlist::{Circuit, Split, StructuralIndex, WireId};
use crate::sim::{LeakSet, Valuation};
use crate::verify::ExprSet;

/// One set to check, with the probe name it is reported under.
#[derive(Debug, Clone)]
pub struct Request {
    pub name: String,
    /// Bit rank under bit granularity.
    pub bit: Option<u32>,
    pub set: ExprSet,
}

fn flat(lsets: &[LeakSet]) -> impl Iterator<Item = Expr> + '_ {
    lsets.iter().flatten().cloned()
}

/// Table of sets for `cur` at cycle t, given the valuation at t-1 (`None`
/// at cycle 0, where the current valuation stands in for the previous one).
pub fn expr_sets_for(
    name: &str,
    cur: &Valuation,
    prev: Option<&Valuation>,
    model: &LeakageModel,
) -> Vec<Request> {
    let prev = prev.unwrap_or(cur);
    let (g, t) = (model.glitches, model.transitions);
    match model.granularity {
        Granularity::SupportWise => {
            let items: Vec<Expr> = match (g, t) {
                (false, false) => vec![cur.symb.clone()],
                (false, true) => vec![cur.symb.clone(), prev.symb.clone()],
                (true, false) => flat(&cur.lset).collect(),
                (true, true) if model.overapprox => {
                    flat(&prev.lset).chain(flat(&cur.lset)).collect()
                }
                (true, true) => std::iter::once(prev.symb.clone())
                    .chain(flat(&cur.lset))
                    .collect(),
            };
            vec![Request {
                name: name.to_string(),
                bit: None,
                set: ExprSet::new(items),
            }]
        }
        Granularity::Bit => (0..cur.width())
            .map(|i| {
                let b = i as usize;
                let items: Vec<Expr> = match (g, t) {
                    (false, false) => vec![cur.symb.bit_at(i)],
                    (false, true) => vec![cur.symb.bit_at(i), prev.symb.bit_at(i)],
                    (true, false) => cur.lset[b].iter().cloned().collect(),
                    (true, true) if model.overapprox => prev.lset[b]
                        .iter()
                        .chain(&cur.lset[b])
                        .cloned()
                        .collect(),
                    (true, true) => std::iter::once(prev.symb.bit_at(i))
                        .chain(cur.lset[b].iter().cloned())
                        .collect(),
                };
                Request {
                    name: if cur.width() == 1 {
                        name.to_string()
                    } else {
                        format!("{name}[{i}]")
                    },
                    bit: Some(i),
                    set: ExprSet::new(items),
                }
            })
            .collect(),
    }
}

/// Valuation of a split parent rebuilt from its 1-bit members.
pub fn recombine_split(split: &Split, vals: &[Valuation]) -> Valuation {
    let mut members: Vec<(u32, WireId)> = split.bits.iter().map(|&(w, i)| (i, w)).collect();
    members.sort();
    let mut conc = 0u64;
    let mut stab = 0u64;
    let mut lset = Vec::with_capacity(members.len());
    for &(i, w) in &members {
        let v = &vals[w];
        conc |= v.conc.bits() << i;
        stab |= u64::from(v.is_stable(0)) << i;
        lset.push(v.lset[0].clone());
    }
    let symb = Expr::concat(members.iter().rev().map(|&(_, w)| vals[w].symb.clone()).collect());
    Valuation {
        conc: BitVec::new(split.width, conc),
        symb,
        lset,
        stab: BitVec::new(split.width, stab),
    }
}

/// Split parents that are not wires themselves and so need recombining.
pub fn virtual_parents(circuit: &Circuit) -> Vec<&Split> {
    circuit
        .splits()
        .iter()
        .filter(|s| circuit.wire_id(&s.parent).is_none())
        .collect()
}

/// Whether the model verifies every wire (no reduction applies).
pub fn verifies_all_wires(model: &LeakageModel) -> bool {
    !model.glitches || (model.transitions && !model.overapprox)
}

fn add_stability_inputs(
    circuit: &Circuit,
    index: &StructuralIndex,
    vals: &[Valuation],
    out: &mut BTreeSet<WireId>,
) {
    for (g, gate) in circuit.gates().iter().enumerate() {
        if !vals[gate.output].stab.is_zero() {
            out.extend(gate.inputs.iter().copied());
        }
        if let Some(role) = index.mux_roles.get(&g) {
            let sel = &vals[role.selector];
            if sel.is_stable(0) {
                match sel.symb.as_const() {
                    Some(c) if c.bits() == 1 => out.insert(role.in0),
                    Some(_) => out.insert(role.in1),
                    None => {
                        out.insert(role.in0);
                        out.insert(role.in1)
                    }
                };
            }
        }
    }
}

/// Wires whose sets are checked at the current cycle. The reduced rule
/// applies to the glitch model and to the over-approximated
/// glitch+transition model; every other model checks all wires.
pub fn wires_to_verify(
    circuit: &Circuit,
    index: &StructuralIndex,
    model: &LeakageModel,
    cur: &[Valuation],
    prev: Option<&[Valuation]>,
    past_stability: bool,
) -> BTreeSet<WireId> {
    if verifies_all_wires(model) {
        return (0..circuit.wires().len()).collect();
    }
    let mut out = BTreeSet::new();
    out.extend(&index.register_input_wires);
    out.extend(&index.primary_output_wires);
    out.extend(&index.split_wires);
    out.extend(&index.partially_used);
    out.extend(&index.dangling);
    out.extend(&index.mem_write_inputs);
    add_stability_inputs(circuit, index, cur, &mut out);
    if model.overapprox && past_stability {
        if let Some(prev) = prev {
            add_stability_inputs(circuit, index, prev, &mut out);
        }
    }
    out
}
