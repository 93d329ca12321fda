use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{Circuit, Driver, GateId, GateKind, NetlistError, WireId};

/// Gate evaluation order for one cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub order: Vec<GateId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MuxRole {
    pub selector: WireId,
    pub in0: WireId,
    pub in1: WireId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StructuralIndex {
    pub register_input_wires: BTreeSet<WireId>,
    pub primary_output_wires: BTreeSet<WireId>,
    pub split_wires: BTreeSet<WireId>,
    pub mux_roles: BTreeMap<GateId, MuxRole>,
    /// Gates reading each wire, indexed by wire id.
    pub fanout: Vec<Vec<GateId>>,
    /// Wires of which some gate reads only a subset of the bits
    /// (trunc, constant shifts, blit bases).
    pub partially_used: BTreeSet<WireId>,
    /// Wires read by nothing: no fanout, not a register input, not an output.
    pub dangling: BTreeSet<WireId>,
    /// Every input of a memory write port.
    pub mem_write_inputs: BTreeSet<WireId>,
}

/// Gates that combinatorially feed gate `g`.
fn predecessors(circuit: &Circuit, g: GateId) -> impl Iterator<Item = GateId> + '_ {
    circuit.gates()[g]
        .inputs
        .iter()
        .filter_map(|&w| match circuit.driver(w) {
            Driver::Gate(src) => Some(src),
            _ => None,
        })
}

pub fn validate_and_schedule(circuit: &Circuit) -> Result<Schedule, NetlistError> {
    let n = circuit.gates().len();
    let mut indegree = vec![0usize; n];
    let mut succ: Vec<Vec<GateId>> = vec![Vec::new(); n];
    for g in 0..n {
        for p in predecessors(circuit, g) {
            indegree[g] += 1;
            succ[p].push(g);
        }
    }
    let mut ready: VecDeque<GateId> = (0..n).filter(|&g| indegree[g] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(g) = ready.pop_front() {
        order.push(g);
        for &s in &succ[g] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push_back(s);
            }
        }
    }
    if order.len() == n {
        return Ok(Schedule { order });
    }
    Err(NetlistError::CombinatorialLoop(find_cycle(circuit, &indegree)))
}

/// Extracts one cycle among the gates Kahn's algorithm could not place.
fn find_cycle(circuit: &Circuit, indegree: &[usize]) -> Vec<String> {
    let start = indegree.iter().position(|&d| d > 0).expect("stuck gate");
    // Walk backwards along stuck predecessors until a gate repeats.
    let mut seen: BTreeMap<GateId, usize> = BTreeMap::new();
    let mut path = Vec::new();
    let mut g = start;
    loop {
        if let Some(&pos) = seen.get(&g) {
            let mut names: Vec<String> = path[pos..]
                .iter()
                .map(|&g: &GateId| circuit.wire(circuit.gates()[g].output).name.clone())
                .collect();
            names.reverse();
            return names;
        }
        seen.insert(g, path.len());
        path.push(g);
        g = predecessors(circuit, g)
            .find(|&p| indegree[p] > 0)
            .expect("stuck gate has a stuck predecessor");
    }
}

pub fn structural_index(circuit: &Circuit) -> StructuralIndex {
    let mut idx = StructuralIndex {
        fanout: vec![Vec::new(); circuit.wires().len()],
        ..StructuralIndex::default()
    };
    for r in circuit.registers() {
        idx.register_input_wires.insert(r.input);
    }
    idx.primary_output_wires.extend(circuit.outputs().iter().copied());
    for s in circuit.splits() {
        idx.split_wires.extend(s.bits.iter().map(|&(w, _)| w));
    }
    for (g, gate) in circuit.gates().iter().enumerate() {
        for &w in &gate.inputs {
            if !idx.fanout[w].contains(&g) {
                idx.fanout[w].push(g);
            }
        }
        match gate.kind {
            GateKind::Mux => {
                idx.mux_roles.insert(
                    g,
                    MuxRole {
                        selector: gate.inputs[0],
                        in0: gate.inputs[1],
                        in1: gate.inputs[2],
                    },
                );
            }
            GateKind::Trunc => {
                if circuit.wire(gate.output).width < circuit.wire(gate.inputs[0]).width {
                    idx.partially_used.insert(gate.inputs[0]);
                }
            }
            GateKind::Shl | GateKind::Shr | GateKind::Sshr if gate.params.amount.is_some() => {
                if gate.params.amount != Some(0) {
                    idx.partially_used.insert(gate.inputs[0]);
                }
            }
            GateKind::Blit => {
                idx.partially_used.insert(gate.inputs[0]);
            }
            GateKind::MemWrite => idx.mem_write_inputs.extend(gate.inputs.iter().copied()),
            _ => {}
        }
    }
    for w in 0..circuit.wires().len() {
        if idx.fanout[w].is_empty()
            && !idx.register_input_wires.contains(&w)
            && !idx.primary_output_wires.contains(&w)
        {
            idx.dangling.insert(w);
        }
    }
    idx
}
