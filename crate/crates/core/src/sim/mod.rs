//! Mixed-domain cycle simulation: concrete value, symbolic term, per-bit
//! LeakSets and per-bit stability for every wire, two cycles at a time.

mod memory;
mod rules;
mod stimuli;

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::bitvec::{mask, BitVec};
use crate::expr::{Assignment, Expr};
use crate::netlist::{
    validate_and_schedule, Circuit, GateKind, NetlistError, Schedule, WireId,
};

pub use memory::{MaskedTableHook, MemoryHook, NoHook};
pub use stimuli::{InputValue, StimulusFrame, Stimuli};

use rules::{Shape, Src};

/// Per-bit set of 1-bit terms observable on a wire bit under glitches.
pub type LeakSet = BTreeSet<Expr>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("stimuli: {0}")]
    Stimuli(String),
    #[error("cycle {cycle}: no stimulus for input `{wire}`")]
    MissingInput { cycle: usize, wire: String },
    #[error("cycle {cycle}: stimulus for unknown input `{name}`")]
    UnknownInput { cycle: usize, name: String },
    #[error("cycle {cycle}: input `{wire}` is {expected} bits wide, stimulus has {actual}")]
    InputWidth {
        cycle: usize,
        wire: String,
        expected: u32,
        actual: u32,
    },
    #[error("witness: {0}")]
    Witness(String),
    #[error("cycle {cycle}: symbolic and concrete values of `{wire}` disagree")]
    ConsistencyViolation { cycle: usize, wire: String },
    #[error("cycle {cycle}: memory index of `{wire}` is symbolic and no hook handles it")]
    SymbolicIndexUnhandled { cycle: usize, wire: String },
    #[error("no stimulus frame for cycle {0}")]
    OutOfFrames(usize),
}

/// The four-domain value of one wire at one cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Valuation {
    pub conc: BitVec,
    pub symb: Expr,
    pub lset: Vec<LeakSet>,
    /// Bit `i` set means rank `i` is stable.
    pub stab: BitVec,
}

impl Valuation {
    /// A constant with empty LeakSets.
    pub fn constant(value: BitVec, stable: bool) -> Valuation {
        let w = value.width();
        Valuation {
            conc: value,
            symb: Expr::constant(value),
            lset: vec![LeakSet::new(); w as usize],
            stab: if stable { BitVec::ones(w) } else { BitVec::zero(w) },
        }
    }

    pub fn width(&self) -> u32 {
        self.conc.width()
    }

    pub fn is_stable(&self, i: u32) -> bool {
        self.stab.bit(i)
    }

    /// Union of all per-bit LeakSets.
    pub fn flat_lset(&self) -> LeakSet {
        self.lset.iter().flatten().cloned().collect()
    }
}

/// Drops constant members; in particular an all-constant set becomes empty.
pub fn trivial_filter(mut set: LeakSet) -> LeakSet {
    set.retain(|e| !e.is_const());
    set
}

fn single(e: Expr) -> LeakSet {
    trivial_filter(LeakSet::from([e]))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOptions {
    /// Apply the stability refinement; without it every bit is unstable.
    pub use_stability: bool,
    /// Treat register outputs at cycle 0 as unstable.
    pub reset_unstable: bool,
    /// Record consistency violations instead of failing.
    pub keep_going: bool,
    /// Evaluate every wire's term under the witness after each cycle.
    pub check_consistency: bool,
    /// Resolve unhandled symbolic memory indices with their concrete value
    /// (recorded as a warning) instead of failing.
    pub concretize_symbolic_index: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            use_stability: true,
            reset_unstable: false,
            keep_going: false,
            check_consistency: true,
            concretize_symbolic_index: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum WarningKind {
    NonConstantSelector,
    SymbolicIndex,
    SymbolicWriteControl,
}

impl WarningKind {
    pub fn name(self) -> &'static str {
        match self {
            WarningKind::NonConstantSelector => "non_constant_selector",
            WarningKind::SymbolicIndex => "symbolic_memory_index",
            WarningKind::SymbolicWriteControl => "symbolic_write_control",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SimWarning {
    pub cycle: usize,
    pub wire: String,
    pub kind: WarningKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct MemState {
    symb: Vec<Expr>,
    conc: Vec<BitVec>,
}

/// Valuations of the last two simulated cycles plus sequential state.
#[derive(Debug, Clone)]
pub struct SimState {
    cycle: usize,
    current: Vec<Valuation>,
    previous: Vec<Valuation>,
    register_next: Vec<Valuation>,
    memories: Vec<MemState>,
    warnings: Vec<SimWarning>,
    violations: Vec<SimError>,
    assign_counts: Vec<u32>,
}

impl SimState {
    /// Number of cycles simulated so far.
    pub fn cycles_done(&self) -> usize {
        self.cycle
    }

    /// Valuations of the most recent cycle (`cycles_done() - 1`).
    pub fn current(&self) -> &[Valuation] {
        &self.current
    }

    /// Valuations of the cycle before, if there was one.
    pub fn previous(&self) -> Option<&[Valuation]> {
        (self.cycle >= 2).then_some(self.previous.as_slice())
    }

    /// Warnings of the most recent cycle.
    pub fn warnings(&self) -> &[SimWarning] {
        &self.warnings
    }

    /// Consistency violations recorded under `keep_going`.
    pub fn violations(&self) -> &[SimError] {
        &self.violations
    }

    /// How often each wire was assigned during the last cycle.
    pub fn assignment_counts(&self) -> &[u32] {
        &self.assign_counts
    }

    /// Stored symbolic contents of memory `index` (declaration order).
    pub fn memory_contents(&self, index: usize) -> &[Expr] {
        &self.memories[index].symb
    }
}

pub struct Simulator<'c> {
    circuit: &'c Circuit,
    schedule: Schedule,
    shapes: Vec<Shape>,
    options: SimOptions,
    hook: Arc<dyn MemoryHook>,
    witness: Assignment,
    state: SimState,
}

impl<'c> Simulator<'c> {
    pub fn new(
        circuit: &'c Circuit,
        witness: Assignment,
        hook: Arc<dyn MemoryHook>,
        options: SimOptions,
    ) -> Result<Self, SimError> {
        let schedule = validate_and_schedule(circuit)?;
        let shapes = circuit
            .gates()
            .iter()
            .map(|g| {
                let widths: Vec<u32> = g.inputs.iter().map(|&w| circuit.wire(w).width).collect();
                rules::shape(g, &widths, circuit.wire(g.output).width)
            })
            .collect();
        let memories = circuit
            .memories()
            .iter()
            .map(|m| {
                let conc = hook.initial_contents(m, &witness).unwrap_or_else(|| {
                    if m.init.is_empty() {
                        vec![BitVec::zero(m.width); m.depth]
                    } else {
                        m.init.clone()
                    }
                });
                MemState {
                    symb: conc.iter().map(|v| Expr::constant(*v)).collect(),
                    conc,
                }
            })
            .collect();
        let state = SimState {
            cycle: 0,
            current: Vec::new(),
            previous: Vec::new(),
            register_next: Vec::new(),
            memories,
            warnings: Vec::new(),
            violations: Vec::new(),
            assign_counts: vec![0; circuit.wires().len()],
        };
        Ok(Simulator {
            circuit,
            schedule,
            shapes,
            options,
            hook,
            witness,
            state,
        })
    }

    pub fn with_defaults(circuit: &'c Circuit, witness: Assignment) -> Result<Self, SimError> {
        Self::new(circuit, witness, Arc::new(NoHook), SimOptions::default())
    }

    pub fn circuit(&self) -> &'c Circuit {
        self.circuit
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn witness(&self) -> &Assignment {
        &self.witness
    }

    pub fn options(&self) -> &SimOptions {
        &self.options
    }

    /// Runs every frame, calling `observe` after each cycle.
    pub fn run(
        &mut self,
        stimuli: &Stimuli,
        mut observe: impl FnMut(&SimState) -> Result<bool, SimError>,
    ) -> Result<(), SimError> {
        for frame in &stimuli.frames {
            self.step(frame)?;
            if !observe(&self.state)? {
                break;
            }
        }
        Ok(())
    }

    fn input_valuation(&self, w: WireId, value: &InputValue) -> Result<Valuation, SimError> {
        let t = self.state.cycle;
        let wire = self.circuit.wire(w);
        let symb = match value {
            InputValue::Const(c) => Expr::constant(*c),
            InputValue::Symbol(s) => Expr::symbol(s, wire.width),
            InputValue::Expr(e) => e.clone(),
        };
        if symb.width() != wire.width {
            return Err(SimError::InputWidth {
                cycle: t,
                wire: wire.name.clone(),
                expected: wire.width,
                actual: symb.width(),
            });
        }
        let conc = symb
            .eval_concrete(&self.witness)
            .map_err(|e| SimError::Witness(e.to_string()))?;
        Ok(Valuation {
            conc,
            lset: (0..wire.width).map(|i| single(symb.bit_at(i))).collect(),
            symb,
            stab: BitVec::zero(wire.width),
        })
    }

    fn register_valuation(&self, r: usize) -> Valuation {
        let reg = &self.circuit.registers()[r];
        if self.state.cycle == 0 {
            let stable = self.options.use_stability && !self.options.reset_unstable;
            return Valuation::constant(reg.init, stable);
        }
        let stored = &self.state.register_next[r];
        let prev = &self.state.current[reg.output];
        let w = stored.width();
        let mut stab = 0u64;
        let mut lset = Vec::with_capacity(w as usize);
        for i in 0..w {
            let cur = stored.symb.bit_at(i);
            let old = prev.symb.bit_at(i);
            if self.options.use_stability && cur == old {
                stab |= 1 << i;
                lset.push(single(cur));
            } else {
                lset.push(trivial_filter(LeakSet::from([cur, old])));
            }
        }
        Valuation {
            conc: stored.conc,
            symb: stored.symb.clone(),
            lset,
            stab: BitVec::new(w, stab),
        }
    }

    /// Simulates one cycle with the inputs of `frame`.
    pub fn step(&mut self, frame: &StimulusFrame) -> Result<(), SimError> {
        let t = self.state.cycle;
        let c = self.circuit;
        let n = c.wires().len();
        let mut vals: Vec<Option<Valuation>> = vec![None; n];
        let mut counts = vec![0u32; n];
        let mut warnings = Vec::new();
        let mut violations = Vec::new();

        for name in frame.inputs.keys() {
            match c.wire_id(name) {
                Some(w) if c.inputs().contains(&w) => {}
                _ => {
                    return Err(SimError::UnknownInput {
                        cycle: t,
                        name: name.clone(),
                    })
                }
            }
        }
        for &w in c.inputs() {
            let name = &c.wire(w).name;
            let value = frame.inputs.get(name).ok_or_else(|| SimError::MissingInput {
                cycle: t,
                wire: name.clone(),
            })?;
            vals[w] = Some(self.input_valuation(w, value)?);
            counts[w] += 1;
        }
        for (r, reg) in c.registers().iter().enumerate() {
            vals[reg.output] = Some(self.register_valuation(r));
            counts[reg.output] += 1;
        }
        for &g in &self.schedule.order {
            let gate = &c.gates()[g];
            let v = {
                let ins: Vec<&Valuation> = gate
                    .inputs
                    .iter()
                    .map(|&w| vals[w].as_ref().expect("driver evaluated before use"))
                    .collect();
                self.eval_gate(g, &ins, &mut warnings, &mut violations)?
            };
            vals[gate.output] = Some(v);
            counts[gate.output] += 1;
        }
        let vals: Vec<Valuation> = vals
            .into_iter()
            .map(|v| v.expect("every wire has a driver"))
            .collect();

        // Clock edge: registers capture, memories write.
        let register_next = c.registers().iter().map(|r| vals[r.input].clone()).collect();
        for gate in c.gates().iter().filter(|g| g.kind == GateKind::MemWrite) {
            let mem_name = gate.params.memory.as_deref().expect("validated");
            let mi = c
                .memories()
                .iter()
                .position(|m| m.id == mem_name)
                .expect("validated");
            let (en, addr, data) = (
                &vals[gate.inputs[0]],
                &vals[gate.inputs[1]],
                &vals[gate.inputs[2]],
            );
            if !en.symb.is_const() || !addr.symb.is_const() {
                warnings.push(SimWarning {
                    cycle: t,
                    wire: c.wire(gate.output).name.clone(),
                    kind: WarningKind::SymbolicWriteControl,
                });
            }
            if en.conc.bits() == 1 {
                let mem = &mut self.state.memories[mi];
                let a = addr.conc.bits() as usize;
                if a < mem.conc.len() {
                    mem.conc[a] = data.conc;
                    mem.symb[a] = data.symb.clone();
                }
            }
        }

        for v in violations {
            self.violation(v)?;
        }
        let old = std::mem::replace(&mut self.state.current, vals);
        self.state.previous = old;
        self.state.register_next = register_next;
        self.state.assign_counts = counts;
        self.state.warnings = warnings;
        self.state.cycle = t + 1;

        if self.options.check_consistency {
            if let Err(e) = consistency_check(c, &self.state, &self.witness) {
                self.violation(e)?;
            }
        }
        Ok(())
    }

    fn violation(&mut self, e: SimError) -> Result<(), SimError> {
        if self.options.keep_going {
            self.state.violations.push(e);
            Ok(())
        } else {
            Err(e)
        }
    }

    fn eval_gate(
        &self,
        g: usize,
        ins: &[&Valuation],
        warnings: &mut Vec<SimWarning>,
        violations: &mut Vec<SimError>,
    ) -> Result<Valuation, SimError> {
        let c = self.circuit;
        let t = self.state.cycle;
        let gate = &c.gates()[g];
        let out_name = &c.wire(gate.output).name;
        let w = c.wire(gate.output).width;
        let shape = &self.shapes[g];

        let (conc, symb) = if gate.kind == GateKind::MemRead {
            self.mem_read(gate.params.memory.as_deref().expect("validated"), ins[0], out_name, w, warnings)?
        } else {
            let concs: Vec<BitVec> = ins.iter().map(|v| v.conc).collect();
            let symbs: Vec<Expr> = ins.iter().map(|v| v.symb.clone()).collect();
            (
                rules::conc_eval(gate, &concs, w),
                rules::symb_eval(gate, &symbs, w, shape),
            )
        };
        if gate.kind == GateKind::Mux && !ins[0].symb.is_const() {
            warnings.push(SimWarning {
                cycle: t,
                wire: out_name.clone(),
                kind: WarningKind::NonConstantSelector,
            });
        }
        if let Some(k) = symb.as_const() {
            if k != conc {
                violations.push(SimError::ConsistencyViolation {
                    cycle: t,
                    wire: out_name.clone(),
                });
            }
        }

        let stab = if self.options.use_stability {
            stab_eval(gate.kind, shape, ins, w)
        } else {
            0
        };
        let lset = (0..w)
            .map(|i| {
                if stab >> i & 1 == 1 {
                    single(symb.bit_at(i))
                } else {
                    trivial_filter(lset_eval(shape, ins, i, &symb))
                }
            })
            .collect();
        Ok(Valuation {
            conc,
            symb,
            lset,
            stab: BitVec::new(w, stab),
        })
    }

    fn mem_read(
        &self,
        mem_name: &str,
        index: &Valuation,
        out_name: &str,
        width: u32,
        warnings: &mut Vec<SimWarning>,
    ) -> Result<(BitVec, Expr), SimError> {
        let t = self.state.cycle;
        let mi = self
            .circuit
            .memories()
            .iter()
            .position(|m| m.id == mem_name)
            .expect("validated");
        let mem = &self.state.memories[mi];
        let a = index.conc.bits() as usize;
        let conc = mem.conc.get(a).copied().unwrap_or(BitVec::zero(width));
        if let Some(e) = self.hook.read(mem_name, &index.symb) {
            return Ok((conc, e));
        }
        if !index.symb.is_const() {
            if !self.options.concretize_symbolic_index {
                return Err(SimError::SymbolicIndexUnhandled {
                    cycle: t,
                    wire: out_name.to_string(),
                });
            }
            warnings.push(SimWarning {
                cycle: t,
                wire: out_name.to_string(),
                kind: WarningKind::SymbolicIndex,
            });
        }
        let symb = mem
            .symb
            .get(a)
            .cloned()
            .unwrap_or_else(|| Expr::zero(width));
        Ok((conc, symb))
    }
}

/// Per-bit constant mask: bits of `e` that are syntactically the constant `value`.
fn const_bits(e: &Expr, value: bool) -> u64 {
    if let Some(c) = e.as_const() {
        return if value { c.bits() } else { !c.bits() & mask(c.width()) };
    }
    let mut out = 0u64;
    for i in 0..e.width() {
        if let Some(b) = e.bit_at(i).as_const() {
            if b.bit(0) == value {
                out |= 1 << i;
            }
        }
    }
    out
}

fn stab_eval(kind: GateKind, shape: &Shape, ins: &[&Valuation], w: u32) -> u64 {
    let all = mask(w);
    let s = |k: usize| ins[k].stab.bits();
    match shape {
        Shape::Bitwise => match kind {
            GateKind::BitNot => s(0),
            GateKind::BitXor => s(0) & s(1),
            GateKind::BitAnd | GateKind::BitOr => {
                let absorbing = kind == GateKind::BitOr;
                let (s0, s1) = (s(0), s(1));
                (s0 & s1)
                    | (s0 & const_bits(&ins[0].symb, absorbing))
                    | (s1 & const_bits(&ins[1].symb, absorbing))
            }
            _ => unreachable!(),
        },
        Shape::Mux => {
            if s(0) & 1 == 0 {
                return 0;
            }
            match ins[0].symb.as_const() {
                Some(c) => s(1 + c.bits() as usize),
                None => s(1) & s(2),
            }
        }
        Shape::Mixing => {
            if ins.iter().all(|v| v.stab.is_ones()) {
                all
            } else {
                0
            }
        }
        Shape::Remap(srcs) => srcs.iter().enumerate().fold(0, |acc, (i, src)| {
            let bit = match *src {
                Src::Zero => true,
                Src::Bit(k, j) => ins[k].is_stable(j),
            };
            acc | (bit as u64) << i
        }),
        Shape::MemRead => 0,
    }
}

fn lset_eval(shape: &Shape, ins: &[&Valuation], i: u32, symb: &Expr) -> LeakSet {
    let rank = |k: usize| ins[k].lset[i as usize].iter().cloned();
    match shape {
        Shape::Bitwise => (0..ins.len()).flat_map(rank).collect(),
        Shape::Mux => {
            let sel = ins[0];
            if sel.is_stable(0) {
                if let Some(c) = sel.symb.as_const() {
                    return rank(1 + c.bits() as usize).collect();
                }
            }
            sel.lset[0].iter().cloned().chain(rank(1)).chain(rank(2)).collect()
        }
        Shape::Mixing => ins.iter().flat_map(|v| v.flat_lset()).collect(),
        Shape::Remap(srcs) => match srcs[i as usize] {
            Src::Zero => LeakSet::new(),
            Src::Bit(k, j) => ins[k].lset[j as usize].clone(),
        },
        Shape::MemRead => {
            let mut set = ins[0].flat_lset();
            set.insert(symb.bit_at(i));
            set
        }
    }
}

/// Concrete output of a combinational gate. Memory ports are not supported.
pub fn eval_gate(gate: &crate::netlist::Gate, ins: &[BitVec], out_width: u32) -> BitVec {
    assert!(
        !matches!(gate.kind, GateKind::MemRead | GateKind::MemWrite),
        "memory ports need simulator state"
    );
    rules::conc_eval(gate, ins, out_width)
}

/// Checks `eval_concrete(symb, witness) = conc` on every wire of the last cycle.
pub fn consistency_check(
    circuit: &Circuit,
    state: &SimState,
    witness: &Assignment,
) -> Result<(), SimError> {
    let t = state.cycle.saturating_sub(1);
    for (w, v) in state.current.iter().enumerate() {
        let ok = match v.symb.eval_concrete(witness) {
            Ok(value) => value == v.conc,
            Err(e) => return Err(SimError::Witness(e.to_string())),
        };
        if !ok {
            return Err(SimError::ConsistencyViolation {
                cycle: t,
                wire: circuit.wire(w).name.clone(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
