//! Circuit data model, JSON front-end, scheduling and structural queries.

mod json;
mod schedule;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::bitvec::BitVec;

pub use schedule::{structural_index, validate_and_schedule, MuxRole, Schedule, StructuralIndex};

pub type WireId = usize;
pub type GateId = usize;
pub type RegisterId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("malformed netlist: {0}")]
    MalformedDocument(String),
    #[error("unknown gate kind `{0}`")]
    UnknownGateKind(String),
    #[error("gate driving `{gate}`: expected width {expected}, found {actual}")]
    WidthMismatch {
        gate: String,
        expected: u32,
        actual: u32,
    },
    #[error("gate driving `{gate}`: expected {expected} input(s), found {actual}")]
    Arity {
        gate: String,
        expected: usize,
        actual: usize,
    },
    #[error("gate driving `{gate}`: {message}")]
    BadParams { gate: String, message: String },
    #[error("wire `{0}` has more than one driver")]
    MultipleDrivers(String),
    #[error("reference to undeclared wire or memory `{0}`")]
    DanglingReference(String),
    #[error("wire `{0}` is declared twice")]
    DuplicateWire(String),
    #[error("wire `{0}` has no driver")]
    Undriven(String),
    #[error("register `{0}`: {1}")]
    BadRegister(String, String),
    #[error("split `{0}`: {1}")]
    BadSplit(String, String),
    #[error("memory `{0}`: {1}")]
    BadMemory(String, String),
    #[error("combinatorial loop through {0:?}")]
    CombinatorialLoop(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrcLoc {
    pub file: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wire {
    pub name: String,
    pub width: u32,
    pub src: Option<SrcLoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    BitNot,
    BitAnd,
    BitOr,
    BitXor,
    Ucmp,
    Scmp,
    Equal,
    NotEqual,
    Add,
    Sub,
    Neg,
    Mul,
    Shl,
    Shr,
    Sshr,
    Trunc,
    Zext,
    Sext,
    Blit,
    Repeat,
    IsZero,
    IsNeg,
    MemRead,
    MemWrite,
    Mux,
}

impl GateKind {
    pub const ALL: [GateKind; 25] = [
        GateKind::BitNot,
        GateKind::BitAnd,
        GateKind::BitOr,
        GateKind::BitXor,
        GateKind::Ucmp,
        GateKind::Scmp,
        GateKind::Equal,
        GateKind::NotEqual,
        GateKind::Add,
        GateKind::Sub,
        GateKind::Neg,
        GateKind::Mul,
        GateKind::Shl,
        GateKind::Shr,
        GateKind::Sshr,
        GateKind::Trunc,
        GateKind::Zext,
        GateKind::Sext,
        GateKind::Blit,
        GateKind::Repeat,
        GateKind::IsZero,
        GateKind::IsNeg,
        GateKind::MemRead,
        GateKind::MemWrite,
        GateKind::Mux,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::BitNot => "bit_not",
            GateKind::BitAnd => "bit_and",
            GateKind::BitOr => "bit_or",
            GateKind::BitXor => "bit_xor",
            GateKind::Ucmp => "ucmp",
            GateKind::Scmp => "scmp",
            GateKind::Equal => "equal",
            GateKind::NotEqual => "not_equal",
            GateKind::Add => "add",
            GateKind::Sub => "sub",
            GateKind::Neg => "neg",
            GateKind::Mul => "mul",
            GateKind::Shl => "shl",
            GateKind::Shr => "shr",
            GateKind::Sshr => "sshr",
            GateKind::Trunc => "trunc",
            GateKind::Zext => "zext",
            GateKind::Sext => "sext",
            GateKind::Blit => "blit",
            GateKind::Repeat => "repeat",
            GateKind::IsZero => "is_zero",
            GateKind::IsNeg => "is_neg",
            GateKind::MemRead => "mem_read",
            GateKind::MemWrite => "mem_write",
            GateKind::Mux => "mux",
        }
    }

    pub fn from_name(name: &str) -> Option<GateKind> {
        GateKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn is_shift(self) -> bool {
        matches!(self, GateKind::Shl | GateKind::Shr | GateKind::Sshr)
    }
}

/// Kind-specific constants. Unused fields stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GateParams {
    /// Constant shift amount; when set the shift gate has a single input.
    pub amount: Option<u32>,
    /// Low bit position for `trunc` (source) and `blit` (destination).
    pub offset: Option<u32>,
    /// Memory referenced by `mem_read` / `mem_write`.
    pub memory: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<WireId>,
    pub output: WireId,
    pub params: GateParams,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    pub input: WireId,
    pub output: WireId,
    pub init: BitVec,
}

/// A multi-bit signal that only exists in the netlist as separate 1-bit wires.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub parent: String,
    pub width: u32,
    /// `(member wire, bit index in the parent)`.
    pub bits: Vec<(WireId, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Memory {
    pub id: String,
    pub depth: usize,
    pub width: u32,
    pub init: Vec<BitVec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Input,
    Gate(GateId),
    Register(RegisterId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    wires: Vec<Wire>,
    gates: Vec<Gate>,
    registers: Vec<Register>,
    inputs: Vec<WireId>,
    outputs: Vec<WireId>,
    splits: Vec<Split>,
    memories: Vec<Memory>,
    by_name: HashMap<String, WireId>,
    drivers: Vec<Driver>,
}

/// Mutable description used by generators; turned into a [`Circuit`] by
/// [`CircuitBuilder::finish`], which runs the same validation as the parser.
#[derive(Debug, Clone, Default)]
pub struct CircuitBuilder {
    wires: Vec<Wire>,
    gates: Vec<Gate>,
    registers: Vec<Register>,
    inputs: Vec<WireId>,
    outputs: Vec<WireId>,
    splits: Vec<Split>,
    memories: Vec<Memory>,
    by_name: HashMap<String, WireId>,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a wire; panics on duplicate names (generator bug).
    pub fn wire(&mut self, name: &str, width: u32) -> WireId {
        assert!(
            !self.by_name.contains_key(name),
            "wire `{name}` declared twice"
        );
        let id = self.wires.len();
        self.wires.push(Wire {
            name: name.to_string(),
            width,
            src: None,
        });
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn set_src(&mut self, wire: WireId, file: &str, line: u32) {
        self.wires[wire].src = Some(SrcLoc {
            file: file.to_string(),
            line,
        });
    }

    pub fn width(&self, wire: WireId) -> u32 {
        self.wires[wire].width
    }

    pub fn input(&mut self, name: &str, width: u32) -> WireId {
        let w = self.wire(name, width);
        self.inputs.push(w);
        w
    }

    pub fn mark_output(&mut self, wire: WireId) {
        self.outputs.push(wire);
    }

    pub fn gate(&mut self, kind: GateKind, inputs: &[WireId], output: WireId) -> GateId {
        self.gate_with(kind, inputs, output, GateParams::default())
    }

    pub fn gate_with(
        &mut self,
        kind: GateKind,
        inputs: &[WireId],
        output: WireId,
        params: GateParams,
    ) -> GateId {
        self.gates.push(Gate {
            kind,
            inputs: inputs.to_vec(),
            output,
            params,
        });
        self.gates.len() - 1
    }

    /// Declares `name` and drives it with a new gate in one step.
    pub fn op(&mut self, kind: GateKind, inputs: &[WireId], name: &str, width: u32) -> WireId {
        let out = self.wire(name, width);
        self.gate(kind, inputs, out);
        out
    }

    pub fn register(&mut self, input: WireId, output: WireId, init: BitVec) -> RegisterId {
        self.registers.push(Register {
            input,
            output,
            init,
        });
        self.registers.len() - 1
    }

    pub fn split(&mut self, parent: &str, width: u32, bits: Vec<(WireId, u32)>) {
        self.splits.push(Split {
            parent: parent.to_string(),
            width,
            bits,
        });
    }

    pub fn memory(&mut self, id: &str, depth: usize, width: u32, init: Vec<BitVec>) {
        self.memories.push(Memory {
            id: id.to_string(),
            depth,
            width,
            init,
        });
    }

    pub fn finish(self) -> Result<Circuit, NetlistError> {
        Circuit::assemble(self)
    }
}

impl Circuit {
    fn assemble(b: CircuitBuilder) -> Result<Circuit, NetlistError> {
        let mut drivers: Vec<Option<Driver>> = vec![None; b.wires.len()];
        let mut claim = |w: WireId, d: Driver, wires: &[Wire]| {
            if drivers[w].is_some() {
                return Err(NetlistError::MultipleDrivers(wires[w].name.clone()));
            }
            drivers[w] = Some(d);
            Ok(())
        };
        for &i in &b.inputs {
            claim(i, Driver::Input, &b.wires)?;
        }
        for (g, gate) in b.gates.iter().enumerate() {
            claim(gate.output, Driver::Gate(g), &b.wires)?;
        }
        for (r, reg) in b.registers.iter().enumerate() {
            claim(reg.output, Driver::Register(r), &b.wires)?;
        }
        let drivers = drivers
            .into_iter()
            .enumerate()
            .map(|(w, d)| d.ok_or_else(|| NetlistError::Undriven(b.wires[w].name.clone())))
            .collect::<Result<Vec<_>, _>>()?;

        for w in &b.wires {
            if !(1..=crate::bitvec::MAX_WIDTH).contains(&w.width) {
                return Err(NetlistError::MalformedDocument(format!(
                    "wire `{}` has unsupported width {}",
                    w.name, w.width
                )));
            }
        }
        let circuit = Circuit {
            wires: b.wires,
            gates: b.gates,
            registers: b.registers,
            inputs: b.inputs,
            outputs: b.outputs,
            splits: b.splits,
            memories: b.memories,
            by_name: b.by_name,
            drivers,
        };
        for g in 0..circuit.gates.len() {
            circuit.check_gate(g)?;
        }
        for reg in &circuit.registers {
            let (i, o) = (&circuit.wires[reg.input], &circuit.wires[reg.output]);
            if i.width != o.width || reg.init.width() != o.width {
                return Err(NetlistError::BadRegister(
                    o.name.clone(),
                    format!(
                        "input width {}, output width {}, init width {}",
                        i.width,
                        o.width,
                        reg.init.width()
                    ),
                ));
            }
        }
        circuit.check_splits()?;
        for m in &circuit.memories {
            if m.depth == 0 || !(1..=crate::bitvec::MAX_WIDTH).contains(&m.width) {
                return Err(NetlistError::BadMemory(m.id.clone(), "empty shape".into()));
            }
            if !m.init.is_empty()
                && (m.init.len() != m.depth || m.init.iter().any(|v| v.width() != m.width))
            {
                return Err(NetlistError::BadMemory(
                    m.id.clone(),
                    "init does not match depth and width".into(),
                ));
            }
        }
        Ok(circuit)
    }

    fn check_splits(&self) -> Result<(), NetlistError> {
        for s in &self.splits {
            let bad = |msg: &str| Err(NetlistError::BadSplit(s.parent.clone(), msg.to_string()));
            if s.bits.len() != s.width as usize {
                return bad("member count differs from parent width");
            }
            let mut seen = vec![false; s.width as usize];
            for &(w, idx) in &s.bits {
                if self.wires[w].width != 1 {
                    return bad("member wires must be 1 bit wide");
                }
                match seen.get_mut(idx as usize) {
                    Some(slot) if !*slot => *slot = true,
                    _ => return bad("bit indices must cover the parent exactly once"),
                }
            }
            if let Some(&p) = self.by_name.get(&s.parent) {
                if self.wires[p].width != s.width {
                    return bad("parent wire width differs");
                }
            }
        }
        Ok(())
    }

    fn check_gate(&self, g: GateId) -> Result<(), NetlistError> {
        let gate = &self.gates[g];
        let name = || self.wires[gate.output].name.clone();
        let w = |id: WireId| self.wires[id].width;
        let out = w(gate.output);
        let arity = |n: usize| {
            if gate.inputs.len() == n {
                Ok(())
            } else {
                Err(NetlistError::Arity {
                    gate: name(),
                    expected: n,
                    actual: gate.inputs.len(),
                })
            }
        };
        let expect = |expected: u32, actual: u32| {
            if expected == actual {
                Ok(())
            } else {
                Err(NetlistError::WidthMismatch {
                    gate: name(),
                    expected,
                    actual,
                })
            }
        };
        let bad = |message: String| NetlistError::BadParams {
            gate: name(),
            message,
        };
        let p = &gate.params;
        let uses_memory = matches!(gate.kind, GateKind::MemRead | GateKind::MemWrite);
        if p.memory.is_some() && !uses_memory {
            return Err(bad("`memory` only applies to memory gates".into()));
        }
        if p.amount.is_some() && !gate.kind.is_shift() {
            return Err(bad("`amount` only applies to shifts".into()));
        }
        if p.offset.is_some() && !matches!(gate.kind, GateKind::Trunc | GateKind::Blit) {
            return Err(bad("`offset` only applies to trunc and blit".into()));
        }
        match gate.kind {
            GateKind::BitNot | GateKind::Neg => {
                arity(1)?;
                expect(out, w(gate.inputs[0]))?;
            }
            GateKind::BitAnd
            | GateKind::BitOr
            | GateKind::BitXor
            | GateKind::Add
            | GateKind::Sub
            | GateKind::Mul => {
                arity(2)?;
                expect(out, w(gate.inputs[0]))?;
                expect(out, w(gate.inputs[1]))?;
            }
            GateKind::Ucmp | GateKind::Scmp | GateKind::Equal | GateKind::NotEqual => {
                arity(2)?;
                expect(w(gate.inputs[0]), w(gate.inputs[1]))?;
                expect(1, out)?;
            }
            GateKind::IsZero | GateKind::IsNeg => {
                arity(1)?;
                expect(1, out)?;
            }
            GateKind::Shl | GateKind::Shr | GateKind::Sshr => {
                arity(if p.amount.is_some() { 1 } else { 2 })?;
                expect(out, w(gate.inputs[0]))?;
            }
            GateKind::Trunc => {
                arity(1)?;
                let offset = p.offset.unwrap_or(0);
                if offset + out > w(gate.inputs[0]) {
                    return Err(bad(format!(
                        "slice [{}:{offset}] exceeds input width {}",
                        offset + out - 1,
                        w(gate.inputs[0])
                    )));
                }
            }
            GateKind::Zext | GateKind::Sext => {
                arity(1)?;
                if out < w(gate.inputs[0]) {
                    return Err(NetlistError::WidthMismatch {
                        gate: name(),
                        expected: w(gate.inputs[0]),
                        actual: out,
                    });
                }
            }
            GateKind::Blit => {
                arity(2)?;
                expect(out, w(gate.inputs[0]))?;
                if p.offset.unwrap_or(0) + w(gate.inputs[1]) > out {
                    return Err(bad("blit value does not fit in base".into()));
                }
            }
            GateKind::Repeat => {
                arity(1)?;
                if out % w(gate.inputs[0]) != 0 {
                    return Err(bad(format!(
                        "output width {out} is not a multiple of {}",
                        w(gate.inputs[0])
                    )));
                }
            }
            GateKind::MemRead | GateKind::MemWrite => {
                let mem = p
                    .memory
                    .as_deref()
                    .ok_or_else(|| bad("missing `memory`".into()))?;
                let mem = self
                    .memory(mem)
                    .ok_or_else(|| NetlistError::DanglingReference(mem.to_string()))?;
                if gate.kind == GateKind::MemRead {
                    arity(1)?;
                    expect(mem.width, out)?;
                } else {
                    arity(3)?;
                    expect(1, w(gate.inputs[0]))?;
                    expect(mem.width, w(gate.inputs[2]))?;
                    expect(mem.width, out)?;
                }
            }
            GateKind::Mux => {
                arity(3)?;
                expect(1, w(gate.inputs[0]))?;
                expect(out, w(gate.inputs[1]))?;
                expect(out, w(gate.inputs[2]))?;
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Circuit, NetlistError> {
        json::parse(text)
    }

    pub fn to_json(&self) -> String {
        json::serialize(self)
    }

    pub fn wires(&self) -> &[Wire] {
        &self.wires
    }

    pub fn wire(&self, id: WireId) -> &Wire {
        &self.wires[id]
    }

    pub fn wire_id(&self, name: &str) -> Option<WireId> {
        self.by_name.get(name).copied()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn inputs(&self) -> &[WireId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[WireId] {
        &self.outputs
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn memories(&self) -> &[Memory] {
        &self.memories
    }

    pub fn memory(&self, id: &str) -> Option<&Memory> {
        self.memories.iter().find(|m| m.id == id)
    }

    pub fn driver(&self, wire: WireId) -> Driver {
        self.drivers[wire]
    }

    /// Names of all wires, in declaration order.
    pub fn wire_names(&self) -> impl Iterator<Item = &str> {
        self.wires.iter().map(|w| w.name.as_str())
    }

    /// Wire counts by driver kind, handy for summaries.
    pub fn gate_histogram(&self) -> BTreeMap<GateKind, usize> {
        let mut out = BTreeMap::new();
        for g in &self.gates {
            *out.entry(g.kind).or_default() += 1;
        }
        out
    }
}
