use serde::{Deserialize, Serialize};

use super::{Circuit, CircuitBuilder, GateKind, GateParams, Memory, NetlistError, SrcLoc, Wire};
use crate::bitvec::BitVec;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    wires: Vec<WireDoc>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    gates: Vec<GateDoc>,
    registers: Vec<RegisterDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    splits: Vec<SplitDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    memories: Vec<MemoryDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireDoc {
    name: String,
    width: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    src: Option<SrcDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SrcDoc {
    file: String,
    line: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateDoc {
    kind: String,
    output: String,
    inputs: Vec<String>,
    #[serde(default, skip_serializing_if = "ParamsDoc::is_empty")]
    params: ParamsDoc,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ParamsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amount: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    memory: Option<String>,
}

impl ParamsDoc {
    fn is_empty(&self) -> bool {
        self.amount.is_none() && self.offset.is_none() && self.memory.is_none()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegisterDoc {
    input: String,
    output: String,
    init: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitDoc {
    parent: String,
    width: u32,
    bits: Vec<SplitBitDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitBitDoc {
    wire: String,
    index: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemoryDoc {
    id: String,
    depth: usize,
    width: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    init: Option<Vec<String>>,
}

fn literal(text: &str, expected_width: u32) -> Result<BitVec, NetlistError> {
    let v = BitVec::parse_literal(text)
        .map_err(|e| NetlistError::MalformedDocument(e.to_string()))?;
    if v.width() != expected_width {
        return Err(NetlistError::MalformedDocument(format!(
            "literal `{text}` should have {expected_width} digits"
        )));
    }
    Ok(v)
}

pub(super) fn parse(text: &str) -> Result<Circuit, NetlistError> {
    let doc: Doc =
        serde_json::from_str(text).map_err(|e| NetlistError::MalformedDocument(e.to_string()))?;
    let mut b = CircuitBuilder::new();
    for w in &doc.wires {
        if b.by_name.contains_key(&w.name) {
            return Err(NetlistError::DuplicateWire(w.name.clone()));
        }
        if w.width == 0 {
            return Err(NetlistError::MalformedDocument(format!(
                "wire `{}` has width 0",
                w.name
            )));
        }
        let id = b.wire(&w.name, w.width);
        if let Some(src) = &w.src {
            b.set_src(id, &src.file, src.line);
        }
    }
    let lookup = |b: &CircuitBuilder, name: &str| {
        b.by_name
            .get(name)
            .copied()
            .ok_or_else(|| NetlistError::DanglingReference(name.to_string()))
    };
    for m in &doc.memories {
        let init = match &m.init {
            Some(lits) => lits
                .iter()
                .map(|l| literal(l, m.width))
                .collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        b.memory(&m.id, m.depth, m.width, init);
    }
    for name in &doc.inputs {
        let id = lookup(&b, name)?;
        b.inputs.push(id);
    }
    for name in &doc.outputs {
        let id = lookup(&b, name)?;
        b.outputs.push(id);
    }
    for g in &doc.gates {
        let kind =
            GateKind::from_name(&g.kind).ok_or_else(|| NetlistError::UnknownGateKind(g.kind.clone()))?;
        let inputs = g
            .inputs
            .iter()
            .map(|n| lookup(&b, n))
            .collect::<Result<Vec<_>, _>>()?;
        let output = lookup(&b, &g.output)?;
        let params = GateParams {
            amount: g.params.amount,
            offset: g.params.offset,
            memory: g.params.memory.clone(),
        };
        b.gate_with(kind, &inputs, output, params);
    }
    for r in &doc.registers {
        let input = lookup(&b, &r.input)?;
        let output = lookup(&b, &r.output)?;
        let init = literal(&r.init, b.width(output))?;
        b.register(input, output, init);
    }
    for s in &doc.splits {
        let bits = s
            .bits
            .iter()
            .map(|m| Ok((lookup(&b, &m.wire)?, m.index)))
            .collect::<Result<Vec<_>, NetlistError>>()?;
        b.split(&s.parent, s.width, bits);
    }
    b.finish()
}

pub(super) fn serialize(c: &Circuit) -> String {
    let name = |id: usize| c.wires[id].name.clone();
    let doc = Doc {
        wires: c
            .wires
            .iter()
            .map(|Wire { name, width, src }| WireDoc {
                name: name.clone(),
                width: *width,
                src: src.as_ref().map(|SrcLoc { file, line }| SrcDoc {
                    file: file.clone(),
                    line: *line,
                }),
            })
            .collect(),
        inputs: c.inputs.iter().map(|&i| name(i)).collect(),
        outputs: c.outputs.iter().map(|&i| name(i)).collect(),
        gates: c
            .gates
            .iter()
            .map(|g| GateDoc {
                kind: g.kind.name().to_string(),
                output: name(g.output),
                inputs: g.inputs.iter().map(|&i| name(i)).collect(),
                params: ParamsDoc {
                    amount: g.params.amount,
                    offset: g.params.offset,
                    memory: g.params.memory.clone(),
                },
            })
            .collect(),
        registers: c
            .registers
            .iter()
            .map(|r| RegisterDoc {
                input: name(r.input),
                output: name(r.output),
                init: r.init.to_literal(),
            })
            .collect(),
        splits: c
            .splits
            .iter()
            .map(|s| SplitDoc {
                parent: s.parent.clone(),
                width: s.width,
                bits: s
                    .bits
                    .iter()
                    .map(|&(w, index)| SplitBitDoc {
                        wire: name(w),
                        index,
                    })
                    .collect(),
            })
            .collect(),
        memories: c
            .memories
            .iter()
            .map(|Memory { id, depth, width, init }| MemoryDoc {
                id: id.clone(),
                depth: *depth,
                width: *width,
                init: (!init.is_empty()).then(|| init.iter().map(BitVec::to_literal).collect()),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("netlist serializes")
}
