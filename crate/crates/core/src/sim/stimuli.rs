//! Input sequences: one frame per cycle plus a concrete witness.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SimError;
use crate::bitvec::BitVec;
use crate::expr::{parse_expr, Assignment, Expr, SymbolTable};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputValue {
    Const(BitVec),
    Symbol(String),
    /// Arbitrary term over declared symbols, e.g. a pre-masked value `k ^ m`.
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StimulusFrame {
    pub cycle: usize,
    pub inputs: BTreeMap<String, InputValue>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stimuli {
    pub witness: Assignment,
    pub frames: Vec<StimulusFrame>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameDoc {
    cycle: usize,
    inputs: BTreeMap<String, InputDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputDoc {
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "const")]
    constant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    symbol: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expr: Option<String>,
}

fn bad(line: usize, msg: impl std::fmt::Display) -> SimError {
    SimError::Stimuli(format!("line {line}: {msg}"))
}

impl Stimuli {
    pub fn new(witness: Assignment) -> Self {
        Stimuli {
            witness,
            frames: Vec::new(),
        }
    }

    /// Appends the frame for the next cycle.
    pub fn push(&mut self, inputs: impl IntoIterator<Item = (String, InputValue)>) {
        let cycle = self.frames.len();
        self.frames.push(StimulusFrame {
            cycle,
            inputs: inputs.into_iter().collect(),
        });
    }

    pub fn cycles(&self) -> usize {
        self.frames.len()
    }

    /// Parses stimuli JSONL. Symbol widths for `expr` inputs come from `labels`.
    pub fn parse(text: &str, labels: &SymbolTable) -> Result<Stimuli, SimError> {
        let mut out = Stimuli::default();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let value: Value = serde_json::from_str(line).map_err(|e| bad(line_no, e))?;
            if let Some(w) = value.get("witness") {
                let map: BTreeMap<String, String> =
                    serde_json::from_value(w.clone()).map_err(|e| bad(line_no, e))?;
                for (k, v) in map {
                    let bits = BitVec::parse_literal(&v).map_err(|e| bad(line_no, e))?;
                    out.witness.insert(k, bits);
                }
                continue;
            }
            let doc: FrameDoc = serde_json::from_value(value).map_err(|e| bad(line_no, e))?;
            if doc.cycle != out.frames.len() {
                return Err(bad(
                    line_no,
                    format!("expected cycle {}, found {}", out.frames.len(), doc.cycle),
                ));
            }
            let mut inputs = BTreeMap::new();
            for (name, input) in doc.inputs {
                let v = match (input.constant, input.symbol, input.expr) {
                    (Some(c), None, None) => {
                        InputValue::Const(BitVec::parse_literal(&c).map_err(|e| bad(line_no, e))?)
                    }
                    (None, Some(s), None) => InputValue::Symbol(s),
                    (None, None, Some(e)) => InputValue::Expr(
                        parse_expr(&e, &|s| labels.width_of(s)).map_err(|e| bad(line_no, e))?,
                    ),
                    _ => {
                        return Err(bad(
                            line_no,
                            format!("input `{name}` needs exactly one of const/symbol/expr"),
                        ))
                    }
                };
                inputs.insert(name, v);
            }
            out.frames.push(StimulusFrame {
                cycle: doc.cycle,
                inputs,
            });
        }
        Ok(out)
    }

    pub fn to_jsonl(&self) -> String {
        let witness: BTreeMap<&str, String> = self
            .witness
            .iter()
            .map(|(k, v)| (k.as_str(), v.to_literal()))
            .collect();
        let mut out = serde_json::json!({ "witness": witness }).to_string();
        out.push('\n');
        for f in &self.frames {
            let inputs = f
                .inputs
                .iter()
                .map(|(k, v)| {
                    let doc = match v {
                        InputValue::Const(c) => InputDoc {
                            constant: Some(c.to_literal()),
                            symbol: None,
                            expr: None,
                        },
                        InputValue::Symbol(s) => InputDoc {
                            constant: None,
                            symbol: Some(s.clone()),
                            expr: None,
                        },
                        InputValue::Expr(e) => InputDoc {
                            constant: None,
                            symbol: None,
                            expr: Some(e.to_string()),
                        },
                    };
                    (k.clone(), doc)
                })
                .collect();
            let doc = FrameDoc {
                cycle: f.cycle,
                inputs,
            };
            out.push_str(&serde_json::to_string(&doc).expect("frame serializes"));
            out.push('\n');
        }
        out
    }
}
