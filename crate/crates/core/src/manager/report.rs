use std::collections::BTreeSet;

use serde_json::{json, Map, Value};

use crate::expr::Assignment;
use crate::netlist::SrcLoc;
use crate::sim::SimWarning;
use crate::verify::{Verdict, Witness};

/// One checked probe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub cycle: usize,
    pub wire: String,
    pub src: Option<SrcLoc>,
    pub facet: &'static str,
    pub verdict: Verdict,
    pub exprs: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Summary {
    pub cycles: usize,
    /// Cycles with at least one entry that is not `Secure`.
    pub leaking_cycles: usize,
    /// Requests a run without over-approximation would have sent.
    pub expr_to_verify: usize,
    /// Requests actually dispatched to a prover.
    pub verified_expr: usize,
    pub cache_hits: usize,
    pub trivial_skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LeakReport {
    pub entries: Vec<Entry>,
    pub warnings: Vec<SimWarning>,
    pub summary: Summary,
    pub stopped_early: bool,
}

fn assignment_json(a: &Assignment) -> Value {
    Value::Object(
        a.iter()
            .map(|(k, v)| (k.clone(), Value::String(v.to_literal())))
            .collect::<Map<_, _>>(),
    )
}

pub fn witness_json(w: &Witness) -> Value {
    json!({
        "fixed": assignment_json(&w.fixed),
        "secret_a": assignment_json(&w.secret_a),
        "secret_b": assignment_json(&w.secret_b),
        "observation": w.observation,
        "count_a": w.count_a,
        "count_b": w.count_b,
        "probes": w.probes,
    })
}

impl Entry {
    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("cycle".into(), json!(self.cycle));
        obj.insert("wire".into(), json!(self.wire));
        if let Some(src) = &self.src {
            obj.insert("src".into(), json!({"file": src.file, "line": src.line}));
        }
        obj.insert("facet".into(), json!(self.facet));
        obj.insert("verdict".into(), json!(self.verdict.name()));
        obj.insert("exprs".into(), json!(self.exprs));
        match &self.verdict {
            Verdict::Leaks(w) => {
                obj.insert("witness".into(), witness_json(w));
            }
            Verdict::Inconclusive(why) => {
                obj.insert("reason".into(), json!(why));
            }
            Verdict::Secure => {}
        }
        Value::Object(obj)
    }
}

impl Summary {
    pub fn to_json(&self) -> Value {
        json!({
            "cycles": self.cycles,
            "leaking_cycles": self.leaking_cycles,
            "expr_to_verify": self.expr_to_verify,
            "verified_expr": self.verified_expr,
            "cache_hits": self.cache_hits,
            "trivial_skipped": self.trivial_skipped,
        })
    }
}

impl LeakReport {
    /// Entries and warnings in (cycle, wire) order, then the summary line.
    pub fn to_jsonl(&self) -> String {
        let mut lines: Vec<(usize, u8, String, Value)> = Vec::new();
        for w in &self.warnings {
            lines.push((
                w.cycle,
                0,
                w.wire.clone(),
                json!({"warning": w.kind.name(), "cycle": w.cycle, "wire": w.wire}),
            ));
        }
        for e in &self.entries {
            lines.push((e.cycle, 1, e.wire.clone(), e.to_json()));
        }
        // Stable sort keeps the per-cycle bit order of entries.
        lines.sort_by_key(|l| (l.0, l.1));
        let mut out = String::new();
        for (_, _, _, v) in lines {
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out.push_str(&self.summary.to_json().to_string());
        out.push('\n');
        out
    }

    pub fn findings(&self) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(|e| !e.verdict.is_secure())
    }

    pub fn leaking_cycle_set(&self) -> BTreeSet<usize> {
        self.findings().map(|e| e.cycle).collect()
    }

    pub fn has_findings(&self) -> bool {
        self.findings().next().is_some()
    }

    /// `(cycle, wire, verdict name)` of every entry, sorted.
    pub fn verdict_multiset(&self) -> Vec<(usize, String, &'static str)> {
        let mut v: Vec<_> = self
            .entries
            .iter()
            .map(|e| (e.cycle, e.wire.clone(), e.verdict.name()))
            .collect();
        v.sort();
        v
    }
}
