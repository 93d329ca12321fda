//! Higher-order verification over d-uplets of probe positions.

use std::collections::BTreeMap;
use std::ops::Range;

use dashmap::DashMap;
use itertools::structs::Combinations;
use itertools::Itertools;
use rayon::prelude::*;
use thiserror::Error;

use super::select::{expr_sets_for, recombine_split, virtual_parents};
use super::{sim_options, Granularity, LeakageModel, ManagerError, RunOptions};
use crate::expr::SymbolTable;
use crate::netlist::Circuit;
use crate::sim::{Simulator, Stimuli};
use crate::verify::{check, ExprSet, Strategy, Verdict};

/// How probe positions combine into d-uplets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DupletMode {
    /// Different wires within one cycle.
    Spatial,
    /// One wire across different cycles.
    Temporal,
    /// Any wire at any cycle.
    Mixed,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DupletError {
    #[error("{count} d-uplets exceed the cap of {limit}")]
    TooMany { count: u128, limit: u128 },
    #[error("verification order must be at least 1")]
    ZeroOrder,
}

/// `C(p, d)`, saturating.
pub fn binomial(p: usize, d: usize) -> u128 {
    if d > p {
        return 0;
    }
    let d = d.min(p - d);
    let mut acc: u128 = 1;
    for i in 0..d {
        acc = acc.saturating_mul((p - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// All `d`-subsets of `0..p` in lexicographic order.
pub fn enumerate_duplets(
    p: usize,
    d: usize,
    cap: u128,
) -> Result<Combinations<Range<usize>>, DupletError> {
    if d == 0 {
        return Err(DupletError::ZeroOrder);
    }
    let count = binomial(p, d);
    if count > cap {
        return Err(DupletError::TooMany { count, limit: cap });
    }
    Ok((0..p).combinations(d))
}

/// A non-trivial expression set of one wire (or bit) at one cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Position {
    pub wire: String,
    pub cycle: usize,
    pub set: ExprSet,
}

impl Position {
    pub fn label(&self) -> String {
        format!("{}@{}", self.wire, self.cycle)
    }
}

/// Simulates and lists every wire's model set at every cycle, skipping
/// trivial ones.
pub fn probe_positions(
    circuit: &Circuit,
    stimuli: &Stimuli,
    model: &LeakageModel,
    options: &RunOptions,
) -> Result<Vec<Position>, ManagerError> {
    model.validate()?;
    let mut sim = Simulator::new(
        circuit,
        stimuli.witness.clone(),
        options.hook.clone(),
        sim_options(model, options),
    )?;
    let mut out = Vec::new();
    sim.run(stimuli, |state| {
        let cycle = state.cycles_done() - 1;
        let (cur, prev) = (state.current(), state.previous());
        let mut push = |reqs: Vec<super::Request>| {
            for r in reqs {
                if !r.set.is_empty() {
                    out.push(Position {
                        wire: r.name,
                        cycle,
                        set: r.set,
                    });
                }
            }
        };
        for (w, wire) in circuit.wires().iter().enumerate() {
            push(expr_sets_for(&wire.name, &cur[w], prev.map(|p| &p[w]), model));
        }
        if model.granularity == Granularity::SupportWise {
            for split in virtual_parents(circuit) {
                let c = recombine_split(split, cur);
                let p = prev.map(|p| recombine_split(split, p));
                push(expr_sets_for(&split.parent, &c, p.as_ref(), model));
            }
        }
        Ok(true)
    })?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct OrderReport {
    pub order: usize,
    pub mode: DupletMode,
    /// `(group label, positions p, d-uplets produced)`.
    pub groups: Vec<(String, usize, u128)>,
    pub checked: u128,
    pub leaking: u128,
    /// First failing d-uplets (position labels), at most [`KEPT_FINDINGS`].
    pub findings: Vec<(Vec<String>, Verdict)>,
    pub verdict: Verdict,
}

pub const KEPT_FINDINGS: usize = 16;
const CHUNK: usize = 4096;

fn groups(positions: &[Position], mode: DupletMode) -> Vec<(String, Vec<usize>)> {
    match mode {
        DupletMode::Mixed => vec![("all".to_string(), (0..positions.len()).collect())],
        DupletMode::Spatial => {
            let mut by: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, p) in positions.iter().enumerate() {
                by.entry(p.cycle).or_default().push(i);
            }
            by.into_iter()
                .map(|(c, v)| (format!("cycle {c}"), v))
                .collect()
        }
        DupletMode::Temporal => {
            let mut by: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, p) in positions.iter().enumerate() {
                by.entry(&p.wire).or_default().push(i);
            }
            by.into_iter().map(|(w, v)| (w.to_string(), v)).collect()
        }
    }
}

/// Checks the union of every d-uplet of positions.
pub fn verify_order(
    positions: &[Position],
    labels: &SymbolTable,
    d: usize,
    mode: DupletMode,
    strategy: Strategy,
    cap: u128,
    stop_on_first: bool,
) -> Result<OrderReport, DupletError> {
    let groups = groups(positions, mode);
    let total: u128 = groups.iter().map(|(_, v)| binomial(v.len(), d)).sum();
    if total > cap {
        return Err(DupletError::TooMany {
            count: total,
            limit: cap,
        });
    }
    let cache: DashMap<String, Verdict> = DashMap::new();
    let mut report = OrderReport {
        order: d,
        mode,
        groups: Vec::new(),
        checked: 0,
        leaking: 0,
        findings: Vec::new(),
        verdict: Verdict::Secure,
    };
    'outer: for (label, members) in &groups {
        let mut produced = 0u128;
        let combos = enumerate_duplets(members.len(), d, cap)?;
        for chunk in &combos.chunks(CHUNK) {
            let chunk: Vec<Vec<usize>> = chunk.collect();
            produced += chunk.len() as u128;
            let verdicts: Vec<Verdict> = chunk
                .par_iter()
                .map(|tuple| {
                    let set = tuple
                        .iter()
                        .fold(ExprSet::new([]), |acc, &i| acc.union(&positions[members[i]].set));
                    let key = set.key();
                    if let Some(v) = cache.get(&key) {
                        return v.clone();
                    }
                    let v = check(&set, labels, strategy);
                    cache.insert(key, v.clone());
                    v
                })
                .collect();
            for (tuple, v) in chunk.iter().zip(verdicts) {
                if v.is_secure() {
                    continue;
                }
                report.leaking += 1;
                if report.verdict.is_secure() {
                    report.verdict = v.clone();
                }
                if report.findings.len() < KEPT_FINDINGS {
                    let names = tuple.iter().map(|&i| positions[members[i]].label()).collect();
                    report.findings.push((names, v));
                }
            }
            if stop_on_first && !report.verdict.is_secure() {
                report.checked += produced;
                report.groups.push((label.clone(), members.len(), produced));
                break 'outer;
            }
        }
        report.checked += produced;
        report.groups.push((label.clone(), members.len(), produced));
    }
    Ok(report)
}
