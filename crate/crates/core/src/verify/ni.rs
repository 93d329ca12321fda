//! Non-interference of masked gadgets.
//!
//! A tuple of probes is simulatable from a set of input shares when its
//! joint distribution, over the masks, does not depend on the remaining
//! shares. NI allows as many shares per input as there are probes; SNI only
//! as many as there are internal (non-output) probes.

use std::collections::BTreeSet;

use itertools::Itertools;
use rayon::prelude::*;
use thiserror::Error;

use super::engine::{distinguish, EnumError, Space};
use super::{ExprSet, Verdict, Witness, DEFAULT_ENUM_LIMIT};
use crate::expr::{SymbolKind, SymbolTable};
use crate::netlist::{Circuit, WireId};
use crate::sim::{SimError, Simulator, Stimuli};

/// A masked gadget with its share interface.
#[derive(Debug, Clone)]
pub struct GadgetSpec {
    pub circuit: Circuit,
    pub labels: SymbolTable,
    pub stimuli: Stimuli,
    /// Input secrets with their share symbols, by share index.
    pub inputs: Vec<(String, Vec<String>)>,
    /// Wires carrying the output shares.
    pub outputs: Vec<WireId>,
    pub randomness: Vec<String>,
    pub order: u32,
}

impl GadgetSpec {
    pub fn validate(&self) -> Result<(), NiError> {
        for (secret, shares) in &self.inputs {
            if shares.len() != self.order as usize + 1 {
                return Err(NiError::Spec(format!(
                    "input `{secret}` has {} shares, order {} needs {}",
                    shares.len(),
                    self.order,
                    self.order + 1
                )));
            }
            for s in shares {
                match self.labels.get(s).map(|i| &i.kind) {
                    Some(SymbolKind::Share { secret: p, .. }) if p == secret => {}
                    _ => {
                        return Err(NiError::Spec(format!(
                            "`{s}` is not labeled as a share of `{secret}`"
                        )))
                    }
                }
            }
        }
        for r in &self.randomness {
            if !super::is_mask(&self.labels, r) {
                return Err(NiError::Spec(format!("`{r}` is not labeled as a mask")));
            }
        }
        Ok(())
    }
}

/// What a probe observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeMode {
    /// The stable symbolic value.
    Value,
    /// Everything a glitch may expose: the flattened LeakSet.
    Glitch,
}

impl ProbeMode {
    pub fn from_glitches(glitches: bool) -> ProbeMode {
        if glitches {
            ProbeMode::Glitch
        } else {
            ProbeMode::Value
        }
    }
}

#[derive(Debug, Error)]
pub enum NiError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Enum(#[from] EnumError),
    #[error("gadget: {0}")]
    Spec(String),
}

/// One probe position: a wire at a cycle.
#[derive(Debug, Clone)]
pub struct Probe {
    pub wire: WireId,
    pub cycle: usize,
    /// Output share observed at the final cycle.
    pub output: bool,
    pub terms: ExprSet,
}

/// Simulates the gadget and lists every non-trivial probe position.
pub fn probes(gadget: &GadgetSpec, mode: ProbeMode) -> Result<Vec<Probe>, NiError> {
    let c = &gadget.circuit;
    let mut sim = Simulator::with_defaults(c, gadget.stimuli.witness.clone())?;
    let last = gadget.stimuli.cycles().saturating_sub(1);
    let mut out = Vec::new();
    sim.run(&gadget.stimuli, |state| {
        let cycle = state.cycles_done() - 1;
        for (w, v) in state.current().iter().enumerate() {
            let terms = match mode {
                ProbeMode::Value => ExprSet::new([v.symb.clone()]),
                ProbeMode::Glitch => ExprSet::new(v.flat_lset()),
            };
            if terms.is_empty() {
                continue;
            }
            out.push(Probe {
                wire: w,
                cycle,
                output: cycle == last && gadget.outputs.contains(&w),
                terms,
            });
        }
        Ok(true)
    })?;
    Ok(out)
}

/// All subsets of `items` of size `k`, or `items` itself when it fits.
fn selections(items: &[String], k: usize) -> Vec<Vec<String>> {
    if items.len() <= k {
        vec![items.to_vec()]
    } else {
        items.iter().cloned().combinations(k).collect()
    }
}

fn simulatable(
    gadget: &GadgetSpec,
    tuple: &[&Probe],
    budget: usize,
    limit: u32,
) -> Result<Option<Witness>, NiError> {
    let terms = tuple
        .iter()
        .fold(ExprSet::new([]), |acc, p| acc.union(&p.terms));
    let syms = terms.symbols();
    let per_input: Vec<Vec<Vec<String>>> = gadget
        .inputs
        .iter()
        .map(|(_, shares)| {
            let present: Vec<String> =
                shares.iter().filter(|s| syms.contains(*s)).cloned().collect();
            selections(&present, budget)
        })
        .collect();
    let mut first = None;
    for choice in product(&per_input) {
        let selected: BTreeSet<&String> = choice.iter().flat_map(|v| v.iter()).collect();
        let mut space = Space::default();
        for s in &syms {
            let info = gadget
                .labels
                .get(s)
                .ok_or_else(|| EnumError::Unlabeled(s.clone()))?;
            let v = space.add_var(s, info.width);
            match &info.kind {
                SymbolKind::Public => space.outer.push(v),
                SymbolKind::Mask => space.random.push(v),
                SymbolKind::Share { .. } if selected.contains(s) => space.outer.push(v),
                SymbolKind::Share { .. } | SymbolKind::Secret => space.inner.push(v),
            }
            space.symbols.insert(s.clone(), vec![v]);
        }
        if space.inner.is_empty() {
            return Ok(None);
        }
        match distinguish(terms.members(), &space, limit)? {
            None => return Ok(None),
            Some(f) => {
                first.get_or_insert(Witness {
                    fixed: f.fixed,
                    secret_a: f.inner_a,
                    secret_b: f.inner_b,
                    observation: f.observation,
                    count_a: f.count_a,
                    count_b: f.count_b,
                    probes: tuple
                        .iter()
                        .map(|p| format!("{}@{}", gadget.circuit.wire(p.wire).name, p.cycle))
                        .collect(),
                });
            }
        }
    }
    Ok(first)
}

/// Cartesian product of the per-input selections; one empty choice when
/// there are no inputs.
fn product(lists: &[Vec<Vec<String>>]) -> Vec<Vec<&Vec<String>>> {
    if lists.is_empty() {
        return vec![Vec::new()];
    }
    lists.iter().map(|l| l.iter()).multi_cartesian_product().collect()
}

fn check(
    gadget: &GadgetSpec,
    d: u32,
    glitches: bool,
    strong: bool,
    limit: u32,
) -> Result<Verdict, NiError> {
    gadget.validate()?;
    let probes = probes(gadget, ProbeMode::from_glitches(glitches))?;
    let tuples: Vec<Vec<&Probe>> = (1..=d as usize)
        .flat_map(|k| probes.iter().combinations(k))
        .collect();
    let failure = tuples
        .par_iter()
        .map(|tuple| {
            let budget = if strong {
                tuple.iter().filter(|p| !p.output).count()
            } else {
                tuple.len()
            };
            simulatable(gadget, tuple, budget, limit)
        })
        .find_map_first(|r| match r {
            Ok(None) => None,
            other => Some(other),
        });
    match failure {
        None => Ok(Verdict::Secure),
        Some(Ok(Some(w))) => Ok(Verdict::Leaks(Box::new(w))),
        Some(Ok(None)) => unreachable!(),
        Some(Err(e)) => Err(e),
    }
}

/// `d`-NI: every tuple of at most `d` probes is simulatable with at most
/// as many shares per input as it has probes.
pub fn check_ni(gadget: &GadgetSpec, d: u32, glitches: bool) -> Result<Verdict, NiError> {
    check(gadget, d, glitches, false, DEFAULT_ENUM_LIMIT)
}

/// `d`-SNI: output probes do not count toward the share budget.
pub fn check_sni(gadget: &GadgetSpec, d: u32, glitches: bool) -> Result<Verdict, NiError> {
    check(gadget, d, glitches, true, DEFAULT_ENUM_LIMIT)
}

/// [`check_ni`] / [`check_sni`] with an explicit enumeration bit limit.
pub fn check_with_limit(
    gadget: &GadgetSpec,
    d: u32,
    glitches: bool,
    strong: bool,
    limit: u32,
) -> Result<Verdict, NiError> {
    check(gadget, d, glitches, strong, limit)
}
