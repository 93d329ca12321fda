//! Exhaustive distribution comparison.
//!
//! Variables are split into three groups: `outer` values are fixed for a
//! comparison, `inner` values must not change the distribution of the
//! observation, and `random` values are summed over. Every symbol of the
//! observed terms is the XOR of one or more variables, which expresses
//! Boolean share relations exactly.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::Hash;

use thiserror::Error;

use super::{ExprSet, Verdict, Witness};
use crate::bitvec::{mask, BitVec};
use crate::expr::{Assignment, Expr, Program, SymbolKind, SymbolTable};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnumError {
    #[error("enumeration needs {bits} symbolic bits, limit is {limit}")]
    TooLarge { bits: u32, limit: u32 },
    #[error("symbol `{0}` has no label")]
    Unlabeled(String),
    #[error("{0}")]
    Compile(String),
}

#[derive(Debug, Clone)]
pub(crate) struct Var {
    pub name: String,
    pub width: u32,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Space {
    pub vars: Vec<Var>,
    pub outer: Vec<usize>,
    pub inner: Vec<usize>,
    pub random: Vec<usize>,
    /// Program symbol name -> XOR of these variables.
    pub symbols: BTreeMap<String, Vec<usize>>,
}

impl Space {
    pub fn add_var(&mut self, name: &str, width: u32) -> usize {
        self.vars.push(Var {
            name: name.to_string(),
            width,
        });
        self.vars.len() - 1
    }

    fn bits(&self, group: &[usize]) -> u32 {
        group.iter().map(|&v| self.vars[v].width).sum()
    }

    pub fn total_bits(&self) -> u32 {
        self.bits(&self.outer) + self.bits(&self.inner) + self.bits(&self.random)
    }

    fn decode(&self, group: &[usize], mut counter: u64, values: &mut [u64]) {
        for &v in group {
            let w = self.vars[v].width;
            values[v] = counter & mask(w);
            counter = if w >= 64 { 0 } else { counter >> w };
        }
    }

    fn assignment(&self, group: &[usize], values: &[u64]) -> Assignment {
        group
            .iter()
            .map(|&v| {
                let var = &self.vars[v];
                (var.name.clone(), BitVec::new(var.width, values[v]))
            })
            .collect()
    }
}

/// A distinguishing pair of inner assignments.
pub(crate) struct Found {
    pub fixed: Assignment,
    pub inner_a: Assignment,
    pub inner_b: Assignment,
    pub observation: Vec<u64>,
    pub count_a: u64,
    pub count_b: u64,
}

fn histogram<K: Hash + Eq>(
    prog: &Program,
    space: &Space,
    slot_vars: &[Vec<usize>],
    values: &mut [u64],
    key: &impl Fn(&[u64]) -> K,
) -> HashMap<K, u64> {
    let random_bits = space.bits(&space.random);
    let mut hist = HashMap::new();
    let mut inputs = vec![0u64; slot_vars.len()];
    let mut scratch = Vec::new();
    let mut out = vec![0u64; prog.output_widths().len()];
    for r in 0..(1u64 << random_bits) {
        space.decode(&space.random, r, values);
        for (slot, vars) in inputs.iter_mut().zip(slot_vars) {
            *slot = vars.iter().fold(0, |acc, &v| acc ^ values[v]);
        }
        prog.run(&inputs, &mut scratch, &mut out);
        *hist.entry(key(&out)).or_insert(0) += 1;
    }
    hist
}

fn search<K: Hash + Eq + Ord + Clone>(
    prog: &Program,
    space: &Space,
    slot_vars: &[Vec<usize>],
    key: impl Fn(&[u64]) -> K,
    unkey: impl Fn(&K) -> Vec<u64>,
) -> Option<Found> {
    let mut values = vec![0u64; space.vars.len()];
    let outer_bits = space.bits(&space.outer);
    let inner_bits = space.bits(&space.inner);
    for o in 0..(1u64 << outer_bits) {
        space.decode(&space.outer, o, &mut values);
        space.decode(&space.inner, 0, &mut values);
        let base = histogram(prog, space, slot_vars, &mut values, &key);
        for i in 1..(1u64 << inner_bits) {
            space.decode(&space.inner, i, &mut values);
            let hist = histogram(prog, space, slot_vars, &mut values, &key);
            if hist == base {
                continue;
            }
            let keys: BTreeSet<&K> = base.keys().chain(hist.keys()).collect();
            let k = keys
                .into_iter()
                .find(|k| base.get(*k) != hist.get(*k))
                .expect("histograms differ");
            let inner_b = space.assignment(&space.inner, &values);
            space.decode(&space.inner, 0, &mut values);
            return Some(Found {
                fixed: space.assignment(&space.outer, &values),
                inner_a: space.assignment(&space.inner, &values),
                inner_b,
                observation: unkey(k),
                count_a: base.get(k).copied().unwrap_or(0),
                count_b: hist.get(k).copied().unwrap_or(0),
            });
        }
    }
    None
}

/// Searches for two inner assignments under which `terms` are distributed
/// differently. Deterministic: the first pair in counter order is returned.
pub(crate) fn distinguish(
    terms: &[Expr],
    space: &Space,
    limit: u32,
) -> Result<Option<Found>, EnumError> {
    let bits = space.total_bits();
    if bits > limit || bits > 63 {
        return Err(EnumError::TooLarge { bits, limit });
    }
    let names: Vec<&String> = space.symbols.keys().collect();
    let prog = Program::compile(terms, &|s| names.iter().position(|n| n.as_str() == s))
        .map_err(|e| EnumError::Compile(e.to_string()))?;
    let slot_vars: Vec<Vec<usize>> = space.symbols.values().cloned().collect();
    let widths: Vec<u32> = prog.output_widths().to_vec();
    let total: u32 = widths.iter().sum();
    let found = if total <= 128 {
        let pack = |out: &[u64]| {
            out.iter()
                .zip(&widths)
                .fold(0u128, |acc, (v, w)| (acc << w) | *v as u128)
        };
        let unpack = |k: &u128| {
            let mut k = *k;
            let mut vals: Vec<u64> = widths
                .iter()
                .rev()
                .map(|w| {
                    let v = (k & mask(*w) as u128) as u64;
                    k >>= w;
                    v
                })
                .collect();
            vals.reverse();
            vals
        };
        search(&prog, space, &slot_vars, pack, unpack)
    } else {
        search(&prog, space, &slot_vars, |o: &[u64]| o.to_vec(), |k| k.clone())
    };
    Ok(found)
}

/// Builds the variable space of an expression set from its labels.
fn space_for(set: &ExprSet, labels: &SymbolTable) -> Result<Space, EnumError> {
    let mut space = Space::default();
    let syms = set.symbols();
    let mut secrets: BTreeMap<String, usize> = BTreeMap::new();
    let mut secret_var = |space: &mut Space, name: &str, width: u32| {
        *secrets.entry(name.to_string()).or_insert_with(|| {
            let v = space.add_var(name, width);
            space.inner.push(v);
            v
        })
    };
    let mut shared: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for s in &syms {
        let info = labels
            .get(s)
            .ok_or_else(|| EnumError::Unlabeled(s.clone()))?;
        match &info.kind {
            SymbolKind::Public => {
                let v = space.add_var(s, info.width);
                space.outer.push(v);
                space.symbols.insert(s.clone(), vec![v]);
            }
            SymbolKind::Secret => {
                let v = secret_var(&mut space, s, info.width);
                space.symbols.insert(s.clone(), vec![v]);
            }
            SymbolKind::Mask => {
                let v = space.add_var(s, info.width);
                space.random.push(v);
                space.symbols.insert(s.clone(), vec![v]);
            }
            SymbolKind::Share { secret, .. } => {
                shared.entry(secret.clone()).or_default().push(s.clone());
            }
        }
    }
    for (secret, present) in shared {
        let all = labels.shares_of(&secret);
        let (_, last) = *all.last().expect("share has siblings");
        let width = labels.width_of(last).expect("labeled");
        if !present.iter().any(|p| p == last) {
            // Any strict subset of the shares is uniform and independent.
            for p in present {
                let v = space.add_var(&p, width);
                space.random.push(v);
                space.symbols.insert(p, vec![v]);
            }
            continue;
        }
        let mut last_vars = vec![secret_var(&mut space, &secret, width)];
        let mut absent = false;
        for &(_, name) in &all[..all.len() - 1] {
            if present.iter().any(|p| p == name) {
                let v = space.add_var(name, width);
                space.random.push(v);
                space.symbols.insert(name.to_string(), vec![v]);
                last_vars.push(v);
            } else {
                absent = true;
            }
        }
        if absent {
            // XOR of the unobserved shares, itself uniform.
            let v = space.add_var(&format!("__rest_{secret}"), width);
            space.random.push(v);
            last_vars.push(v);
        }
        space.symbols.insert(last.to_string(), last_vars);
    }
    Ok(space)
}

/// Exact independence check over all assignments.
pub fn check_enumeration(
    set: &ExprSet,
    labels: &SymbolTable,
    limit: u32,
) -> Result<Verdict, EnumError> {
    let space = space_for(set, labels)?;
    if space.inner.is_empty() {
        return Ok(Verdict::Secure);
    }
    Ok(match distinguish(set.members(), &space, limit)? {
        None => Verdict::Secure,
        Some(f) => Verdict::Leaks(Box::new(Witness {
            fixed: f.fixed,
            secret_a: f.inner_a,
            secret_b: f.inner_b,
            observation: f.observation,
            count_a: f.count_a,
            count_b: f.count_b,
            probes: set.renderings(),
        })),
    })
}
