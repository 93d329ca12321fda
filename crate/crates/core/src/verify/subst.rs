//! Syntactic masking prover: a term `c ^ rest`, where `c` is a bijective
//! image of a mask occurring nowhere else, is uniform and independent of
//! everything else, so it can be swapped for a fresh mask.

use std::collections::{BTreeMap, HashMap};

use super::{is_mask, ExprSet, Verdict};
use crate::expr::{Expr, ExprKind, Op, SymbolTable};

const FRESH_PREFIX: &str = "__fresh";

/// Tree occurrence counts of every symbol, saturating at 2.
fn occurrences(members: &[Expr]) -> BTreeMap<String, u8> {
    fn go(e: &Expr, memo: &mut HashMap<u64, BTreeMap<String, u8>>) -> BTreeMap<String, u8> {
        if let Some(m) = memo.get(&e.id()) {
            return m.clone();
        }
        let mut out = BTreeMap::new();
        match e.kind() {
            ExprKind::Symbol(s) => {
                out.insert(s.to_string(), 1);
            }
            ExprKind::Const(_) => {}
            ExprKind::Op { args, .. } => {
                for a in args.iter() {
                    for (k, v) in go(a, memo) {
                        let slot = out.entry(k).or_insert(0u8);
                        *slot = (*slot + v).min(2);
                    }
                }
            }
        }
        memo.insert(e.id(), out.clone());
        out
    }
    let mut memo = HashMap::new();
    let mut total = BTreeMap::new();
    for m in members {
        for (k, v) in go(m, &mut memo) {
            let slot = total.entry(k).or_insert(0u8);
            *slot = (*slot + v).min(2);
        }
    }
    total
}

/// `c` is a bijective image of the full mask `m` (NOT / whole-width
/// identity) or a uniform slice of it (EXTRACT).
fn uniform_image_of(c: &Expr, m: &str) -> bool {
    match c.kind() {
        ExprKind::Symbol(s) => &**s == m,
        ExprKind::Op { op, args } => match op {
            Op::Not | Op::Extract { .. } => uniform_image_of(&args[0], m),
            _ => false,
        },
        ExprKind::Const(_) => false,
    }
}

/// First XOR node with a child that is a uniform image of `m`.
fn xor_over(members: &[Expr], m: &str) -> Option<Expr> {
    let mut found = None;
    for root in members {
        root.visit_dag(&mut |e| {
            if found.is_some() {
                return;
            }
            if let Some((Op::Xor, args)) = e.op() {
                if args.iter().any(|c| uniform_image_of(c, m)) {
                    found = Some(e.clone());
                }
            }
        });
        if found.is_some() {
            break;
        }
    }
    found
}

fn replace(e: &Expr, target: &Expr, with: &Expr, memo: &mut HashMap<u64, Expr>) -> Expr {
    if e == target {
        return with.clone();
    }
    if let Some(r) = memo.get(&e.id()) {
        return r.clone();
    }
    let out = match e.op() {
        Some((op, args)) => {
            let new: Vec<Expr> = args.iter().map(|a| replace(a, target, with, memo)).collect();
            if new.iter().zip(args.iter()).all(|(a, b)| a == b) {
                e.clone()
            } else {
                Expr::build(op.clone(), new).expect("replacement preserves widths")
            }
        }
        None => e.clone(),
    };
    memo.insert(e.id(), out.clone());
    out
}

/// Applies the rule to a fixpoint. `Secure` iff no secret or share survives;
/// never reports a leak.
pub fn check_substitution(set: &ExprSet, labels: &SymbolTable) -> Verdict {
    let mut members: Vec<Expr> = set.members().to_vec();
    let mut fresh = 0usize;
    let is_random = |name: &str| name.starts_with(FRESH_PREFIX) || is_mask(labels, name);
    loop {
        let occ = occurrences(&members);
        let mut candidates: Vec<Expr> = occ
            .iter()
            .filter(|(name, &n)| n == 1 && is_random(name))
            .map(|(name, _)| name.clone())
            .filter_map(|name| {
                let mut sym = None;
                for m in &members {
                    m.visit_dag(&mut |e| {
                        if e.as_symbol() == Some(name.as_str()) {
                            sym = Some(e.clone());
                        }
                    });
                }
                sym
            })
            .collect();
        candidates.sort();
        let step = candidates.iter().find_map(|m| {
            let name = m.as_symbol().expect("symbol");
            xor_over(&members, name).map(|x| (x, name.to_string()))
        });
        let Some((target, _mask)) = step else { break };
        let r = Expr::symbol(&format!("{FRESH_PREFIX}{fresh}"), target.width());
        fresh += 1;
        let mut memo = HashMap::new();
        members = members
            .iter()
            .map(|m| replace(m, &target, &r, &mut memo))
            .collect();
    }
    let leftover = members.iter().flat_map(|e| e.symbols()).any(|s| {
        !s.starts_with(FRESH_PREFIX)
            && labels
                .get(&s)
                .map(|i| i.kind.is_sensitive())
                .unwrap_or(true)
    });
    if leftover {
        Verdict::Inconclusive("secret variables remain after substitution".into())
    } else {
        Verdict::Secure
    }
}
