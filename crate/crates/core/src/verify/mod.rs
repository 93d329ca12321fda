//! Statistical independence of expression sets from secrets.
//!
//! [`check_substitution`] is a cheap syntactic prover that can only say
//! `Secure`; [`check_enumeration`] is exact but exponential. [`check`]
//! combines them. Gadget-level NI/SNI predicates live in [`ni`].

mod engine;
pub mod ni;
mod subst;

use std::collections::BTreeSet;
use std::fmt;

use crate::expr::{Assignment, Expr, SymbolKind, SymbolTable};

pub use engine::{check_enumeration, EnumError};
pub use ni::{check_ni, check_sni, GadgetSpec, NiError, ProbeMode};
pub use subst::check_substitution;

/// Default cap on enumerated symbolic bits.
pub const DEFAULT_ENUM_LIMIT: u32 = 20;

/// A canonical set of terms. Constants are dropped and members sorted,
/// so equal sets have equal [`key`](ExprSet::key)s.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExprSet {
    members: Vec<Expr>,
}

impl ExprSet {
    pub fn new(items: impl IntoIterator<Item = Expr>) -> ExprSet {
        let set: BTreeSet<Expr> = items.into_iter().filter(|e| !e.is_const()).collect();
        ExprSet {
            members: set.into_iter().collect(),
        }
    }

    pub fn members(&self) -> &[Expr] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn union(&self, other: &ExprSet) -> ExprSet {
        ExprSet::new(self.members.iter().chain(&other.members).cloned())
    }

    pub fn renderings(&self) -> Vec<String> {
        self.members.iter().map(|e| e.to_string()).collect()
    }

    /// Canonical text of the sorted members. Renderings never contain a
    /// newline, so the separator keeps distinct sets apart.
    pub fn key(&self) -> String {
        self.renderings().join("\n")
    }

    pub fn symbols(&self) -> BTreeSet<String> {
        self.members.iter().flat_map(|e| e.symbols()).collect()
    }

    /// True when no member mentions a secret or a share.
    pub fn is_secret_free(&self, labels: &SymbolTable) -> bool {
        self.symbols().iter().all(|s| {
            labels
                .get(s)
                .map(|i| !i.kind.is_sensitive())
                .unwrap_or(false)
        })
    }
}

/// Evidence that a distribution depends on secret data: the observation
/// occurs `count_a` times under `secret_a` and `count_b` under `secret_b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    /// Values held fixed while comparing (publics, simulating shares).
    pub fixed: Assignment,
    pub secret_a: Assignment,
    pub secret_b: Assignment,
    /// One value per set member, in member order.
    pub observation: Vec<u64>,
    pub count_a: u64,
    pub count_b: u64,
    /// The probed terms (renderings), for gadget-level checks.
    pub probes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Secure,
    Leaks(Box<Witness>),
    Inconclusive(String),
}

impl Verdict {
    pub fn is_secure(&self) -> bool {
        matches!(self, Verdict::Secure)
    }

    pub fn is_leak(&self) -> bool {
        matches!(self, Verdict::Leaks(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Secure => "secure",
            Verdict::Leaks(_) => "leaks",
            Verdict::Inconclusive(_) => "inconclusive",
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Leaks(w) => Some(w),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Inconclusive(why) => write!(f, "inconclusive ({why})"),
            v => f.write_str(v.name()),
        }
    }
}

/// Which provers [`check`] may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Strategy {
    pub substitution: bool,
    pub enumeration: bool,
    pub enum_limit: u32,
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy {
            substitution: true,
            enumeration: true,
            enum_limit: DEFAULT_ENUM_LIMIT,
        }
    }
}

/// Substitution first, enumeration as fallback within the bit limit.
pub fn check(set: &ExprSet, labels: &SymbolTable, strategy: Strategy) -> Verdict {
    if set.is_secret_free(labels) {
        return Verdict::Secure;
    }
    if strategy.substitution && check_substitution(set, labels).is_secure() {
        return Verdict::Secure;
    }
    if !strategy.enumeration {
        return Verdict::Inconclusive("substitution could not remove all secrets".into());
    }
    match check_enumeration(set, labels, strategy.enum_limit) {
        Ok(v) => v,
        Err(e) => Verdict::Inconclusive(e.to_string()),
    }
}

pub(crate) fn is_mask(labels: &SymbolTable, name: &str) -> bool {
    matches!(labels.get(name).map(|i| &i.kind), Some(SymbolKind::Mask))
}
