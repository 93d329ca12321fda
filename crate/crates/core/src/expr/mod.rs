//! Symbolic bit-vector expressions.
//!
//! Every [`Expr`] is hash-consed through a process-wide intern table, so two
//! structurally identical terms are the same allocation and compare equal in
//! constant time. Construction always goes through the simplifier in
//! [`build`], which keeps terms in a canonical form: associative Boolean
//! operators are flattened and their children sorted by [`Expr::cmp`].

mod build;
mod eval;
mod labels;
mod render;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::{Arc, OnceLock};

use dashmap::DashMap;
use thiserror::Error;

use crate::bitvec::BitVec;

pub use build::BitSource;
pub use eval::Program;
pub use labels::{
    assignment_from_literals, Assignment, LabelError, SymbolInfo, SymbolKind, SymbolTable,
};
pub use render::{parse_expr, ParseError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("type error: {0}")]
    TypeError(String),
    #[error("bit index {index} out of range for width {width}")]
    IndexOutOfRange { index: u32, width: u32 },
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
}

/// A named lookup table referenced by `ARRAY` terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Table {
    pub name: Arc<str>,
    pub width: u32,
    pub entries: Arc<[u64]>,
}

impl Table {
    pub fn new(name: impl Into<Arc<str>>, width: u32, entries: Vec<u64>) -> Arc<Self> {
        let m = crate::bitvec::mask(width);
        Arc::new(Table {
            name: name.into(),
            width,
            entries: entries.into_iter().map(|e| e & m).collect(),
        })
    }

    pub fn lookup(&self, index: u64) -> u64 {
        usize::try_from(index)
            .ok()
            .and_then(|i| self.entries.get(i).copied())
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Op {
    Xor,
    And,
    Or,
    Not,
    Add,
    Mul,
    Pow,
    Sub,
    Lsl,
    Lsr,
    Asr,
    Array(Arc<Table>),
    Concat,
    Extract { hi: u32, lo: u32 },
    Zext { width: u32 },
    Sext { width: u32 },
}

impl Op {
    fn rank(&self) -> u8 {
        match self {
            Op::Xor => 0,
            Op::And => 1,
            Op::Or => 2,
            Op::Not => 3,
            Op::Add => 4,
            Op::Mul => 5,
            Op::Pow => 6,
            Op::Sub => 7,
            Op::Lsl => 8,
            Op::Lsr => 9,
            Op::Asr => 10,
            Op::Array(_) => 11,
            Op::Concat => 12,
            Op::Extract { .. } => 13,
            Op::Zext { .. } => 14,
            Op::Sext { .. } => 15,
        }
    }

    fn params_cmp(&self, other: &Op) -> Ordering {
        match (self, other) {
            (Op::Array(a), Op::Array(b)) => a.cmp(b),
            (Op::Extract { hi: h1, lo: l1 }, Op::Extract { hi: h2, lo: l2 }) => {
                (h1, l1).cmp(&(h2, l2))
            }
            (Op::Zext { width: a }, Op::Zext { width: b })
            | (Op::Sext { width: a }, Op::Sext { width: b }) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }

    /// Bitwise operators act on each rank independently.
    pub fn is_bitwise(&self) -> bool {
        matches!(self, Op::Xor | Op::And | Op::Or | Op::Not)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Op::Xor => "OP_XOR",
            Op::And => "OP_AND",
            Op::Or => "OP_OR",
            Op::Not => "OP_NOT",
            Op::Add => "OP_ADD",
            Op::Mul => "OP_MUL",
            Op::Pow => "OP_POW",
            Op::Sub => "OP_SUB",
            Op::Lsl => "OP_LSL",
            Op::Lsr => "OP_LSR",
            Op::Asr => "OP_ASR",
            Op::Array(_) => "ARRAY",
            Op::Concat => "OP_CONCAT",
            Op::Extract { .. } => "OP_EXTRACT",
            Op::Zext { .. } => "OP_ZEXT",
            Op::Sext { .. } => "OP_SEXT",
        }
    }
}

#[derive(Debug)]
pub enum ExprKind {
    Const(BitVec),
    Symbol(Arc<str>),
    Op { op: Op, args: Box<[Expr]> },
}

#[derive(Debug)]
pub struct Node {
    id: u64,
    width: u32,
    depth: u32,
    kind: ExprKind,
}

/// An interned, immutable symbolic term.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

#[derive(PartialEq, Eq, Hash)]
enum NodeKey {
    Const(BitVec),
    Symbol(Arc<str>, u32),
    Op(Op, Box<[u64]>, u32),
}

struct Interner {
    nodes: DashMap<NodeKey, Expr>,
    next_id: AtomicU64,
}

fn interner() -> &'static Interner {
    static INTERNER: OnceLock<Interner> = OnceLock::new();
    INTERNER.get_or_init(|| Interner {
        nodes: DashMap::new(),
        next_id: AtomicU64::new(0),
    })
}

fn intern(key: NodeKey, width: u32, kind: impl FnOnce() -> ExprKind) -> Expr {
    let table = interner();
    if let Some(e) = table.nodes.get(&key) {
        return e.clone();
    }
    table
        .nodes
        .entry(key)
        .or_insert_with(|| {
            let kind = kind();
            let depth = match &kind {
                ExprKind::Op { args, .. } => 1 + args.iter().map(|a| a.0.depth).max().unwrap_or(0),
                _ => 0,
            };
            Expr(Arc::new(Node {
                id: table.next_id.fetch_add(1, AtomicOrdering::Relaxed),
                width,
                depth,
                kind,
            }))
        })
        .clone()
}

impl Expr {
    pub fn constant(value: BitVec) -> Expr {
        intern(NodeKey::Const(value), value.width(), || ExprKind::Const(value))
    }

    pub fn const_bits(width: u32, bits: u64) -> Expr {
        Self::constant(BitVec::new(width, bits))
    }

    pub fn zero(width: u32) -> Expr {
        Self::constant(BitVec::zero(width))
    }

    pub fn ones(width: u32) -> Expr {
        Self::constant(BitVec::ones(width))
    }

    pub fn symbol(name: &str, width: u32) -> Expr {
        assert!((1..=crate::bitvec::MAX_WIDTH).contains(&width));
        let name: Arc<str> = Arc::from(name);
        intern(NodeKey::Symbol(name.clone(), width), width, || {
            ExprKind::Symbol(name)
        })
    }

    /// Interns an operator node as-is. Callers are responsible for typing
    /// and canonical form; use [`Expr::build`] otherwise.
    fn raw_op(op: Op, args: Vec<Expr>, width: u32) -> Expr {
        let ids: Box<[u64]> = args.iter().map(|a| a.id()).collect();
        intern(NodeKey::Op(op.clone(), ids, width), width, move || ExprKind::Op {
            op,
            args: args.into_boxed_slice(),
        })
    }

    #[inline]
    pub fn id(&self) -> u64 {
        self.0.id
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.0.width
    }

    pub fn depth(&self) -> u32 {
        self.0.depth
    }

    pub fn kind(&self) -> &ExprKind {
        &self.0.kind
    }

    pub fn as_const(&self) -> Option<BitVec> {
        match self.kind() {
            ExprKind::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self.kind(), ExprKind::Const(_))
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self.kind() {
            ExprKind::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn op(&self) -> Option<(&Op, &[Expr])> {
        match self.kind() {
            ExprKind::Op { op, args } => Some((op, args)),
            _ => None,
        }
    }

    /// Structural equality of canonical terms; constant time thanks to interning.
    pub fn structurally_equal(&self, other: &Expr) -> bool {
        self == other
    }

    /// Names of all symbols occurring in the term.
    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_dag(&mut |e| {
            if let Some(name) = e.as_symbol() {
                out.insert(name.to_string());
            }
        });
        out
    }

    /// Visits every distinct sub-term once, children before parents.
    pub fn visit_dag(&self, f: &mut impl FnMut(&Expr)) {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![(self.clone(), false)];
        while let Some((e, expanded)) = stack.pop() {
            if expanded {
                f(&e);
                continue;
            }
            if !seen.insert(e.id()) {
                continue;
            }
            stack.push((e.clone(), true));
            if let Some((_, args)) = e.op() {
                for a in args.iter().rev() {
                    stack.push((a.clone(), false));
                }
            }
        }
    }

    fn kind_rank(&self) -> u8 {
        match self.kind() {
            ExprKind::Const(_) => 0,
            ExprKind::Symbol(_) => 1,
            ExprKind::Op { .. } => 2,
        }
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.id.hash(state);
    }
}

/// Canonical total order: constants, then symbols, then operator nodes; ties
/// broken structurally so the order does not depend on interning history.
impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        self.kind_rank()
            .cmp(&other.kind_rank())
            .then_with(|| match (self.kind(), other.kind()) {
                (ExprKind::Const(a), ExprKind::Const(b)) => {
                    (a.width(), a.bits()).cmp(&(b.width(), b.bits()))
                }
                (ExprKind::Symbol(a), ExprKind::Symbol(b)) => {
                    a.cmp(b).then(self.width().cmp(&other.width()))
                }
                (
                    ExprKind::Op { op: o1, args: a1 },
                    ExprKind::Op { op: o2, args: a2 },
                ) => o1
                    .rank()
                    .cmp(&o2.rank())
                    .then_with(|| o1.params_cmp(o2))
                    .then(self.width().cmp(&other.width()))
                    .then(a1.len().cmp(&a2.len()))
                    .then_with(|| a1.iter().cmp(a2.iter())),
                _ => unreachable!("kind ranks differ"),
            })
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
