//! Overloadable memory reads.

use std::sync::Arc;

use crate::bitvec::BitVec;
use crate::expr::{Assignment, Expr, Table};
use crate::netlist::Memory;

/// User override of memory semantics.
///
/// `read` may claim a read by returning the symbolic value; `None` falls
/// back to the stored contents at the concrete index.
pub trait MemoryHook: Send + Sync {
    fn read(&self, memory: &str, index: &Expr) -> Option<Expr>;

    /// Concrete initial contents overriding the netlist's `init`.
    fn initial_contents(&self, _memory: &Memory, _witness: &Assignment) -> Option<Vec<BitVec>> {
        None
    }
}

/// The default: no overrides.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoHook;

impl MemoryHook for NoHook {
    fn read(&self, _memory: &str, _index: &Expr) -> Option<Expr> {
        None
    }
}

/// A masked lookup table `T'[x] = T[x ^ m] ^ m'`.
///
/// Every read of `memory` at index `x` yields `ARRAY(T, x ^ m) ^ m'`, so an
/// index of the form `i ^ m` simplifies to `ARRAY(T, i) ^ m'`.
#[derive(Debug, Clone)]
pub struct MaskedTableHook {
    pub memory: String,
    pub table: Arc<Table>,
    pub in_mask: String,
    pub out_mask: String,
}

impl MaskedTableHook {
    fn index_width(&self, depth: usize) -> u32 {
        (usize::BITS - (depth.max(2) - 1).leading_zeros()).max(1)
    }
}

impl MemoryHook for MaskedTableHook {
    fn read(&self, memory: &str, index: &Expr) -> Option<Expr> {
        if memory != self.memory {
            return None;
        }
        let m = Expr::symbol(&self.in_mask, index.width());
        let m_out = Expr::symbol(&self.out_mask, self.table.width);
        Some(Expr::xor(
            &Expr::array(self.table.clone(), &Expr::xor(index, &m)),
            &m_out,
        ))
    }

    fn initial_contents(&self, memory: &Memory, witness: &Assignment) -> Option<Vec<BitVec>> {
        if memory.id != self.memory {
            return None;
        }
        let w = self.index_width(memory.depth);
        let m = witness.get(&self.in_mask)?.bits();
        let m_out = witness.get(&self.out_mask)?.bits();
        Some(
            (0..memory.depth as u64)
                .map(|x| {
                    let src = (x ^ m) & crate::bitvec::mask(w);
                    BitVec::new(memory.width, self.table.lookup(src) ^ m_out)
                })
                .collect(),
        )
    }
}
