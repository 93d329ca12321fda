//! Typed construction and canonical simplification.

use std::sync::Arc;

use super::eval::apply_op;
use super::{Expr, ExprError, ExprKind, Op, Table};
use crate::bitvec::{mask, BitVec, MAX_WIDTH};

/// Where a single output bit comes from when resolving rank-remapping terms.
#[derive(Debug, Clone)]
pub enum BitSource {
    Const(bool),
    Bit(Expr, u32),
}

fn type_error(msg: impl Into<String>) -> ExprError {
    ExprError::TypeError(msg.into())
}

fn result_width(op: &Op, args: &[Expr]) -> Result<u32, ExprError> {
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(type_error(format!(
                "{} takes {n} operand(s), got {}",
                op.name(),
                args.len()
            )))
        }
    };
    let same_width = || {
        let w = args[0].width();
        match args.iter().find(|a| a.width() != w) {
            Some(a) => Err(type_error(format!(
                "{} operands must share width {w}, found {}",
                op.name(),
                a.width()
            ))),
            None => Ok(w),
        }
    };
    match op {
        Op::Xor | Op::And | Op::Or => {
            if args.is_empty() {
                return Err(type_error(format!("{} needs operands", op.name())));
            }
            same_width()
        }
        Op::Not => {
            arity(1)?;
            Ok(args[0].width())
        }
        Op::Add | Op::Sub | Op::Mul | Op::Pow => {
            arity(2)?;
            same_width()
        }
        Op::Lsl | Op::Lsr | Op::Asr => {
            arity(2)?;
            Ok(args[0].width())
        }
        Op::Array(table) => {
            arity(1)?;
            Ok(table.width)
        }
        Op::Concat => {
            if args.is_empty() {
                return Err(type_error("OP_CONCAT needs operands"));
            }
            let w: u32 = args.iter().map(Expr::width).sum();
            if w > MAX_WIDTH {
                return Err(type_error(format!("concatenation width {w} exceeds {MAX_WIDTH}")));
            }
            Ok(w)
        }
        Op::Extract { hi, lo } => {
            arity(1)?;
            if lo > hi || *hi >= args[0].width() {
                return Err(type_error(format!(
                    "extract [{hi}:{lo}] out of range for width {}",
                    args[0].width()
                )));
            }
            Ok(hi - lo + 1)
        }
        Op::Zext { width } | Op::Sext { width } => {
            arity(1)?;
            if *width < args[0].width() || *width > MAX_WIDTH {
                return Err(type_error(format!(
                    "{} to width {width} from width {}",
                    op.name(),
                    args[0].width()
                )));
            }
            Ok(*width)
        }
    }
}

impl Expr {
    /// Builds the canonical, interned form of `op(args)`.
    pub fn build(op: Op, args: Vec<Expr>) -> Result<Expr, ExprError> {
        let width = result_width(&op, &args)?;
        Ok(simplify(op, args, width))
    }

    fn build_infallible(op: Op, args: Vec<Expr>) -> Expr {
        match Self::build(op, args) {
            Ok(e) => e,
            Err(err) => panic!("ill-typed expression: {err}"),
        }
    }

    pub fn xor(a: &Expr, b: &Expr) -> Expr {
        Self::build_infallible(Op::Xor, vec![a.clone(), b.clone()])
    }

    pub fn and(a: &Expr, b: &Expr) -> Expr {
        Self::build_infallible(Op::And, vec![a.clone(), b.clone()])
    }

    pub fn or(a: &Expr, b: &Expr) -> Expr {
        Self::build_infallible(Op::Or, vec![a.clone(), b.clone()])
    }

    pub fn not(a: &Expr) -> Expr {
        Self::build_infallible(Op::Not, vec![a.clone()])
    }

    pub fn xor_all(items: impl IntoIterator<Item = Expr>) -> Expr {
        Self::build_infallible(Op::Xor, items.into_iter().collect())
    }

    pub fn and_all(items: impl IntoIterator<Item = Expr>) -> Expr {
        Self::build_infallible(Op::And, items.into_iter().collect())
    }

    pub fn or_all(items: impl IntoIterator<Item = Expr>) -> Expr {
        Self::build_infallible(Op::Or, items.into_iter().collect())
    }

    pub fn add(a: &Expr, b: &Expr) -> Expr {
        Self::build_infallible(Op::Add, vec![a.clone(), b.clone()])
    }

    pub fn sub(a: &Expr, b: &Expr) -> Expr {
        Self::build_infallible(Op::Sub, vec![a.clone(), b.clone()])
    }

    pub fn mul(a: &Expr, b: &Expr) -> Expr {
        Self::build_infallible(Op::Mul, vec![a.clone(), b.clone()])
    }

    pub fn shift(op: Op, value: &Expr, amount: &Expr) -> Expr {
        debug_assert!(matches!(op, Op::Lsl | Op::Lsr | Op::Asr));
        Self::build_infallible(op, vec![value.clone(), amount.clone()])
    }

    pub fn array(table: Arc<Table>, index: &Expr) -> Expr {
        Self::build_infallible(Op::Array(table), vec![index.clone()])
    }

    /// Concatenation, most-significant part first.
    pub fn concat(parts: Vec<Expr>) -> Expr {
        Self::build_infallible(Op::Concat, parts)
    }

    pub fn extract(&self, hi: u32, lo: u32) -> Expr {
        Self::build_infallible(Op::Extract { hi, lo }, vec![self.clone()])
    }

    pub fn zext(&self, width: u32) -> Expr {
        Self::build_infallible(Op::Zext { width }, vec![self.clone()])
    }

    pub fn sext(&self, width: u32) -> Expr {
        Self::build_infallible(Op::Sext { width }, vec![self.clone()])
    }

    /// The simplified 1-bit projection of rank `i`.
    pub fn bit(&self, i: u32) -> Result<Expr, ExprError> {
        if i >= self.width() {
            return Err(ExprError::IndexOutOfRange {
                index: i,
                width: self.width(),
            });
        }
        Ok(self.extract(i, i))
    }

    /// Bit `i`, for callers that already know `i` is in range.
    pub fn bit_at(&self, i: u32) -> Expr {
        self.extract(i, i)
    }

    /// Reassembles a term from per-rank sources, index 0 being the LSB.
    pub fn from_bit_sources(sources: &[BitSource]) -> Expr {
        assert!(!sources.is_empty());
        // Runs of (source, lo index), collected LSB first.
        let mut runs: Vec<(BitSource, u32)> = Vec::new();
        for s in sources {
            let extend = match (runs.last_mut(), s) {
                (Some((BitSource::Const(_), n)), BitSource::Const(_)) => {
                    *n += 1;
                    None
                }
                (Some((BitSource::Bit(e, start), n)), BitSource::Bit(e2, i))
                    if e == e2 && *i == *start + *n =>
                {
                    *n += 1;
                    None
                }
                _ => Some(s.clone()),
            };
            if let Some(s) = extend {
                runs.push((s, 1));
            }
        }
        // Constant runs need their actual bits, so rebuild them from `sources`.
        let mut pieces = Vec::with_capacity(runs.len());
        let mut pos = 0usize;
        for (src, n) in &runs {
            let piece = match src {
                BitSource::Const(_) => {
                    let mut bits = 0u64;
                    for (j, s) in sources[pos..pos + *n as usize].iter().enumerate() {
                        if let BitSource::Const(true) = s {
                            bits |= 1 << j;
                        }
                    }
                    Expr::const_bits(*n, bits)
                }
                BitSource::Bit(e, start) => e.extract(start + n - 1, *start),
            };
            pieces.push(piece);
            pos += *n as usize;
        }
        pieces.reverse();
        if pieces.len() == 1 {
            pieces.pop().unwrap()
        } else {
            Expr::concat(pieces)
        }
    }
}

fn all_const(args: &[Expr]) -> bool {
    args.iter().all(Expr::is_const)
}

fn fold(op: &Op, args: &[Expr], width: u32) -> Expr {
    let vals: Vec<(u64, u32)> = args
        .iter()
        .map(|a| (a.as_const().unwrap().bits(), a.width()))
        .collect();
    Expr::constant(BitVec::new(width, apply_op(op, width, &vals)))
}

fn simplify(op: Op, args: Vec<Expr>, width: u32) -> Expr {
    match op {
        Op::Pow | Op::Array(_) => Expr::raw_op(op, args, width),
        _ if all_const(&args) => fold(&op, &args, width),
        Op::Xor => simplify_xor(args, width),
        Op::And => simplify_and_or(args, width, true),
        Op::Or => simplify_and_or(args, width, false),
        Op::Not => {
            let a = &args[0];
            if let Some((Op::Not, inner)) = a.op() {
                return inner[0].clone();
            }
            Expr::raw_op(Op::Not, args, width)
        }
        Op::Add => {
            if args[1].as_const().is_some_and(|c| c.is_zero()) {
                return args[0].clone();
            }
            if args[0].as_const().is_some_and(|c| c.is_zero()) {
                return args[1].clone();
            }
            Expr::raw_op(Op::Add, args, width)
        }
        Op::Sub => {
            if args[1].as_const().is_some_and(|c| c.is_zero()) {
                return args[0].clone();
            }
            Expr::raw_op(Op::Sub, args, width)
        }
        Op::Mul => {
            for (i, a) in args.iter().enumerate() {
                if let Some(c) = a.as_const() {
                    if c.is_zero() {
                        return Expr::zero(width);
                    }
                    if c.bits() == 1 {
                        return args[1 - i].clone();
                    }
                }
            }
            Expr::raw_op(Op::Mul, args, width)
        }
        Op::Lsl | Op::Lsr | Op::Asr => {
            if args[1].as_const().is_some_and(|c| c.is_zero()) {
                return args[0].clone();
            }
            Expr::raw_op(op, args, width)
        }
        Op::Concat => simplify_concat(args, width),
        Op::Extract { hi, lo } => simplify_extract(args.into_iter().next().unwrap(), hi, lo),
        Op::Zext { width: w } => {
            let a = &args[0];
            if a.width() == w {
                return a.clone();
            }
            if let Some((Op::Zext { .. }, inner)) = a.op() {
                return inner[0].zext(w);
            }
            Expr::raw_op(op, args, width)
        }
        Op::Sext { width: w } => {
            let a = &args[0];
            if a.width() == w {
                return a.clone();
            }
            if let Some((Op::Sext { .. }, inner)) = a.op() {
                return inner[0].sext(w);
            }
            Expr::raw_op(op, args, width)
        }
    }
}

fn flatten_into(op: &Op, args: Vec<Expr>, out: &mut Vec<Expr>) {
    for a in args {
        match a.op() {
            Some((inner_op, inner)) if inner_op == op => out.extend(inner.iter().cloned()),
            _ => out.push(a),
        }
    }
}

fn simplify_xor(args: Vec<Expr>, width: u32) -> Expr {
    let mut flat = Vec::with_capacity(args.len());
    flatten_into(&Op::Xor, args, &mut flat);
    let mut constant = 0u64;
    let mut terms: Vec<Expr> = Vec::with_capacity(flat.len());
    for a in flat {
        match a.as_const() {
            Some(c) => constant ^= c.bits(),
            None => terms.push(a),
        }
    }
    terms.sort();
    // x ^ x = 0: drop equal pairs.
    let mut kept: Vec<Expr> = Vec::with_capacity(terms.len());
    for t in terms {
        if kept.last() == Some(&t) {
            kept.pop();
        } else {
            kept.push(t);
        }
    }
    if constant != 0 {
        kept.insert(0, Expr::const_bits(width, constant));
    }
    match kept.len() {
        0 => Expr::zero(width),
        1 => kept.pop().unwrap(),
        _ => Expr::raw_op(Op::Xor, kept, width),
    }
}

fn simplify_and_or(args: Vec<Expr>, width: u32, is_and: bool) -> Expr {
    let op = if is_and { Op::And } else { Op::Or };
    let full = mask(width);
    let (identity, absorbing) = if is_and { (full, 0) } else { (0, full) };
    let mut flat = Vec::with_capacity(args.len());
    flatten_into(&op, args, &mut flat);
    let mut constant = identity;
    let mut terms: Vec<Expr> = Vec::with_capacity(flat.len());
    for a in flat {
        match a.as_const() {
            Some(c) if is_and => constant &= c.bits(),
            Some(c) => constant |= c.bits(),
            None => terms.push(a),
        }
    }
    if constant == absorbing {
        return Expr::const_bits(width, absorbing);
    }
    terms.sort();
    terms.dedup();
    if constant != identity {
        terms.insert(0, Expr::const_bits(width, constant));
    }
    match terms.len() {
        0 => Expr::const_bits(width, identity),
        1 => terms.pop().unwrap(),
        _ => Expr::raw_op(op, terms, width),
    }
}

/// A concat piece viewed as a slice of some base term.
enum Piece {
    Const(BitVec),
    Slice { base: Expr, hi: u32, lo: u32 },
}

fn simplify_concat(args: Vec<Expr>, width: u32) -> Expr {
    let mut flat = Vec::with_capacity(args.len());
    flatten_into(&Op::Concat, args, &mut flat);
    let mut pieces: Vec<Piece> = Vec::with_capacity(flat.len());
    for a in flat {
        let piece = match (a.as_const(), a.op()) {
            (Some(c), _) => Piece::Const(c),
            (None, Some((Op::Extract { hi, lo }, inner))) => Piece::Slice {
                base: inner[0].clone(),
                hi: *hi,
                lo: *lo,
            },
            _ => Piece::Slice {
                hi: a.width() - 1,
                lo: 0,
                base: a,
            },
        };
        // Merge with the previous (more significant) piece when contiguous.
        let merged = match (pieces.last_mut(), &piece) {
            (Some(Piece::Const(prev)), Piece::Const(c)) => {
                *prev = prev.concat(c);
                true
            }
            (
                Some(Piece::Slice {
                    base: b1, lo: l1, ..
                }),
                Piece::Slice { base: b2, hi: h2, lo: l2 },
            ) if b1 == b2 && *l1 == h2 + 1 => {
                *l1 = *l2;
                true
            }
            _ => false,
        };
        if !merged {
            pieces.push(piece);
        }
    }
    let mut out: Vec<Expr> = pieces
        .into_iter()
        .map(|p| match p {
            Piece::Const(c) => Expr::constant(c),
            Piece::Slice { base, hi, lo } => {
                if lo == 0 && hi == base.width() - 1 {
                    base
                } else {
                    Expr::raw_op(Op::Extract { hi, lo }, vec![base], hi - lo + 1)
                }
            }
        })
        .collect();
    if out.len() == 1 {
        return out.pop().unwrap();
    }
    Expr::raw_op(Op::Concat, out, width)
}

fn simplify_extract(x: Expr, hi: u32, lo: u32) -> Expr {
    let w = x.width();
    if lo == 0 && hi == w - 1 {
        return x;
    }
    let out_width = hi - lo + 1;
    let remap = |f: &dyn Fn(u32) -> BitSource| -> Expr {
        let sources: Vec<BitSource> = (lo..=hi).map(f).collect();
        Expr::from_bit_sources(&sources)
    };
    match x.kind() {
        ExprKind::Const(c) => Expr::constant(c.slice(hi, lo)),
        ExprKind::Symbol(_) => Expr::raw_op(Op::Extract { hi, lo }, vec![x], out_width),
        ExprKind::Op { op, args } => match op {
            Op::Extract { lo: l2, .. } => args[0].extract(l2 + hi, l2 + lo),
            Op::Xor | Op::And | Op::Or | Op::Not => {
                let parts = args.iter().map(|a| a.extract(hi, lo)).collect();
                Expr::build_infallible(op.clone(), parts)
            }
            Op::Concat => {
                // Children are stored MSB first; locate the owner of each rank.
                let mut spans = Vec::with_capacity(args.len());
                let mut base = 0u32;
                for child in args.iter().rev() {
                    spans.push((base, child.clone()));
                    base += child.width();
                }
                remap(&|j| {
                    let (start, child) = spans
                        .iter()
                        .rev()
                        .find(|(start, _)| *start <= j)
                        .expect("rank inside concatenation");
                    BitSource::Bit(child.clone(), j - start)
                })
            }
            Op::Zext { .. } => {
                let inner = &args[0];
                let iw = inner.width();
                remap(&|j| {
                    if j < iw {
                        BitSource::Bit(inner.clone(), j)
                    } else {
                        BitSource::Const(false)
                    }
                })
            }
            Op::Sext { .. } => {
                let inner = &args[0];
                let iw = inner.width();
                remap(&|j| BitSource::Bit(inner.clone(), j.min(iw - 1)))
            }
            Op::Lsl | Op::Lsr | Op::Asr if args[1].is_const() => {
                let k = args[1].as_const().unwrap().bits();
                let inner = &args[0];
                let op = op.clone();
                remap(&|j| shifted_source(&op, inner, k, j))
            }
            _ => Expr::raw_op(Op::Extract { hi, lo }, vec![x.clone()], out_width),
        },
    }
}

fn shifted_source(op: &Op, inner: &Expr, amount: u64, j: u32) -> BitSource {
    let w = inner.width() as u64;
    let j = j as u64;
    match op {
        Op::Lsl => {
            if j >= amount {
                BitSource::Bit(inner.clone(), (j - amount) as u32)
            } else {
                BitSource::Const(false)
            }
        }
        Op::Lsr => match j.checked_add(amount) {
            Some(src) if src < w => BitSource::Bit(inner.clone(), src as u32),
            _ => BitSource::Const(false),
        },
        Op::Asr => {
            let src = j.saturating_add(amount).min(w - 1);
            BitSource::Bit(inner.clone(), src as u32)
        }
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(n: &str) -> Expr {
        Expr::symbol(n, 1)
    }

    #[test]
    fn and_with_zero_is_zero() {
        let x = sym("x");
        assert_eq!(Expr::and(&x, &Expr::zero(1)), Expr::zero(1));
    }

    #[test]
    fn xor_cancellation() {
        let k = sym("k");
        let m = sym("m");
        assert_eq!(Expr::xor(&k, &k), Expr::zero(1));
        assert_eq!(Expr::xor(&Expr::xor(&k, &m), &m), k);
    }

    #[test]
    fn boolean_identities() {
        let x = sym("x");
        let one = Expr::ones(1);
        let zero = Expr::zero(1);
        assert_eq!(Expr::and(&x, &one), x);
        assert_eq!(Expr::and(&x, &x), x);
        assert_eq!(Expr::or(&x, &one), one);
        assert_eq!(Expr::or(&x, &zero), x);
        assert_eq!(Expr::or(&x, &x), x);
        assert_eq!(Expr::xor(&x, &zero), x);
        assert_eq!(Expr::not(&Expr::not(&x)), x);
    }

    #[test]
    fn width_mismatch_is_a_type_error() {
        let a = Expr::symbol("a2", 2);
        let b = Expr::symbol("b1", 1);
        assert!(matches!(
            Expr::build(Op::Xor, vec![a, b]),
            Err(ExprError::TypeError(_))
        ));
    }

    #[test]
    fn bit_of_concat_and_constants() {
        let k = sym("k");
        let m = sym("m");
        let km = Expr::xor(&k, &m);
        let cat = Expr::concat(vec![m.clone(), km.clone()]);
        assert_eq!(cat.bit(0).unwrap(), km);
        assert_eq!(cat.bit(1).unwrap(), m);
        assert_eq!(Expr::const_bits(2, 0b10).bit(1).unwrap(), Expr::const_bits(1, 1));
        assert!(matches!(cat.bit(2), Err(ExprError::IndexOutOfRange { .. })));
    }

    #[test]
    fn bit_distributes_over_bitwise_ops() {
        let a = Expr::symbol("a_w2", 2);
        let b = Expr::symbol("b_w2", 2);
        let x = Expr::xor(&a, &b);
        assert_eq!(
            x.bit(0).unwrap(),
            Expr::xor(&a.bit(0).unwrap(), &b.bit(0).unwrap())
        );
    }

    #[test]
    fn bit_of_add_stays_unexpanded() {
        let a = Expr::symbol("a_w3", 3);
        let b = Expr::symbol("b_w3", 3);
        let s = Expr::add(&a, &b);
        let b1 = s.bit(1).unwrap();
        assert!(matches!(b1.op(), Some((Op::Extract { hi: 1, lo: 1 }, _))));
    }

    #[test]
    fn concat_of_own_bits_collapses() {
        let a = Expr::symbol("a_w4", 4);
        let bits: Vec<Expr> = (0..4).rev().map(|i| a.bit(i).unwrap()).collect();
        assert_eq!(Expr::concat(bits), a);
    }

    #[test]
    fn constant_shift_bits_are_remapped() {
        let a = Expr::symbol("a_w4", 4);
        let sh = Expr::shift(Op::Lsl, &a, &Expr::const_bits(2, 1));
        assert_eq!(sh.bit(0).unwrap(), Expr::zero(1));
        assert_eq!(sh.bit(3).unwrap(), a.bit(2).unwrap());
        let sr = Expr::shift(Op::Asr, &a, &Expr::const_bits(2, 2));
        assert_eq!(sr.bit(3).unwrap(), a.bit(3).unwrap());
        assert_eq!(sr.bit(1).unwrap(), a.bit(3).unwrap());
    }

    #[test]
    fn extension_folds() {
        let c = Expr::const_bits(2, 0b10);
        assert_eq!(c.zext(4), Expr::const_bits(4, 0b0010));
        assert_eq!(c.sext(4), Expr::const_bits(4, 0b1110));
        let a = Expr::symbol("a_w2", 2);
        assert_eq!(a.zext(4).bit(3).unwrap(), Expr::zero(1));
        assert_eq!(a.sext(4).bit(3).unwrap(), a.bit(1).unwrap());
    }

    #[test]
    fn build_is_idempotent_on_canonical_terms() {
        let k = sym("k");
        let m = sym("m");
        let t = Expr::xor_all([k.clone(), m.clone(), Expr::and(&k, &m)]);
        let (op, args) = t.op().unwrap();
        assert_eq!(Expr::build(op.clone(), args.to_vec()).unwrap(), t);
    }
}
