//! Per-gate semantics in the concrete and symbolic domains, and the shape
//! information the stability and LeakSet rules are derived from.

use crate::bitvec::{mask, BitVec};
use crate::expr::{BitSource, Expr, Op};
use crate::netlist::{Gate, GateKind};

/// Where output bit `i` of a rank-remapping gate comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Src {
    Zero,
    Bit(usize, u32),
}

/// How a gate's output bits relate to its input bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Shape {
    /// Rank `i` of the output depends on rank `i` of every input.
    Bitwise,
    Mux,
    /// Every output bit may depend on every input bit.
    Mixing,
    /// Output bits are copies of single input bits or constant zero.
    Remap(Vec<Src>),
    MemRead,
}

pub(crate) fn shape(gate: &Gate, in_widths: &[u32], out_width: u32) -> Shape {
    let p = &gate.params;
    let w0 = in_widths[0];
    let remap = |f: &dyn Fn(u32) -> Src| Shape::Remap((0..out_width).map(f).collect());
    match gate.kind {
        GateKind::BitNot | GateKind::BitAnd | GateKind::BitOr | GateKind::BitXor => Shape::Bitwise,
        GateKind::Mux => Shape::Mux,
        GateKind::MemRead => Shape::MemRead,
        GateKind::Shl | GateKind::Shr | GateKind::Sshr if p.amount.is_some() => {
            let k = p.amount.unwrap();
            match gate.kind {
                GateKind::Shl => remap(&|i| if i >= k { Src::Bit(0, i - k) } else { Src::Zero }),
                GateKind::Shr => remap(&|i| {
                    if i.checked_add(k).is_some_and(|j| j < w0) {
                        Src::Bit(0, i + k)
                    } else {
                        Src::Zero
                    }
                }),
                _ => remap(&|i| Src::Bit(0, i.saturating_add(k).min(w0 - 1))),
            }
        }
        GateKind::Trunc => {
            let off = p.offset.unwrap_or(0);
            remap(&|i| Src::Bit(0, off + i))
        }
        GateKind::Zext => remap(&|i| if i < w0 { Src::Bit(0, i) } else { Src::Zero }),
        GateKind::Sext => remap(&|i| Src::Bit(0, i.min(w0 - 1))),
        GateKind::Repeat => remap(&|i| Src::Bit(0, i % w0)),
        GateKind::Blit => {
            let off = p.offset.unwrap_or(0);
            let vw = in_widths[1];
            remap(&|i| {
                if i >= off && i < off + vw {
                    Src::Bit(1, i - off)
                } else {
                    Src::Bit(0, i)
                }
            })
        }
        GateKind::MemWrite => remap(&|i| Src::Bit(2, i)),
        GateKind::Ucmp
        | GateKind::Scmp
        | GateKind::Equal
        | GateKind::NotEqual
        | GateKind::Add
        | GateKind::Sub
        | GateKind::Neg
        | GateKind::Mul
        | GateKind::Shl
        | GateKind::Shr
        | GateKind::Sshr
        | GateKind::IsZero
        | GateKind::IsNeg => Shape::Mixing,
    }
}

fn unsigned_lt(a: u64, b: u64) -> bool {
    a < b
}

fn shift_amount(v: &BitVec) -> u64 {
    v.bits()
}

/// Concrete gate function. `mem_read` is handled by the simulator.
pub(crate) fn conc_eval(gate: &Gate, ins: &[BitVec], out_width: u32) -> BitVec {
    let out = |bits: u64| BitVec::new(out_width, bits);
    let bool_out = |b: bool| BitVec::bit_value(b);
    let w = ins[0].width();
    let a = ins[0].bits();
    let b = || ins[1].bits();
    let p = &gate.params;
    match gate.kind {
        GateKind::BitNot => out(!a),
        GateKind::BitAnd => out(a & b()),
        GateKind::BitOr => out(a | b()),
        GateKind::BitXor => out(a ^ b()),
        GateKind::Ucmp => bool_out(unsigned_lt(a, b())),
        GateKind::Scmp => bool_out(ins[0].signed() < ins[1].signed()),
        GateKind::Equal => bool_out(a == b()),
        GateKind::NotEqual => bool_out(a != b()),
        GateKind::Add => out(a.wrapping_add(b())),
        GateKind::Sub => out(a.wrapping_sub(b())),
        GateKind::Neg => out(a.wrapping_neg()),
        GateKind::Mul => out(a.wrapping_mul(b())),
        GateKind::Shl | GateKind::Shr | GateKind::Sshr => {
            let k = match p.amount {
                Some(k) => k as u64,
                None => shift_amount(&ins[1]),
            };
            let big = k >= w as u64;
            match gate.kind {
                GateKind::Shl => out(if big { 0 } else { a << k }),
                GateKind::Shr => out(if big { 0 } else { a >> k }),
                _ => out((ins[0].signed() >> k.min(63)) as u64),
            }
        }
        GateKind::Trunc => out(a >> p.offset.unwrap_or(0)),
        GateKind::Zext => ins[0].zext(out_width),
        GateKind::Sext => ins[0].sext(out_width),
        GateKind::Blit => {
            let off = p.offset.unwrap_or(0);
            let field = mask(ins[1].width()) << off;
            out((a & !field) | (b() << off))
        }
        GateKind::Repeat => {
            let mut v = 0u64;
            for _ in 0..out_width / w {
                v = if w >= 64 { a } else { (v << w) | a };
            }
            out(v)
        }
        GateKind::IsZero => bool_out(a == 0),
        GateKind::IsNeg => bool_out(ins[0].bit(w - 1)),
        GateKind::MemWrite => ins[2],
        GateKind::Mux => {
            if ins[0].bits() == 1 {
                ins[2]
            } else {
                ins[1]
            }
        }
        GateKind::MemRead => unreachable!("memory reads are resolved by the simulator"),
    }
}

/// Borrow-out of `a - b`, i.e. the unsigned `a < b` predicate, as a 1-bit term.
fn unsigned_less(a: &Expr, b: &Expr) -> Expr {
    let w = a.width();
    let na = Expr::not(a);
    let diff = Expr::sub(a, b);
    let borrow = Expr::or(
        &Expr::and(&na, b),
        &Expr::and(&Expr::or(&na, b), &diff),
    );
    borrow.bit_at(w - 1)
}

fn or_reduce(e: &Expr) -> Expr {
    Expr::or_all((0..e.width()).map(|i| e.bit_at(i)))
}

fn replicate(e: &Expr, times: u32) -> Expr {
    if times == 1 {
        e.clone()
    } else {
        Expr::concat(vec![e.clone(); times as usize])
    }
}

/// Symbolic gate function. `mem_read` is handled by the simulator.
pub(crate) fn symb_eval(gate: &Gate, ins: &[Expr], out_width: u32, shape: &Shape) -> Expr {
    let a = &ins[0];
    if let Shape::Remap(srcs) = shape {
        let sources: Vec<BitSource> = srcs
            .iter()
            .map(|s| match *s {
                Src::Zero => BitSource::Const(false),
                Src::Bit(k, j) => BitSource::Bit(ins[k].clone(), j),
            })
            .collect();
        return Expr::from_bit_sources(&sources);
    }
    match gate.kind {
        GateKind::BitNot => Expr::not(a),
        GateKind::BitAnd => Expr::and(a, &ins[1]),
        GateKind::BitOr => Expr::or(a, &ins[1]),
        GateKind::BitXor => Expr::xor(a, &ins[1]),
        GateKind::Ucmp => unsigned_less(a, &ins[1]),
        GateKind::Scmp => {
            let w = a.width();
            let flip = Expr::constant(BitVec::new(w, 1u64 << (w - 1)));
            unsigned_less(&Expr::xor(a, &flip), &Expr::xor(&ins[1], &flip))
        }
        GateKind::Equal => Expr::not(&or_reduce(&Expr::xor(a, &ins[1]))),
        GateKind::NotEqual => or_reduce(&Expr::xor(a, &ins[1])),
        GateKind::Add => Expr::add(a, &ins[1]),
        GateKind::Sub => Expr::sub(a, &ins[1]),
        GateKind::Neg => Expr::sub(&Expr::zero(a.width()), a),
        GateKind::Mul => Expr::mul(a, &ins[1]),
        GateKind::Shl => Expr::shift(Op::Lsl, a, &ins[1]),
        GateKind::Shr => Expr::shift(Op::Lsr, a, &ins[1]),
        GateKind::Sshr => Expr::shift(Op::Asr, a, &ins[1]),
        GateKind::IsZero => Expr::not(&or_reduce(a)),
        GateKind::IsNeg => a.bit_at(a.width() - 1),
        GateKind::Mux => {
            let s = a;
            Expr::or(
                &Expr::and(&replicate(s, out_width), &ins[2]),
                &Expr::and(&replicate(&Expr::not(s), out_width), &ins[1]),
            )
        }
        GateKind::Trunc
        | GateKind::Zext
        | GateKind::Sext
        | GateKind::Blit
        | GateKind::Repeat
        | GateKind::MemWrite
        | GateKind::MemRead => unreachable!("handled by remap or the simulator"),
    }
}
