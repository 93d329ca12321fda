//! Concrete evaluation: one-shot over an [`Assignment`] and compiled
//! [`Program`]s for the enumeration loops.

use std::collections::HashMap;

use super::{Assignment, Expr, ExprError, ExprKind, Op};
use crate::bitvec::{mask, BitVec};

fn sign(bits: u64, width: u32) -> i64 {
    let shift = 64 - width;
    ((bits << shift) as i64) >> shift
}

/// Applies `op` to operand values given as `(bits, width)` pairs.
pub(crate) fn apply_op(op: &Op, width: u32, args: &[(u64, u32)]) -> u64 {
    let m = mask(width);
    let v = match op {
        Op::Xor => args.iter().fold(0, |acc, a| acc ^ a.0),
        Op::And => args.iter().fold(u64::MAX, |acc, a| acc & a.0),
        Op::Or => args.iter().fold(0, |acc, a| acc | a.0),
        Op::Not => !args[0].0,
        Op::Add => args[0].0.wrapping_add(args[1].0),
        Op::Sub => args[0].0.wrapping_sub(args[1].0),
        Op::Mul => args[0].0.wrapping_mul(args[1].0),
        Op::Pow => {
            let (mut base, mut exp) = (args[0].0, args[1].0);
            let mut acc = 1u64;
            while exp > 0 {
                if exp & 1 == 1 {
                    acc = acc.wrapping_mul(base) & m;
                }
                base = base.wrapping_mul(base) & m;
                exp >>= 1;
            }
            acc
        }
        Op::Lsl => {
            let k = args[1].0;
            if k >= width as u64 {
                0
            } else {
                args[0].0 << k
            }
        }
        Op::Lsr => {
            let k = args[1].0;
            if k >= width as u64 {
                0
            } else {
                args[0].0 >> k
            }
        }
        Op::Asr => {
            let k = args[1].0.min(63);
            (sign(args[0].0, width) >> k) as u64
        }
        Op::Array(table) => table.lookup(args[0].0),
        Op::Concat => args.iter().fold(0u64, |acc, (bits, w)| {
            if *w >= 64 {
                *bits
            } else {
                (acc << w) | bits
            }
        }),
        Op::Extract { lo, .. } => args[0].0 >> lo,
        Op::Zext { .. } => args[0].0,
        Op::Sext { .. } => sign(args[0].0, args[0].1) as u64,
    };
    v & m
}

impl Expr {
    /// Evaluates the term under `assignment`.
    pub fn eval_concrete(&self, assignment: &Assignment) -> Result<BitVec, ExprError> {
        let mut memo: HashMap<u64, u64> = HashMap::new();
        let mut order = Vec::new();
        self.visit_dag(&mut |e| order.push(e.clone()));
        for e in &order {
            let v = match e.kind() {
                ExprKind::Const(c) => c.bits(),
                ExprKind::Symbol(name) => {
                    let value = assignment
                        .get(&**name)
                        .ok_or_else(|| ExprError::UnboundSymbol(name.to_string()))?;
                    if value.width() != e.width() {
                        return Err(ExprError::TypeError(format!(
                            "symbol `{name}` has width {} but is assigned {} bits",
                            e.width(),
                            value.width()
                        )));
                    }
                    value.bits()
                }
                ExprKind::Op { op, args } => {
                    let vals: Vec<(u64, u32)> =
                        args.iter().map(|a| (memo[&a.id()], a.width())).collect();
                    apply_op(op, e.width(), &vals)
                }
            };
            memo.insert(e.id(), v);
        }
        Ok(BitVec::new(self.width(), memo[&self.id()]))
    }
}

#[derive(Debug, Clone)]
enum Instr {
    Const(u64),
    Input(usize),
    Op {
        op: Op,
        width: u32,
        args: Box<[(usize, u32)]>,
    },
}

/// A set of terms compiled to a straight-line program over numbered inputs.
///
/// Shared sub-terms are evaluated once per run.
#[derive(Debug, Clone)]
pub struct Program {
    instrs: Vec<Instr>,
    outputs: Vec<usize>,
    output_widths: Vec<u32>,
}

impl Program {
    /// Compiles `roots`; `slot_of` maps each symbol name to an input index.
    pub fn compile(
        roots: &[Expr],
        slot_of: &dyn Fn(&str) -> Option<usize>,
    ) -> Result<Program, ExprError> {
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut instrs = Vec::new();
        for root in roots {
            let mut err = None;
            root.visit_dag(&mut |e| {
                if err.is_some() || index.contains_key(&e.id()) {
                    return;
                }
                let instr = match e.kind() {
                    ExprKind::Const(c) => Instr::Const(c.bits()),
                    ExprKind::Symbol(name) => match slot_of(name) {
                        Some(slot) => Instr::Input(slot),
                        None => {
                            err = Some(ExprError::UnboundSymbol(name.to_string()));
                            return;
                        }
                    },
                    ExprKind::Op { op, args } => Instr::Op {
                        op: op.clone(),
                        width: e.width(),
                        args: args.iter().map(|a| (index[&a.id()], a.width())).collect(),
                    },
                };
                index.insert(e.id(), instrs.len());
                instrs.push(instr);
            });
            if let Some(err) = err {
                return Err(err);
            }
        }
        Ok(Program {
            outputs: roots.iter().map(|r| index[&r.id()]).collect(),
            output_widths: roots.iter().map(Expr::width).collect(),
            instrs,
        })
    }

    pub fn output_widths(&self) -> &[u32] {
        &self.output_widths
    }

    /// Evaluates with `inputs` indexed by slot, writing one value per root.
    /// `scratch` is reused between calls to avoid reallocation.
    pub fn run(&self, inputs: &[u64], scratch: &mut Vec<u64>, out: &mut [u64]) {
        scratch.clear();
        let mut vals: [(u64, u32); 8] = [(0, 0); 8];
        for instr in &self.instrs {
            let v = match instr {
                Instr::Const(c) => *c,
                Instr::Input(slot) => inputs[*slot],
                Instr::Op { op, width, args } => {
                    if args.len() <= vals.len() {
                        for (dst, (i, w)) in vals.iter_mut().zip(args.iter()) {
                            *dst = (scratch[*i], *w);
                        }
                        apply_op(op, *width, &vals[..args.len()])
                    } else {
                        let big: Vec<(u64, u32)> =
                            args.iter().map(|(i, w)| (scratch[*i], *w)).collect();
                        apply_op(op, *width, &big)
                    }
                }
            };
            scratch.push(v);
        }
        for (o, idx) in out.iter_mut().zip(&self.outputs) {
            *o = scratch[*idx];
        }
    }
}
