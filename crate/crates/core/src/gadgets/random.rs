use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Fixture;
use crate::bitvec::{mask, BitVec};
use crate::expr::{Assignment, Expr, SymbolKind, SymbolTable};
use crate::netlist::{CircuitBuilder, GateKind, GateParams, WireId};
use crate::sim::{InputValue, Stimuli};

/// Shape of a random circuit. Memories are never generated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomParams {
    /// Upper bound on gates, adapters included.
    pub max_gates: usize,
    pub symbols: usize,
    pub max_width: u32,
    pub inputs: usize,
    pub registers: usize,
    pub cycles: usize,
    pub splits: bool,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            max_gates: 30,
            symbols: 6,
            max_width: 3,
            inputs: 3,
            registers: 2,
            cycles: 4,
            splits: true,
        }
    }
}

const KINDS: &[GateKind] = &[
    GateKind::BitAnd,
    GateKind::BitAnd,
    GateKind::BitOr,
    GateKind::BitXor,
    GateKind::BitXor,
    GateKind::BitXor,
    GateKind::BitNot,
    GateKind::Mux,
    GateKind::Mux,
    GateKind::Add,
    GateKind::Sub,
    GateKind::Mul,
    GateKind::Neg,
    GateKind::Equal,
    GateKind::NotEqual,
    GateKind::Ucmp,
    GateKind::Scmp,
    GateKind::IsZero,
    GateKind::IsNeg,
    GateKind::Trunc,
    GateKind::Zext,
    GateKind::Sext,
    GateKind::Shl,
    GateKind::Shr,
    GateKind::Sshr,
    GateKind::Blit,
    GateKind::Repeat,
];

struct Gen {
    rng: ChaCha8Rng,
    b: CircuitBuilder,
    pool: Vec<WireId>,
    gates: usize,
    limit: usize,
    max_width: u32,
}

impl Gen {
    fn fresh(&mut self, prefix: &str, width: u32) -> WireId {
        let name = format!("{prefix}{}", self.gates);
        self.gates += 1;
        self.b.wire(&name, width)
    }

    fn emit(&mut self, kind: GateKind, inputs: &[WireId], width: u32, params: GateParams) -> WireId {
        let out = self.fresh("g", width);
        self.b.gate_with(kind, inputs, out, params);
        out
    }

    fn pick(&mut self) -> WireId {
        *self.pool.choose(&mut self.rng).expect("non-empty pool")
    }

    /// A wire of exactly `width` bits, preferring existing ones.
    fn pick_width(&mut self, width: u32) -> WireId {
        let same: Vec<WireId> = self
            .pool
            .iter()
            .copied()
            .filter(|&w| self.b.width(w) == width)
            .collect();
        if let Some(&w) = same.choose(&mut self.rng) {
            return w;
        }
        let w = self.pick();
        self.fit(w, width)
    }

    fn fit(&mut self, w: WireId, width: u32) -> WireId {
        let have = self.b.width(w);
        if have > width {
            let offset = self.rng.gen_range(0..=have - width);
            self.emit(
                GateKind::Trunc,
                &[w],
                width,
                GateParams {
                    offset: Some(offset),
                    ..Default::default()
                },
            )
        } else if have < width {
            self.emit(GateKind::Zext, &[w], width, GateParams::default())
        } else {
            w
        }
    }

    fn width(&mut self) -> u32 {
        self.rng.gen_range(1..=self.max_width)
    }

    fn gate(&mut self) {
        let kind = *KINDS.choose(&mut self.rng).expect("kinds");
        let a = self.pick();
        let wa = self.b.width(a);
        let none = GateParams::default();
        let out = match kind {
            GateKind::BitAnd
            | GateKind::BitOr
            | GateKind::BitXor
            | GateKind::Add
            | GateKind::Sub
            | GateKind::Mul => {
                let c = self.pick_width(wa);
                self.emit(kind, &[a, c], wa, none)
            }
            GateKind::Equal | GateKind::NotEqual | GateKind::Ucmp | GateKind::Scmp => {
                let c = self.pick_width(wa);
                self.emit(kind, &[a, c], 1, none)
            }
            GateKind::BitNot | GateKind::Neg => self.emit(kind, &[a], wa, none),
            GateKind::IsZero | GateKind::IsNeg => self.emit(kind, &[a], 1, none),
            GateKind::Mux => {
                let s = self.pick_width(1);
                let c = self.pick_width(wa);
                self.emit(kind, &[s, a, c], wa, none)
            }
            GateKind::Trunc => {
                let w = self.rng.gen_range(1..=wa);
                let offset = self.rng.gen_range(0..=wa - w);
                self.emit(
                    kind,
                    &[a],
                    w,
                    GateParams {
                        offset: Some(offset),
                        ..Default::default()
                    },
                )
            }
            GateKind::Zext | GateKind::Sext => {
                let w = self.rng.gen_range(wa..=self.max_width.max(wa));
                self.emit(kind, &[a], w, none)
            }
            GateKind::Shl | GateKind::Shr | GateKind::Sshr => {
                if self.rng.gen_bool(0.5) {
                    let amount = self.rng.gen_range(0..=wa);
                    self.emit(
                        kind,
                        &[a],
                        wa,
                        GateParams {
                            amount: Some(amount),
                            ..Default::default()
                        },
                    )
                } else {
                    let c = self.pick();
                    self.emit(kind, &[a, c], wa, none)
                }
            }
            GateKind::Blit => {
                let c = self.pick();
                let c = if self.b.width(c) > wa { self.fit(c, wa) } else { c };
                let offset = self.rng.gen_range(0..=wa - self.b.width(c));
                self.emit(
                    kind,
                    &[a, c],
                    wa,
                    GateParams {
                        offset: Some(offset),
                        ..Default::default()
                    },
                )
            }
            GateKind::Repeat => {
                let times = (self.max_width / wa).max(1);
                let times = self.rng.gen_range(1..=times);
                self.emit(kind, &[a], wa * times, none)
            }
            GateKind::MemRead | GateKind::MemWrite => unreachable!("no memories"),
        };
        self.pool.push(out);
    }
}

fn declare_symbols(rng: &mut ChaCha8Rng, p: &RandomParams) -> SymbolTable {
    let mut labels = SymbolTable::new();
    let n = p.symbols.max(1);
    let shares = n >= 3 && rng.gen_bool(0.3);
    let plain = if shares { n - 2 } else { n };
    for i in 0..plain {
        let kind = if i == 0 {
            SymbolKind::Secret
        } else {
            match rng.gen_range(0..10) {
                0..=4 => SymbolKind::Mask,
                5..=6 => SymbolKind::Public,
                _ => SymbolKind::Secret,
            }
        };
        let w = rng.gen_range(1..=p.max_width);
        labels.declare(&format!("s{i}"), w, kind).expect("fresh");
    }
    if shares {
        let w = rng.gen_range(1..=p.max_width);
        for index in 0..2 {
            labels
                .declare(
                    &format!("x{index}"),
                    w,
                    SymbolKind::Share {
                        secret: "x".into(),
                        index,
                    },
                )
                .expect("fresh");
        }
    }
    labels
}

/// A symbolic or constant value of `width` bits built from the symbols.
fn input_term(rng: &mut ChaCha8Rng, labels: &SymbolTable, width: u32) -> InputValue {
    let syms: Vec<(&str, u32)> = labels.iter().map(|(n, i)| (n, i.width)).collect();
    let fitted = |rng: &mut ChaCha8Rng| {
        let (name, w) = *syms.choose(rng).expect("symbols");
        let s = Expr::symbol(name, w);
        if w > width {
            let lo = rng.gen_range(0..=w - width);
            s.extract(lo + width - 1, lo)
        } else if w < width {
            s.zext(width)
        } else {
            s
        }
    };
    match rng.gen_range(0..6) {
        0 => InputValue::Const(BitVec::new(width, rng.gen::<u64>() & mask(width))),
        1 | 2 => {
            let a = fitted(rng);
            let b = fitted(rng);
            InputValue::Expr(Expr::xor(&a, &b))
        }
        _ => {
            let e = fitted(rng);
            match e.as_symbol() {
                Some(s) => InputValue::Symbol(s.to_string()),
                None => InputValue::Expr(e),
            }
        }
    }
}

/// Deterministic per `(seed, params)`: acyclic, single clock, no memories.
pub fn gen_random_circuit(seed: u64, params: &RandomParams) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = declare_symbols(&mut rng, params);
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15),
        b: CircuitBuilder::new(),
        pool: Vec::new(),
        gates: 0,
        limit: params.max_gates,
        max_width: params.max_width,
    };
    let mut inputs = Vec::new();
    for i in 0..params.inputs.max(1) {
        let w = g.width();
        let id = g.b.input(&format!("in{i}"), w);
        inputs.push((format!("in{i}"), w));
        g.pool.push(id);
    }
    let mut regs = Vec::new();
    for i in 0..params.registers {
        let w = g.width();
        let q = g.b.wire(&format!("q{i}"), w);
        let init = BitVec::new(w, g.rng.gen::<u64>() & mask(w));
        regs.push((q, init));
        g.pool.push(q);
    }
    // Each register input and split may need up to one adapter.
    let reserve = params.registers + if params.splits { params.max_width as usize } else { 0 };
    let budget = g.limit.saturating_sub(reserve);
    let target = if budget == 0 { 0 } else { g.rng.gen_range(budget / 2..=budget) };
    // A gate emits at most three wires (two adapters and itself).
    while g.gates + 3 <= target {
        g.gate();
    }
    if params.splits && g.gates + params.max_width as usize <= g.limit {
        let wide: Vec<WireId> = g.pool.iter().copied().filter(|&w| g.b.width(w) >= 2).collect();
        if let Some(&x) = wide.choose(&mut g.rng) {
            let w = g.b.width(x);
            let mut bits = Vec::new();
            for i in 0..w {
                let bit = g.emit(
                    GateKind::Trunc,
                    &[x],
                    1,
                    GateParams {
                        offset: Some(i),
                        ..Default::default()
                    },
                );
                bits.push((bit, i));
                g.pool.push(bit);
            }
            g.b.split("sp", w, bits);
        }
    }
    for (q, init) in regs {
        let w = init.width();
        let src = g.pick();
        let src = if g.b.width(src) == w || g.gates < g.limit {
            g.fit(src, w)
        } else {
            q
        };
        g.b.register(src, q, init);
    }
    let last = *g.pool.last().expect("pool");
    g.b.mark_output(last);
    let extra = g.rng.gen_range(0..=2);
    for _ in 0..extra {
        let w = g.pick();
        g.b.mark_output(w);
    }
    let circuit = g.b.finish().expect("generator emits well-formed circuits");

    let witness: Assignment = labels
        .iter()
        .map(|(n, i)| (n.to_string(), BitVec::new(i.width, rng.gen::<u64>() & mask(i.width))))
        .collect();
    let mut stimuli = Stimuli::new(witness);
    let mut prev: Vec<InputValue> = Vec::new();
    for t in 0..params.cycles {
        let mut frame = Vec::new();
        for (k, (name, w)) in inputs.iter().enumerate() {
            // Holding a value lets registers become stable.
            let v = if t > 0 && rng.gen_bool(0.3) {
                prev[k].clone()
            } else {
                input_term(&mut rng, &labels, *w)
            };
            frame.push((name.clone(), v));
        }
        prev = frame.iter().map(|(_, v)| v.clone()).collect();
        stimuli.push(frame);
    }
    Fixture {
        name: format!("random_{seed}"),
        circuit,
        labels,
        stimuli,
    }
}
