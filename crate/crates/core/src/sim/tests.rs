use super::*;
use crate::expr::Table;
use crate::netlist::{CircuitBuilder, GateParams};

fn k() -> Expr {
    Expr::symbol("k", 1)
}

fn m() -> Expr {
    Expr::symbol("m", 1)
}

fn witness(pairs: &[(&str, u32, u64)]) -> Assignment {
    pairs
        .iter()
        .map(|(n, w, v)| (n.to_string(), BitVec::new(*w, *v)))
        .collect()
}

fn frame(cycle: usize, inputs: Vec<(&str, InputValue)>) -> StimulusFrame {
    StimulusFrame {
        cycle,
        inputs: inputs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    }
}

fn set(items: &[Expr]) -> LeakSet {
    items.iter().cloned().collect()
}

#[test]
fn fig5_rows() {
    let mut b = CircuitBuilder::new();
    let i0 = b.input("i0", 1);
    let i1 = b.input("i1", 1);
    let o0 = b.op(GateKind::BitAnd, &[i0, i1], "o0", 1);
    b.mark_output(o0);
    let c = b.finish().unwrap();
    let mut sim = Simulator::with_defaults(&c, witness(&[("k", 1, 1), ("m", 1, 0)])).unwrap();
    let km = Expr::xor(&k(), &m());
    sim.step(&frame(
        0,
        vec![
            ("i0", InputValue::Const(BitVec::new(1, 0))),
            ("i1", InputValue::Expr(km.clone())),
        ],
    ))
    .unwrap();
    let v = &sim.state().current()[o0];
    assert_eq!(v.symb, Expr::zero(1));
    assert_eq!(v.lset[0], set(&[km.clone()]));
    assert!(!v.is_stable(0));
    assert!(sim.state().current()[i0].lset[0].is_empty());
    sim.step(&frame(
        1,
        vec![
            ("i0", InputValue::Const(BitVec::new(1, 1))),
            ("i1", InputValue::Symbol("m".into())),
        ],
    ))
    .unwrap();
    let v = &sim.state().current()[o0];
    assert_eq!(v.symb, m());
    assert_eq!(v.lset[0], set(&[m()]));
    assert!(!v.is_stable(0));
    assert_eq!(sim.state().previous().unwrap()[i1].symb, km);
}

#[test]
fn and_with_stable_zero_is_stable() {
    // q is a register holding 0; AND(q, m) is stable and leaks nothing.
    let mut b = CircuitBuilder::new();
    let x = b.input("x", 1);
    let d = b.input("d", 1);
    let q = b.wire("q", 1);
    b.register(d, q, BitVec::zero(1));
    let o = b.op(GateKind::BitAnd, &[q, x], "o", 1);
    let o2 = b.op(GateKind::BitXor, &[q, x], "o2", 1);
    b.mark_output(o);
    b.mark_output(o2);
    let c = b.finish().unwrap();
    let mut sim = Simulator::with_defaults(&c, witness(&[("m", 1, 1)])).unwrap();
    sim.step(&frame(
        0,
        vec![
            ("x", InputValue::Symbol("m".into())),
            ("d", InputValue::Const(BitVec::zero(1))),
        ],
    ))
    .unwrap();
    let s = sim.state().current();
    assert!(s[o].is_stable(0));
    assert!(s[o].lset[0].is_empty());
    assert!(!s[o2].is_stable(0));
    assert_eq!(s[o2].lset[0], set(&[m()]));
}

#[test]
fn register_stability_and_transition_sets() {
    let mut b = CircuitBuilder::new();
    let d = b.input("d", 1);
    let q = b.wire("q", 1);
    b.register(d, q, BitVec::zero(1));
    b.mark_output(q);
    let c = b.finish().unwrap();
    let km = Expr::xor(&k(), &m());
    let mut sim = Simulator::with_defaults(&c, witness(&[("k", 1, 0), ("m", 1, 1)])).unwrap();
    let frames = [
        InputValue::Expr(km.clone()),
        InputValue::Expr(km.clone()),
        InputValue::Symbol("m".into()),
        InputValue::Const(BitVec::zero(1)),
    ];
    for (t, f) in frames.iter().enumerate() {
        sim.step(&frame(t, vec![("d", f.clone())])).unwrap();
    }
    // Replay, checking each cycle.
    let mut sim = Simulator::with_defaults(&c, witness(&[("k", 1, 0), ("m", 1, 1)])).unwrap();
    sim.step(&frame(0, vec![("d", frames[0].clone())])).unwrap();
    let v = &sim.state().current()[q];
    assert_eq!(v.symb, Expr::zero(1));
    assert!(v.is_stable(0) && v.lset[0].is_empty());
    sim.step(&frame(1, vec![("d", frames[1].clone())])).unwrap();
    let v = &sim.state().current()[q];
    assert!(!v.is_stable(0));
    assert_eq!(v.lset[0], set(&[km.clone()]));
    sim.step(&frame(2, vec![("d", frames[2].clone())])).unwrap();
    let v = &sim.state().current()[q];
    assert!(v.is_stable(0));
    assert_eq!(v.lset[0], set(&[km.clone()]));
    sim.step(&frame(3, vec![("d", frames[3].clone())])).unwrap();
    let v = &sim.state().current()[q];
    assert!(!v.is_stable(0));
    assert_eq!(v.lset[0], set(&[m(), km]));
}

#[test]
fn reset_unstable_flag() {
    let mut b = CircuitBuilder::new();
    let d = b.input("d", 1);
    let q = b.wire("q", 1);
    b.register(d, q, BitVec::zero(1));
    let c = b.finish().unwrap();
    let opts = SimOptions {
        reset_unstable: true,
        ..SimOptions::default()
    };
    let mut sim = Simulator::new(&c, Assignment::new(), Arc::new(NoHook), opts).unwrap();
    sim.step(&frame(0, vec![("d", InputValue::Const(BitVec::zero(1)))]))
        .unwrap();
    assert!(!sim.state().current()[q].is_stable(0));
}

#[test]
fn constant_circuit_has_empty_leaksets() {
    let mut b = CircuitBuilder::new();
    let a = b.input("a", 3);
    let x = b.op(GateKind::Add, &[a, a], "x", 3);
    let y = b.op(GateKind::IsZero, &[x], "y", 1);
    let q = b.wire("q", 3);
    b.register(x, q, BitVec::zero(3));
    b.mark_output(y);
    let c = b.finish().unwrap();
    let mut sim = Simulator::with_defaults(&c, Assignment::new()).unwrap();
    for t in 0..4 {
        sim.step(&frame(t, vec![("a", InputValue::Const(BitVec::new(3, t as u64 + 3)))]))
            .unwrap();
        for v in sim.state().current() {
            assert!(v.lset.iter().all(LeakSet::is_empty));
        }
        assert!(sim.state().assignment_counts().iter().all(|&n| n == 1));
    }
}

#[test]
fn corrupted_symbolic_value_is_reported() {
    let mut b = CircuitBuilder::new();
    let a = b.input("a", 1);
    let x = b.op(GateKind::BitNot, &[a], "x", 1);
    b.mark_output(x);
    let c = b.finish().unwrap();
    let w = witness(&[("k", 1, 1)]);
    let mut sim = Simulator::with_defaults(&c, w.clone()).unwrap();
    sim.step(&frame(0, vec![("a", InputValue::Symbol("k".into()))]))
        .unwrap();
    assert_eq!(consistency_check(&c, sim.state(), &w), Ok(()));
    let mut state = sim.state().clone();
    state.current[x].symb = k();
    assert_eq!(
        consistency_check(&c, &state, &w),
        Err(SimError::ConsistencyViolation {
            cycle: 0,
            wire: "x".into()
        })
    );
}

fn memory_circuit() -> (crate::netlist::Circuit, WireId) {
    let mut b = CircuitBuilder::new();
    b.memory("sbox", 4, 2, vec![]);
    let idx = b.input("idx", 2);
    let out = b.wire("out", 2);
    b.gate_with(
        GateKind::MemRead,
        &[idx],
        out,
        GateParams {
            memory: Some("sbox".into()),
            ..Default::default()
        },
    );
    b.mark_output(out);
    (b.finish().unwrap(), out)
}

#[test]
fn memory_constant_index_and_missing_hook() {
    let (c, out) = memory_circuit();
    let mut sim = Simulator::with_defaults(&c, witness(&[("p", 2, 1)])).unwrap();
    sim.step(&frame(0, vec![("idx", InputValue::Const(BitVec::new(2, 3)))]))
        .unwrap();
    assert_eq!(sim.state().current()[out].symb, Expr::zero(2));
    let err = sim
        .step(&frame(1, vec![("idx", InputValue::Symbol("p".into()))]))
        .unwrap_err();
    assert!(matches!(err, SimError::SymbolicIndexUnhandled { .. }));
}

#[test]
fn masked_table_hook_unmasks_index() {
    let (c, out) = memory_circuit();
    let table = Table::new("T", 2, vec![2, 0, 3, 1]);
    let hook = MaskedTableHook {
        memory: "sbox".into(),
        table: table.clone(),
        in_mask: "mi".into(),
        out_mask: "mo".into(),
    };
    for (p, mi, mo) in [(0, 0, 0), (1, 2, 3), (3, 1, 2), (2, 3, 1)] {
        let w = witness(&[("p", 2, p), ("mi", 2, mi), ("mo", 2, mo)]);
        let mut sim = Simulator::new(&c, w, Arc::new(hook.clone()), SimOptions::default()).unwrap();
        let pm = Expr::xor(&Expr::symbol("p", 2), &Expr::symbol("mi", 2));
        sim.step(&frame(0, vec![("idx", InputValue::Expr(pm))])).unwrap();
        let v = &sim.state().current()[out];
        let expected = Expr::xor(
            &Expr::array(table.clone(), &Expr::symbol("p", 2)),
            &Expr::symbol("mo", 2),
        );
        assert_eq!(v.symb, expected);
        assert_eq!(v.conc.bits(), table.lookup(p) ^ mo);
    }
}

#[test]
fn mux_selector_rules() {
    // sel comes from a register (stable at cycle 0 with value 1).
    let mut b = CircuitBuilder::new();
    let d = b.input("d", 1);
    let x = b.input("x", 1);
    let y = b.input("y", 1);
    let s = b.wire("s", 1);
    b.register(d, s, BitVec::new(1, 1));
    let o = b.op(GateKind::Mux, &[s, x, y], "o", 1);
    b.mark_output(o);
    let c = b.finish().unwrap();
    let w = witness(&[("k", 1, 0), ("m", 1, 1)]);
    let mut sim = Simulator::with_defaults(&c, w).unwrap();
    sim.step(&frame(
        0,
        vec![
            ("d", InputValue::Symbol("m".into())),
            ("x", InputValue::Symbol("k".into())),
            ("y", InputValue::Symbol("m".into())),
        ],
    ))
    .unwrap();
    let v = &sim.state().current()[o];
    assert_eq!(v.symb, m());
    assert_eq!(v.lset[0], set(&[m()]));
    assert!(sim.state().warnings().is_empty());
    // Cycle 1: selector is now the symbolic m, unstable.
    sim.step(&frame(
        1,
        vec![
            ("d", InputValue::Symbol("m".into())),
            ("x", InputValue::Symbol("k".into())),
            ("y", InputValue::Const(BitVec::zero(1))),
        ],
    ))
    .unwrap();
    let v = &sim.state().current()[o];
    assert_eq!(v.lset[0], set(&[m(), k()]));
    assert_eq!(sim.state().warnings()[0].kind, WarningKind::NonConstantSelector);
}

#[test]
fn input_errors() {
    let mut b = CircuitBuilder::new();
    b.input("a", 2);
    let c = b.finish().unwrap();
    let mut sim = Simulator::with_defaults(&c, Assignment::new()).unwrap();
    assert!(matches!(
        sim.step(&frame(0, vec![])),
        Err(SimError::MissingInput { .. })
    ));
    assert!(matches!(
        sim.step(&frame(0, vec![("a", InputValue::Const(BitVec::zero(1)))])),
        Err(SimError::InputWidth { .. })
    ));
    assert!(matches!(
        sim.step(&frame(0, vec![("a", InputValue::Symbol("zz".into()))])),
        Err(SimError::Witness(_))
    ));
}
