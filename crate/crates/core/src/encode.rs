//! Tseitin encoding of circuits into CNF.

use lockatpg_sat::{CnfFormula, Lit, Var};

use crate::bench::GateKind;
use crate::circuit::{Circuit, NetId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("{got} input bindings for a circuit with {expected} primary inputs")]
    BindingWidth { expected: usize, got: usize },
    #[error("{got} output values for a circuit with {expected} primary outputs")]
    OutputWidth { expected: usize, got: usize },
}

/// CNF variable of every net of one encoded circuit instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarMap(Vec<Var>);

impl VarMap {
    pub fn var(&self, net: NetId) -> Var {
        self.0[net.index()]
    }

    pub fn lit(&self, net: NetId) -> Lit {
        self.var(net).pos()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn add(f: &mut CnfFormula, clause: &[Lit]) {
    f.add_clause(clause).expect("encoder only uses allocated variables");
}

fn and_clauses(f: &mut CnfFormula, out: Lit, ins: &[Lit]) {
    for &a in ins {
        add(f, &[!out, a]);
    }
    let mut long: Vec<Lit> = ins.iter().map(|&a| !a).collect();
    long.push(out);
    add(f, &long);
}

fn xor2_clauses(f: &mut CnfFormula, out: Lit, a: Lit, b: Lit) {
    add(f, &[!out, a, b]);
    add(f, &[!out, !a, !b]);
    add(f, &[out, !a, b]);
    add(f, &[out, a, !b]);
}

/// Clauses constraining `out` to `kind(ins)`. Multi-input XOR/XNOR chain
/// through fresh variables.
pub fn encode_gate(f: &mut CnfFormula, kind: GateKind, out: Lit, ins: &[Lit]) {
    match kind {
        GateKind::And => and_clauses(f, out, ins),
        GateKind::Nand => and_clauses(f, !out, ins),
        // OR(y; a..) is AND(!y; !a..)
        GateKind::Or => and_clauses(f, !out, &ins.iter().map(|&a| !a).collect::<Vec<_>>()),
        GateKind::Nor => and_clauses(f, out, &ins.iter().map(|&a| !a).collect::<Vec<_>>()),
        GateKind::Xor | GateKind::Xnor => {
            let out = if kind == GateKind::Xnor { !out } else { out };
            match ins {
                [] => unreachable!("XOR with no fanins"),
                [a] => {
                    add(f, &[!out, *a]);
                    add(f, &[out, !*a]);
                }
                [first, mid @ .., last] => {
                    let mut acc = *first;
                    for &b in mid {
                        let t = f.new_var().pos();
                        xor2_clauses(f, t, acc, b);
                        acc = t;
                    }
                    xor2_clauses(f, out, acc, *last);
                }
            }
        }
        GateKind::Buf | GateKind::Dff => {
            add(f, &[!out, ins[0]]);
            add(f, &[out, !ins[0]]);
        }
        GateKind::Not => {
            add(f, &[!out, !ins[0]]);
            add(f, &[out, ins[0]]);
        }
    }
}

fn check_bindings(c: &Circuit, bindings: &[Option<Var>]) -> Result<(), EncodeError> {
    if !bindings.is_empty() && bindings.len() != c.num_inputs() {
        return Err(EncodeError::BindingWidth { expected: c.num_inputs(), got: bindings.len() });
    }
    Ok(())
}

/// Encodes one copy of `c`. `bindings` is empty or has one entry per primary
/// input; `Some(v)` reuses `v` instead of allocating a fresh variable.
pub fn encode_instance(f: &mut CnfFormula, c: &Circuit, bindings: &[Option<Var>]) -> Result<VarMap, EncodeError> {
    check_bindings(c, bindings)?;
    let mut net_bindings = vec![None; c.num_nets()];
    for (&pi, b) in c.inputs().iter().zip(bindings) {
        net_bindings[pi.index()] = *b;
    }
    Ok(encode_sharing(f, c, &net_bindings))
}

/// Encodes one copy of `c` where any net may be bound to an existing
/// variable; the driving gate of a bound net is not encoded again.
pub fn encode_sharing(f: &mut CnfFormula, c: &Circuit, net_bindings: &[Option<Var>]) -> VarMap {
    assert_eq!(net_bindings.len(), c.num_nets());
    let mut vars: Vec<Option<Var>> = net_bindings.to_vec();
    for &pi in c.inputs() {
        if vars[pi.index()].is_none() {
            vars[pi.index()] = Some(f.new_var());
        }
    }
    let mut fresh = Vec::new();
    for &g in c.topo_gates() {
        let out = c.gate(g).output;
        if vars[out.index()].is_none() {
            vars[out.index()] = Some(f.new_var());
            fresh.push(g);
        }
    }
    let vars: Vec<Var> = vars.into_iter().map(|v| v.expect("every net is an input or a gate output")).collect();
    for g in fresh {
        let gate = c.gate(g);
        let ins: Vec<Lit> = gate.fanins.iter().map(|n| vars[n.index()].pos()).collect();
        encode_gate(f, gate.kind, vars[gate.output.index()].pos(), &ins);
    }
    VarMap(vars)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Val {
    Const(bool),
    Lit(Lit),
}

/// Partially evaluated gate: constants folded, remaining literals encoded.
fn fold_gate(f: &mut CnfFormula, kind: GateKind, ins: &[Val]) -> Val {
    let lits = || ins.iter().filter_map(|v| if let Val::Lit(l) = v { Some(*l) } else { None });
    let consts = || ins.iter().filter_map(|v| if let Val::Const(b) = v { Some(*b) } else { None });
    let negate = |v: Val| match v {
        Val::Const(b) => Val::Const(!b),
        Val::Lit(l) => Val::Lit(!l),
    };
    let fresh = |f: &mut CnfFormula, kind: GateKind, ls: &[Lit]| {
        let out = f.new_var().pos();
        encode_gate(f, kind, out, ls);
        Val::Lit(out)
    };
    match kind {
        GateKind::And | GateKind::Nand | GateKind::Or | GateKind::Nor => {
            let (base, controlling) = match kind {
                GateKind::And | GateKind::Nand => (GateKind::And, false),
                _ => (GateKind::Or, true),
            };
            let r = if consts().any(|b| b == controlling) {
                Val::Const(controlling)
            } else {
                let ls: Vec<Lit> = lits().collect();
                match ls.len() {
                    0 => Val::Const(!controlling),
                    1 => Val::Lit(ls[0]),
                    _ => fresh(f, base, &ls),
                }
            };
            if matches!(kind, GateKind::Nand | GateKind::Nor) {
                negate(r)
            } else {
                r
            }
        }
        GateKind::Xor | GateKind::Xnor => {
            let parity = consts().fold(kind == GateKind::Xnor, |a, b| a ^ b);
            let ls: Vec<Lit> = lits().collect();
            let r = match ls.len() {
                0 => Val::Const(false),
                1 => Val::Lit(ls[0]),
                _ => fresh(f, GateKind::Xor, &ls),
            };
            if parity {
                negate(r)
            } else {
                r
            }
        }
        GateKind::Buf | GateKind::Dff => ins[0],
        GateKind::Not => negate(ins[0]),
    }
}

/// Adds `c(inputs) = outputs` where each input is either a fixed value or a
/// bound variable. Only logic depending on the bound variables is encoded;
/// the rest folds to constants.
pub fn encode_io_constraint(
    f: &mut CnfFormula,
    c: &Circuit,
    inputs: &[Result<bool, Var>],
    outputs: &[bool],
) -> Result<(), EncodeError> {
    if inputs.len() != c.num_inputs() {
        return Err(EncodeError::BindingWidth { expected: c.num_inputs(), got: inputs.len() });
    }
    if outputs.len() != c.num_outputs() {
        return Err(EncodeError::OutputWidth { expected: c.num_outputs(), got: outputs.len() });
    }
    let mut vals = vec![Val::Const(false); c.num_nets()];
    for (&pi, v) in c.inputs().iter().zip(inputs) {
        vals[pi.index()] = match v {
            Ok(b) => Val::Const(*b),
            Err(var) => Val::Lit(var.pos()),
        };
    }
    for &g in c.topo_gates() {
        let gate = c.gate(g);
        let ins: Vec<Val> = gate.fanins.iter().map(|n| vals[n.index()]).collect();
        vals[gate.output.index()] = fold_gate(f, gate.kind, &ins);
    }
    for (&o, &want) in c.outputs().iter().zip(outputs) {
        match vals[o.index()] {
            Val::Const(b) if b == want => {}
            Val::Const(_) => add(f, &[]),
            Val::Lit(l) => add(f, &[if want { l } else { !l }]),
        }
    }
    Ok(())
}
