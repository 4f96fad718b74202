//! Stuck-at faults modeled as key gates: AND for sa0, OR for sa1.

use std::collections::HashSet;

use crate::bench::GateKind;
use crate::circuit::{Circuit, GateId, NetId, OutputVector, Pattern, Pin, SimError};
use crate::fault::{fault_name, is_valid_site, site_name, site_net, splice_branch_buffer, Fault, FaultSite, Polarity};

pub const KEY_PREFIX: &str = "keyinput";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LockError {
    #[error("no faults to lock")]
    Empty,
    #[error("fault `{0}` listed twice")]
    Duplicate(String),
    #[error("fault does not belong to this circuit: {0:?}")]
    InvalidFault(Fault),
    #[error("circuit already has a net named `{0}`")]
    KeyNameClash(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyBit {
    pub fault: Fault,
    /// Value under which the key gate is transparent.
    pub k_ref: bool,
    pub key_net: NetId,
    pub key_gate: GateId,
}

#[derive(Debug, Clone)]
pub struct LockedCircuit {
    pub circuit: Circuit,
    pub key_map: Vec<KeyBit>,
    pub functional_pi_count: usize,
}

pub fn key_gate_kind(p: Polarity) -> GateKind {
    match p {
        Polarity::Sa0 => GateKind::And,
        Polarity::Sa1 => GateKind::Or,
    }
}

pub fn k_ref(p: Polarity) -> bool {
    p == Polarity::Sa0
}

impl LockedCircuit {
    pub fn num_keys(&self) -> usize {
        self.key_map.len()
    }

    pub fn k_ref(&self) -> Vec<bool> {
        self.key_map.iter().map(|k| k.k_ref).collect()
    }

    pub fn functional_inputs(&self) -> &[NetId] {
        &self.circuit.inputs()[..self.functional_pi_count]
    }

    pub fn key_inputs(&self) -> &[NetId] {
        &self.circuit.inputs()[self.functional_pi_count..]
    }

    /// Functional pattern followed by key bits, in the locked circuit's input order.
    pub fn full_pattern(&self, x: &Pattern, key: &[bool]) -> Pattern {
        let mut bits = x.0.clone();
        bits.extend_from_slice(key);
        Pattern(bits)
    }

    pub fn simulate_with_key(&self, x: &Pattern, key: &[bool]) -> Result<OutputVector, SimError> {
        if x.width() != self.functional_pi_count {
            return Err(SimError::WidthMismatch { expected: self.functional_pi_count, got: x.width() });
        }
        if key.len() != self.num_keys() {
            return Err(SimError::WidthMismatch { expected: self.num_keys(), got: key.len() });
        }
        self.circuit.simulate(&self.full_pattern(x, key))
    }

    /// Key vector that activates exactly fault `i`.
    pub fn faulty_key(&self, i: usize) -> Vec<bool> {
        let mut key = self.k_ref();
        key[i] = !key[i];
        key
    }
}

pub fn lock_fault(c: &Circuit, f: Fault) -> Result<LockedCircuit, LockError> {
    lock_fault_group(c, &[f])
}

/// Inserts one key gate per fault; key bit `i` models `faults[i]`.
pub fn lock_fault_group(c: &Circuit, faults: &[Fault]) -> Result<LockedCircuit, LockError> {
    if faults.is_empty() {
        return Err(LockError::Empty);
    }
    let mut seen = HashSet::new();
    for f in faults {
        if !is_valid_site(c, f.site) {
            return Err(LockError::InvalidFault(*f));
        }
        if !seen.insert(*f) {
            return Err(LockError::Duplicate(fault_name(c, f)));
        }
    }

    let mut b = c.edit();
    let mut key_nets = Vec::with_capacity(faults.len());
    for i in 0..faults.len() {
        let name = format!("{KEY_PREFIX}{i}");
        if b.contains(&name) {
            return Err(LockError::KeyNameClash(name));
        }
        key_nets.push(b.add_input(&name).expect("fresh key net"));
    }

    // Sites in order of first appearance, each with its key bits.
    let mut sites: Vec<(FaultSite, Vec<usize>)> = Vec::new();
    for (i, f) in faults.iter().enumerate() {
        match sites.iter_mut().find(|(s, _)| *s == f.site) {
            Some((_, bits)) => bits.push(i),
            None => sites.push((f.site, vec![i])),
        }
    }

    let mut key_gates = vec![GateId(0); faults.len()];
    for (site, mut bits) in sites {
        bits.sort_by_key(|&i| faults[i].polarity);
        let (source, readers, po_positions): (NetId, Vec<Pin>, Vec<usize>) = match site {
            FaultSite::Stem(n) => {
                let pos = b.outputs().iter().enumerate().filter(|(_, &o)| o == n).map(|(i, _)| i).collect();
                (n, b.readers(n), pos)
            }
            FaultSite::Branch(pin) => {
                let buf = splice_branch_buffer(&mut b, c.net_name(site_net(c, site)), pin);
                (buf, vec![pin], Vec::new())
            }
        };
        let base = site_name(c, site).replace("->", "_").replace('.', "_");
        let mut cur = source;
        for i in bits {
            let kind = key_gate_kind(faults[i].polarity);
            let (g, out) = b.add_fresh_gate(kind, vec![cur, key_nets[i]], &format!("{base}_kg{i}"));
            key_gates[i] = g;
            cur = out;
        }
        for pin in readers {
            b.set_fanin(pin, cur);
        }
        for pos in po_positions {
            b.set_output(pos, cur);
        }
    }

    let circuit = b.finish().expect("key-gate splice keeps the circuit well-formed");
    let key_map = faults
        .iter()
        .enumerate()
        .map(|(i, f)| KeyBit { fault: *f, k_ref: k_ref(f.polarity), key_net: key_nets[i], key_gate: key_gates[i] })
        .collect();
    Ok(LockedCircuit { circuit, key_map, functional_pi_count: c.num_inputs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::parse_bench;
    use crate::circuit::{build_circuit, Driver};
    use crate::fault::enumerate_faults;

    fn circuit(text: &str) -> Circuit {
        build_circuit(&parse_bench(text).unwrap()).unwrap()
    }

    fn all_patterns(width: usize) -> impl Iterator<Item = Pattern> {
        (0..1u64 << width).map(move |v| Pattern::from_index(v, width))
    }

    fn count_kind(c: &Circuit, kind: GateKind) -> usize {
        c.gates().iter().filter(|g| g.kind == kind).count()
    }

    /// Re-evaluates `c` with one line forced, without going through any transform.
    fn inject(c: &Circuit, f: Fault, x: &Pattern) -> Vec<bool> {
        let stuck = f.polarity.stuck_value();
        let mut v = vec![false; c.num_nets()];
        for (&n, &b) in c.inputs().iter().zip(x.bits()) {
            v[n.index()] = b;
        }
        if let FaultSite::Stem(n) = f.site {
            if matches!(c.net(n).driver, Driver::Input(_)) {
                v[n.index()] = stuck;
            }
        }
        for &g in c.topo_gates() {
            let gate = c.gate(g);
            let ins = gate.fanins.iter().enumerate().map(|(pin, n)| match f.site {
                FaultSite::Branch(p) if p.gate == g && p.pin == pin => stuck,
                _ => v[n.index()],
            });
            let mut out = gate.kind.eval(ins.collect::<Vec<_>>());
            if f.site == FaultSite::Stem(gate.output) {
                out = stuck;
            }
            v[gate.output.index()] = out;
        }
        c.outputs().iter().map(|o| v[o.index()]).collect()
    }

    const FANOUT7: &str = include_str!("../tests/data/fanout7.bench");

    #[test]
    fn buffer_sa0_becomes_and_gate() {
        let c = circuit("INPUT(x)\nOUTPUT(y)\ny = BUF(x)\n");
        let y = c.find_net("y").unwrap();
        let lc = lock_fault(&c, Fault::stem(y, Polarity::Sa0)).unwrap();
        assert_eq!(lc.k_ref(), vec![true]);
        assert_eq!(lc.key_inputs().len(), 1);
        assert_eq!(lc.circuit.net_name(lc.key_inputs()[0]), "keyinput0");
        let kg = lc.circuit.gate(lc.key_map[0].key_gate);
        assert_eq!(kg.kind, GateKind::And);
        assert_eq!(kg.fanins, vec![y, lc.key_map[0].key_net]);
        assert_eq!(lc.circuit.outputs(), &[kg.output]);
    }

    #[test]
    fn branch_sa1_gets_buffer_and_or_gate() {
        let c = circuit(
            "INPUT(a)\nINPUT(b)\nINPUT(c)\nINPUT(d)\nOUTPUT(G2)\nOUTPUT(G3)\n\
             n1 = AND(a, b)\nG2 = OR(n1, c)\nG3 = NAND(n1, d)\n",
        );
        let n1 = c.find_net("n1").unwrap();
        let pin = c.fanout(n1)[1];
        let lc = lock_fault(&c, Fault::branch(pin, Polarity::Sa1)).unwrap();
        assert_eq!(count_kind(&lc.circuit, GateKind::Buf), 1);
        let kg = lc.circuit.gate(lc.key_map[0].key_gate);
        assert_eq!(kg.kind, GateKind::Or);
        assert_eq!(lc.circuit.net_name(kg.fanins[0]), "n1_br_G3_0");
        assert_eq!(lc.circuit.fanout(kg.output).len(), 1);
        assert_eq!(lc.circuit.fanout(kg.output)[0], pin);
        assert_eq!(lc.circuit.fanout(n1).len(), 2);
        assert_eq!(lc.k_ref(), vec![false]);
    }

    #[test]
    fn four_fault_group_key_is_1010() {
        let c = circuit(FANOUT7);
        let faults = crate::fault::parse_fault_list(&c, "G1 sa0\nG2 sa1\nx3->G3.0 sa0\nG3 sa1\n").unwrap();
        let lc = lock_fault_group(&c, &faults).unwrap();
        let kinds: Vec<GateKind> = lc.key_map.iter().map(|k| lc.circuit.gate(k.key_gate).kind).collect();
        assert_eq!(kinds, vec![GateKind::And, GateKind::Or, GateKind::And, GateKind::Or]);
        assert_eq!(count_kind(&lc.circuit, GateKind::Buf), 1);
        assert_eq!(lc.k_ref(), vec![true, false, true, false]);
        for x in all_patterns(7) {
            assert_eq!(lc.simulate_with_key(&x, &lc.k_ref()).unwrap(), c.simulate(&x).unwrap());
        }
    }

    #[test]
    fn single_group_equals_single_lock() {
        let c = circuit(FANOUT7);
        for f in enumerate_faults(&c) {
            let a = lock_fault(&c, f).unwrap();
            let b = lock_fault_group(&c, &[f]).unwrap();
            assert_eq!(a.circuit, b.circuit);
            assert_eq!(a.key_map, b.key_map);
        }
    }

    #[test]
    fn both_polarities_chain_and_then_or() {
        let c = circuit("INPUT(x)\nOUTPUT(y)\ny = BUF(x)\n");
        let y = c.find_net("y").unwrap();
        let lc = lock_fault_group(&c, &[Fault::stem(y, Polarity::Sa1), Fault::stem(y, Polarity::Sa0)]).unwrap();
        let or = lc.circuit.gate(lc.key_map[0].key_gate);
        let and = lc.circuit.gate(lc.key_map[1].key_gate);
        assert_eq!((and.kind, or.kind), (GateKind::And, GateKind::Or));
        assert_eq!(or.fanins[0], and.output);
        for x in all_patterns(1) {
            assert_eq!(lc.simulate_with_key(&x, &[false, true]).unwrap(), c.simulate(&x).unwrap());
        }
    }

    #[test]
    fn transparency_and_single_bit_fault_law() {
        let c = circuit(FANOUT7);
        let faults = enumerate_faults(&c);
        let lc = lock_fault_group(&c, &faults).unwrap();
        for x in all_patterns(7) {
            let good = c.simulate(&x).unwrap();
            assert_eq!(lc.simulate_with_key(&x, &lc.k_ref()).unwrap(), good);
            for (i, &f) in faults.iter().enumerate() {
                assert_eq!(lc.simulate_with_key(&x, &lc.faulty_key(i)).unwrap().0, inject(&c, f, &x), "fault {i}");
            }
        }
    }

    /// With an XOR key gate, both values of the site propagate the key, so
    /// every site value yields a distinguishing input.
    #[test]
    fn xor_key_gate_propagates_for_both_site_values() {
        let c = circuit("INPUT(s)\nINPUT(k)\nOUTPUT(y)\ny = XOR(s, k)\n");
        for s in [false, true] {
            let y0 = c.simulate(&Pattern(vec![s, false])).unwrap();
            let y1 = c.simulate(&Pattern(vec![s, true])).unwrap();
            assert_ne!(y0, y1);
        }
        let and = circuit("INPUT(s)\nINPUT(k)\nOUTPUT(y)\ny = AND(s, k)\n");
        let y0 = and.simulate(&Pattern(vec![false, false])).unwrap();
        let y1 = and.simulate(&Pattern(vec![false, true])).unwrap();
        assert_eq!(y0, y1);
    }

    #[test]
    fn rejects_bad_groups() {
        let c = circuit(FANOUT7);
        let f = enumerate_faults(&c)[0];
        assert_eq!(lock_fault_group(&c, &[]).unwrap_err(), LockError::Empty);
        assert!(matches!(lock_fault_group(&c, &[f, f]), Err(LockError::Duplicate(_))));
        let clash = circuit("INPUT(keyinput0)\nOUTPUT(y)\ny = NOT(keyinput0)\n");
        let g = enumerate_faults(&clash)[0];
        assert_eq!(lock_fault(&clash, g).unwrap_err(), LockError::KeyNameClash("keyinput0".into()));
        let bogus = Fault::stem(NetId(999), Polarity::Sa0);
        assert!(matches!(lock_fault(&c, bogus), Err(LockError::InvalidFault(_))));
    }
}
