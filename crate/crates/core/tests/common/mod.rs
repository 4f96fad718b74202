//! Circuit generator and brute-force detectability oracle shared by the
//! integration tests. The oracle evaluates faults by forcing lines directly
//! and never touches the lock transform or the fault simulator.

#![allow(dead_code)]

use lockatpg::bench::{parse_bench, GateKind};
use lockatpg::circuit::{build_circuit, Circuit, Driver};
use lockatpg::fault::{enumerate_faults, Fault, FaultSite};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_INPUTS: usize = 12;
pub const MAX_GATES: usize = 60;

pub fn load(text: &str) -> Circuit {
    build_circuit(&parse_bench(text).unwrap()).unwrap()
}

pub fn fanout7() -> Circuit {
    load(include_str!("../data/fanout7.bench"))
}

/// Random combinational bench text with `inputs` PIs and `gates` gates. Every
/// gate output nobody reads becomes a PO, plus a few internal nets.
pub fn random_bench(seed: u64, inputs: usize, gates: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = [
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buf,
    ];
    let mut nets: Vec<String> = (0..inputs).map(|i| format!("i{i}")).collect();
    let mut read = vec![false; inputs];
    let mut body = String::new();
    for g in 0..gates {
        let kind = *kinds.choose(&mut rng).unwrap();
        let arity = match kind {
            GateKind::Not | GateKind::Buf => 1,
            _ => rng.gen_range(2..=3).min(nets.len()),
        };
        // Bias fanins toward recent nets so circuits get some depth.
        let mut fanins: Vec<usize> = Vec::new();
        while fanins.len() < arity {
            let lo = nets.len().saturating_sub(12);
            let pick = if rng.gen_bool(0.7) { rng.gen_range(lo..nets.len()) } else { rng.gen_range(0..nets.len()) };
            if !fanins.contains(&pick) {
                fanins.push(pick);
            }
        }
        for &f in &fanins {
            read[f] = true;
        }
        let names: Vec<&str> = fanins.iter().map(|&f| nets[f].as_str()).collect();
        body.push_str(&format!("g{g} = {}({})\n", kind.name(), names.join(", ")));
        nets.push(format!("g{g}"));
        read.push(false);
    }
    let mut outputs: Vec<usize> = (inputs..nets.len()).filter(|&n| !read[n]).collect();
    for _ in 0..rng.gen_range(0..3) {
        let n = rng.gen_range(inputs..nets.len());
        if !outputs.contains(&n) {
            outputs.push(n);
        }
    }
    let mut text = String::new();
    for i in 0..inputs {
        text.push_str(&format!("INPUT(i{i})\n"));
    }
    for &o in &outputs {
        text.push_str(&format!("OUTPUT({})\n", nets[o]));
    }
    text.push_str(&body);
    text
}

/// A corpus circuit: 2..=12 PIs, 2..=60 gates, shape drawn from `seed`.
pub fn random_circuit(seed: u64) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let inputs = rng.gen_range(2..=MAX_INPUTS);
    let gates = rng.gen_range(2..=MAX_GATES);
    load(&random_bench(seed, inputs, gates))
}

pub fn corpus(n: usize) -> Vec<(u64, Circuit)> {
    (0..n as u64).map(|s| (s, random_circuit(s))).collect()
}

/// All 2^n input assignments packed 64 per word: `words[block][pi]`, plus the
/// lane mask of each block.
pub fn exhaustive_blocks(n: usize) -> Vec<(Vec<u64>, u64)> {
    let total = 1u64 << n;
    let blocks = total.div_ceil(64);
    (0..blocks)
        .map(|b| {
            let mut words = vec![0u64; n];
            let mut mask = 0u64;
            for lane in 0..64 {
                let p = b * 64 + lane;
                if p >= total {
                    break;
                }
                mask |= 1 << lane;
                for (i, w) in words.iter_mut().enumerate() {
                    if p >> i & 1 == 1 {
                        *w |= 1 << lane;
                    }
                }
            }
            (words, mask)
        })
        .collect()
}

/// Packed evaluation with an optional line forced to its stuck value.
pub fn eval_with_fault(c: &Circuit, fault: Option<Fault>, inputs: &[u64]) -> Vec<u64> {
    let force = |f: &Fault| if f.polarity.stuck_value() { !0u64 } else { 0 };
    let mut v = vec![0u64; c.num_nets()];
    for (&n, &w) in c.inputs().iter().zip(inputs) {
        v[n.index()] = w;
    }
    if let Some(f) = &fault {
        if let FaultSite::Stem(n) = f.site {
            if matches!(c.net(n).driver, Driver::Input(_)) {
                v[n.index()] = force(f);
            }
        }
    }
    for &g in c.topo_gates() {
        let gate = c.gate(g);
        let ins: Vec<u64> = gate
            .fanins
            .iter()
            .enumerate()
            .map(|(pin, n)| match &fault {
                Some(f) if matches!(f.site, FaultSite::Branch(p) if p.gate == g && p.pin == pin) => force(f),
                _ => v[n.index()],
            })
            .collect();
        let mut out = gate.kind.eval_word(ins);
        if let Some(f) = &fault {
            if f.site == FaultSite::Stem(gate.output) {
                out = force(f);
            }
        }
        v[gate.output.index()] = out;
    }
    c.outputs().iter().map(|o| v[o.index()]).collect()
}

/// Per-fault detectability by enumerating every input assignment.
pub fn oracle(c: &Circuit, faults: &[Fault]) -> Vec<bool> {
    let blocks = exhaustive_blocks(c.num_inputs());
    let good: Vec<Vec<u64>> = blocks.iter().map(|(w, _)| eval_with_fault(c, None, w)).collect();
    faults
        .iter()
        .map(|&f| {
            blocks.iter().zip(&good).any(|((w, mask), g)| {
                let bad = eval_with_fault(c, Some(f), w);
                bad.iter().zip(g).any(|(a, b)| (a ^ b) & mask != 0)
            })
        })
        .collect()
}

pub fn oracle_all(c: &Circuit) -> (Vec<Fault>, Vec<bool>) {
    let faults = enumerate_faults(c);
    let det = oracle(c, &faults);
    (faults, det)
}
