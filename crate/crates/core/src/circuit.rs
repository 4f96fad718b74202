//! Immutable combinational circuit graph with cached topological order.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::bench::{BenchAst, GateDef, GateKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NetId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GateId(pub u32);

impl NetId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl GateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    /// Primary input, by position in the input order.
    Input(usize),
    Gate(GateId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Net {
    pub name: String,
    pub driver: Driver,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    pub fanins: Vec<NetId>,
    pub output: NetId,
}

/// A gate input pin reading some net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pin {
    pub gate: GateId,
    pub pin: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CircuitError {
    #[error("combinational cycle through nets: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("output `{0}` is not driven by any input or gate")]
    DanglingOutput(String),
    #[error("net `{0}` is read but has no driver")]
    Undriven(String),
    #[error("net `{0}` has more than one driver")]
    DuplicateDriver(String),
    #[error("DFF driving `{0}`: cut flip-flops before building a combinational circuit")]
    SequentialElement(String),
    #[error("{kind} gate driving `{net}` has {got} fanins")]
    Arity { net: String, kind: GateKind, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("pattern width {got} does not match {expected} primary inputs")]
    WidthMismatch { expected: usize, got: usize },
}

/// Assignment of one logic value per primary input, in input order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern(pub Vec<bool>);

/// One logic value per primary output, in output order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OutputVector(pub Vec<bool>);

fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

impl Pattern {
    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Pattern of `width` bits taken from the low bits of `value`, input 0 = MSB.
    pub fn from_index(value: u64, width: usize) -> Pattern {
        Pattern((0..width).map(|i| value >> (width - 1 - i) & 1 == 1).collect())
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bits_to_string(&self.0))
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid pattern character `{other}`")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Pattern)
    }
}

impl OutputVector {
    pub fn bits(&self) -> &[bool] {
        &self.0
    }
}

impl fmt::Display for OutputVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bits_to_string(&self.0))
    }
}

#[derive(Debug, Clone)]
pub struct Circuit {
    nets: Vec<Net>,
    gates: Vec<Gate>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    fanout: Vec<Vec<Pin>>,
    topo: Vec<GateId>,
    gate_rank: Vec<u32>,
    net_order: Vec<NetId>,
    by_name: HashMap<String, NetId>,
}

impl PartialEq for Circuit {
    fn eq(&self, other: &Self) -> bool {
        self.nets == other.nets
            && self.gates == other.gates
            && self.inputs == other.inputs
            && self.outputs == other.outputs
    }
}

impl Circuit {
    pub fn num_nets(&self) -> usize {
        self.nets.len()
    }

    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn inputs(&self) -> &[NetId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    pub fn net(&self, id: NetId) -> &Net {
        &self.nets[id.index()]
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.nets[id.index()].name
    }

    pub fn gate(&self, id: GateId) -> &Gate {
        &self.gates[id.index()]
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Gates are named after the net they drive.
    pub fn gate_name(&self, id: GateId) -> &str {
        self.net_name(self.gates[id.index()].output)
    }

    pub fn find_net(&self, name: &str) -> Option<NetId> {
        self.by_name.get(name).copied()
    }

    /// Gate pins reading `net`, in gate order then pin order.
    pub fn fanout(&self, net: NetId) -> &[Pin] {
        &self.fanout[net.index()]
    }

    pub fn is_output(&self, net: NetId) -> bool {
        self.outputs.contains(&net)
    }

    /// Gates in a topological order, fixed at construction.
    pub fn topo_gates(&self) -> &[GateId] {
        &self.topo
    }

    /// Position of each gate in [`topo_gates`](Self::topo_gates).
    pub fn gate_rank(&self, g: GateId) -> u32 {
        self.gate_rank[g.index()]
    }

    /// Primary inputs in declaration order, then gate outputs in topological order.
    pub fn net_order(&self) -> &[NetId] {
        &self.net_order
    }

    pub fn to_bench(&self) -> BenchAst {
        BenchAst {
            inputs: self.inputs.iter().map(|&n| self.net_name(n).to_string()).collect(),
            outputs: self.outputs.iter().map(|&n| self.net_name(n).to_string()).collect(),
            gates: self
                .gates
                .iter()
                .map(|g| GateDef {
                    target: self.net_name(g.output).to_string(),
                    kind: g.kind,
                    fanins: g.fanins.iter().map(|&f| self.net_name(f).to_string()).collect(),
                })
                .collect(),
            comments: Vec::new(),
        }
    }

    /// Starts an editable copy. Existing net and gate ids stay valid in the result.
    pub fn edit(&self) -> CircuitBuilder {
        CircuitBuilder {
            names: self.nets.iter().map(|n| n.name.clone()).collect(),
            drivers: self.nets.iter().map(|n| Some(n.driver)).collect(),
            gates: self.gates.clone(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            by_name: self.by_name.clone(),
        }
    }

    fn check_width(&self, got: usize) -> Result<(), SimError> {
        if got != self.inputs.len() {
            return Err(SimError::WidthMismatch { expected: self.inputs.len(), got });
        }
        Ok(())
    }

    /// Values of every net under `pattern`, indexed by `NetId`.
    pub fn eval_nets(&self, pattern: &Pattern) -> Result<Vec<bool>, SimError> {
        self.check_width(pattern.width())?;
        let mut values = vec![false; self.nets.len()];
        for (&net, &v) in self.inputs.iter().zip(pattern.bits()) {
            values[net.index()] = v;
        }
        for &g in &self.topo {
            let gate = &self.gates[g.index()];
            values[gate.output.index()] = gate.kind.eval(gate.fanins.iter().map(|f| values[f.index()]));
        }
        Ok(values)
    }

    pub fn simulate(&self, pattern: &Pattern) -> Result<OutputVector, SimError> {
        let values = self.eval_nets(pattern)?;
        Ok(OutputVector(self.outputs.iter().map(|o| values[o.index()]).collect()))
    }

    /// Bit-parallel values of every net; `inputs` holds one word per primary input.
    pub fn eval_nets_packed(&self, inputs: &[u64]) -> Result<Vec<u64>, SimError> {
        self.check_width(inputs.len())?;
        let mut values = vec![0u64; self.nets.len()];
        for (&net, &w) in self.inputs.iter().zip(inputs) {
            values[net.index()] = w;
        }
        for &g in &self.topo {
            let gate = &self.gates[g.index()];
            values[gate.output.index()] = gate.kind.eval_word(gate.fanins.iter().map(|f| values[f.index()]));
        }
        Ok(values)
    }

    /// Simulates 64 patterns at once: bit `i` of every word belongs to pattern `i`.
    pub fn simulate_packed(&self, inputs: &[u64]) -> Result<Vec<u64>, SimError> {
        let values = self.eval_nets_packed(inputs)?;
        Ok(self.outputs.iter().map(|o| values[o.index()]).collect())
    }
}

/// Mutable netlist used to build circuits and to derive transformed ones.
#[derive(Debug, Clone, Default)]
pub struct CircuitBuilder {
    names: Vec<String>,
    drivers: Vec<Option<Driver>>,
    gates: Vec<Gate>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    by_name: HashMap<String, NetId>,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the net called `name`, creating an undriven one if needed.
    pub fn net(&mut self, name: &str) -> NetId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = NetId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.drivers.push(None);
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn contains(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    pub fn name(&self, net: NetId) -> &str {
        &self.names[net.index()]
    }

    /// `base`, or `base_<n>` for the smallest `n` that is unused.
    pub fn fresh_name(&self, base: &str) -> String {
        if !self.contains(base) {
            return base.to_string();
        }
        (1..)
            .map(|n| format!("{base}_{n}"))
            .find(|candidate| !self.contains(candidate))
            .expect("unbounded search")
    }

    fn set_driver(&mut self, net: NetId, d: Driver) -> Result<(), CircuitError> {
        let slot = &mut self.drivers[net.index()];
        if slot.is_some() {
            return Err(CircuitError::DuplicateDriver(self.names[net.index()].clone()));
        }
        *slot = Some(d);
        Ok(())
    }

    pub fn add_input(&mut self, name: &str) -> Result<NetId, CircuitError> {
        let id = self.net(name);
        self.set_driver(id, Driver::Input(self.inputs.len()))?;
        self.inputs.push(id);
        Ok(id)
    }

    pub fn add_gate(&mut self, kind: GateKind, fanins: Vec<NetId>, output: NetId) -> Result<GateId, CircuitError> {
        if kind == GateKind::Dff {
            return Err(CircuitError::SequentialElement(self.names[output.index()].clone()));
        }
        if !kind.arity_ok(fanins.len()) {
            return Err(CircuitError::Arity {
                net: self.names[output.index()].clone(),
                kind,
                got: fanins.len(),
            });
        }
        let id = GateId(self.gates.len() as u32);
        self.set_driver(output, Driver::Gate(id))?;
        self.gates.push(Gate { kind, fanins, output });
        Ok(id)
    }

    /// Adds a gate driving a new net whose name is derived from `base`.
    pub fn add_fresh_gate(&mut self, kind: GateKind, fanins: Vec<NetId>, base: &str) -> (GateId, NetId) {
        let name = self.fresh_name(base);
        let out = self.net(&name);
        let g = self.add_gate(kind, fanins, out).expect("fresh net has no driver");
        (g, out)
    }

    pub fn add_output(&mut self, net: NetId) {
        self.outputs.push(net);
    }

    pub fn gate(&self, g: GateId) -> &Gate {
        &self.gates[g.index()]
    }

    pub fn set_fanin(&mut self, pin: Pin, net: NetId) {
        self.gates[pin.gate.index()].fanins[pin.pin] = net;
    }

    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    pub fn set_output(&mut self, position: usize, net: NetId) {
        self.outputs[position] = net;
    }

    /// All gate pins currently reading `net`.
    pub fn readers(&self, net: NetId) -> Vec<Pin> {
        let mut pins = Vec::new();
        for (gi, g) in self.gates.iter().enumerate() {
            for (pi, &f) in g.fanins.iter().enumerate() {
                if f == net {
                    pins.push(Pin { gate: GateId(gi as u32), pin: pi });
                }
            }
        }
        pins
    }

    pub fn finish(self) -> Result<Circuit, CircuitError> {
        let CircuitBuilder { names, drivers, gates, inputs, outputs, by_name } = self;
        for &o in &outputs {
            if drivers[o.index()].is_none() {
                return Err(CircuitError::DanglingOutput(names[o.index()].clone()));
            }
        }
        for g in &gates {
            if let Some(f) = g.fanins.iter().find(|f| drivers[f.index()].is_none()) {
                return Err(CircuitError::Undriven(names[f.index()].clone()));
            }
        }
        let mut fanout = vec![Vec::new(); names.len()];
        for (gi, g) in gates.iter().enumerate() {
            for (pi, &f) in g.fanins.iter().enumerate() {
                fanout[f.index()].push(Pin { gate: GateId(gi as u32), pin: pi });
            }
        }

        // Kahn's algorithm seeded in gate order.
        let mut pending: Vec<usize> = gates.iter().map(|g| g.fanins.len()).collect();
        let mut ready: VecDeque<usize> = VecDeque::new();
        let mut net_ready = vec![false; names.len()];
        for &i in &inputs {
            net_ready[i.index()] = true;
        }
        for &i in &inputs {
            for p in &fanout[i.index()] {
                pending[p.gate.index()] -= 1;
            }
        }
        for (gi, &n) in pending.iter().enumerate() {
            if n == 0 {
                ready.push_back(gi);
            }
        }
        let mut topo = Vec::with_capacity(gates.len());
        while let Some(gi) = ready.pop_front() {
            topo.push(GateId(gi as u32));
            let out = gates[gi].output;
            net_ready[out.index()] = true;
            for p in &fanout[out.index()] {
                let pg = p.gate.index();
                pending[pg] -= 1;
                if pending[pg] == 0 {
                    ready.push_back(pg);
                }
            }
        }
        if topo.len() != gates.len() {
            return Err(CircuitError::Cycle(find_cycle(&names, &gates, &net_ready)));
        }

        let mut gate_rank = vec![0u32; gates.len()];
        for (rank, g) in topo.iter().enumerate() {
            gate_rank[g.index()] = rank as u32;
        }
        let mut net_order = inputs.clone();
        net_order.extend(topo.iter().map(|g| gates[g.index()].output));

        let nets = names
            .into_iter()
            .zip(drivers)
            .map(|(name, d)| Net { name, driver: d.expect("every net driven (checked above)") })
            .collect::<Vec<_>>();
        // Nets that are neither read nor driven cannot exist: `net()` is only
        // called for names that get a driver or are read.
        Ok(Circuit { nets, gates, inputs, outputs, fanout, topo, gate_rank, net_order, by_name })
    }
}

/// Walks driver edges among the unresolved nets until a net repeats.
fn find_cycle(names: &[String], gates: &[Gate], net_ready: &[bool]) -> Vec<String> {
    let mut driver_of = vec![None; names.len()];
    for (gi, g) in gates.iter().enumerate() {
        driver_of[g.output.index()] = Some(gi);
    }
    let start = gates
        .iter()
        .map(|g| g.output)
        .find(|o| !net_ready[o.index()])
        .expect("some gate is unresolved");
    let mut seen_at: HashMap<NetId, usize> = HashMap::new();
    let mut path = Vec::new();
    let mut cur = start;
    loop {
        if let Some(&at) = seen_at.get(&cur) {
            let mut cycle: Vec<String> = path[at..].iter().map(|n: &NetId| names[n.index()].clone()).collect();
            cycle.push(names[cur.index()].clone());
            return cycle;
        }
        seen_at.insert(cur, path.len());
        path.push(cur);
        let g = driver_of[cur.index()].expect("unresolved net is gate-driven");
        cur = *gates[g]
            .fanins
            .iter()
            .find(|f| !net_ready[f.index()])
            .expect("unresolved gate has an unresolved fanin");
    }
}

/// Builds the in-memory graph. Rejects DFFs; apply [`cut_dffs`] first.
pub fn build_circuit(ast: &BenchAst) -> Result<Circuit, CircuitError> {
    let mut b = CircuitBuilder::new();
    for name in &ast.inputs {
        b.add_input(name)?;
    }
    for g in &ast.gates {
        if g.kind == GateKind::Dff {
            return Err(CircuitError::SequentialElement(g.target.clone()));
        }
        let out = b.net(&g.target);
        let fanins = g.fanins.iter().map(|f| b.net(f)).collect();
        b.add_gate(g.kind, fanins, out)?;
    }
    for o in &ast.outputs {
        let id = b.net(o);
        b.add_output(id);
    }
    b.finish()
}

/// Full-scan view: every `q = DFF(d)` becomes pseudo-input `q` and pseudo-output `d`.
///
/// Pseudo-inputs follow the original inputs and pseudo-outputs follow the
/// original outputs, both in flip-flop order.
pub fn cut_dffs(ast: &BenchAst) -> BenchAst {
    let mut out = ast.clone();
    out.gates.clear();
    let mut ppos = Vec::new();
    for g in &ast.gates {
        if g.kind == GateKind::Dff {
            out.inputs.push(g.target.clone());
            ppos.push(g.fanins[0].clone());
        } else {
            out.gates.push(g.clone());
        }
    }
    out.outputs.extend(ppos);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::parse_bench;

    const AND_OR: &str = "INPUT(x0)\nINPUT(x1)\nINPUT(x2)\nINPUT(x3)\nOUTPUT(y)\n\
                         a1 = AND(x0, x1)\na2 = AND(x2, x3)\ny = OR(a1, a2)\n";

    fn circuit(text: &str) -> Circuit {
        build_circuit(&parse_bench(text).unwrap()).unwrap()
    }

    /// y = x0 x1 + x2 x3, written out as a truth table.
    fn and_or_oracle(x: [bool; 4]) -> bool {
        (x[0] && x[1]) || (x[2] && x[3])
    }

    #[test]
    fn builds_two_level_circuit() {
        let c = circuit(AND_OR);
        assert_eq!(c.num_inputs(), 4);
        assert_eq!(c.num_outputs(), 1);
        assert_eq!(c.num_gates(), 3);
        let topo: Vec<&str> = c.topo_gates().iter().map(|&g| c.gate_name(g)).collect();
        assert_eq!(topo, vec!["a1", "a2", "y"]);
    }

    #[test]
    fn simulates_against_truth_table() {
        let c = circuit(AND_OR);
        for v in 0..16 {
            let p = Pattern::from_index(v, 4);
            let x = [p.0[0], p.0[1], p.0[2], p.0[3]];
            assert_eq!(c.simulate(&p).unwrap().0, vec![and_or_oracle(x)], "x={p}");
        }
        assert_eq!(c.simulate(&"1100".parse().unwrap()).unwrap().0, vec![true]);
        assert_eq!(c.simulate(&"0000".parse().unwrap()).unwrap().0, vec![false]);
    }

    #[test]
    fn xor_locked_variant_with_correct_key_matches() {
        // y' = (x0 x1 XOR k0) + (NOT(x2 x3) XOR k1), correct key k0 k1 = 01.
        let locked = circuit(
            "INPUT(x0)\nINPUT(x1)\nINPUT(x2)\nINPUT(x3)\nINPUT(k0)\nINPUT(k1)\nOUTPUT(y)\n\
             a1 = AND(x0, x1)\nn2 = NAND(x2, x3)\nl1 = XOR(a1, k0)\nl2 = XOR(n2, k1)\ny = OR(l1, l2)\n",
        );
        let orig = circuit(AND_OR);
        for v in 0..16 {
            let p = Pattern::from_index(v, 4);
            let mut with_key = p.0.clone();
            with_key.extend([false, true]);
            assert_eq!(locked.simulate(&Pattern(with_key)).unwrap(), orig.simulate(&p).unwrap());
        }
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let err = build_circuit(&parse_bench("INPUT(a)\nOUTPUT(y)\ny = BUF(y)").unwrap()).unwrap_err();
        assert_eq!(err, CircuitError::Cycle(vec!["y".into(), "y".into()]));
    }

    #[test]
    fn longer_cycle_names_its_nets() {
        let err = build_circuit(
            &parse_bench("INPUT(a)\nOUTPUT(y)\nn1 = AND(a, y)\nn2 = NOT(n1)\ny = BUF(n2)").unwrap(),
        )
        .unwrap_err();
        match err {
            CircuitError::Cycle(nets) => {
                assert_eq!(nets.first(), nets.last());
                for n in ["n1", "n2", "y"] {
                    assert!(nets.iter().any(|x| x == n), "{nets:?}");
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_output_is_rejected() {
        let err = build_circuit(&parse_bench("INPUT(a)\nOUTPUT(z)\ny = NOT(a)").unwrap()).unwrap_err();
        assert_eq!(err, CircuitError::DanglingOutput("z".into()));
    }

    #[test]
    fn chain_middle_net_has_single_consumer() {
        let c = circuit("INPUT(a)\nOUTPUT(y)\nm = NOT(a)\ny = NOT(m)");
        let m = c.find_net("m").unwrap();
        assert_eq!(c.fanout(m).len(), 1);
        assert_eq!(c.gate_name(c.fanout(m)[0].gate), "y");
    }

    #[test]
    fn width_mismatch() {
        let c = circuit(AND_OR);
        assert_eq!(
            c.simulate(&Pattern(vec![true; 3])).unwrap_err(),
            SimError::WidthMismatch { expected: 4, got: 3 }
        );
        assert!(c.simulate_packed(&[0; 5]).is_err());
    }

    #[test]
    fn dff_must_be_cut_first() {
        let ast = parse_bench("INPUT(a)\nOUTPUT(q)\nq = DFF(a)").unwrap();
        assert!(matches!(build_circuit(&ast), Err(CircuitError::SequentialElement(_))));
    }

    #[test]
    fn cut_without_dffs_is_identity() {
        let ast = parse_bench(AND_OR).unwrap();
        assert_eq!(cut_dffs(&ast), ast);
    }

    #[test]
    fn cut_single_dff() {
        let ast = parse_bench("INPUT(a)\nOUTPUT(y)\nd = NOT(a)\nq = DFF(d)\ny = AND(a, q)").unwrap();
        let cut = cut_dffs(&ast);
        assert_eq!(cut.inputs, vec!["a", "q"]);
        assert_eq!(cut.outputs, vec!["y", "d"]);
        assert!(cut.gates.iter().all(|g| g.kind != GateKind::Dff));
        build_circuit(&cut).unwrap();
    }

    /// Two flip-flops sharing one data net, shift-register style: one clock
    /// cycle of the sequential circuit equals one evaluation of the cut view.
    #[test]
    fn cut_shared_data_net_matches_one_clock_cycle() {
        let ast = parse_bench(
            "INPUT(a)\nOUTPUT(y)\nd = XOR(a, q1)\nq1 = DFF(d)\nq2 = DFF(d)\ny = AND(q1, q2)",
        )
        .unwrap();
        let cut = cut_dffs(&ast);
        assert_eq!(cut.outputs, vec!["y", "d", "d"]);
        let c = build_circuit(&cut).unwrap();
        for v in 0..8 {
            let p = Pattern::from_index(v, 3);
            let (a, q1, q2) = (p.0[0], p.0[1], p.0[2]);
            // Sequential semantics: output from current state, next state = d.
            let d = a ^ q1;
            let expected = vec![q1 && q2, d, d];
            assert_eq!(c.simulate(&p).unwrap().0, expected);
        }
    }

    #[test]
    fn packed_matches_scalar_on_all_lanes() {
        let c = circuit(AND_OR);
        let words = [0xDEAD_BEEF_0123_4567u64, 0x0F0F_F0F0_AAAA_5555, 0x1234_5678_9ABC_DEF0, !0x42];
        let out = c.simulate_packed(&words).unwrap();
        for lane in 0..64 {
            let p = Pattern(words.iter().map(|w| w >> lane & 1 == 1).collect());
            assert_eq!(c.simulate(&p).unwrap().0[0], out[0] >> lane & 1 == 1);
        }
        let same = c.simulate_packed(&[!0, !0, 0, 0]).unwrap();
        assert_eq!(same, vec![!0]);
    }

    #[test]
    fn edit_preserves_ids() {
        let c = circuit(AND_OR);
        let mut b = c.edit();
        let a1 = c.find_net("a1").unwrap();
        let (_, n) = b.add_fresh_gate(GateKind::Buf, vec![a1], "a1");
        assert_eq!(b.name(n), "a1_1");
        for p in c.fanout(a1) {
            b.set_fanin(*p, n);
        }
        let c2 = b.finish().unwrap();
        assert_eq!(c2.find_net("a1"), Some(a1));
        assert_eq!(c2.gate_name(GateId(2)), "y");
        for v in 0..16 {
            let p = Pattern::from_index(v, 4);
            assert_eq!(c.simulate(&p).unwrap(), c2.simulate(&p).unwrap());
        }
    }
}
