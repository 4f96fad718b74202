//! Oracle-guided SAT attack: miter, DIP loop, key recovery.

use std::path::PathBuf;
use std::time::Duration;

use lockatpg_sat::{
    AbortReason, Cdcl, CdclConfig, CnfFormula, ExternalSolver, Limits, Lit, Model, SatBackend, SatError,
    SolverVerdict, Var,
};

use crate::bench::GateKind;
use crate::circuit::{Circuit, NetId, OutputVector, Pattern};
use crate::encode::{encode_gate, encode_instance, encode_io_constraint, encode_sharing, EncodeError, VarMap};
use crate::lock::LockedCircuit;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SolverChoice {
    #[default]
    Builtin,
    /// DIMACS solver executable, invoked as `PROGRAM FILE`.
    External(PathBuf),
}

#[derive(Debug, Clone, Default)]
pub struct AttackConfig {
    pub seed: u64,
    /// Conflict budget for each solver call.
    pub conflict_limit: Option<u64>,
    /// Wall-clock budget for the whole attack.
    pub timeout: Option<Duration>,
    pub solver: SolverChoice,
    pub trace: bool,
    /// Keep the final formula (with the difference literal) for dumping.
    pub keep_formula: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum AttackError {
    #[error("oracle interface mismatch: {0}")]
    Interface(String),
    #[error(transparent)]
    Solver(#[from] SatError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("internal attack invariant violated: {0}")]
    Internal(String),
}

/// Two copies of a locked circuit sharing X, with disjoint keys. Logic outside
/// the fanout cone of the key inputs computes the same function in both
/// copies and is encoded once.
#[derive(Debug, Clone)]
pub struct MiterInstance {
    pub formula: CnfFormula,
    pub copy_a: VarMap,
    pub copy_b: VarMap,
    pub x: Vec<Var>,
    pub key_a: Vec<Var>,
    pub key_b: Vec<Var>,
    /// XOR of each output pair that depends on the key.
    pub output_diffs: Vec<Lit>,
    /// OR of `output_diffs`.
    pub diff: Lit,
}

/// Nets in the transitive fanout of the key inputs.
pub fn key_cone(lc: &LockedCircuit) -> Vec<bool> {
    let c = &lc.circuit;
    let mut in_cone = vec![false; c.num_nets()];
    for &k in lc.key_inputs() {
        in_cone[k.index()] = true;
    }
    for &g in c.topo_gates() {
        let gate = c.gate(g);
        if gate.fanins.iter().any(|n| in_cone[n.index()]) {
            in_cone[gate.output.index()] = true;
        }
    }
    in_cone
}

/// Implied clauses: when both copies receive the same key, every cone net
/// agrees. They hold in every model and only shorten refutations.
fn add_equal_key_implications(f: &mut CnfFormula, lc: &LockedCircuit, in_cone: &[bool], a: &VarMap, b: &VarMap) {
    let keys = lc.key_inputs();
    if keys.is_empty() {
        return;
    }
    let same = f.new_var().pos();
    let eq: Vec<Lit> = keys
        .iter()
        .map(|&k| {
            let e = f.new_var().pos();
            encode_gate(f, GateKind::Xnor, e, &[a.lit(k), b.lit(k)]);
            e
        })
        .collect();
    encode_gate(f, GateKind::And, same, &eq);
    for &g in lc.circuit.topo_gates() {
        let n = lc.circuit.gate(g).output;
        if in_cone[n.index()] {
            f.add_clause(&[!same, !a.lit(n), b.lit(n)]).expect("allocated");
            f.add_clause(&[!same, a.lit(n), !b.lit(n)]).expect("allocated");
        }
    }
}

pub fn build_miter(lc: &LockedCircuit) -> MiterInstance {
    let c = &lc.circuit;
    let mut f = CnfFormula::new();
    let copy_a = encode_instance(&mut f, c, &[]).expect("unbound instance");
    let in_cone = key_cone(lc);
    let shared: Vec<Option<Var>> =
        (0..c.num_nets()).map(|i| (!in_cone[i]).then(|| copy_a.var(NetId(i as u32)))).collect();
    let copy_b = encode_sharing(&mut f, c, &shared);
    let output_diffs: Vec<Lit> = c
        .outputs()
        .iter()
        .filter(|o| in_cone[o.index()])
        .map(|&o| {
            let t = f.new_var().pos();
            encode_gate(&mut f, GateKind::Xor, t, &[copy_a.lit(o), copy_b.lit(o)]);
            t
        })
        .collect();
    add_equal_key_implications(&mut f, lc, &in_cone, &copy_a, &copy_b);
    let diff = f.new_var().pos();
    if output_diffs.is_empty() {
        f.add_clause(&[!diff]).expect("diff is allocated");
    } else {
        encode_gate(&mut f, GateKind::Or, diff, &output_diffs);
    }
    MiterInstance {
        x: lc.functional_inputs().iter().map(|&n| copy_a.var(n)).collect(),
        key_a: lc.key_inputs().iter().map(|&n| copy_a.var(n)).collect(),
        key_b: lc.key_inputs().iter().map(|&n| copy_b.var(n)).collect(),
        formula: f,
        copy_a,
        copy_b,
        output_diffs,
        diff,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttackStatus {
    Solved,
    NoDipAtFirstQuery,
    Aborted(AbortReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub dip: Pattern,
    pub response: OutputVector,
    pub clauses: usize,
}

/// Key pair from the miter model that witnesses a DIP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DipWitness {
    pub key_a: Vec<bool>,
    pub key_b: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct AttackResult {
    /// Recovered key in key-bit order; `None` unless `Solved`.
    pub key: Option<Vec<bool>>,
    pub dips: Vec<Pattern>,
    pub responses: Vec<OutputVector>,
    pub witnesses: Vec<DipWitness>,
    /// Miter queries issued (difference literal asserted), the last one Unsat when solved.
    pub miter_queries: usize,
    pub status: AttackStatus,
    pub trace: Vec<TraceEntry>,
    pub clause_count: usize,
    pub formula: Option<CnfFormula>,
    pub diff: Lit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DipQuery {
    Found { dip: Pattern, witness: DipWitness },
    Exhausted,
    Aborted(AbortReason),
}

fn read_bits(m: &Model, vars: &[Var]) -> Vec<bool> {
    vars.iter().map(|&v| m.value(v)).collect()
}

/// Stepwise attack state; [`run_attack`] drives it to completion.
pub struct SatAttack<'a> {
    lc: &'a LockedCircuit,
    oracle: &'a Circuit,
    miter: MiterInstance,
    backend: Box<dyn SatBackend>,
    synced: usize,
    limits: Limits,
    k_ref: Vec<bool>,
}

impl<'a> SatAttack<'a> {
    pub fn new(lc: &'a LockedCircuit, oracle: &'a Circuit, cfg: &AttackConfig) -> Result<Self, AttackError> {
        if oracle.num_inputs() != lc.functional_pi_count {
            return Err(AttackError::Interface(format!(
                "oracle has {} inputs, locked circuit has {} functional inputs",
                oracle.num_inputs(),
                lc.functional_pi_count
            )));
        }
        if oracle.num_outputs() != lc.circuit.num_outputs() {
            return Err(AttackError::Interface(format!(
                "oracle has {} outputs, locked circuit has {}",
                oracle.num_outputs(),
                lc.circuit.num_outputs()
            )));
        }
        let backend: Box<dyn SatBackend> = match &cfg.solver {
            SolverChoice::Builtin => Box::new(Cdcl::new(CdclConfig { seed: cfg.seed, ..CdclConfig::default() })),
            SolverChoice::External(p) => Box::new(ExternalSolver::new(p)),
        };
        let mut attack = SatAttack {
            lc,
            oracle,
            miter: build_miter(lc),
            backend,
            synced: 0,
            limits: Limits::with_timeout(cfg.timeout, cfg.conflict_limit),
            k_ref: lc.k_ref(),
        };
        attack.sync();
        Ok(attack)
    }

    pub fn miter(&self) -> &MiterInstance {
        &self.miter
    }

    pub fn num_clauses(&self) -> usize {
        self.miter.formula.num_clauses()
    }

    fn sync(&mut self) {
        let f = &self.miter.formula;
        self.backend.ensure_vars(f.num_vars());
        for c in &f.clauses()[self.synced..] {
            self.backend.add_clause(c);
        }
        if f.has_empty_clause() {
            self.backend.add_clause(&[]);
        }
        self.synced = f.clauses().len();
    }

    fn hint_reference_key(&mut self) {
        for (&v, &b) in self.miter.key_a.iter().zip(&self.k_ref) {
            self.backend.set_phase(v, b);
        }
    }

    /// Queries `F ∧ d`.
    pub fn find_dip(&mut self) -> Result<DipQuery, AttackError> {
        self.hint_reference_key();
        match self.backend.solve(&[self.miter.diff], &self.limits)? {
            SolverVerdict::Sat(m) => Ok(DipQuery::Found {
                dip: Pattern(read_bits(&m, &self.miter.x)),
                witness: DipWitness { key_a: read_bits(&m, &self.miter.key_a), key_b: read_bits(&m, &self.miter.key_b) },
            }),
            SolverVerdict::Unsat => Ok(DipQuery::Exhausted),
            SolverVerdict::Aborted(r) => Ok(DipQuery::Aborted(r)),
        }
    }

    pub fn query_oracle(&self, dip: &Pattern) -> Result<OutputVector, AttackError> {
        self.oracle.simulate(dip).map_err(|e| AttackError::Interface(e.to_string()))
    }

    /// Constrains both key groups to reproduce `response` on `dip`.
    pub fn add_io_constraint(&mut self, dip: &Pattern, response: &OutputVector) -> Result<(), AttackError> {
        let fixed: Vec<Result<bool, Var>> = dip.bits().iter().map(|&b| Ok(b)).collect();
        for keys in [&self.miter.key_a, &self.miter.key_b] {
            let mut inputs = fixed.clone();
            inputs.extend(keys.iter().map(|&v| Err(v)));
            encode_io_constraint(&mut self.miter.formula, &self.lc.circuit, &inputs, response.bits())?;
        }
        self.sync();
        Ok(())
    }

    /// Whether `key` still satisfies every stored IO pair; `None` if the solver gave up.
    pub fn key_consistent(&mut self, key: &[bool]) -> Result<Option<bool>, AttackError> {
        Ok(match self.probe(key)? {
            SolverVerdict::Sat(_) => Some(true),
            SolverVerdict::Unsat => Some(false),
            SolverVerdict::Aborted(_) => None,
        })
    }

    fn probe(&mut self, key: &[bool]) -> Result<SolverVerdict, AttackError> {
        let assumptions: Vec<Lit> = self.miter.key_a.iter().zip(key).map(|(&v, &b)| v.lit(b)).collect();
        Ok(self.backend.solve(&assumptions, &self.limits)?)
    }

    /// Reads a key from a model of `F` alone. The reference key is tried
    /// first as assumptions; any other survivor is returned only if it was
    /// eliminated.
    pub fn recover_key(&mut self) -> Result<Result<Vec<bool>, AbortReason>, AttackError> {
        let k_ref = self.k_ref.clone();
        match self.probe(&k_ref)? {
            SolverVerdict::Sat(_) => return Ok(Ok(k_ref)),
            SolverVerdict::Unsat => {}
            SolverVerdict::Aborted(r) => return Ok(Err(r)),
        }
        self.hint_reference_key();
        match self.backend.solve(&[], &self.limits)? {
            SolverVerdict::Sat(m) => Ok(Ok(read_bits(&m, &self.miter.key_a))),
            SolverVerdict::Unsat => Err(AttackError::Internal("IO constraints admit no key".into())),
            SolverVerdict::Aborted(r) => Ok(Err(r)),
        }
    }
}

pub fn run_attack(lc: &LockedCircuit, oracle: &Circuit, cfg: &AttackConfig) -> Result<AttackResult, AttackError> {
    let mut attack = SatAttack::new(lc, oracle, cfg)?;
    let mut result = AttackResult {
        key: None,
        dips: Vec::new(),
        responses: Vec::new(),
        witnesses: Vec::new(),
        miter_queries: 0,
        status: AttackStatus::Solved,
        trace: Vec::new(),
        clause_count: 0,
        formula: None,
        diff: attack.miter.diff,
    };
    loop {
        result.miter_queries += 1;
        match attack.find_dip()? {
            DipQuery::Found { dip, witness } => {
                if result.dips.contains(&dip) {
                    return Err(AttackError::Internal(format!("DIP {dip} returned twice")));
                }
                let response = attack.query_oracle(&dip)?;
                attack.add_io_constraint(&dip, &response)?;
                if cfg.trace {
                    result.trace.push(TraceEntry {
                        iteration: result.miter_queries,
                        dip: dip.clone(),
                        response: response.clone(),
                        clauses: attack.num_clauses(),
                    });
                }
                result.dips.push(dip);
                result.responses.push(response);
                result.witnesses.push(witness);
            }
            DipQuery::Exhausted if result.dips.is_empty() => {
                result.status = AttackStatus::NoDipAtFirstQuery;
                break;
            }
            DipQuery::Exhausted => {
                match attack.recover_key()? {
                    Ok(k) => result.key = Some(k),
                    Err(r) => result.status = AttackStatus::Aborted(r),
                }
                break;
            }
            DipQuery::Aborted(r) => {
                result.status = AttackStatus::Aborted(r);
                break;
            }
        }
    }
    result.clause_count = attack.num_clauses();
    if cfg.keep_formula {
        result.formula = Some(attack.miter.formula.clone());
    }
    Ok(result)
}
