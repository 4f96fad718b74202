//! Test generation driver: per-fault attacks (approach 1), grouped attacks
//! with fault-simulation classification (approach 2), and coverage.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use lockatpg_sat::AbortReason;
use rayon::prelude::*;

use crate::attack::{run_attack, AttackConfig, AttackError, AttackResult, AttackStatus, TraceEntry};
use crate::circuit::{Circuit, Pattern};
use crate::fault::{enumerate_faults, fault_name, Fault};
use crate::fault_sim::{detects, random_prepass, run_fault_sim, Prepass};
use crate::lock::{lock_fault, lock_fault_group, LockError, LockedCircuit};

pub const DEFAULT_GROUP_SIZE: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error(transparent)]
    Lock(#[from] LockError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("attack on `{fault}` found a DIP but recovered key {key} instead of {k_ref}")]
    KeyMismatch { fault: String, key: String, k_ref: String },
    #[error("pattern {pattern} reported for `{fault}` does not detect it")]
    InvalidPattern { fault: String, pattern: String },
    #[error("fault `{0}` is counted more than once")]
    DoubleCount(String),
    #[error("fault `{0}` has no verdict")]
    Missing(String),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evidence {
    FirstQueryUnsat,
    FaultSimResidueWithSolvedKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Index into the approach's pattern list.
    Detected { pattern: usize },
    Redundant(Evidence),
    Aborted(AbortReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub fault: Fault,
    pub outcome: Outcome,
    /// Miter queries of the attack that settled this fault.
    pub queries: usize,
    /// Group index for grouped attacks.
    pub group: Option<usize>,
    /// Settled by the per-fault retry after an aborted attack.
    pub retried: bool,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackTrace {
    pub label: String,
    pub entries: Vec<TraceEntry>,
}

#[derive(Debug, Clone, Default)]
pub struct ApproachResult {
    /// One verdict per input fault, in input order.
    pub verdicts: Vec<Verdict>,
    pub patterns: Vec<Pattern>,
    pub traces: Vec<AttackTrace>,
}

impl ApproachResult {
    fn count(&self, pred: impl Fn(&Outcome) -> bool) -> usize {
        self.verdicts.iter().filter(|v| pred(&v.outcome)).count()
    }

    pub fn num_detected(&self) -> usize {
        self.count(|o| matches!(o, Outcome::Detected { .. }))
    }

    pub fn num_redundant(&self) -> usize {
        self.count(|o| matches!(o, Outcome::Redundant(_)))
    }

    pub fn num_aborted(&self) -> usize {
        self.count(|o| matches!(o, Outcome::Aborted(_)))
    }

    pub fn redundant_faults(&self) -> Vec<Fault> {
        self.verdicts.iter().filter(|v| matches!(v.outcome, Outcome::Redundant(_))).map(|v| v.fault).collect()
    }

    pub fn detected_faults(&self) -> Vec<Fault> {
        self.verdicts.iter().filter(|v| matches!(v.outcome, Outcome::Detected { .. })).map(|v| v.fault).collect()
    }
}

#[derive(Debug, Clone)]
pub struct DriverConfig {
    pub attack: AttackConfig,
    pub group_size: usize,
    /// Re-run aborted faults alone with twice the budget.
    pub retry_aborted: bool,
    /// Write each attack's final formula, difference literal asserted, here.
    pub dump_dir: Option<PathBuf>,
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig { attack: AttackConfig::default(), group_size: DEFAULT_GROUP_SIZE, retry_aborted: true, dump_dir: None }
    }
}

fn bits(key: &[bool]) -> String {
    Pattern(key.to_vec()).to_string()
}

fn doubled(cfg: &AttackConfig) -> AttackConfig {
    AttackConfig {
        conflict_limit: cfg.conflict_limit.map(|n| n.saturating_mul(2)),
        timeout: cfg.timeout.map(|t| t * 2),
        ..cfg.clone()
    }
}

fn attack(lc: &LockedCircuit, oracle: &Circuit, cfg: &DriverConfig, attack_cfg: &AttackConfig, label: &str) -> Result<AttackResult, DriverError> {
    let mut ac = attack_cfg.clone();
    ac.keep_formula = cfg.dump_dir.is_some();
    let mut r = run_attack(lc, oracle, &ac)?;
    if let (Some(dir), Some(f)) = (&cfg.dump_dir, r.formula.take()) {
        let path = dir.join(format!("{label}.cnf"));
        let mut out = Vec::new();
        f.write_dimacs_with_units(&mut out, &[r.diff]).expect("writing to memory");
        fs::write(&path, out).map_err(|source| DriverError::Io { path, source })?;
    }
    Ok(r)
}

struct Single {
    verdict: Verdict,
    pattern: Option<Pattern>,
    trace: Option<AttackTrace>,
}

fn settle_single(c: &Circuit, f: Fault, cfg: &DriverConfig, label: String) -> Result<Single, DriverError> {
    let start = Instant::now();
    let lc = lock_fault(c, f)?;
    let mut r = attack(&lc, c, cfg, &cfg.attack, &label)?;
    let mut retried = false;
    if matches!(r.status, AttackStatus::Aborted(_)) && cfg.retry_aborted {
        r = attack(&lc, c, cfg, &doubled(&cfg.attack), &format!("{label}_retry"))?;
        retried = true;
    }
    let mut pattern = None;
    let outcome = match r.status {
        AttackStatus::NoDipAtFirstQuery => Outcome::Redundant(Evidence::FirstQueryUnsat),
        AttackStatus::Aborted(reason) => Outcome::Aborted(reason),
        AttackStatus::Solved => {
            let key = r.key.clone().expect("solved attack has a key");
            if key != lc.k_ref() {
                return Err(DriverError::KeyMismatch { fault: fault_name(c, &f), key: bits(&key), k_ref: bits(&lc.k_ref()) });
            }
            let dip = r.dips[0].clone();
            if !detects(c, f, &dip).expect("DIP has oracle width") {
                return Err(DriverError::InvalidPattern { fault: fault_name(c, &f), pattern: dip.to_string() });
            }
            pattern = Some(dip);
            Outcome::Detected { pattern: usize::MAX }
        }
    };
    let trace = cfg.attack.trace.then_some(AttackTrace { label, entries: r.trace });
    Ok(Single {
        verdict: Verdict { fault: f, outcome, queries: r.miter_queries, group: None, retried, elapsed: start.elapsed() },
        pattern,
        trace,
    })
}

/// One attack per fault over a single-key locked circuit.
pub fn approach1(c: &Circuit, faults: &[Fault], cfg: &DriverConfig) -> Result<ApproachResult, DriverError> {
    let singles: Vec<Single> = faults
        .par_iter()
        .enumerate()
        .map(|(i, &f)| settle_single(c, f, cfg, format!("a1_f{i}")))
        .collect::<Result<_, _>>()?;
    let mut out = ApproachResult::default();
    for s in singles {
        let mut v = s.verdict;
        if let Some(p) = s.pattern {
            v.outcome = Outcome::Detected { pattern: out.patterns.len() };
            out.patterns.push(p);
        }
        out.verdicts.push(v);
        out.traces.extend(s.trace);
    }
    Ok(out)
}

struct GroupOutcome {
    verdicts: Vec<Verdict>,
    /// Local pattern indices refer to `dips`, then to retry patterns.
    dips: Vec<Pattern>,
    traces: Vec<AttackTrace>,
}

fn settle_group(c: &Circuit, group: &[Fault], gi: usize, cfg: &DriverConfig) -> Result<GroupOutcome, DriverError> {
    let start = Instant::now();
    let label = format!("a2_g{gi}");
    let lc = lock_fault_group(c, group)?;
    let r = attack(&lc, c, cfg, &cfg.attack, &label)?;
    let mut traces = Vec::new();
    if cfg.attack.trace {
        traces.push(AttackTrace { label: label.clone(), entries: r.trace.clone() });
    }
    let verdict = |f: Fault, outcome: Outcome| Verdict {
        fault: f,
        outcome,
        queries: r.miter_queries,
        group: Some(gi),
        retried: false,
        elapsed: start.elapsed(),
    };
    match r.status {
        AttackStatus::NoDipAtFirstQuery => Ok(GroupOutcome {
            verdicts: group.iter().map(|&f| verdict(f, Outcome::Redundant(Evidence::FirstQueryUnsat))).collect(),
            dips: Vec::new(),
            traces,
        }),
        AttackStatus::Solved => {
            let key = r.key.clone().expect("solved attack has a key");
            let report = run_fault_sim(c, group, &r.dips, true).expect("DIPs have oracle width");
            let mut verdicts = Vec::with_capacity(group.len());
            for (i, &f) in group.iter().enumerate() {
                let outcome = match report.first_detection[i] {
                    Some(p) => {
                        if key[i] != lc.key_map[i].k_ref {
                            return Err(DriverError::KeyMismatch {
                                fault: fault_name(c, &f),
                                key: bits(&key),
                                k_ref: bits(&lc.k_ref()),
                            });
                        }
                        Outcome::Detected { pattern: p }
                    }
                    None => Outcome::Redundant(Evidence::FaultSimResidueWithSolvedKey),
                };
                verdicts.push(verdict(f, outcome));
            }
            Ok(GroupOutcome { verdicts, dips: r.dips, traces })
        }
        AttackStatus::Aborted(reason) => {
            let mut dips = Vec::new();
            let mut verdicts = Vec::with_capacity(group.len());
            for (i, &f) in group.iter().enumerate() {
                if !cfg.retry_aborted {
                    verdicts.push(verdict(f, Outcome::Aborted(reason)));
                    continue;
                }
                let retry_cfg = DriverConfig { attack: doubled(&cfg.attack), retry_aborted: false, ..cfg.clone() };
                let s = settle_single(c, f, &retry_cfg, format!("{label}_retry_f{i}"))?;
                let mut v = s.verdict;
                v.group = Some(gi);
                v.retried = true;
                if let Some(p) = s.pattern {
                    v.outcome = Outcome::Detected { pattern: dips.len() };
                    dips.push(p);
                }
                verdicts.push(v);
                traces.extend(s.trace);
            }
            Ok(GroupOutcome { verdicts, dips, traces })
        }
    }
}

/// Grouped attacks over `group_size`-key locked circuits; DIPs classify the
/// group by fault simulation.
pub fn approach2(c: &Circuit, faults: &[Fault], cfg: &DriverConfig) -> Result<ApproachResult, DriverError> {
    let size = cfg.group_size.max(1);
    let groups: Vec<GroupOutcome> = faults
        .par_chunks(size)
        .enumerate()
        .map(|(gi, g)| settle_group(c, g, gi, cfg))
        .collect::<Result<_, _>>()?;
    let mut out = ApproachResult::default();
    for g in groups {
        let base = out.patterns.len();
        for mut v in g.verdicts {
            if let Outcome::Detected { pattern } = &mut v.outcome {
                *pattern += base;
            }
            out.verdicts.push(v);
        }
        out.patterns.extend(g.dips);
        out.traces.extend(g.traces);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageReport {
    pub total: usize,
    pub prepass_detected: usize,
    pub detected: usize,
    pub redundant: usize,
    pub aborted: usize,
    pub fc_t: f64,
}

/// Checks that `universe` is partitioned by prepass detections and verdicts.
pub fn compute_coverage(
    c: &Circuit,
    universe: &[Fault],
    prepass: &Prepass,
    verdicts: &[Verdict],
) -> Result<CoverageReport, DriverError> {
    let mut count: HashMap<Fault, usize> = universe.iter().map(|&f| (f, 0)).collect();
    let mut bump = |f: Fault| -> Result<(), DriverError> {
        let n = count.get_mut(&f).ok_or_else(|| DriverError::DoubleCount(fault_name(c, &f)))?;
        *n += 1;
        if *n > 1 {
            return Err(DriverError::DoubleCount(fault_name(c, &f)));
        }
        Ok(())
    };
    let mut prepass_detected = 0;
    for (f, d) in universe.iter().zip(&prepass.detected_by) {
        if d.is_some() {
            bump(*f)?;
            prepass_detected += 1;
        }
    }
    let (mut detected, mut redundant, mut aborted) = (0, 0, 0);
    for v in verdicts {
        bump(v.fault)?;
        match v.outcome {
            Outcome::Detected { .. } => detected += 1,
            Outcome::Redundant(_) => redundant += 1,
            Outcome::Aborted(_) => aborted += 1,
        }
    }
    if let Some(f) = universe.iter().find(|f| count[f] == 0) {
        return Err(DriverError::Missing(fault_name(c, f)));
    }
    let total = universe.len();
    let fc_t = if total == 0 { 100.0 } else { (prepass_detected + detected + redundant) as f64 * 100.0 / total as f64 };
    Ok(CoverageReport { total, prepass_detected, detected, redundant, aborted, fc_t })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproachChoice {
    One,
    Two,
    Both,
}

#[derive(Debug, Clone)]
pub struct AtpgConfig {
    pub approach: ApproachChoice,
    pub prepass_budget: usize,
    pub seed: u64,
    pub driver: DriverConfig,
}

impl Default for AtpgConfig {
    fn default() -> Self {
        AtpgConfig { approach: ApproachChoice::Both, prepass_budget: 1024, seed: 0, driver: DriverConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct AtpgRun {
    pub universe: Vec<Fault>,
    pub prepass: Prepass,
    pub approach1: Option<(ApproachResult, CoverageReport)>,
    pub approach2: Option<(ApproachResult, CoverageReport)>,
}

impl AtpgRun {
    pub fn num_aborted(&self) -> usize {
        [&self.approach1, &self.approach2].iter().filter_map(|a| a.as_ref()).map(|(r, _)| r.num_aborted()).sum()
    }

    /// Prepass patterns followed by the grouped patterns, or the per-fault
    /// ones when only approach 1 ran.
    pub fn final_patterns(&self) -> Vec<Pattern> {
        let mut out = self.prepass.patterns.clone();
        if let Some((r, _)) = self.approach2.as_ref().or(self.approach1.as_ref()) {
            out.extend(r.patterns.iter().cloned());
        }
        out
    }
}

/// Prepass, then the selected approaches over the residual faults.
/// `faults = None` targets every enumerated fault.
pub fn run_atpg(c: &Circuit, faults: Option<Vec<Fault>>, cfg: &AtpgConfig) -> Result<AtpgRun, DriverError> {
    let universe = faults.unwrap_or_else(|| enumerate_faults(c));
    let prepass = random_prepass(c, &universe, cfg.prepass_budget, cfg.seed);
    let mut driver = cfg.driver.clone();
    driver.attack.seed = cfg.seed;
    let run = |which: ApproachChoice| -> Result<Option<(ApproachResult, CoverageReport)>, DriverError> {
        let wanted = cfg.approach == ApproachChoice::Both || cfg.approach == which;
        if !wanted {
            return Ok(None);
        }
        let r = match which {
            ApproachChoice::One => approach1(c, &prepass.residual, &driver)?,
            _ => approach2(c, &prepass.residual, &driver)?,
        };
        let cov = compute_coverage(c, &universe, &prepass, &r.verdicts)?;
        Ok(Some((r, cov)))
    };
    let approach1 = run(ApproachChoice::One)?;
    let approach2 = run(ApproachChoice::Two)?;
    Ok(AtpgRun { universe, prepass, approach1, approach2 })
}
