//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line, even on success.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{corpus, eval_with_fault, exhaustive_blocks, fanout7, load, oracle_all};
use lockatpg::attack::{run_attack, AttackConfig, AttackStatus};
use lockatpg::circuit::{Circuit, Pattern};
use lockatpg::driver::{approach1, approach2, run_atpg, ApproachResult, AtpgConfig, DriverConfig, Outcome};
use lockatpg::fault::{parse_fault_list, Fault};
use lockatpg::fault_sim::{detects, exhaustive_patterns, run_fault_sim};
use lockatpg::lock::{lock_fault, lock_fault_group, LockedCircuit};
use lockatpg_sat::gen::{pigeonhole, random_kcnf};
use lockatpg_sat::{Cdcl, CdclConfig, CnfFormula, Limits, Lit, SatBackend, SolverVerdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS_SIZE: usize = 60;

type Verdict = Result<String, String>;

struct Case {
    seed: u64,
    c: Circuit,
    faults: Vec<Fault>,
    detectable: Vec<bool>,
    a1: ApproachResult,
    a2: ApproachResult,
}

fn key_str(k: &[bool]) -> String {
    Pattern(k.to_vec()).to_string()
}

fn four_fault_key_recovery() -> Verdict {
    let start = Instant::now();
    let c = fanout7();
    let faults = parse_fault_list(&c, include_str!("data/fanout7.faults")).map_err(|e| e.to_string())?;
    let lc = lock_fault_group(&c, &faults).map_err(|e| e.to_string())?;
    let r = run_attack(&lc, &c, &AttackConfig::default()).map_err(|e| e.to_string())?;
    if r.status != AttackStatus::Solved {
        return Err(format!("status {:?}", r.status));
    }
    let key = r.key.clone().unwrap();
    if key_str(&key) != "1010" || lc.k_ref() != key {
        return Err(format!("key {} (k_ref {})", key_str(&key), key_str(&lc.k_ref())));
    }
    // The final miter query is the Unsat one.
    if r.miter_queries != r.dips.len() + 1 {
        return Err(format!("{} queries for {} DIPs", r.miter_queries, r.dips.len()));
    }
    let dips: Vec<String> = r.dips.iter().map(|d| d.to_string()).collect();
    let reference_pair = dips == ["1001100", "0001100"];
    if !reference_pair && dips.len() > 4 {
        return Err(format!("{} DIPs", dips.len()));
    }
    for k in 0..16u64 {
        let cand = Pattern::from_index(k, 4).0;
        if cand == key {
            continue;
        }
        let pruned = r.dips.iter().any(|d| lc.simulate_with_key(d, &cand).unwrap() != c.simulate(d).unwrap());
        if !pruned {
            return Err(format!("wrong key {} survives DIPs {dips:?}", key_str(&cand)));
        }
    }
    let a2 = approach2(&c, &faults, &DriverConfig::default()).map_err(|e| e.to_string())?;
    if a2.num_detected() != 4 || a2.patterns.len() != r.dips.len() {
        return Err(format!("grouped driver: {} detected, {} patterns", a2.num_detected(), a2.patterns.len()));
    }
    let t = start.elapsed();
    if t >= Duration::from_secs(1) {
        return Err(format!("took {t:?}"));
    }
    let which = if reference_pair { "the reference pair" } else { "a seed-dependent set" };
    Ok(format!("key 1010, DIPs {dips:?} ({which}) prune all 15 wrong keys, last query Unsat, {t:.2?}"))
}

fn build_cases() -> Result<(Vec<Case>, Duration), String> {
    let start = Instant::now();
    let cfg = DriverConfig::default();
    let mut out = Vec::new();
    for (seed, c) in corpus(CORPUS_SIZE) {
        let (faults, detectable) = oracle_all(&c);
        let a1 = approach1(&c, &faults, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        let a2 = approach2(&c, &faults, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        out.push(Case { seed, c, faults, detectable, a1, a2 });
    }
    Ok((out, start.elapsed()))
}

fn oracle_equivalence(cases: &[Case], elapsed: Duration) -> Verdict {
    let mut mismatches = Vec::new();
    let (mut det, mut red) = (0, 0);
    for case in cases {
        for (tag, r) in [("a1", &case.a1), ("a2", &case.a2)] {
            if r.verdicts.len() != case.faults.len() {
                mismatches.push(format!("seed {} {tag}: {} verdicts", case.seed, r.verdicts.len()));
                continue;
            }
            for (v, (&f, &d)) in r.verdicts.iter().zip(case.faults.iter().zip(&case.detectable)) {
                let ok = v.fault == f
                    && match v.outcome {
                        Outcome::Detected { .. } => d,
                        Outcome::Redundant(_) => !d,
                        Outcome::Aborted(_) => false,
                    };
                if !ok {
                    mismatches.push(format!("seed {} {tag}: {:?}", case.seed, v.outcome));
                }
            }
        }
        det += case.detectable.iter().filter(|&&d| d).count();
        red += case.detectable.iter().filter(|&&d| !d).count();
    }
    if !mismatches.is_empty() {
        return Err(format!("{} mismatches, first: {}", mismatches.len(), mismatches[0]));
    }
    if elapsed >= Duration::from_secs(300) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("{} circuits, {det} detectable + {red} redundant faults, both approaches agree, {elapsed:.2?}", cases.len()))
}

fn pattern_validity(cases: &[Case]) -> Verdict {
    let mut checked = 0;
    for case in cases {
        let all = exhaustive_patterns(case.c.num_inputs());
        for (tag, r) in [("a1", &case.a1), ("a2", &case.a2)] {
            let mut redundant = Vec::new();
            for v in &r.verdicts {
                match v.outcome {
                    Outcome::Detected { pattern } => {
                        if !detects(&case.c, v.fault, &r.patterns[pattern]).unwrap() {
                            return Err(format!("seed {} {tag}: pattern {pattern} misses its fault", case.seed));
                        }
                        checked += 1;
                    }
                    Outcome::Redundant(_) => redundant.push(v.fault),
                    Outcome::Aborted(_) => {}
                }
            }
            if !redundant.is_empty() {
                let rep = run_fault_sim(&case.c, &redundant, &all, true).unwrap();
                if rep.num_detected() > 0 {
                    return Err(format!("seed {} {tag}: {} redundant faults detected by replay", case.seed, rep.num_detected()));
                }
                checked += redundant.len();
            }
        }
    }
    Ok(format!("{checked} verdicts checked"))
}

/// Key bits whose fault some DIP detects must equal k_ref.
fn check_key(c: &Circuit, lc: &LockedCircuit, faults: &[Fault], seed: u64) -> Result<usize, String> {
    let r = run_attack(lc, c, &AttackConfig::default()).map_err(|e| e.to_string())?;
    if r.status != AttackStatus::Solved {
        return Ok(0);
    }
    let key = r.key.unwrap();
    let rep = run_fault_sim(c, faults, &r.dips, true).unwrap();
    let mut n = 0;
    for (i, d) in rep.first_detection.iter().enumerate() {
        if d.is_some() {
            if key[i] != lc.key_map[i].k_ref {
                return Err(format!("seed {seed}: key bit {i} is {} with k_ref {}", key[i], lc.key_map[i].k_ref));
            }
            n += 1;
        }
    }
    Ok(n)
}

fn key_reference_law(cases: &[Case]) -> Verdict {
    let mut bits = 0;
    for case in cases {
        for &f in &case.faults {
            bits += check_key(&case.c, &lock_fault(&case.c, f).unwrap(), &[f], case.seed)?;
        }
        for g in case.faults.chunks(64) {
            bits += check_key(&case.c, &lock_fault_group(&case.c, g).unwrap(), g, case.seed)?;
        }
    }
    let c = fanout7();
    let faults = parse_fault_list(&c, include_str!("data/fanout7.faults")).unwrap();
    bits += check_key(&c, &lock_fault_group(&c, &faults).unwrap(), &faults, 0)?;
    Ok(format!("{bits} DIP-supported key bits equal k_ref"))
}

fn pattern_reduction(cases: &[Case]) -> Verdict {
    let (mut eligible, mut le, mut strict) = (0, 0, 0);
    let mut worst = None;
    for case in cases {
        if case.detectable.iter().filter(|&&d| d).count() < 4 {
            continue;
        }
        eligible += 1;
        let (p1, p2) = (case.a1.patterns.len(), case.a2.patterns.len());
        if p2 <= p1 {
            le += 1;
        } else if worst.is_none() {
            worst = Some(format!("seed {}: {p2} grouped vs {p1} single", case.seed));
        }
        if p2 < p1 {
            strict += 1;
        }
    }
    let summary = format!("{eligible} circuits: |P_A2| <= |P_A1| on {le}, strictly fewer on {strict}");
    if eligible == 0 || le != eligible || strict * 2 < eligible {
        return Err(match worst {
            Some(w) => format!("{summary}; {w}"),
            None => summary,
        });
    }
    Ok(summary)
}

fn real_benches() -> Verdict {
    let start = Instant::now();
    let mut lines = Vec::new();
    for (name, text) in [
        ("b17_C", include_str!("data/b17_C.bench")),
        ("b20_C", include_str!("data/b20_C.bench")),
    ] {
        let c = load(text);
        let run = run_atpg(&c, None, &AtpgConfig::default()).map_err(|e| format!("{name}: {e}"))?;
        for (tag, r) in [("a1", &run.approach1), ("a2", &run.approach2)] {
            let (r, cov) = r.as_ref().unwrap();
            if cov.fc_t != 100.0 || cov.aborted != 0 || r.num_aborted() != 0 {
                return Err(format!("{name} {tag}: FC_T {:.2}, {} aborted", cov.fc_t, cov.aborted));
            }
            lines.push(format!(
                "{name} {tag}: TF {} prepass {} DF {} RF {}",
                cov.total, cov.prepass_detected, cov.detected, cov.redundant
            ));
        }
    }
    let t = start.elapsed();
    if t >= Duration::from_secs(600) {
        return Err(format!("took {t:?}"));
    }
    Ok(format!("{}; FC_T 100, 0 aborted, {t:.1?}", lines.join("; ")))
}

fn brute_force_sat(f: &CnfFormula, assumptions: &[Lit]) -> bool {
    (0u32..(1 << f.num_vars())).any(|bits| {
        let val = |l: Lit| l.eval(bits >> l.var().0 & 1 == 1);
        assumptions.iter().all(|&a| val(a)) && f.clauses().iter().all(|c| c.iter().any(|&l| val(l)))
    })
}

fn sat_backend() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut sat, mut unsat, mut deep) = (0, 0, 0);
    for i in 0..1000u64 {
        let n = rng.gen_range(1..=20);
        let k = rng.gen_range(1..=3.min(n));
        let ratio = rng.gen_range(1.0..6.0);
        let m = ((n as f64 * ratio) as usize).max(1);
        let f = random_kcnf(&mut rng, n, m, k);
        let assumptions: Vec<Lit> = (0..rng.gen_range(0..3))
            .map(|_| lockatpg_sat::Var(rng.gen_range(0..n as u32)).lit(rng.gen_bool(0.5)))
            .collect();
        let mut s = Cdcl::from_formula(&f, CdclConfig { seed: i, restart_base: 4, ..Default::default() });
        let expected = brute_force_sat(&f, &assumptions);
        match s.solve(&assumptions, &Limits::none()).unwrap() {
            SolverVerdict::Sat(m) if expected && m.satisfies(&f) && assumptions.iter().all(|&a| m.lit_value(a)) => sat += 1,
            SolverVerdict::Unsat if !expected => unsat += 1,
            v => return Err(format!("formula {i}: solver {v:?}, enumeration says sat={expected}")),
        }
        if s.stats().max_backjump >= 2 {
            deep += 1;
        }
    }
    let mut s = Cdcl::from_formula(&pigeonhole(7, 6), CdclConfig { restart_base: 10, ..Default::default() });
    if !s.solve(&[], &Limits::none()).unwrap().is_unsat() {
        return Err("pigeonhole 7/6 not Unsat".into());
    }
    let st = s.stats();
    if st.restarts == 0 || st.max_backjump < 2 {
        return Err(format!("regression run: {st:?}"));
    }
    Ok(format!(
        "1000 formulas agree ({sat} sat, {unsat} unsat, {deep} with backjumps >= 2); pigeonhole 7/6: {} restarts, max backjump {}",
        st.restarts, st.max_backjump
    ))
}

fn query_count(cases: &[Case]) -> Verdict {
    let (mut two, mut one) = (0, 0);
    for case in cases {
        for v in &case.a1.verdicts {
            match v.outcome {
                Outcome::Detected { .. } if v.queries == 2 => two += 1,
                Outcome::Redundant(_) if v.queries == 1 => one += 1,
                _ => return Err(format!("seed {}: {:?} after {} queries", case.seed, v.outcome, v.queries)),
            }
        }
    }
    Ok(format!("{two} detectable faults with 2 queries, {one} redundant with 1"))
}

/// Locked outputs under `key` equal the fault-free machine, or the machine
/// with `fault` injected, on every input.
fn matches_machine(c: &Circuit, lc: &LockedCircuit, key: &[bool], fault: Option<Fault>) -> bool {
    exhaustive_blocks(c.num_inputs()).iter().all(|(words, mask)| {
        let mut ins = words.clone();
        ins.extend(key.iter().map(|&b| if b { !0u64 } else { 0 }));
        let locked = lc.circuit.simulate_packed(&ins).unwrap();
        let expect = eval_with_fault(c, fault, words);
        locked.iter().zip(&expect).all(|(a, b)| (a ^ b) & mask == 0)
    })
}

fn transparency_law(cases: &[Case]) -> Verdict {
    let mut checks = 0;
    for case in cases {
        let c = &case.c;
        let mut locks: Vec<(LockedCircuit, Vec<Fault>)> = case
            .faults
            .iter()
            .map(|&f| (lock_fault(c, f).unwrap(), vec![f]))
            .collect();
        locks.push((lock_fault_group(c, &case.faults).unwrap(), case.faults.clone()));
        for (lc, faults) in &locks {
            let k_ref = lc.k_ref();
            if !matches_machine(c, lc, &k_ref, None) {
                return Err(format!("seed {}: correct key is not transparent", case.seed));
            }
            for (i, &f) in faults.iter().enumerate() {
                if !matches_machine(c, lc, &lc.faulty_key(i), Some(f)) {
                    return Err(format!("seed {}: flipping bit {i} differs from the injected fault", case.seed));
                }
                checks += 1;
            }
        }
    }
    Ok(format!("{checks} single-bit flips match injected faults; k_ref transparent"))
}

fn report(n: usize, name: &str, v: Verdict) -> bool {
    match v {
        Ok(detail) => {
            println!("criterion {n} {name}: PASS ({detail})");
            true
        }
        Err(why) => {
            println!("criterion {n} {name}: FAIL ({why})");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = report(1, "four-fault key recovery", four_fault_key_recovery());
    let built = build_cases();
    let on_corpus = |f: &dyn Fn(&[Case], Duration) -> Verdict| match &built {
        Ok((cases, elapsed)) => f(cases, *elapsed),
        Err(e) => Err(format!("corpus run failed: {e}")),
    };
    ok &= report(2, "oracle equivalence", on_corpus(&oracle_equivalence));
    ok &= report(3, "pattern validity", on_corpus(&|c, _| pattern_validity(c)));
    ok &= report(4, "key reference law", on_corpus(&|c, _| key_reference_law(c)));
    ok &= report(5, "pattern count reduction", on_corpus(&|c, _| pattern_reduction(c)));
    ok &= report(6, "real bench accounting", real_benches());
    ok &= report(7, "sat backend soundness", sat_backend());
    ok &= report(8, "single key query count", on_corpus(&|c, _| query_count(c)));
    ok &= report(9, "transparency law", on_corpus(&|c, _| transparency_law(c)));
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
