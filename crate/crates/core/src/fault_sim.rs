//! Bit-parallel stuck-at fault simulation with fault dropping.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::{Circuit, GateId, NetId, OutputVector, Pattern, SimError};
use crate::fault::{Fault, FaultSite};
use crate::lock::{lock_fault, LockError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FaultSimError {
    #[error(transparent)]
    Width(#[from] SimError),
    #[error(transparent)]
    Fault(#[from] LockError),
}

/// Scalar faulty-machine evaluation: the fault is locked in and its key bit
/// set to the faulty value.
pub fn simulate_fault(c: &Circuit, f: Fault, pattern: &Pattern) -> Result<OutputVector, FaultSimError> {
    let lc = lock_fault(c, f)?;
    Ok(lc.simulate_with_key(pattern, &lc.faulty_key(0))?)
}

pub fn detects(c: &Circuit, f: Fault, pattern: &Pattern) -> Result<bool, FaultSimError> {
    Ok(simulate_fault(c, f, pattern)? != c.simulate(pattern)?)
}

/// Every input assignment of `width` bits, in counting order.
pub fn exhaustive_patterns(width: usize) -> Vec<Pattern> {
    assert!(width < 32, "exhaustive enumeration of {width} inputs");
    (0..1u64 << width).map(|v| Pattern::from_index(v, width)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultSimReport {
    /// Index of the first detecting pattern, per fault.
    pub first_detection: Vec<Option<usize>>,
    /// Faults first detected by each pattern.
    pub newly_detected: Vec<Vec<usize>>,
    /// Every detecting pattern per fault; only without fault dropping.
    pub all_detections: Option<Vec<Vec<usize>>>,
}

impl FaultSimReport {
    pub fn num_detected(&self) -> usize {
        self.first_detection.iter().filter(|d| d.is_some()).count()
    }

    pub fn undetected(&self) -> Vec<usize> {
        (0..self.first_detection.len()).filter(|&i| self.first_detection[i].is_none()).collect()
    }
}

/// Good-machine values of one 64-pattern batch plus per-fault cone re-evaluation.
struct Batch<'a> {
    c: &'a Circuit,
    good: Vec<u64>,
    lanes: u64,
}

struct Scratch {
    values: Vec<u64>,
    dirty: Vec<usize>,
    queued: Vec<bool>,
    heap: BinaryHeap<Reverse<(u32, u32)>>,
}

impl<'a> Batch<'a> {
    fn new(c: &'a Circuit, patterns: &[Pattern]) -> Result<Self, SimError> {
        debug_assert!(patterns.len() <= 64);
        let mut words = vec![0u64; c.num_inputs()];
        for (lane, p) in patterns.iter().enumerate() {
            if p.width() != c.num_inputs() {
                return Err(SimError::WidthMismatch { expected: c.num_inputs(), got: p.width() });
            }
            for (w, &b) in words.iter_mut().zip(p.bits()) {
                *w |= (b as u64) << lane;
            }
        }
        let lanes = if patterns.len() == 64 { !0 } else { (1u64 << patterns.len()) - 1 };
        Ok(Batch { c, good: c.eval_nets_packed(&words)?, lanes })
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            values: self.good.clone(),
            dirty: Vec::new(),
            queued: vec![false; self.c.num_gates()],
            heap: BinaryHeap::new(),
        }
    }

    fn enqueue_readers(&self, s: &mut Scratch, net: usize) {
        for p in self.c.fanout(NetId(net as u32)) {
            let g = p.gate.index();
            if !s.queued[g] {
                s.queued[g] = true;
                s.heap.push(Reverse((self.c.gate_rank(p.gate), p.gate.0)));
            }
        }
    }

    fn set(&self, s: &mut Scratch, net: usize, value: u64) {
        s.values[net] = value;
        s.dirty.push(net);
        self.enqueue_readers(s, net);
    }

    fn eval(&self, s: &Scratch, g: GateId, forced_pin: Option<(usize, u64)>) -> u64 {
        let gate = self.c.gate(g);
        gate.kind.eval_word(gate.fanins.iter().enumerate().map(|(i, n)| match forced_pin {
            Some((pin, w)) if pin == i => w,
            _ => s.values[n.index()],
        }))
    }

    /// Lanes on which `f` flips at least one output.
    fn detect(&self, s: &mut Scratch, f: Fault) -> u64 {
        let stuck = if f.polarity.stuck_value() { !0 } else { 0 };
        match f.site {
            FaultSite::Stem(n) => {
                if (self.good[n.index()] ^ stuck) & self.lanes != 0 {
                    self.set(s, n.index(), stuck);
                }
            }
            FaultSite::Branch(p) => {
                let out = self.c.gate(p.gate).output.index();
                let v = self.eval(s, p.gate, Some((p.pin, stuck)));
                if (v ^ self.good[out]) & self.lanes != 0 {
                    self.set(s, out, v);
                }
            }
        }
        while let Some(Reverse((_, g))) = s.heap.pop() {
            let g = GateId(g);
            s.queued[g.index()] = false;
            let out = self.c.gate(g).output.index();
            let v = self.eval(s, g, None);
            if v != s.values[out] {
                self.set(s, out, v);
            }
        }
        let mut diff = 0;
        for o in self.c.outputs() {
            diff |= s.values[o.index()] ^ self.good[o.index()];
        }
        for &n in &s.dirty {
            s.values[n] = self.good[n];
        }
        s.dirty.clear();
        diff & self.lanes
    }
}

const FAULT_CHUNK: usize = 64;

/// Simulates every fault against every pattern, 64 patterns per pass.
pub fn run_fault_sim(
    c: &Circuit,
    faults: &[Fault],
    patterns: &[Pattern],
    drop_detected: bool,
) -> Result<FaultSimReport, SimError> {
    if let Some(p) = patterns.iter().find(|p| p.width() != c.num_inputs()) {
        return Err(SimError::WidthMismatch { expected: c.num_inputs(), got: p.width() });
    }
    let mut first_detection: Vec<Option<usize>> = vec![None; faults.len()];
    let mut all: Option<Vec<Vec<usize>>> = (!drop_detected).then(|| vec![Vec::new(); faults.len()]);
    for (bi, chunk) in patterns.chunks(64).enumerate() {
        let batch = Batch::new(c, chunk)?;
        let base = bi * 64;
        let active: Vec<usize> =
            (0..faults.len()).filter(|&i| !drop_detected || first_detection[i].is_none()).collect();
        if active.is_empty() {
            break;
        }
        let masks: Vec<(usize, u64)> = active
            .par_chunks(FAULT_CHUNK)
            .flat_map_iter(|ids| {
                let mut s = batch.scratch();
                ids.iter().map(|&i| (i, batch.detect(&mut s, faults[i]))).collect::<Vec<_>>()
            })
            .collect();
        for (i, mask) in masks {
            if mask == 0 {
                continue;
            }
            if first_detection[i].is_none() {
                first_detection[i] = Some(base + mask.trailing_zeros() as usize);
            }
            if let Some(all) = all.as_mut() {
                let mut m = mask;
                while m != 0 {
                    all[i].push(base + m.trailing_zeros() as usize);
                    m &= m - 1;
                }
            }
        }
    }
    let mut newly_detected = vec![Vec::new(); patterns.len()];
    for (i, d) in first_detection.iter().enumerate() {
        if let Some(p) = d {
            newly_detected[*p].push(i);
        }
    }
    Ok(FaultSimReport { first_detection, newly_detected, all_detections: all })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prepass {
    /// Pattern index in `patterns` per fault, `None` for residual faults.
    pub detected_by: Vec<Option<usize>>,
    /// Faults no random pattern detected, in input order.
    pub residual: Vec<Fault>,
    /// Random patterns that detected at least one new fault.
    pub patterns: Vec<Pattern>,
}

impl Prepass {
    pub fn num_detected(&self) -> usize {
        self.detected_by.iter().filter(|d| d.is_some()).count()
    }
}

pub fn random_patterns(width: usize, count: usize, seed: u64) -> Vec<Pattern> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| Pattern((0..width).map(|_| rng.gen()).collect())).collect()
}

/// Random-pattern fault simulation with dropping; keeps only useful patterns.
pub fn random_prepass(c: &Circuit, faults: &[Fault], budget: usize, seed: u64) -> Prepass {
    let candidates = random_patterns(c.num_inputs(), budget, seed);
    let report = run_fault_sim(c, faults, &candidates, true).expect("generated patterns have circuit width");
    let mut renumber = vec![None; candidates.len()];
    let mut patterns = Vec::new();
    for (p, newly) in report.newly_detected.iter().enumerate() {
        if !newly.is_empty() {
            renumber[p] = Some(patterns.len());
            patterns.push(candidates[p].clone());
        }
    }
    let detected_by: Vec<Option<usize>> =
        report.first_detection.iter().map(|d| d.and_then(|p| renumber[p])).collect();
    let residual = faults.iter().zip(&detected_by).filter(|(_, d)| d.is_none()).map(|(f, _)| *f).collect();
    Prepass { detected_by, residual, patterns }
}
