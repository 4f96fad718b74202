//! Conflict-driven clause learning solver.
//!
//! Two watched literals per clause, first-UIP learning with local
//! minimization, non-chronological backjumping, VSIDS decisions with phase
//! saving, Luby restarts and activity-based learnt clause deletion.
//! Assumptions are taken as the first decisions, so learnt clauses stay
//! implied by the clause database and can be kept across `solve` calls.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cnf::{CnfFormula, Model};
use crate::lit::{Lit, Var};
use crate::{AbortReason, Limits, SatBackend, SatError, SolverVerdict};

const UNDEF: u8 = 2;

type CRef = usize;

#[derive(Debug, Clone, Copy)]
pub struct CdclConfig {
    pub seed: u64,
    /// Conflicts in the first restart interval; later intervals follow the Luby sequence.
    pub restart_base: u64,
    pub var_decay: f64,
    pub clause_decay: f64,
    pub restarts: bool,
}

impl Default for CdclConfig {
    fn default() -> Self {
        CdclConfig {
            seed: 0,
            restart_base: 100,
            var_decay: 0.95,
            clause_decay: 0.999,
            restarts: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub solves: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub restarts: u64,
    pub learnt_clauses: u64,
    pub deleted_clauses: u64,
    /// Largest number of decision levels undone by a single backjump.
    pub max_backjump: u32,
}

struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

#[derive(Clone, Copy)]
struct Watcher {
    cref: CRef,
    blocker: Lit,
}

/// Max-heap of variables keyed by activity.
#[derive(Default)]
struct VarOrder {
    heap: Vec<u32>,
    pos: Vec<Option<usize>>,
}

impl VarOrder {
    fn grow(&mut self, n: usize) {
        if self.pos.len() < n {
            self.pos.resize(n, None);
        }
    }

    fn contains(&self, v: usize) -> bool {
        self.pos[v].is_some()
    }

    fn insert(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v as u32);
        let i = self.heap.len() - 1;
        self.pos[v] = Some(i);
        self.sift_up(i, act);
    }

    fn bumped(&mut self, v: usize, act: &[f64]) {
        if let Some(i) = self.pos[v] {
            self.sift_up(i, act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap.swap_remove(0) as usize;
        self.pos[top] = None;
        if !self.heap.is_empty() {
            self.pos[self.heap[0] as usize] = Some(0);
            self.sift_down(0, act);
        }
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.heap[parent];
            if act[p as usize] >= act[v as usize] {
                break;
            }
            self.heap[i] = p;
            self.pos[p as usize] = Some(i);
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v as usize] = Some(i);
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let child = if r < n && act[self.heap[r] as usize] > act[self.heap[l] as usize] {
                r
            } else {
                l
            };
            let c = self.heap[child];
            if act[c as usize] <= act[v as usize] {
                break;
            }
            self.heap[i] = c;
            self.pos[c as usize] = Some(i);
            i = child;
        }
        self.heap[i] = v;
        self.pos[v as usize] = Some(i);
    }
}

/// Luby sequence 1 1 2 1 1 2 4 1 1 2 1 1 2 4 8 ... (index from zero).
fn luby(mut i: u64) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < i + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != i {
        size = (size - 1) >> 1;
        seq -= 1;
        i %= size;
    }
    1u64 << seq
}

enum SearchOutcome {
    Sat,
    Unsat,
    Restart,
    Aborted(AbortReason),
}

pub struct Cdcl {
    config: CdclConfig,
    clauses: Vec<Clause>,
    learnts: Vec<CRef>,
    originals: Vec<Vec<Lit>>,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<Option<CRef>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f64,
    order: VarOrder,
    phase: Vec<bool>,
    seen: Vec<bool>,
    ok: bool,
    max_learnts: f64,
    rng: ChaCha8Rng,
    stats: Stats,
}

impl Default for Cdcl {
    fn default() -> Self {
        Cdcl::new(CdclConfig::default())
    }
}

impl Cdcl {
    pub fn new(config: CdclConfig) -> Self {
        Cdcl {
            config,
            clauses: Vec::new(),
            learnts: Vec::new(),
            originals: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: Vec::new(),
            var_inc: 1.0,
            cla_inc: 1.0,
            order: VarOrder::default(),
            phase: Vec::new(),
            seen: Vec::new(),
            ok: true,
            max_learnts: 0.0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            stats: Stats::default(),
        }
    }

    pub fn from_formula(f: &CnfFormula, config: CdclConfig) -> Self {
        let mut s = Cdcl::new(config);
        s.ensure_vars(f.num_vars());
        if f.has_empty_clause() {
            s.ok = false;
        }
        for c in f.clauses() {
            s.add_clause(c);
        }
        s
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    pub fn num_vars(&self) -> usize {
        self.assigns.len()
    }

    pub fn num_clauses(&self) -> usize {
        self.originals.len()
    }

    #[inline]
    fn lit_value(&self, l: Lit) -> u8 {
        let a = self.assigns[l.var().index()];
        if a == UNDEF {
            UNDEF
        } else {
            a ^ u8::from(!l.is_positive())
        }
    }

    #[inline]
    fn is_true(&self, l: Lit) -> bool {
        self.lit_value(l) == 1
    }

    #[inline]
    fn is_false(&self, l: Lit) -> bool {
        self.lit_value(l) == 0
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: Lit, reason: Option<CRef>) {
        let v = l.var().index();
        debug_assert_eq!(self.assigns[v], UNDEF);
        self.assigns[v] = u8::from(l.is_positive());
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn attach(&mut self, cref: CRef) {
        let c = &self.clauses[cref];
        let (a, b) = (c.lits[0], c.lits[1]);
        self.watches[(!a).code()].push(Watcher { cref, blocker: b });
        self.watches[(!b).code()].push(Watcher { cref, blocker: a });
    }

    fn propagate(&mut self) -> Option<CRef> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[p.code()]);
            let mut i = 0;
            let mut j = 0;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.is_true(w.blocker) {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref;
                if self.clauses[cref].deleted {
                    continue;
                }
                {
                    let lits = &mut self.clauses[cref].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.clauses[cref].lits[0];
                let nw = Watcher { cref, blocker: first };
                if first != w.blocker && self.is_true(first) {
                    ws[j] = nw;
                    j += 1;
                    continue;
                }
                let len = self.clauses[cref].lits.len();
                let mut moved = false;
                for k in 2..len {
                    let lk = self.clauses[cref].lits[k];
                    if !self.is_false(lk) {
                        let lits = &mut self.clauses[cref].lits;
                        lits.swap(1, k);
                        self.watches[(!lk).code()].push(nw);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = nw;
                j += 1;
                if self.is_false(first) {
                    conflict = Some(cref);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(cref));
                }
            }
            ws.truncate(j);
            self.watches[p.code()] = ws;
            if conflict.is_some() {
                break;
            }
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.order.bumped(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: CRef) {
        let c = &mut self.clauses[cref];
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &r in &self.learnts {
                self.clauses[r].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP analysis. Returns the learnt clause (asserting literal first,
    /// highest remaining level second) and the backjump level.
    fn analyze(&mut self, mut confl: CRef) -> (Vec<Lit>, u32) {
        let mut learnt = vec![Lit::new(Var(0), true)];
        let mut path = 0usize;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        let current = self.decision_level();
        loop {
            if self.clauses[confl].learnt {
                self.bump_clause(confl);
            }
            let start = usize::from(p.is_some());
            let len = self.clauses[confl].lits.len();
            for k in start..len {
                let q = self.clauses[confl].lits[k];
                let v = q.var().index();
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = true;
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().index()] {
                    break;
                }
            }
            let pl = self.trail[index];
            p = Some(pl);
            self.seen[pl.var().index()] = false;
            path -= 1;
            if path == 0 {
                break;
            }
            confl = self.reason[pl.var().index()].expect("implied literal has a reason");
        }
        learnt[0] = !p.expect("conflict analysis visits at least one literal");

        // Local minimization: drop literals implied by other learnt literals.
        let mut keep = vec![learnt[0]];
        for &l in &learnt[1..] {
            let v = l.var().index();
            let redundant = match self.reason[v] {
                None => false,
                Some(r) => self.clauses[r].lits[1..].iter().all(|q| {
                    let qv = q.var().index();
                    self.seen[qv] || self.level[qv] == 0
                }),
            };
            if !redundant {
                keep.push(l);
            }
        }
        for &l in &learnt {
            self.seen[l.var().index()] = false;
        }
        let mut learnt = keep;

        let bt = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var().index()] > self.level[learnt[max_i].var().index()] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.level[learnt[1].var().index()]
        };
        (learnt, bt)
    }

    fn cancel_until(&mut self, lvl: u32) {
        if self.decision_level() <= lvl {
            return;
        }
        let lim = self.trail_lim[lvl as usize];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var().index();
            self.phase[v] = l.is_positive();
            self.assigns[v] = UNDEF;
            self.reason[v] = None;
            self.order.insert(v, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(lvl as usize);
        self.qhead = lim;
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.order.pop(&self.activity) {
            if self.assigns[v] == UNDEF {
                return Some(Var(v as u32).lit(self.phase[v]));
            }
        }
        None
    }

    fn locked(&self, cref: CRef) -> bool {
        let l = self.clauses[cref].lits[0];
        let v = l.var().index();
        self.is_true(l) && self.reason[v] == Some(cref)
    }

    fn reduce_db(&mut self) {
        let mut cands: Vec<CRef> = self.learnts.clone();
        cands.sort_by(|&a, &b| {
            self.clauses[a]
                .activity
                .partial_cmp(&self.clauses[b].activity)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let half = cands.len() / 2;
        let mut kept = Vec::with_capacity(cands.len());
        for (i, &cref) in cands.iter().enumerate() {
            let c = &self.clauses[cref];
            if i < half && c.lits.len() > 2 && !self.locked(cref) {
                let c = &mut self.clauses[cref];
                c.deleted = true;
                c.lits = Vec::new();
                self.stats.deleted_clauses += 1;
            } else {
                kept.push(cref);
            }
        }
        self.learnts = kept;
        // Purge watchers of deleted clauses so watch lists do not grow unbounded.
        let clauses = &self.clauses;
        for ws in &mut self.watches {
            ws.retain(|w| !clauses[w.cref].deleted);
        }
    }

    fn search(
        &mut self,
        conflicts_allowed: Option<u64>,
        assumptions: &[Lit],
        limits: &Limits,
        start_conflicts: u64,
    ) -> SearchOutcome {
        let mut local_conflicts = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                local_conflicts += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return SearchOutcome::Unsat;
                }
                let (learnt, bt) = self.analyze(confl);
                let jump = self.decision_level() - bt;
                self.stats.max_backjump = self.stats.max_backjump.max(jump);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let cref = self.clauses.len();
                    self.clauses.push(Clause {
                        lits: learnt,
                        learnt: true,
                        deleted: false,
                        activity: 0.0,
                    });
                    self.learnts.push(cref);
                    self.attach(cref);
                    self.bump_clause(cref);
                    let first = self.clauses[cref].lits[0];
                    self.enqueue(first, Some(cref));
                    self.stats.learnt_clauses += 1;
                }
                self.var_inc /= self.config.var_decay;
                self.cla_inc /= self.config.clause_decay;

                if let Some(max) = limits.conflicts {
                    if self.stats.conflicts - start_conflicts >= max {
                        return SearchOutcome::Aborted(AbortReason::ConflictLimit);
                    }
                }
                if let Some(deadline) = limits.deadline {
                    if Instant::now() >= deadline {
                        return SearchOutcome::Aborted(AbortReason::Timeout);
                    }
                }
            } else {
                if let Some(n) = conflicts_allowed {
                    if local_conflicts >= n {
                        self.cancel_until(0);
                        return SearchOutcome::Restart;
                    }
                }
                if self.learnts.len() as f64 - self.trail.len() as f64 >= self.max_learnts {
                    self.reduce_db();
                }

                let mut next = None;
                while (self.decision_level() as usize) < assumptions.len() {
                    let a = assumptions[self.decision_level() as usize];
                    match self.lit_value(a) {
                        1 => self.trail_lim.push(self.trail.len()),
                        0 => return SearchOutcome::Unsat,
                        _ => {
                            next = Some(a);
                            break;
                        }
                    }
                }
                let next = match next {
                    Some(a) => a,
                    None => {
                        self.stats.decisions += 1;
                        if self.stats.decisions.is_multiple_of(1024) {
                            if let Some(deadline) = limits.deadline {
                                if Instant::now() >= deadline {
                                    return SearchOutcome::Aborted(AbortReason::Timeout);
                                }
                            }
                        }
                        match self.pick_branch() {
                            Some(l) => l,
                            None => return SearchOutcome::Sat,
                        }
                    }
                };
                self.trail_lim.push(self.trail.len());
                self.enqueue(next, None);
            }
        }
    }

    fn extract_model(&self) -> Model {
        Model::new(self.assigns.iter().map(|&a| a == 1).collect())
    }

    fn check_model(&self, model: &Model, assumptions: &[Lit]) -> bool {
        self.originals.iter().all(|c| model.satisfies_clause(c))
            && assumptions.iter().all(|&a| model.lit_value(a))
    }
}

impl SatBackend for Cdcl {
    fn ensure_vars(&mut self, n: usize) {
        let old = self.assigns.len();
        if n <= old {
            return;
        }
        self.assigns.resize(n, UNDEF);
        self.level.resize(n, 0);
        self.reason.resize(n, None);
        self.phase.resize(n, false);
        self.seen.resize(n, false);
        self.watches.resize_with(2 * n, Vec::new);
        self.order.grow(n);
        for _ in old..n {
            let jitter: f64 = self.rng.gen::<f64>() * 1e-6;
            self.activity.push(jitter);
        }
        for v in old..n {
            self.order.insert(v, &self.activity);
        }
    }

    fn add_clause(&mut self, clause: &[Lit]) {
        debug_assert_eq!(self.decision_level(), 0);
        if let Some(max) = clause.iter().map(|l| l.var().index() + 1).max() {
            self.ensure_vars(max);
        }
        self.originals.push(clause.to_vec());
        if !self.ok {
            return;
        }
        let mut lits = clause.to_vec();
        lits.sort();
        lits.dedup();
        let mut simplified = Vec::with_capacity(lits.len());
        for (i, &l) in lits.iter().enumerate() {
            if i + 1 < lits.len() && lits[i + 1] == !l {
                return; // tautology
            }
            match self.lit_value(l) {
                1 => return,
                0 => {}
                _ => simplified.push(l),
            }
        }
        match simplified.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(simplified[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                let cref = self.clauses.len();
                self.clauses.push(Clause {
                    lits: simplified,
                    learnt: false,
                    deleted: false,
                    activity: 0.0,
                });
                self.attach(cref);
            }
        }
    }

    fn set_phase(&mut self, var: Var, value: bool) {
        self.ensure_vars(var.index() + 1);
        self.phase[var.index()] = value;
    }

    fn solve(&mut self, assumptions: &[Lit], limits: &Limits) -> Result<SolverVerdict, SatError> {
        self.stats.solves += 1;
        if let Some(max) = assumptions.iter().map(|l| l.var().index() + 1).max() {
            self.ensure_vars(max);
        }
        if !self.ok {
            return Ok(SolverVerdict::Unsat);
        }
        self.max_learnts = (self.originals.len() as f64 / 3.0).max(2000.0);
        let start_conflicts = self.stats.conflicts;
        let mut round = 0u64;
        let outcome = loop {
            let budget = self.config.restarts.then(|| luby(round) * self.config.restart_base);
            match self.search(budget, assumptions, limits, start_conflicts) {
                SearchOutcome::Restart => {
                    self.stats.restarts += 1;
                    round += 1;
                    self.max_learnts *= 1.05;
                }
                other => break other,
            }
        };
        let verdict = match outcome {
            SearchOutcome::Sat => {
                let model = self.extract_model();
                debug_assert!(self.check_model(&model, assumptions), "CDCL produced a non-model");
                SolverVerdict::Sat(model)
            }
            SearchOutcome::Unsat => SolverVerdict::Unsat,
            SearchOutcome::Aborted(r) => SolverVerdict::Aborted(r),
            SearchOutcome::Restart => unreachable!(),
        };
        self.cancel_until(0);
        Ok(verdict)
    }
}
