//! SAT machinery: CNF formulas with DIMACS I/O, a built-in CDCL solver,
//! and an adapter that drives an external DIMACS solver process.
//!
//! Both solvers sit behind [`SatBackend`], an incremental interface
//! (clauses only grow, assumptions are per call).

mod cdcl;
mod cnf;
mod external;
pub mod gen;
mod lit;

use std::time::{Duration, Instant};

pub use cdcl::{Cdcl, CdclConfig, Stats};
pub use cnf::{CnfFormula, Model};
pub use external::ExternalSolver;
pub use lit::{Lit, Var};

#[derive(Debug, thiserror::Error)]
pub enum CnfError {
    #[error("literal {lit} out of range: formula has {num_vars} variables")]
    LiteralOutOfRange { lit: i64, num_vars: usize },
    #[error("DIMACS line {line}: {msg}")]
    Dimacs { line: usize, msg: String },
}

#[derive(Debug, thiserror::Error)]
pub enum SatError {
    #[error("external solver I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("external solver protocol: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortReason {
    ConflictLimit,
    Timeout,
}

impl std::fmt::Display for AbortReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AbortReason::ConflictLimit => f.write_str("conflict limit"),
            AbortReason::Timeout => f.write_str("timeout"),
        }
    }
}

/// Outcome of one `solve` call. `Aborted` is never a disguised `Unsat`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverVerdict {
    Sat(Model),
    Unsat,
    Aborted(AbortReason),
}

impl SolverVerdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolverVerdict::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SolverVerdict::Unsat)
    }
}

/// Resource limits for a single `solve` call.
#[derive(Debug, Clone, Copy, Default)]
pub struct Limits {
    pub conflicts: Option<u64>,
    pub deadline: Option<Instant>,
}

impl Limits {
    pub fn none() -> Self {
        Limits::default()
    }

    pub fn with_timeout(timeout: Option<Duration>, conflicts: Option<u64>) -> Self {
        Limits {
            conflicts,
            deadline: timeout.map(|t| Instant::now() + t),
        }
    }
}

/// Incremental SAT interface shared by the built-in and external solvers.
pub trait SatBackend: Send {
    fn ensure_vars(&mut self, n: usize);

    /// Adds a clause permanently. Variables are allocated on demand.
    fn add_clause(&mut self, clause: &[Lit]);

    /// Advisory initial polarity for `var`; never affects correctness.
    fn set_phase(&mut self, var: Var, value: bool);

    fn solve(&mut self, assumptions: &[Lit], limits: &Limits) -> Result<SolverVerdict, SatError>;

    fn add_formula(&mut self, f: &CnfFormula) {
        self.ensure_vars(f.num_vars());
        if f.has_empty_clause() {
            self.add_clause(&[]);
        }
        for c in f.clauses() {
            self.add_clause(c);
        }
    }
}

/// One-shot solve of `f` with the built-in solver.
pub fn solve(f: &CnfFormula, assumptions: &[Lit], limits: &Limits) -> SolverVerdict {
    let mut s = Cdcl::from_formula(f, CdclConfig::default());
    s.solve(assumptions, limits).expect("built-in solver performs no I/O")
}
