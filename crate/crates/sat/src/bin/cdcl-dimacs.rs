//! Standalone DIMACS front end for the built-in CDCL solver.
//!
//! Usage: `cdcl-dimacs FILE.cnf [SEED]`. Prints `s ...` / `v ...` lines and
//! exits 10 (SAT) or 20 (UNSAT), like competition solvers.

use std::process::ExitCode;

use lockatpg_sat::{Cdcl, CdclConfig, CnfFormula, Limits, SatBackend, SolverVerdict};

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let Some(path) = args.next() else {
        eprintln!("usage: cdcl-dimacs FILE.cnf [SEED]");
        return ExitCode::from(1);
    };
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{path}: {e}");
            return ExitCode::from(1);
        }
    };
    let f = match CnfFormula::parse_dimacs(&text) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{path}: {e}");
            return ExitCode::from(1);
        }
    };
    let mut s = Cdcl::from_formula(&f, CdclConfig { seed, ..Default::default() });
    match s.solve(&[], &Limits::none()).expect("no I/O in the built-in solver") {
        SolverVerdict::Sat(m) => {
            println!("s SATISFIABLE");
            let lits: Vec<String> = m
                .values()
                .iter()
                .enumerate()
                .map(|(i, &b)| if b { format!("{}", i + 1) } else { format!("-{}", i + 1) })
                .collect();
            println!("v {} 0", lits.join(" "));
            ExitCode::from(10)
        }
        SolverVerdict::Unsat => {
            println!("s UNSATISFIABLE");
            ExitCode::from(20)
        }
        SolverVerdict::Aborted(_) => {
            println!("s UNKNOWN");
            ExitCode::from(0)
        }
    }
}
