use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::cnf::{CnfFormula, Model};
use crate::lit::{Lit, Var};
use crate::{AbortReason, Limits, SatBackend, SatError, SolverVerdict};

/// Runs an external solver as `program [args..] FILE.cnf` on every `solve`.
///
/// The accumulated formula plus the assumptions (as unit clauses) is written
/// to a temporary DIMACS file. Output must follow the competition format:
/// an `s SATISFIABLE` / `s UNSATISFIABLE` line and `v` lines with the model.
/// Phase hints are ignored. Conflict limits cannot be forwarded; only the
/// deadline is enforced, by killing the process.
pub struct ExternalSolver {
    program: PathBuf,
    args: Vec<String>,
    formula: CnfFormula,
}

impl ExternalSolver {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        ExternalSolver {
            program: program.into(),
            args: Vec::new(),
            formula: CnfFormula::new(),
        }
    }

    pub fn with_args(mut self, args: Vec<String>) -> Self {
        self.args = args;
        self
    }

    pub fn formula(&self) -> &CnfFormula {
        &self.formula
    }
}

fn parse_output(out: &str, num_vars: usize) -> Result<Option<Model>, SatError> {
    let mut status = None;
    let mut values = vec![false; num_vars];
    for line in out.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("s ") {
            status = Some(rest.trim().to_string());
        } else if let Some(rest) = line.strip_prefix("v ") {
            for tok in rest.split_whitespace() {
                let x: i64 = tok
                    .parse()
                    .map_err(|_| SatError::Protocol(format!("bad model literal `{tok}`")))?;
                if let Some(l) = Lit::from_dimacs(x) {
                    if l.var().index() < num_vars {
                        values[l.var().index()] = l.is_positive();
                    }
                }
            }
        }
    }
    match status.as_deref() {
        Some("SATISFIABLE") => Ok(Some(Model::new(values))),
        Some("UNSATISFIABLE") => Ok(None),
        Some(other) => Err(SatError::Protocol(format!("solver reported `{other}`"))),
        None => Err(SatError::Protocol("no `s` status line in solver output".into())),
    }
}

impl SatBackend for ExternalSolver {
    fn ensure_vars(&mut self, n: usize) {
        while self.formula.num_vars() < n {
            self.formula.new_var();
        }
    }

    fn add_clause(&mut self, clause: &[Lit]) {
        if let Some(max) = clause.iter().map(|l| l.var().index() + 1).max() {
            self.ensure_vars(max);
        }
        self.formula.add_clause(clause).expect("variables ensured above");
    }

    fn set_phase(&mut self, _var: Var, _value: bool) {}

    fn solve(&mut self, assumptions: &[Lit], limits: &Limits) -> Result<SolverVerdict, SatError> {
        if let Some(max) = assumptions.iter().map(|l| l.var().index() + 1).max() {
            self.ensure_vars(max);
        }
        let mut file = tempfile::Builder::new().suffix(".cnf").tempfile()?;
        {
            let mut w = std::io::BufWriter::new(file.as_file_mut());
            self.formula.write_dimacs_with_units(&mut w, assumptions)?;
            w.flush()?;
        }
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .arg(file.path())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let mut stdout = child.stdout.take().expect("stdout is piped");
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            stdout.read_to_string(&mut s).map(|_| s)
        });
        loop {
            if child.try_wait()?.is_some() {
                break;
            }
            if let Some(deadline) = limits.deadline {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    let _ = reader.join();
                    return Ok(SolverVerdict::Aborted(AbortReason::Timeout));
                }
            }
            std::thread::sleep(Duration::from_millis(2));
        }
        let out = reader
            .join()
            .map_err(|_| SatError::Protocol("stdout reader panicked".into()))??;
        match parse_output(&out, self.formula.num_vars())? {
            None => Ok(SolverVerdict::Unsat),
            Some(model) => {
                let ok = model.satisfies(&self.formula) && assumptions.iter().all(|&a| model.lit_value(a));
                if ok {
                    Ok(SolverVerdict::Sat(model))
                } else {
                    Err(SatError::Protocol("solver model violates the formula".into()))
                }
            }
        }
    }
}
