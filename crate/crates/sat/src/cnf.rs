use std::fmt::Write as _;
use std::io::{self, Write};

use crate::lit::{Lit, Var};
use crate::CnfError;

/// A CNF formula with a fresh-variable allocator.
///
/// An empty clause is never stored; adding one latches the formula as
/// trivially unsatisfiable, which every backend reports as `Unsat`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Vec<Lit>>,
    has_empty_clause: bool,
}

impl CnfFormula {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn new_var(&mut self) -> Var {
        let v = Var(self.num_vars as u32);
        self.num_vars += 1;
        v
    }

    pub fn new_vars(&mut self, n: usize) -> Vec<Var> {
        (0..n).map(|_| self.new_var()).collect()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len() + usize::from(self.has_empty_clause)
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    pub fn has_empty_clause(&self) -> bool {
        self.has_empty_clause
    }

    pub fn add_clause(&mut self, clause: &[Lit]) -> Result<(), CnfError> {
        if let Some(bad) = clause.iter().find(|l| l.var().index() >= self.num_vars) {
            return Err(CnfError::LiteralOutOfRange {
                lit: bad.to_dimacs(),
                num_vars: self.num_vars,
            });
        }
        if clause.is_empty() {
            self.has_empty_clause = true;
        } else {
            self.clauses.push(clause.to_vec());
        }
        Ok(())
    }

    pub fn add_clauses<'a, I>(&mut self, clauses: I) -> Result<(), CnfError>
    where
        I: IntoIterator<Item = &'a [Lit]>,
    {
        for c in clauses {
            self.add_clause(c)?;
        }
        Ok(())
    }

    /// Appends every clause of `other`, growing the variable range if needed.
    pub fn extend_from(&mut self, other: &CnfFormula) {
        self.num_vars = self.num_vars.max(other.num_vars);
        self.clauses.extend(other.clauses.iter().cloned());
        self.has_empty_clause |= other.has_empty_clause;
    }

    /// Writes `p cnf V C` followed by one zero-terminated clause per line.
    pub fn write_dimacs<W: Write>(&self, w: &mut W) -> io::Result<()> {
        self.write_dimacs_with_units(w, &[])
    }

    /// Like [`write_dimacs`](Self::write_dimacs) with extra unit clauses appended.
    pub fn write_dimacs_with_units<W: Write>(&self, w: &mut W, units: &[Lit]) -> io::Result<()> {
        writeln!(w, "p cnf {} {}", self.num_vars, self.num_clauses() + units.len())?;
        let mut line = String::new();
        for c in &self.clauses {
            line.clear();
            for l in c {
                let _ = write!(line, "{} ", l.to_dimacs());
            }
            line.push('0');
            writeln!(w, "{line}")?;
        }
        if self.has_empty_clause {
            writeln!(w, "0")?;
        }
        for u in units {
            writeln!(w, "{} 0", u.to_dimacs())?;
        }
        Ok(())
    }

    pub fn to_dimacs_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_dimacs(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("DIMACS output is ASCII")
    }

    /// Parses DIMACS CNF. Comment lines (`c ...`) are skipped; clauses may span lines.
    pub fn parse_dimacs(text: &str) -> Result<CnfFormula, CnfError> {
        let mut f = CnfFormula::new();
        let mut declared: Option<(usize, usize)> = None;
        let mut current = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if line.starts_with('p') {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 4 || parts[1] != "cnf" {
                    return Err(CnfError::Dimacs { line: lineno + 1, msg: "malformed header".into() });
                }
                let v = parts[2].parse().map_err(|_| CnfError::Dimacs {
                    line: lineno + 1,
                    msg: "bad variable count".into(),
                })?;
                let c = parts[3].parse().map_err(|_| CnfError::Dimacs {
                    line: lineno + 1,
                    msg: "bad clause count".into(),
                })?;
                f.num_vars = v;
                declared = Some((v, c));
                continue;
            }
            if declared.is_none() {
                return Err(CnfError::Dimacs { line: lineno + 1, msg: "clause before header".into() });
            }
            for tok in line.split_whitespace() {
                let x: i64 = tok.parse().map_err(|_| CnfError::Dimacs {
                    line: lineno + 1,
                    msg: format!("bad literal `{tok}`"),
                })?;
                match Lit::from_dimacs(x) {
                    None => {
                        f.add_clause(&current)?;
                        current.clear();
                    }
                    Some(l) => current.push(l),
                }
            }
        }
        if !current.is_empty() {
            f.add_clause(&current)?;
        }
        Ok(f)
    }
}

/// A total assignment over the variables of a formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model(Vec<bool>);

impl Model {
    pub fn new(values: Vec<bool>) -> Self {
        Model(values)
    }

    pub fn value(&self, v: Var) -> bool {
        self.0[v.index()]
    }

    pub fn lit_value(&self, l: Lit) -> bool {
        l.eval(self.0[l.var().index()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[bool] {
        &self.0
    }

    pub fn satisfies_clause(&self, clause: &[Lit]) -> bool {
        clause.iter().any(|&l| l.var().index() < self.0.len() && self.lit_value(l))
    }

    /// True iff every clause of `f` has a true literal.
    pub fn satisfies(&self, f: &CnfFormula) -> bool {
        !f.has_empty_clause() && f.clauses().iter().all(|c| self.satisfies_clause(c))
    }
}
