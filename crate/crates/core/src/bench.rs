//! Reader and writer for the `.bench` netlist format.
//!
//! ```text
//! # comment
//! INPUT(a)
//! OUTPUT(y)
//! y = NAND(a, b)
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
    Dff,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUF",
            GateKind::Dff => "DFF",
        }
    }

    /// Case-insensitive; `BUFF` is accepted as an alias of `BUF`.
    pub fn from_name(s: &str) -> Option<GateKind> {
        Some(match s.to_ascii_uppercase().as_str() {
            "AND" => GateKind::And,
            "NAND" => GateKind::Nand,
            "OR" => GateKind::Or,
            "NOR" => GateKind::Nor,
            "XOR" => GateKind::Xor,
            "XNOR" => GateKind::Xnor,
            "NOT" | "INV" => GateKind::Not,
            "BUF" | "BUFF" => GateKind::Buf,
            "DFF" => GateKind::Dff,
            _ => return None,
        })
    }

    pub fn arity_ok(self, n: usize) -> bool {
        match self {
            GateKind::Not | GateKind::Buf | GateKind::Dff => n == 1,
            _ => n >= 2,
        }
    }

    pub fn eval<I: IntoIterator<Item = bool>>(self, inputs: I) -> bool {
        let mut it = inputs.into_iter();
        let first = it.next().expect("gate has at least one fanin");
        match self {
            GateKind::And => it.fold(first, |a, b| a & b),
            GateKind::Nand => !it.fold(first, |a, b| a & b),
            GateKind::Or => it.fold(first, |a, b| a | b),
            GateKind::Nor => !it.fold(first, |a, b| a | b),
            GateKind::Xor => it.fold(first, |a, b| a ^ b),
            GateKind::Xnor => !it.fold(first, |a, b| a ^ b),
            GateKind::Not => !first,
            GateKind::Buf | GateKind::Dff => first,
        }
    }

    /// Bit-parallel evaluation, one pattern per bit lane.
    pub fn eval_word<I: IntoIterator<Item = u64>>(self, inputs: I) -> u64 {
        let mut it = inputs.into_iter();
        let first = it.next().expect("gate has at least one fanin");
        match self {
            GateKind::And => it.fold(first, |a, b| a & b),
            GateKind::Nand => !it.fold(first, |a, b| a & b),
            GateKind::Or => it.fold(first, |a, b| a | b),
            GateKind::Nor => !it.fold(first, |a, b| a | b),
            GateKind::Xor => it.fold(first, |a, b| a ^ b),
            GateKind::Xnor => !it.fold(first, |a, b| a ^ b),
            GateKind::Not => !first,
            GateKind::Buf | GateKind::Dff => first,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One `target = KIND(fanins...)` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateDef {
    pub target: String,
    pub kind: GateKind,
    pub fanins: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BenchAst {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub gates: Vec<GateDef>,
    /// Full-line comments, text after the `#`, in file order.
    pub comments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BenchError {
    #[error("line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("line {line}: net `{net}` has more than one driver")]
    DuplicateDriver { net: String, line: usize },
    #[error("line {line}: net `{net}` is read but never declared or driven")]
    UndeclaredFanin { net: String, line: usize },
    #[error("line {line}, column {column}: unknown gate kind `{kind}` driving `{net}`")]
    UnknownGate { kind: String, net: String, line: usize, column: usize },
    #[error("line {line}: {kind} gate driving `{net}` has {got} fanins")]
    Arity { net: String, kind: GateKind, got: usize, line: usize },
    #[error("circuit has no primary inputs")]
    NoInputs,
    #[error("circuit has no primary outputs")]
    NoOutputs,
    #[error("invalid net name `{0}`")]
    InvalidName(String),
}

pub fn is_valid_net_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '[' | ']' | '.'))
}

struct LineParser<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> LineParser<'a> {
    fn column(&self) -> usize {
        self.text[..self.pos].chars().count() + 1
    }

    fn err(&self, msg: impl Into<String>) -> BenchError {
        BenchError::Syntax { line: self.line, column: self.column(), msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.text[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn expect(&mut self, ch: char) -> Result<(), BenchError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == ch => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(self.err(format!("expected `{ch}`, found `{c}`"))),
            None => Err(self.err(format!("expected `{ch}`, found end of line"))),
        }
    }

    fn ident(&mut self) -> Result<(&'a str, usize), BenchError> {
        self.skip_ws();
        let start = self.pos;
        let col = self.column();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || matches!(c, '_' | '[' | ']' | '.') {
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(match self.peek() {
                Some(c) => self.err(format!("expected a net name, found `{c}`")),
                None => self.err("expected a net name, found end of line"),
            });
        }
        Ok((&self.text[start..self.pos], col))
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.text.len()
    }
}

/// Parses `.bench` text. `\n` and `\r\n` line endings are both accepted.
pub fn parse_bench(text: &str) -> Result<BenchAst, BenchError> {
    let mut ast = BenchAst::default();
    // net name -> line of its driver (INPUT or assignment)
    let mut drivers: HashMap<String, usize> = HashMap::new();
    let mut uses: Vec<(String, usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let trimmed = line.trim_start();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            ast.comments.push(comment.to_string());
            continue;
        }
        let mut p = LineParser { text: line, pos: 0, line: line_no };
        let (word, _) = p.ident()?;
        p.skip_ws();
        let upper = word.to_ascii_uppercase();
        if (upper == "INPUT" || upper == "OUTPUT") && p.peek() == Some('(') {
            p.expect('(')?;
            let (name, _) = p.ident()?;
            p.expect(')')?;
            if !p.at_end() {
                return Err(p.err("unexpected text after declaration"));
            }
            if upper == "INPUT" {
                if drivers.insert(name.to_string(), line_no).is_some() {
                    return Err(BenchError::DuplicateDriver { net: name.to_string(), line: line_no });
                }
                ast.inputs.push(name.to_string());
            } else {
                ast.outputs.push(name.to_string());
            }
            continue;
        }
        let target = word;
        p.expect('=')?;
        let (kind_name, kind_col) = p.ident()?;
        let kind = GateKind::from_name(kind_name).ok_or_else(|| BenchError::UnknownGate {
            kind: kind_name.to_string(),
            net: target.to_string(),
            line: line_no,
            column: kind_col,
        })?;
        p.expect('(')?;
        let mut fanins = Vec::new();
        p.skip_ws();
        if p.peek() != Some(')') {
            loop {
                let (name, _) = p.ident()?;
                fanins.push(name.to_string());
                p.skip_ws();
                match p.peek() {
                    Some(',') => p.pos += 1,
                    Some(')') => break,
                    Some(c) => return Err(p.err(format!("expected `,` or `)`, found `{c}`"))),
                    None => return Err(p.err("unterminated fanin list")),
                }
            }
        }
        p.expect(')')?;
        if !p.at_end() {
            return Err(p.err("unexpected text after gate definition"));
        }
        if !kind.arity_ok(fanins.len()) {
            return Err(BenchError::Arity { net: target.to_string(), kind, got: fanins.len(), line: line_no });
        }
        if drivers.insert(target.to_string(), line_no).is_some() {
            return Err(BenchError::DuplicateDriver { net: target.to_string(), line: line_no });
        }
        for f in &fanins {
            uses.push((f.clone(), line_no));
        }
        ast.gates.push(GateDef { target: target.to_string(), kind, fanins });
    }

    for (net, line) in uses {
        if !drivers.contains_key(&net) {
            return Err(BenchError::UndeclaredFanin { net, line });
        }
    }
    Ok(ast)
}

impl BenchAst {
    /// Checks the structural invariants `parse_bench` guarantees.
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.inputs.is_empty() {
            return Err(BenchError::NoInputs);
        }
        if self.outputs.is_empty() {
            return Err(BenchError::NoOutputs);
        }
        let mut driven = HashSet::new();
        for (i, name) in self.inputs.iter().enumerate() {
            if !is_valid_net_name(name) {
                return Err(BenchError::InvalidName(name.clone()));
            }
            if !driven.insert(name.as_str()) {
                return Err(BenchError::DuplicateDriver { net: name.clone(), line: i + 1 });
            }
        }
        for (i, g) in self.gates.iter().enumerate() {
            if !is_valid_net_name(&g.target) {
                return Err(BenchError::InvalidName(g.target.clone()));
            }
            if !g.kind.arity_ok(g.fanins.len()) {
                return Err(BenchError::Arity { net: g.target.clone(), kind: g.kind, got: g.fanins.len(), line: i + 1 });
            }
            if !driven.insert(g.target.as_str()) {
                return Err(BenchError::DuplicateDriver { net: g.target.clone(), line: i + 1 });
            }
        }
        for (i, g) in self.gates.iter().enumerate() {
            if let Some(f) = g.fanins.iter().find(|f| !driven.contains(f.as_str())) {
                return Err(BenchError::UndeclaredFanin { net: f.clone(), line: i + 1 });
            }
        }
        for o in &self.outputs {
            if !is_valid_net_name(o) {
                return Err(BenchError::InvalidName(o.clone()));
            }
        }
        Ok(())
    }
}

/// Serializes `ast`. Comments come first, then declarations, then gates.
pub fn write_bench(ast: &BenchAst) -> Result<String, BenchError> {
    ast.validate()?;
    let mut out = String::new();
    for c in &ast.comments {
        out.push('#');
        out.push_str(c);
        out.push('\n');
    }
    for i in &ast.inputs {
        out.push_str(&format!("INPUT({i})\n"));
    }
    for o in &ast.outputs {
        out.push_str(&format!("OUTPUT({o})\n"));
    }
    out.push('\n');
    for g in &ast.gates {
        out.push_str(&format!("{} = {}({})\n", g.target, g.kind, g.fanins.join(", ")));
    }
    Ok(out)
}
