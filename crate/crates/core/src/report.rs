//! Pattern files and deterministic text reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::circuit::{Circuit, Pattern};
use crate::driver::{ApproachChoice, ApproachResult, AtpgConfig, AtpgRun, CoverageReport, Evidence, Outcome, Verdict};
use crate::fault::{fault_name, Fault};
use crate::fault_sim::FaultSimReport;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatternFileError {
    #[error("line {line}: pattern width {got} does not match the bench's {expected} primary inputs")]
    Width { line: usize, expected: usize, got: usize },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

/// `#` header naming the bench and input order, then one `0/1` line per pattern.
pub fn write_patterns(bench: &str, c: &Circuit, patterns: &[Pattern]) -> String {
    let mut s = String::new();
    writeln!(s, "# bench: {bench}").unwrap();
    let names: Vec<&str> = c.inputs().iter().map(|&n| c.net_name(n)).collect();
    writeln!(s, "# inputs: {}", names.join(" ")).unwrap();
    writeln!(s, "# patterns: {}", patterns.len()).unwrap();
    for p in patterns {
        writeln!(s, "{p}").unwrap();
    }
    s
}

pub fn parse_patterns(text: &str, width: usize) -> Result<Vec<Pattern>, PatternFileError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let p: Pattern = line.parse().map_err(|msg| PatternFileError::Syntax { line: i + 1, msg })?;
        if p.width() != width {
            return Err(PatternFileError::Width { line: i + 1, expected: width, got: p.width() });
        }
        out.push(p);
    }
    Ok(out)
}

type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn render(sections: &Sections) -> String {
    let mut s = String::new();
    for (i, (name, entries)) in sections.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        writeln!(s, "[{name}]").unwrap();
        for (k, v) in entries {
            writeln!(s, "{k} = {v}").unwrap();
        }
    }
    s
}

fn approach_name(a: ApproachChoice) -> &'static str {
    match a {
        ApproachChoice::One => "1",
        ApproachChoice::Two => "2",
        ApproachChoice::Both => "both",
    }
}

fn coverage_section(r: &ApproachResult, cov: &CoverageReport) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("tf".into(), cov.total.to_string()),
        ("prepass_detected".into(), cov.prepass_detected.to_string()),
        ("df_p".into(), cov.detected.to_string()),
        ("rf_p".into(), cov.redundant.to_string()),
        ("aborted".into(), cov.aborted.to_string()),
        ("fc_t".into(), format!("{:.2}", cov.fc_t)),
        ("patterns".into(), r.patterns.len().to_string()),
    ])
}

fn describe(v: &Verdict, timing: bool) -> String {
    let mut s = match v.outcome {
        Outcome::Detected { pattern } => format!("detected pattern={pattern}"),
        Outcome::Redundant(Evidence::FirstQueryUnsat) => "redundant evidence=first-query-unsat".into(),
        Outcome::Redundant(Evidence::FaultSimResidueWithSolvedKey) => "redundant evidence=fault-sim-residue".into(),
        Outcome::Aborted(reason) => format!("aborted reason={}", reason.to_string().replace(' ', "-")),
    };
    write!(s, " queries={}", v.queries).unwrap();
    if let Some(g) = v.group {
        write!(s, " group={g}").unwrap();
    }
    if v.retried {
        s.push_str(" retried");
    }
    if timing {
        write!(s, " time_ms={:.3}", v.elapsed.as_secs_f64() * 1e3).unwrap();
    }
    s
}

/// Key-sorted report; byte-identical for identical runs unless `timing` is set.
pub fn write_atpg_report(bench: &str, c: &Circuit, cfg: &AtpgConfig, run: &AtpgRun, timing: bool) -> String {
    let mut sections = Sections::new();
    let d = &cfg.driver;
    sections.insert(
        "run".into(),
        BTreeMap::from([
            ("bench".into(), bench.to_string()),
            ("approach".into(), approach_name(cfg.approach).into()),
            ("faults".into(), run.universe.len().to_string()),
            ("prepass_budget".into(), cfg.prepass_budget.to_string()),
            ("prepass_patterns".into(), run.prepass.patterns.len().to_string()),
            ("residual".into(), run.prepass.residual.len().to_string()),
            ("seed".into(), cfg.seed.to_string()),
            ("group_size".into(), d.group_size.to_string()),
            ("timeout".into(), d.attack.timeout.map_or("none".into(), |t| format!("{}", t.as_secs_f64()))),
        ]),
    );
    let mut per_fault: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (f, by) in run.universe.iter().zip(&run.prepass.detected_by) {
        if let Some(p) = by {
            per_fault.entry(fault_name(c, f)).or_default().push(format!("prepass pattern={p}"));
        }
    }
    for (tag, result) in [("approach1", &run.approach1), ("approach2", &run.approach2)] {
        let Some((r, cov)) = result else { continue };
        sections.insert(format!("coverage.{tag}"), coverage_section(r, cov));
        for v in &r.verdicts {
            per_fault.entry(fault_name(c, &v.fault)).or_default().push(format!("{tag} {}", describe(v, timing)));
        }
    }
    sections.insert("faults".into(), per_fault.into_iter().map(|(k, v)| (k, v.join("; "))).collect());
    render(&sections)
}

pub fn write_fault_sim_report(bench: &str, c: &Circuit, faults: &[Fault], num_patterns: usize, rep: &FaultSimReport) -> String {
    let mut sections = Sections::new();
    sections.insert(
        "summary".into(),
        BTreeMap::from([
            ("bench".into(), bench.to_string()),
            ("faults".into(), faults.len().to_string()),
            ("patterns".into(), num_patterns.to_string()),
            ("detected".into(), rep.num_detected().to_string()),
            ("undetected".into(), (faults.len() - rep.num_detected()).to_string()),
        ]),
    );
    sections.insert(
        "faults".into(),
        faults
            .iter()
            .zip(&rep.first_detection)
            .map(|(f, d)| {
                let v = d.map_or("undetected".to_string(), |p| format!("detected pattern={p}"));
                (fault_name(c, f), v)
            })
            .collect(),
    );
    render(&sections)
}
