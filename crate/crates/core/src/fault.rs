//! Uncollapsed stuck-at fault universe and fault-site addressing.

use std::fmt;

use crate::bench::GateKind;
use crate::circuit::{Circuit, CircuitBuilder, NetId, Pin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaultSite {
    Stem(NetId),
    /// One consumer pin of a net that feeds at least two gate pins.
    Branch(Pin),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Sa0,
    Sa1,
}

impl Polarity {
    /// The logic value the line is stuck at.
    pub fn stuck_value(self) -> bool {
        self == Polarity::Sa1
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Sa0 => "sa0",
            Polarity::Sa1 => "sa1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fault {
    pub site: FaultSite,
    pub polarity: Polarity,
}

impl Fault {
    pub fn stem(net: NetId, polarity: Polarity) -> Fault {
        Fault { site: FaultSite::Stem(net), polarity }
    }

    pub fn branch(pin: Pin, polarity: Polarity) -> Fault {
        Fault { site: FaultSite::Branch(pin), polarity }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FaultError {
    #[error("fault site is not a fanout branch")]
    NotABranch,
    #[error("fault site `{0}` does not exist in the circuit")]
    InvalidSite(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Net read by `site`: the stem itself, or the net feeding the branch pin.
pub fn site_net(c: &Circuit, site: FaultSite) -> NetId {
    match site {
        FaultSite::Stem(n) => n,
        FaultSite::Branch(p) => c.gate(p.gate).fanins[p.pin],
    }
}

pub fn site_name(c: &Circuit, site: FaultSite) -> String {
    match site {
        FaultSite::Stem(n) => c.net_name(n).to_string(),
        FaultSite::Branch(p) => {
            format!("{}->{}.{}", c.net_name(site_net(c, site)), c.gate_name(p.gate), p.pin)
        }
    }
}

/// `SITE sa0|sa1`, the fault-list line format.
pub fn fault_name(c: &Circuit, f: &Fault) -> String {
    format!("{} {}", site_name(c, f.site), f.polarity)
}

pub fn is_valid_site(c: &Circuit, site: FaultSite) -> bool {
    match site {
        FaultSite::Stem(n) => n.index() < c.num_nets(),
        FaultSite::Branch(p) => {
            p.gate.index() < c.num_gates()
                && p.pin < c.gate(p.gate).fanins.len()
                && c.fanout(site_net(c, site)).len() >= 2
        }
    }
}

/// Every stem in net order (sa0 then sa1), each followed by its branch faults.
pub fn enumerate_faults(c: &Circuit) -> Vec<Fault> {
    let mut out = Vec::new();
    for &net in c.net_order() {
        for pol in [Polarity::Sa0, Polarity::Sa1] {
            out.push(Fault::stem(net, pol));
        }
        let readers = c.fanout(net);
        if readers.len() >= 2 {
            for &pin in readers {
                for pol in [Polarity::Sa0, Polarity::Sa1] {
                    out.push(Fault::branch(pin, pol));
                }
            }
        }
    }
    out
}

pub fn parse_site(c: &Circuit, text: &str) -> Result<FaultSite, FaultError> {
    let invalid = || FaultError::InvalidSite(text.to_string());
    let site = match text.split_once("->") {
        None => FaultSite::Stem(c.find_net(text).ok_or_else(invalid)?),
        Some((stem, rest)) => {
            let (gate, pin) = rest.rsplit_once('.').ok_or_else(invalid)?;
            let pin: usize = pin.parse().map_err(|_| invalid())?;
            let stem = c.find_net(stem).ok_or_else(invalid)?;
            let gate_net = c.find_net(gate).ok_or_else(invalid)?;
            let pin = *c
                .fanout(stem)
                .iter()
                .find(|p| c.gate(p.gate).output == gate_net && p.pin == pin)
                .ok_or_else(invalid)?;
            FaultSite::Branch(pin)
        }
    };
    if !is_valid_site(c, site) {
        return Err(invalid());
    }
    Ok(site)
}

/// Reads `SITE sa0|sa1` lines; blank lines and `#` comments are skipped.
pub fn parse_fault_list(c: &Circuit, text: &str) -> Result<Vec<Fault>, FaultError> {
    let mut faults = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| FaultError::Parse { line: i + 1, msg };
        let mut words = line.split_whitespace();
        let (Some(site), Some(pol), None) = (words.next(), words.next(), words.next()) else {
            return Err(parse_err(format!("expected `SITE sa0|sa1`, got `{line}`")));
        };
        let polarity = match pol {
            "sa0" => Polarity::Sa0,
            "sa1" => Polarity::Sa1,
            other => return Err(parse_err(format!("unknown polarity `{other}`"))),
        };
        let site = parse_site(c, site).map_err(|e| parse_err(e.to_string()))?;
        faults.push(Fault { site, polarity });
    }
    Ok(faults)
}

pub fn format_fault_list(c: &Circuit, faults: &[Fault]) -> String {
    faults.iter().map(|f| fault_name(c, f) + "\n").collect()
}

/// Splices `BUF` between whatever `pin` reads now and the pin itself; returns the
/// buffer output. `stem` only names the buffer.
pub(crate) fn splice_branch_buffer(b: &mut CircuitBuilder, stem: &str, pin: Pin) -> NetId {
    let base = format!("{}_br_{}_{}", stem, b.name(b.gate(pin.gate).output), pin.pin);
    let current = b.gate(pin.gate).fanins[pin.pin];
    let (_, out) = b.add_fresh_gate(GateKind::Buf, vec![current], &base);
    b.set_fanin(pin, out);
    out
}

/// Renames one fanout branch through a buffer so it can be addressed as a stem.
pub fn insert_branch_buffer(c: &Circuit, site: FaultSite) -> Result<(Circuit, NetId), FaultError> {
    let FaultSite::Branch(pin) = site else {
        return Err(FaultError::NotABranch);
    };
    if !is_valid_site(c, site) {
        return Err(FaultError::InvalidSite(format!("{pin:?}")));
    }
    let mut b = c.edit();
    let out = splice_branch_buffer(&mut b, c.net_name(site_net(c, site)), pin);
    let circuit = b.finish().expect("buffer splice keeps the circuit well-formed");
    Ok((circuit, out))
}
