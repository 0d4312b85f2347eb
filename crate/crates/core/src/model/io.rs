//! Text serialisation of scenario lattices.
//!
//! ```text
//! T=<horizon> K=<steps> L=<rate> lce=<true|false> p=<exponent>
//! k node_index X child_0:prob_0 child_1:prob_1 ...
//! ```
//!
//! One node per line after the header; terminal nodes carry no transitions.

use std::fmt::Write as _;

use super::grid::TimeGrid;
use super::lattice::{Node, ScenarioLattice, Transition};
use crate::error::{Result, SwingError};
use crate::table::fmt_num;

pub fn write_lattice(lattice: &ScenarioLattice, rate: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "T={} K={} L={} lce={} p={}",
        fmt_num(lattice.grid().horizon()),
        lattice.steps(),
        fmt_num(rate),
        lattice.lce_declared(),
        fmt_num(lattice.p_exponent())
    );
    for k in 0..=lattice.steps() {
        for (n, node) in lattice.slice(k).iter().enumerate() {
            let _ = write!(out, "{k} {n} {}", fmt_num(node.cashflow));
            for tr in &node.transitions {
                let _ = write!(out, " {}:{}", tr.child, fmt_num(tr.prob));
            }
            out.push('\n');
        }
    }
    out
}

fn perr(line: usize, msg: impl Into<String>) -> SwingError {
    SwingError::Parse { line, msg: msg.into() }
}

/// Reads a lattice and the rate `L` stored in its header.
pub fn read_lattice(text: &str) -> Result<(ScenarioLattice, f64)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| perr(1, "empty lattice file"))?;
    let (mut horizon, mut steps, mut rate, mut lce, mut p) = (None, None, None, None, None);
    for tok in header.split_whitespace() {
        let (key, val) = tok.split_once('=').ok_or_else(|| perr(1, format!("bad header token {tok}")))?;
        let num = || val.parse::<f64>().map_err(|e| perr(1, format!("{key}: {e}")));
        match key {
            "T" => horizon = Some(num()?),
            "K" => steps = Some(val.parse::<usize>().map_err(|e| perr(1, format!("K: {e}")))?),
            "L" => rate = Some(num()?),
            "lce" => lce = Some(val.parse::<bool>().map_err(|e| perr(1, format!("lce: {e}")))?),
            "p" => p = Some(num()?),
            other => return Err(perr(1, format!("unknown header key {other}"))),
        }
    }
    let missing = |k: &str| perr(1, format!("header misses {k}"));
    let grid = TimeGrid::new(horizon.ok_or_else(|| missing("T"))?, steps.ok_or_else(|| missing("K"))?)?;
    let rate = rate.ok_or_else(|| missing("L"))?;
    let mut slices: Vec<Vec<Node>> = vec![Vec::new(); grid.steps() + 1];
    for (i, line) in lines {
        let ln = i + 1;
        let mut toks = line.split_whitespace();
        let mut field = |name: &str| toks.next().ok_or_else(|| perr(ln, format!("missing {name}")));
        let k: usize = field("k")?.parse().map_err(|e| perr(ln, format!("k: {e}")))?;
        let n: usize = field("node")?.parse().map_err(|e| perr(ln, format!("node: {e}")))?;
        let x: f64 = field("X")?.parse().map_err(|e| perr(ln, format!("X: {e}")))?;
        let transitions = toks
            .map(|t| {
                let (c, pr) = t.split_once(':').ok_or_else(|| perr(ln, format!("bad transition {t}")))?;
                Ok(Transition {
                    child: c.parse().map_err(|e| perr(ln, format!("child: {e}")))?,
                    prob: pr.parse().map_err(|e| perr(ln, format!("prob: {e}")))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let slice = slices.get_mut(k).ok_or_else(|| perr(ln, format!("time index {k} beyond K")))?;
        if n != slice.len() {
            return Err(perr(ln, format!("node index {n} out of order at slice {k}")));
        }
        slice.push(Node::new(x, transitions));
    }
    let lattice = ScenarioLattice::new(
        grid,
        slices,
        lce.ok_or_else(|| missing("lce"))?,
        p.ok_or_else(|| missing("p"))?,
    )?;
    Ok((lattice, rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builders::{binary_example, binomial, BinomialSpec, DriftKind};

    #[test]
    fn round_trip_is_exact() {
        let spec = BinomialSpec::scaled(DriftKind::Submartingale, 1.3, 3.0, 6, 0.2, 0.3);
        let l = binomial(&spec).unwrap();
        let text = write_lattice(&l, 1.0);
        let (back, rate) = read_lattice(&text).unwrap();
        assert_eq!(back, l);
        assert_eq!(rate, 1.0);
        assert_eq!(write_lattice(&back, rate), text);
    }

    #[test]
    fn negative_cashflow_file_is_rejected() {
        let text = write_lattice(&binary_example(6).unwrap(), 1.0).replace(
            "6 1 2.0000000000000000e0",
            "6 1 -2.0000000000000000e0",
        );
        assert!(matches!(read_lattice(&text), Err(SwingError::InvalidModel(_))));
    }

    #[test]
    fn malformed_header() {
        assert!(read_lattice("T=1 K=1 Q=3\n").is_err());
        assert!(read_lattice("").is_err());
    }
}
