//! Plain-text tables: one header line starting with `#`, then whitespace
//! separated rows. Floats are written with 17 significant digits so that they
//! read back bit-exactly.

use std::fmt::Write as _;

use crate::error::{Result, SwingError};

/// 17 significant digits, scientific notation.
pub fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // print negative zero as zero
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.columns.join(" "));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    /// Parses a rendered table, checking the header against `columns`.
    pub fn parse<S: AsRef<str>>(text: &str, columns: &[S]) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(SwingError::Parse {
            line: 1,
            msg: "empty table".into(),
        })?;
        let got: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
        let want: Vec<&str> = columns.iter().map(|c| c.as_ref()).collect();
        if got != want {
            return Err(SwingError::Parse {
                line: 1,
                msg: format!("header {got:?} does not match schema {want:?}"),
            });
        }
        let mut table = Table::new(columns);
        for (i, line) in lines {
            let row: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            if row.len() != want.len() {
                return Err(SwingError::Parse {
                    line: i + 1,
                    msg: format!("expected {} fields, got {}", want.len(), row.len()),
                });
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    /// Column `name` parsed as floats.
    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| SwingError::Parse { line: 0, msg: format!("no column {name}") })?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[idx].parse::<f64>().map_err(|e| SwingError::Parse {
                    line: i + 2,
                    msg: format!("{name}: {e}"),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn numbers_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::ZERO) {
            let s = fmt_num(x);
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
            prop_assert_eq!(fmt_num(back), s);
        }
    }

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(&["K", "gap"]);
        t.push(vec!["48".into(), fmt_num(0.25)]);
        let back = Table::parse(&t.render(), &["K", "gap"]).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column_f64("gap").unwrap(), vec![0.25]);
        assert!(Table::parse(&t.render(), &["K"]).is_err());
        assert_eq!(fmt_num(f64::INFINITY).parse::<f64>().unwrap(), f64::INFINITY);
    }
}
