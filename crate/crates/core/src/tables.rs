//! Pre-tabulated decisions for the local rules, indexed by (n, y) at the current dose.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::designs::{Design, DesignConfig, DesignKind};
use crate::framework::{DoseState, Move};
use crate::trial::excess_toxicity_prob;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Entry {
    E,
    S,
    D,
    /// De-escalate and exclude the current and all higher doses.
    DU,
}

impl Entry {
    pub fn tag(self) -> &'static str {
        match self {
            Entry::E => "E",
            Entry::S => "S",
            Entry::D => "D",
            Entry::DU => "DU",
        }
    }
}

impl From<Move> for Entry {
    fn from(m: Move) -> Self {
        match m {
            Move::Escalate => Entry::E,
            Move::Stay => Entry::S,
            Move::DeEscalate => Entry::D,
        }
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Entry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "E" => Entry::E,
            "S" => Entry::S,
            "D" => Entry::D,
            "DU" => Entry::DU,
            _ => return Err(Error::Domain(format!("unknown table entry '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Text,
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Text => "txt",
        }
    }
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "txt" | "text" => Ok(TableFormat::Text),
            _ => Err(Error::Domain(format!(
                "unsupported table format '{s}' (expected csv or txt)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTable {
    pub design: DesignConfig,
    pub max_n: u32,
    pub cells: BTreeMap<(u32, u32), Entry>,
}

/// One cell: DU when the excess-toxicity probability passes the safety
/// threshold, otherwise the design's own move.
pub fn table_entry(design: &Design, cfg: &DesignConfig, state: DoseState) -> Result<Entry> {
    if excess_toxicity_prob(state, cfg.target) > cfg.safety_threshold {
        return Ok(Entry::DU);
    }
    Ok(design.decide_local(state)?.into())
}

pub fn build_table(cfg: &DesignConfig, max_n: u32) -> Result<DecisionTable> {
    if cfg.design.is_history_dependent() {
        return Err(Error::HistoryDependent(cfg.design.to_string()));
    }
    if max_n == 0 {
        return Err(Error::Domain("max_n must be at least 1".into()));
    }
    // local rules do not depend on the dose count
    let design = Design::build(cfg, 2)?;
    let mut cells = BTreeMap::new();
    for n in 1..=max_n {
        for y in 0..=n {
            cells.insert((n, y), table_entry(&design, cfg, DoseState::new(n, y)?)?);
        }
    }
    Ok(DecisionTable {
        design: cfg.clone(),
        max_n,
        cells,
    })
}

impl DecisionTable {
    pub fn get(&self, n: u32, y: u32) -> Option<Entry> {
        self.cells.get(&(n, y)).copied()
    }

    /// `(n, y)` of the first cell where an entry is milder than the one above it.
    pub fn monotonicity_violation(&self) -> Option<(u32, u32)> {
        for n in 1..=self.max_n {
            for y in 1..=n {
                if self.get(n, y) < self.get(n, y - 1) {
                    return Some((n, y));
                }
            }
        }
        None
    }

    fn header(&self) -> String {
        let c = &self.design;
        let mut h = format!(
            "{} target={} eps1={} eps2={} safety_threshold={}",
            c.design.key(),
            c.target,
            c.eps1,
            c.eps2,
            c.safety_threshold
        );
        if let Some(v) = c.boin_phi_e {
            h.push_str(&format!(" boin_phi_e={v}"));
        }
        if let Some(v) = c.boin_phi_d {
            h.push_str(&format!(" boin_phi_d={v}"));
        }
        h
    }

    /// Columns are n = 1..max_n, rows are y = 0..max_n; cells with y > n are blank.
    pub fn emit(&self, format: TableFormat) -> String {
        match format {
            TableFormat::Csv => self.emit_csv(),
            TableFormat::Text => self.emit_text(),
        }
    }

    fn emit_csv(&self) -> String {
        let mut out = format!("# {}\ny\\n", self.header());
        for n in 1..=self.max_n {
            out.push_str(&format!(",{n}"));
        }
        out.push('\n');
        for y in 0..=self.max_n {
            out.push_str(&y.to_string());
            for n in 1..=self.max_n {
                out.push(',');
                if let Some(e) = self.get(n, y) {
                    out.push_str(e.tag());
                }
            }
            out.push('\n');
        }
        out
    }

    fn emit_text(&self) -> String {
        let w = (self.max_n.to_string().len() + 1).max(3);
        let mut out = format!("{} ({})\n{:>w$}", self.design.design, self.header(), "y\\n");
        for n in 1..=self.max_n {
            out.push_str(&format!("{n:>w$}"));
        }
        out.push('\n');
        for y in 0..=self.max_n {
            let mut line = format!("{y:>w$}");
            for n in 1..=self.max_n {
                line.push_str(&format!("{:>w$}", self.get(n, y).map_or("", Entry::tag)));
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }

    /// Parses the comma-separated form written by [`DecisionTable::emit`].
    pub fn parse_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Parse { line, message };
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| bad(1, "empty table".into()))?;
        let header = first
            .strip_prefix("# ")
            .ok_or_else(|| bad(1, "missing '# <design> key=value...' header".into()))?;
        let mut words = header.split_whitespace();
        let kind: DesignKind = words
            .next()
            .ok_or_else(|| bad(1, "missing design".into()))?
            .parse()
            .map_err(|e: Error| bad(1, e.to_string()))?;
        let mut design = DesignConfig::new(kind);
        for w in words {
            let (k, v) = w
                .split_once('=')
                .ok_or_else(|| bad(1, format!("expected key=value, got '{w}'")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| bad(1, format!("'{v}' is not a number")))?;
            match k {
                "target" => design.target = v,
                "eps1" => design.eps1 = v,
                "eps2" => design.eps2 = v,
                "safety_threshold" => design.safety_threshold = v,
                "boin_phi_e" => design.boin_phi_e = Some(v),
                "boin_phi_d" => design.boin_phi_d = Some(v),
                _ => return Err(bad(1, format!("unknown key '{k}'"))),
            }
        }
        let (_, cols) = lines
            .next()
            .ok_or_else(|| bad(2, "missing column header".into()))?;
        let cols: Vec<&str> = cols.split(',').collect();
        if cols.first() != Some(&"y\\n") {
            return Err(bad(2, "column header must start with 'y\\n'".into()));
        }
        let max_n = (cols.len() - 1) as u32;
        for (i, c) in cols[1..].iter().enumerate() {
            if c.parse::<u32>().ok() != Some(i as u32 + 1) {
                return Err(bad(2, format!("column {} should be n = {}", i + 2, i + 1)));
            }
        }
        let mut cells = BTreeMap::new();
        let mut rows = 0;
        for (i, line) in lines {
            let fields: Vec<&str> = line.split(',').collect();
            let y: u32 = fields[0]
                .parse()
                .map_err(|_| bad(i + 1, format!("bad row label '{}'", fields[0])))?;
            if y != rows || fields.len() != cols.len() {
                return Err(bad(
                    i + 1,
                    format!("expected row y = {rows} with {} fields", cols.len()),
                ));
            }
            for (j, f) in fields[1..].iter().enumerate() {
                let n = j as u32 + 1;
                match (y <= n, f.is_empty()) {
                    (true, false) => {
                        cells.insert(
                            (n, y),
                            f.parse().map_err(|e: Error| bad(i + 1, e.to_string()))?,
                        );
                    }
                    (false, true) => {}
                    (true, true) => return Err(bad(i + 1, format!("missing entry for n = {n}"))),
                    (false, false) => return Err(bad(i + 1, format!("entry for y > n = {n}"))),
                }
            }
            rows += 1;
        }
        if rows != max_n + 1 {
            return Err(bad(
                text.lines().count(),
                format!("expected {} rows, found {rows}", max_n + 1),
            ));
        }
        Ok(Self {
            design,
            max_n,
            cells,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(kind: DesignKind, max_n: u32) -> DecisionTable {
        build_table(&DesignConfig::new(kind), max_n).unwrap()
    }

    #[test]
    fn mtpi_cells() {
        let t = table(DesignKind::Mtpi, 12);
        assert_eq!(t.get(3, 0), Some(Entry::E));
        assert_eq!(t.get(3, 1), Some(Entry::S));
        assert_eq!(t.get(3, 2), Some(Entry::D));
        assert_eq!(t.get(3, 3), Some(Entry::DU));
        assert_eq!(t.get(3, 4), None);
    }

    #[test]
    fn boin_inclusive_boundary() {
        assert_eq!(table(DesignKind::Boin, 4).get(4, 1), Some(Entry::E));
    }

    #[test]
    fn history_dependent_rejected() {
        assert!(matches!(
            build_table(&DesignConfig::new(DesignKind::IntCrm), 5),
            Err(Error::HistoryDependent(_))
        ));
    }

    #[test]
    fn columns_are_monotone() {
        for kind in [
            DesignKind::Mtpi,
            DesignKind::Mtpi2,
            DesignKind::Boin,
            DesignKind::Ccd,
            DesignKind::I3p3,
        ] {
            assert_eq!(table(kind, 30).monotonicity_violation(), None, "{kind}");
        }
    }

    #[test]
    fn boin_and_ccd_agree() {
        assert_eq!(
            table(DesignKind::Boin, 30).cells,
            table(DesignKind::Ccd, 30).cells
        );
    }

    #[test]
    fn csv_round_trip() {
        for kind in [DesignKind::Mtpi, DesignKind::Boin] {
            let mut cfg = DesignConfig::new(kind);
            if kind == DesignKind::Boin {
                cfg.boin_phi_e = Some(0.2);
                cfg.boin_phi_d = Some(0.4);
            }
            let t = build_table(&cfg, 9).unwrap();
            let csv = t.emit(TableFormat::Csv);
            assert!(csv.lines().nth(1).unwrap().starts_with("y\\n,1,2,3"));
            assert_eq!(DecisionTable::parse_csv(&csv).unwrap(), t);
        }
    }

    #[test]
    fn text_layout() {
        let txt = table(DesignKind::Mtpi, 3).emit(TableFormat::Text);
        let lines: Vec<&str> = txt.lines().collect();
        assert_eq!(lines[1], "y\\n  1  2  3");
        assert_eq!(lines[5], "  3       DU");
    }
}
