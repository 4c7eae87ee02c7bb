//! CSV tables with a provenance line, and reading measures back.
//!
//! Reals are written as `{:.16e}` (17 significant digits), so a table
//! round-trips every `f64` exactly and identical inputs give identical bytes.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<i64> for Cell {
    fn from(n: i64) -> Self {
        Cell::Int(n)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Int(b as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(n) => write!(f, "{n}"),
            Cell::Real(x) => f.write_str(&format_real(*x)),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Written after `# ` on the first line; newlines are replaced by spaces.
    pub provenance: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(provenance: impl Into<String>, header: &[&str]) -> Self {
        Table {
            provenance: provenance.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.provenance.replace(['\n', '\r'], " "));
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::to_string).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.render().as_bytes())
            .map_err(|e| Error::Io(e.to_string()))
    }
}

/// `(atom, weight)` table of a measure.
pub fn measure_table(mu: &EmpiricalMeasure, provenance: impl Into<String>) -> Table {
    let mut t = Table::new(provenance, &["atom", "weight"]);
    for (&a, &w) in mu.atoms().iter().zip(mu.weights()) {
        t.push(vec![a.into(), w.into()]);
    }
    t
}

/// Reads a measure from CSV. Lines starting with `#` are skipped and the
/// first remaining line is a header naming an `atom` column and, optionally,
/// a `weight` column; without weights the atoms are equally weighted.
pub fn read_measure(r: impl Read) -> Result<EmpiricalMeasure> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let atom_col = col("atom").ok_or_else(|| Error::Parse("measure CSV needs an `atom` column".into()))?;
    let weight_col = col("weight");
    let (mut atoms, mut weights) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |c: usize| -> Result<f64> {
            let s = rec
                .get(c)
                .ok_or_else(|| Error::Parse(format!("row {}: missing column {c}", line + 1)))?;
            s.parse()
                .map_err(|_| Error::Parse(format!("row {}: `{s}` is not a number", line + 1)))
        };
        atoms.push(field(atom_col)?);
        if let Some(c) = weight_col {
            weights.push(field(c)?);
        }
    }
    if atoms.is_empty() {
        return Err(Error::Parse("measure CSV has no rows".into()));
    }
    if weight_col.is_some() {
        EmpiricalMeasure::from_weighted(&atoms, &weights)
    } else {
        EmpiricalMeasure::uniform(&atoms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip_through_text() {
        for x in [0.1, 1.0 / 3.0, 0.7355609781962695, 1e-300, 5e-324, 0.0] {
            assert_eq!(format_real(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_real(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new("cmd x\ny", &["n", "eta"]);
        t.push(vec![1usize.into(), 0.3.into()]);
        assert_eq!(t.render(), "# cmd x y\nn,eta\n1,2.9999999999999999e-1\n");
    }

    #[test]
    fn measure_round_trip() {
        let mu = EmpiricalMeasure::from_weighted(&[0.2, 0.7, 0.9], &[0.25, 0.5, 0.25]).unwrap();
        let text = measure_table(&mu, "test").render();
        let back = read_measure(text.as_bytes()).unwrap();
        assert_eq!(back, mu);
    }

    #[test]
    fn unweighted_and_malformed_input() {
        let mu = read_measure("# c\natom\n0.2\n0.7\n".as_bytes()).unwrap();
        assert_eq!(mu.weights(), &[0.5, 0.5]);
        assert!(matches!(read_measure("x\n1\n".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(read_measure("atom\nabc\n".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(read_measure("atom\n".as_bytes()), Err(Error::Parse(_))));
    }
}
