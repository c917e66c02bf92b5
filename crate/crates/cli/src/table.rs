//! CSV emission: LF line endings, shortest round-trip reals, no quoting.

use std::fmt::Write;

/// Shortest representation that parses back to the same `f64`.
pub fn real(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn header(&self) -> &[&'static str] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_rows() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), real(0.1)]);
        t.push(vec!["2".into(), real(1e-20)]);
        assert_eq!(t.to_csv(), "a,b\n1,0.1\n2,1e-20\n");
        assert_eq!(real(3.0), "3.0");
        for v in [0.1 + 0.2, 1.0 / 3.0, 6.02e23, -2.5e-300] {
            assert_eq!(real(v).parse::<f64>().unwrap(), v);
        }
    }
}
