//! Delimited numeric tables with a `#`-prefixed metadata block.
//!
//! ```text
//! # command: spectrum
//! # seed: 42
//! frequency [Hz],current [A]
//! 2.87000000000e9,1.23400000000e-9
//! ```
//!
//! Every header cell carries a unit in brackets (`1` for dimensionless).
//! Numbers are written with 12 significant digits so output is byte-stable.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

impl Column {
    pub fn new(name: &str, unit: &str) -> Self {
        Self {
            name: name.to_string(),
            unit: unit.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataTable {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

pub fn format_number(v: f64) -> String {
    format!("{v:.11e}")
}

impl DataTable {
    pub fn new(columns: Vec<Column>) -> Self {
        Self {
            metadata: Vec::new(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.set_meta(key, value);
        self
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.metadata.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.metadata.push((key.to_string(), value)),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Table {
                line: self.rows.len() + 1,
                reason: format!("row has {} values, expected {}", row.len(), self.columns.len()),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "# {k}: {v}");
        }
        let header: Vec<String> = self
            .columns
            .iter()
            .map(|c| format!("{} [{}]", c.name, c.unit))
            .collect();
        let _ = writeln!(s, "{}", header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table = DataTable::default();
        let mut header_seen = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if header_seen {
                    return Err(Error::Table {
                        line: line_no,
                        reason: "metadata after the header".into(),
                    });
                }
                let (k, v) = meta.split_once(':').ok_or_else(|| Error::Table {
                    line: line_no,
                    reason: "metadata lines must read `# key: value`".into(),
                })?;
                table.metadata.push((k.trim().to_string(), v.trim().to_string()));
                continue;
            }
            if !header_seen {
                for cell in line.split(',') {
                    table.columns.push(parse_header_cell(cell.trim(), line_no)?);
                }
                header_seen = true;
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|c| {
                    c.trim().parse::<f64>().map_err(|_| Error::Table {
                        line: line_no,
                        reason: format!("`{}` is not a number", c.trim()),
                    })
                })
                .collect::<Result<_>>()?;
            if row.len() != table.columns.len() {
                return Err(Error::Table {
                    line: line_no,
                    reason: format!("row has {} values, expected {}", row.len(), table.columns.len()),
                });
            }
            table.rows.push(row);
        }
        if !header_seen {
            return Err(Error::Table {
                line: text.lines().count(),
                reason: "missing header line".into(),
            });
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn parse_header_cell(cell: &str, line: usize) -> Result<Column> {
    let err = || Error::Table {
        line,
        reason: format!("header cell `{cell}` must read `name [unit]`"),
    };
    let open = cell.find('[').ok_or_else(err)?;
    if !cell.ends_with(']') {
        return Err(err());
    }
    let name = cell[..open].trim();
    let unit = cell[open + 1..cell.len() - 1].trim();
    if name.is_empty() || unit.is_empty() {
        return Err(err());
    }
    Ok(Column::new(name, unit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> DataTable {
        let mut t = DataTable::new(vec![Column::new("frequency", "Hz"), Column::new("current", "A")])
            .with_meta("seed", 42)
            .with_meta("profile", "default");
        t.push_row(vec![2.87e9, 1.5e-9]).unwrap();
        t.push_row(vec![2.88e9, -0.0]).unwrap();
        t
    }

    #[test]
    fn text_layout() {
        let text = sample().to_text();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# seed: 42"));
        assert_eq!(lines.nth(1), Some("frequency [Hz],current [A]"));
        assert_eq!(lines.next(), Some("2.87000000000e9,1.50000000000e-9"));
    }

    #[test]
    fn reparse_is_lossless() {
        let t = sample();
        let back = DataTable::parse(&t.to_text()).unwrap();
        assert_eq!(back.to_text(), t.to_text());
        assert_eq!(back.meta("seed"), Some("42"));
        assert_eq!(back.column("frequency").unwrap(), vec![2.87e9, 2.88e9]);
    }

    #[test]
    fn units_are_mandatory() {
        let e = DataTable::parse("frequency,current [A]\n1,2\n").unwrap_err();
        assert!(matches!(e, Error::Table { line: 1, .. }));
        assert!(DataTable::parse("frequency [],current [A]\n").is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        let e = DataTable::parse("# a: b\nx [m],y [m]\n1,2\n3\n").unwrap_err();
        assert!(matches!(e, Error::Table { line: 4, .. }));
        let mut t = sample();
        assert!(t.push_row(vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn emitted_numbers_reparse_to_the_same_text(v in proptest::num::f64::NORMAL) {
            let s = format_number(v);
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(format_number(back), s);
        }
    }
}
