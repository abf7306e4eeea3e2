//! Result tables: CSV body plus a JSON metadata summary.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// 17 significant digits, enough to recover any f64 exactly.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: &'static str,
    pub unit: &'static str,
}

pub const fn col(name: &'static str, unit: &'static str) -> Column {
    Column { name, unit }
}

#[derive(Debug, Clone)]
pub struct ResultTable {
    pub command: &'static str,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Map<String, Value>,
}

impl ResultTable {
    pub fn new(command: &'static str, columns: Vec<Column>) -> Self {
        ResultTable { command, columns, rows: Vec::new(), summary: Map::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: Value) {
        self.summary.insert(key.to_string(), value);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns.iter().map(|c| c.name))?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }

    #[cfg(test)]
    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn metadata(&self, fingerprint: &str, seed: u64) -> Value {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        json!({
            "tool": "kstar",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config_fingerprint": fingerprint,
            "seed": seed,
            "timestamp_unix": timestamp,
            "columns": self.columns.iter().map(|c| json!({"name": c.name, "unit": c.unit})).collect::<Vec<_>>(),
            "summary": Value::Object(self.summary.clone()),
        })
    }

    /// Writes the CSV to `out` (or stdout) and the JSON summary next to it
    /// (or to stderr).
    pub fn emit(&self, out: Option<&Path>, fingerprint: &str, seed: u64) -> Result<(), CliError> {
        let meta = serde_json::to_string_pretty(&self.metadata(fingerprint, seed))?;
        match out {
            Some(path) => {
                self.write_csv(std::fs::File::create(path)?)?;
                std::fs::write(path.with_extension("json"), meta + "\n")?;
            }
            None => {
                self.write_csv(std::io::stdout().lock())?;
                eprintln!("{meta}");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_csv() {
        let values = [0.1, 1.0 / 3.0, 30.426_788_471_843_13, 2.5e-10, -7.0, 1e300];
        let mut t = ResultTable::new("test", vec![col("x", "1")]);
        for v in values {
            t.push(vec![v.into()]);
        }
        let text = t.csv_string();
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let back: Vec<f64> = r.records().map(|rec| rec.unwrap()[0].parse().unwrap()).collect();
        assert_eq!(back, values);
    }

    #[test]
    fn empty_cells_and_text() {
        let mut t = ResultTable::new("test", vec![col("a", "-"), col("b", "-")]);
        t.push(vec![Cell::from(None::<f64>), "x".into()]);
        assert_eq!(t.csv_string(), "a,b\n,x\n");
    }
}
