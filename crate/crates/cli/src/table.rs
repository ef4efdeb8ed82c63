//! Rectangular result tables and their CSV and JSON encodings.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value as J};

use crate::config::Format;
use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Null,
}

impl From<f64> for Cell {
    /// Non-finite numbers become null so they never reach the output as numbers.
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Cell::Float(v)
        } else {
            Cell::Null
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Null, Cell::from)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn csv_text(&self) -> String {
        match self {
            Cell::Float(v) => format!("{v:?}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> J {
        match self {
            Cell::Float(v) => json!(v),
            Cell::Int(v) => json!(v),
            Cell::Bool(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Null => J::Null,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: &'static str,
    pub unit: Option<&'static str>,
}

impl Column {
    pub fn header(&self) -> String {
        match self.unit {
            Some(u) => format!("{} [{u}]", self.name),
            None => self.name.to_string(),
        }
    }
}

/// Shorthand for a column list: `("gain", Some("dB"))`.
pub fn columns(spec: &[(&'static str, Option<&'static str>)]) -> Vec<Column> {
    spec.iter().map(|&(name, unit)| Column { name, unit }).collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    /// Ordered key-value pairs: input echo first, then derived scalars.
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(columns: Vec<Column>) -> Self {
        Self {
            columns,
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Numeric view of one column; nulls and non-numbers become `None`.
    pub fn column_f64(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.column_index(name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match r[i] {
                    Cell::Float(v) => Some(v),
                    Cell::Int(v) => Some(v as f64),
                    _ => None,
                })
                .collect(),
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k} = {}\n", v.replace(['\n', '\r'], " ")));
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(Vec::new());
        let header: Vec<String> = self.columns.iter().map(Column::header).collect();
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv_text)).expect("in-memory write");
        }
        let bytes = w.into_inner().expect("in-memory flush");
        out.push_str(&String::from_utf8(bytes).expect("cells are UTF-8"));
        out
    }

    pub fn to_json(&self) -> String {
        let mut meta = Map::new();
        for (k, v) in &self.metadata {
            meta.insert(k.clone(), J::String(v.clone()));
        }
        let cols: Vec<J> = self
            .columns
            .iter()
            .map(|c| json!({ "name": c.name, "unit": c.unit }))
            .collect();
        let mut data = Map::new();
        for (i, c) in self.columns.iter().enumerate() {
            data.insert(c.name.to_string(), J::Array(self.rows.iter().map(|r| r[i].json()).collect()));
        }
        let doc = json!({ "metadata": meta, "columns": cols, "data": data });
        let mut s = serde_json::to_string_pretty(&doc).expect("tables serialize");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Writes the table to `path`, or to stdout without one.
pub fn emit(table: &ResultTable, format: Format, path: Option<&Path>) -> Result<(), CliError> {
    let text = table.render(format);
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultTable {
        let mut t = ResultTable::new(columns(&[("q", None), ("delta_phi", Some("rad")), ("note", None)]));
        t.meta("command", "echo-sweep");
        t.push(vec![Cell::from(0.1), Cell::from(Some(1e-3)), Cell::from("plain")]);
        t.push(vec![Cell::from(2.0), Cell::Null, Cell::from("has, comma \"and quote\"")]);
        t
    }

    #[test]
    fn csv_layout() {
        let csv = sample().to_csv();
        assert_eq!(
            csv,
            "# command = echo-sweep\n\
             q,delta_phi [rad],note\n\
             0.1,0.001,plain\n\
             2.0,,\"has, comma \"\"and quote\"\"\"\n"
        );
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = ResultTable::new(columns(&[("q", None), ("gain", Some("dB"))]));
        assert_eq!(t.to_csv(), "q,gain [dB]\n");
    }

    #[test]
    fn json_nulls_and_column_order() {
        let v: J = serde_json::from_str(&sample().to_json()).unwrap();
        assert_eq!(v["data"]["delta_phi"][1], J::Null);
        assert_eq!(v["data"]["q"][0], json!(0.1));
        assert_eq!(v["columns"][1]["unit"], json!("rad"));
        assert_eq!(v["metadata"]["command"], json!("echo-sweep"));
    }

    #[test]
    fn non_finite_is_null() {
        assert_eq!(Cell::from(f64::NAN), Cell::Null);
        assert_eq!(Cell::from(f64::INFINITY), Cell::Null);
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, 1e-300, -2.5] {
            let s = Cell::from(v).csv_text();
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
