//! Tabular output: CSV with a header row, or JSON `{meta, rows}`.
//!
//! Floats are rounded to 12 significant digits and printed in the shortest
//! form that reads back to the rounded value, so output is byte-stable.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
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

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub command: String,
    /// Echo of the effective configuration, in flag order.
    pub config: Vec<(String, String)>,
    /// Scalar results that do not fit the row schema (fit parameters, norms).
    pub summary: Vec<(String, Cell)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Self {
            command: command.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }

    pub fn summary(&mut self, key: &str, value: impl Into<Cell>) -> &mut Self {
        self.summary.push((key.to_string(), value.into()));
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// `v` rounded to 12 significant digits.
pub fn round12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

/// Shortest text for `round12(v)`; exponent form outside `[1e-5, 1e15)`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round12(v);
    if r == 0.0 {
        return "0".into();
    }
    let a = r.abs();
    if (1e-5..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn csv_field(c: &Cell) -> String {
    match c {
        Cell::Num(v) => format_float(*v),
        Cell::Int(i) => i.to_string(),
        Cell::Bool(b) => b.to_string(),
        Cell::Empty => String::new(),
        Cell::Text(s) => {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.clone()
            }
        }
    }
}

fn json_value(c: &Cell) -> Value {
    match c {
        Cell::Num(v) if v.is_finite() => json!(round12(*v)),
        Cell::Num(_) | Cell::Empty => Value::Null,
        Cell::Int(i) => json!(i),
        Cell::Bool(b) => json!(b),
        Cell::Text(s) => json!(s),
    }
}

fn cell_from_json(v: &Value) -> Cell {
    match v {
        Value::Null => Cell::Empty,
        Value::Bool(b) => Cell::Bool(*b),
        Value::Number(n) => match n.as_i64() {
            Some(i) if !n.is_f64() => Cell::Int(i),
            _ => Cell::Num(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => Cell::Text(s.clone()),
        other => Cell::Text(other.to_string()),
    }
}

pub fn to_csv(r: &Report) -> String {
    let mut s = r.columns.join(",");
    s.push('\n');
    for row in &r.rows {
        let fields: Vec<String> = row.iter().map(csv_field).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

pub fn to_json(r: &Report) -> String {
    let mut config = Map::new();
    for (k, v) in &r.config {
        config.insert(k.clone(), json!(v));
    }
    let mut summary = Map::new();
    for (k, v) in &r.summary {
        summary.insert(k.clone(), json_value(v));
    }
    let rows: Vec<Value> = r
        .rows
        .iter()
        .map(|row| {
            let mut m = Map::new();
            for (k, c) in r.columns.iter().zip(row) {
                m.insert(k.clone(), json_value(c));
            }
            Value::Object(m)
        })
        .collect();
    let doc = json!({
        "meta": {
            "version": env!("CARGO_PKG_VERSION"),
            "command": r.command,
            "config": config,
            "config_order": r.config.iter().map(|(k, _)| k.clone()).collect::<Vec<_>>(),
            "summary": summary,
            "summary_order": r.summary.iter().map(|(k, _)| k.clone()).collect::<Vec<_>>(),
            "columns": r.columns,
        },
        "rows": rows,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("JSON values are always serializable");
    s.push('\n');
    s
}

/// Inverse of [`to_json`].
pub fn from_json(text: &str) -> Result<Report, String> {
    let doc: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let meta = doc.get("meta").ok_or("missing meta")?;
    let strings = |key: &str| -> Result<Vec<String>, String> {
        meta.get(key)
            .and_then(Value::as_array)
            .ok_or(format!("missing meta.{key}"))?
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or(format!("non-string in meta.{key}")))
            .collect()
    };
    let columns = strings("columns")?;
    let config_order = strings("config_order")?;
    let summary_order = strings("summary_order")?;
    let config = config_order
        .into_iter()
        .map(|k| {
            let v = meta["config"][&k].as_str().unwrap_or_default().to_string();
            (k, v)
        })
        .collect();
    let summary = summary_order
        .into_iter()
        .map(|k| {
            let v = cell_from_json(&meta["summary"][&k]);
            (k, v)
        })
        .collect();
    let rows = doc
        .get("rows")
        .and_then(Value::as_array)
        .ok_or("missing rows")?
        .iter()
        .map(|row| columns.iter().map(|c| cell_from_json(&row[c])).collect())
        .collect();
    Ok(Report {
        command: meta["command"].as_str().unwrap_or_default().to_string(),
        config,
        summary,
        columns,
        rows,
    })
}

pub fn render(r: &Report, format: Format) -> String {
    match format {
        Format::Csv => to_csv(r),
        Format::Json => to_json(r),
    }
}

/// Writes the report to `path`, or to `out` when no path is given.
pub fn write_report(r: &Report, format: Format, path: Option<&Path>, out: &mut dyn Write) -> std::io::Result<()> {
    let text = render(r, format);
    match path {
        Some(p) => std::fs::write(p, text),
        None => out.write_all(text.as_bytes()),
    }
}

/// One-line human summary for stderr.
pub fn summary_line(r: &Report) -> Option<String> {
    if r.summary.is_empty() {
        return None;
    }
    let mut s = String::new();
    for (i, (k, v)) in r.summary.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{k}={}", csv_field(v));
    }
    Some(s)
}
