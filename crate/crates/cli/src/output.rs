use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use isbpol::params::Provenance;
use serde_json::{json, Map, Value};

use crate::config::Resolved;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// One CSV cell / JSON scalar.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Float(x) => format!("{x:?}"),
            Cell::Int(x) => x.to_string(),
            Cell::Bool(x) => x.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(x) => json!(x),
            Cell::Bool(x) => json!(x),
            Cell::Text(s) => json!(s),
        }
    }
}

pub enum Body {
    Table {
        columns: Vec<&'static str>,
        rows: Vec<Vec<Cell>>,
    },
    /// A single structured record; flattened to `field,value` rows for CSV.
    Document(Value),
}

/// Everything one subcommand emits.
pub struct Report {
    provenance: Vec<(&'static str, Value)>,
    metadata: Vec<(String, Value)>,
    body: Body,
}

impl Report {
    pub fn new(command: &str, resolved: &Resolved, body: Body) -> Self {
        let defaulted: Vec<String> = resolved
            .loaded
            .provenance
            .iter()
            .filter(|(_, p)| *p != Provenance::User)
            .map(|(k, p)| if *p == Provenance::Default { k.clone() } else { format!("{k} ({p})") })
            .collect();
        let overrides: Vec<String> = resolved.overrides.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let provenance = vec![
            ("tool", json!(format!("isbpol {}", env!("CARGO_PKG_VERSION")))),
            ("command", json!(command)),
            ("config", json!(resolved.source)),
            ("config_hash", json!(resolved.config().hash())),
            ("defaulted_keys", json!(defaulted)),
            ("overrides", json!(overrides)),
        ];
        Self { provenance, metadata: Vec::new(), body }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl Into<Value>) -> &mut Self {
        self.metadata.push((key.into(), value.into()));
        self
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.csv(),
            Format::Json => self.json(),
        }
    }

    fn csv(&self) -> Result<String> {
        let mut out = String::new();
        for (k, v) in
            self.provenance.iter().map(|(k, v)| (*k, v)).chain(self.metadata.iter().map(|(k, v)| (k.as_str(), v)))
        {
            let text = plain(v);
            out.push_str(&if text.is_empty() { format!("# {k}:\n") } else { format!("# {k}: {text}\n") });
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        match &self.body {
            Body::Table { columns, rows } => {
                w.write_record(columns)?;
                for row in rows {
                    w.write_record(row.iter().map(Cell::text))?;
                }
            }
            Body::Document(doc) => {
                w.write_record(["field", "value"])?;
                let mut flat = Vec::new();
                flatten("", doc, &mut flat);
                for (k, v) in flat {
                    w.write_record([k, v])?;
                }
            }
        }
        out.push_str(std::str::from_utf8(&w.into_inner()?)?);
        Ok(out)
    }

    fn json(&self) -> Result<String> {
        let mut root = Map::new();
        root.insert(
            "provenance".into(),
            Value::Object(self.provenance.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()),
        );
        root.insert("metadata".into(), Value::Object(self.metadata.iter().cloned().collect()));
        match &self.body {
            Body::Table { columns, rows } => {
                let records = rows
                    .iter()
                    .map(|row| Value::Object(columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect()))
                    .collect();
                root.insert("records".into(), Value::Array(records));
            }
            Body::Document(doc) => {
                root.insert("result".into(), doc.clone());
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(root))?;
        text.push('\n');
        Ok(text)
    }

    /// Writes to `out`, or stdout when no path is given.
    pub fn emit(&self, format: Format, out: Option<&Path>) -> Result<()> {
        let text = self.render(format)?;
        match out {
            Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                Ok(stdout.flush()?)
            }
        }
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(plain).collect::<Vec<_>>().join(", "),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&join(k), v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), v, out);
            }
        }
        other => out.push((prefix.to_string(), plain(other))),
    }
}
