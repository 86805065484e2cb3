use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::config::{CliError, Command, Format, VERSION};

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) if *v == 0.0 || (1e-4..1e15).contains(&v.abs()) => format!("{v}"),
            Cell::Num(v) if v.is_finite() => format!("{v:e}"),
            Cell::Num(_) => String::new(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(_) => Value::Null,
            Cell::Text(s) => json!(s),
        }
    }
}

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

pub fn config_json(config: &Command) -> Value {
    serde_json::to_value(config).expect("config serializes")
}

/// Top-level metadata every output file carries.
pub fn header(config: &Command) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("tool".into(), json!("unimetric"));
    m.insert("version".into(), json!(VERSION));
    m.insert("config".into(), config_json(config));
    m
}

pub fn render(table: &Table, format: Format, config: &Command) -> String {
    match format {
        Format::Csv => {
            let mut s = format!("# unimetric {VERSION}\n# config {}\n", config_json(config));
            s.push_str(&table.columns.join(","));
            s.push('\n');
            for row in &table.rows {
                s.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let mut doc = header(config);
            doc.insert("columns".into(), json!(table.columns));
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    let mut o = Map::new();
                    for (c, v) in table.columns.iter().zip(row) {
                        o.insert((*c).to_string(), v.json());
                    }
                    Value::Object(o)
                })
                .collect();
            doc.insert("rows".into(), Value::Array(rows));
            json_text(&Value::Object(doc))
        }
    }
}

pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

pub fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
