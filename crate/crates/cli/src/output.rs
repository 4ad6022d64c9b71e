//! CSV and JSON-lines rendering, and reading the config back out of a file.
//!
//! A CSV file starts with
//!
//! ```text
//! # schema: optical-bpl/prop1/v1
//! # config: {"command":"prop1",...}
//! ```
//!
//! followed by any `# verdict:` lines, the header and the rows. A JSON-lines
//! file starts with `{"schema":...,"config":{...}}`, then one object per row
//! and one `{"note":...}` object per summary line.

use serde_json::{Map, Value};

use crate::config::{CommandKind, ExperimentConfig, OutputFormat};
use crate::experiments::{Cell, Table};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub fn schema(command: CommandKind) -> String {
    format!("optical-bpl/{}/v{SCHEMA_VERSION}", command.name())
}

/// Shortest decimal that parses back to the same `f64`.
pub fn number(v: f64) -> Result<String, CliError> {
    serde_json::Number::from_f64(v)
        .map(|n| n.to_string())
        .ok_or_else(|| CliError::Numerical(format!("cannot write non-finite value {v}")))
}

fn cell_text(cell: &Cell) -> Result<String, CliError> {
    Ok(match cell {
        Cell::Int(i) => i.to_string(),
        Cell::Num(x) => number(*x)?,
        Cell::Text(t) => (*t).to_string(),
        Cell::Empty => String::new(),
    })
}

fn cell_json(cell: &Cell) -> Result<Value, CliError> {
    Ok(match cell {
        Cell::Int(i) => Value::from(*i),
        Cell::Num(x) => serde_json::Number::from_f64(*x)
            .map(Value::Number)
            .ok_or_else(|| CliError::Numerical(format!("cannot write non-finite value {x}")))?,
        Cell::Text(t) => Value::from(*t),
        Cell::Empty => Value::Null,
    })
}

pub fn render(config: &ExperimentConfig, table: &Table) -> Result<String, CliError> {
    match config.format {
        OutputFormat::Csv => render_csv(config, table),
        OutputFormat::Json => render_jsonl(config, table),
    }
}

fn render_csv(config: &ExperimentConfig, table: &Table) -> Result<String, CliError> {
    let mut out = format!("# schema: {}\n# config: {}\n", schema(config.command), config.embedded());
    for note in &table.notes {
        out.push_str(&format!("# {note}\n"));
    }
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells = row.iter().map(cell_text).collect::<Result<Vec<_>, _>>()?;
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn render_jsonl(config: &ExperimentConfig, table: &Table) -> Result<String, CliError> {
    let config_value: Value = serde_json::from_str(&config.embedded()).expect("embedded config is JSON");
    let mut header = Map::new();
    header.insert("schema".into(), Value::from(schema(config.command)));
    header.insert("config".into(), config_value);
    let mut out = Value::Object(header).to_string();
    out.push('\n');
    for row in &table.rows {
        let mut obj = Map::new();
        for (col, cell) in table.columns.iter().zip(row) {
            obj.insert((*col).to_string(), cell_json(cell)?);
        }
        out.push_str(&Value::Object(obj).to_string());
        out.push('\n');
    }
    for note in &table.notes {
        out.push_str(&serde_json::json!({ "note": note }).to_string());
        out.push('\n');
    }
    Ok(out)
}

/// The embedded config of a previously written CSV or JSON-lines file.
pub fn embedded_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let first = text.lines().next().unwrap_or("");
    let (schema_str, config) = if let Some(rest) = first.strip_prefix("# schema: ") {
        let line = text
            .lines()
            .nth(1)
            .and_then(|l| l.strip_prefix("# config: "))
            .ok_or_else(|| CliError::config("replay", "missing `# config:` line"))?;
        let config: ExperimentConfig = serde_json::from_str(line)
            .map_err(|e| CliError::config("replay", format!("bad embedded config: {e}")))?;
        (rest.trim().to_string(), config)
    } else {
        let header: Value = serde_json::from_str(first)
            .map_err(|_| CliError::config("replay", "file has neither a CSV preamble nor a JSON header"))?;
        let schema_str = header
            .get("schema")
            .and_then(Value::as_str)
            .ok_or_else(|| CliError::config("replay", "JSON header has no schema"))?
            .to_string();
        let config = header
            .get("config")
            .cloned()
            .ok_or_else(|| CliError::config("replay", "JSON header has no config"))?;
        let config: ExperimentConfig = serde_json::from_value(config)
            .map_err(|e| CliError::config("replay", format!("bad embedded config: {e}")))?;
        (schema_str, config)
    };
    if schema_str != schema(config.command) {
        return Err(CliError::config(
            "replay",
            format!("unsupported schema `{schema_str}`, expected `{}`", schema(config.command)),
        ));
    }
    Ok(config)
}
