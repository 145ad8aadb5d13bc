//! Deterministic CSV/JSON emission with an embedded provenance header.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! repeated run produces byte-identical files.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::config::{OutputFormat, RunConfig};

/// Header block carried by every output file.
pub struct Meta {
    pub command: String,
    pub config_hash: String,
    pub n_max: usize,
    pub interior_margin: usize,
    pub extra: Vec<(String, String)>,
}

impl Meta {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            config_hash: cfg.hash(),
            n_max: cfg.trunc.n_max,
            interior_margin: cfg.trunc.interior_margin,
            extra: Vec::new(),
        }
    }

    pub fn push(&mut self, key: &str, value: String) {
        self.extra.push((key.to_string(), value));
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

/// A rectangular table with named columns.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn render_table(meta: &Meta, table: &Table, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::new();
            let _ = writeln!(out, "# command: {}", meta.command);
            let _ = writeln!(out, "# config_hash: {}", meta.config_hash);
            let _ = writeln!(out, "# n_max: {}", meta.n_max);
            let _ = writeln!(out, "# interior_margin: {}", meta.interior_margin);
            for (k, v) in &meta.extra {
                let _ = writeln!(out, "# {k}: {v}");
            }
            let _ = writeln!(out, "{}", table.columns.join(","));
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
                let _ = writeln!(out, "{}", cells.join(","));
            }
            out
        }
        OutputFormat::Json => {
            let mut meta_map = Map::new();
            meta_map.insert("command".into(), json!(meta.command));
            meta_map.insert("config_hash".into(), json!(meta.config_hash));
            meta_map.insert("n_max".into(), json!(meta.n_max));
            meta_map.insert("interior_margin".into(), json!(meta.interior_margin));
            for (k, v) in &meta.extra {
                meta_map.insert(k.clone(), json!(v));
            }
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    let mut obj = Map::new();
                    for (c, v) in table.columns.iter().zip(row) {
                        obj.insert(c.clone(), json!(v));
                    }
                    Value::Object(obj)
                })
                .collect();
            let doc = json!({ "meta": Value::Object(meta_map), "rows": rows });
            let mut s = serde_json::to_string_pretty(&doc).expect("json renders");
            s.push('\n');
            s
        }
    }
}

/// Render a single JSON object (reports) with the meta block attached.
pub fn render_report(meta: &Meta, body: Value) -> String {
    let mut meta_map = Map::new();
    meta_map.insert("command".into(), json!(meta.command));
    meta_map.insert("config_hash".into(), json!(meta.config_hash));
    meta_map.insert("n_max".into(), json!(meta.n_max));
    meta_map.insert("interior_margin".into(), json!(meta.interior_margin));
    for (k, v) in &meta.extra {
        meta_map.insert(k.clone(), json!(v));
    }
    let doc = json!({ "meta": Value::Object(meta_map), "report": body });
    let mut s = serde_json::to_string_pretty(&doc).expect("json renders");
    s.push('\n');
    s
}

/// Write the rendered output to the path, or stdout when no path is set.
/// The content is fully rendered first, so an unwritable path leaves no
/// partial file behind.
pub fn emit(path: Option<&str>, content: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}
