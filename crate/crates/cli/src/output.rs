//! JSON and CSV rendering.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::Format;

/// Floats in CSV carry 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Joins fields, quoting any that contain a comma, quote or newline.
pub fn csv_row<S: AsRef<str>>(fields: &[S]) -> String {
    fields
        .iter()
        .map(|f| {
            let f = f.as_ref();
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

/// Rows kept in both renderings; JSON rows without a CSV counterpart are JSON-only.
pub struct Table {
    header: String,
    json: Vec<Value>,
    csv: Vec<String>,
    meta: Option<Value>,
}

impl Table {
    pub fn new(header: &str) -> Self {
        Self { header: header.to_string(), json: Vec::new(), csv: Vec::new(), meta: None }
    }

    pub fn push(&mut self, json: Value, csv: String) {
        self.json.push(json);
        self.csv.push(csv);
    }

    pub fn push_json(&mut self, json: Value) {
        self.json.push(json);
    }

    /// Wraps the JSON rows as {"rows": [...], ...meta} instead of a bare array.
    pub fn set_json_meta(&mut self, meta: Value) {
        self.meta = Some(meta);
    }

    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        Ok(match format {
            Format::Json => {
                let body = match &self.meta {
                    Some(Value::Object(m)) => {
                        let mut m = m.clone();
                        m.insert("rows".into(), Value::Array(self.json.clone()));
                        Value::Object(m)
                    }
                    _ => json!(self.json),
                };
                serde_json::to_string_pretty(&body)? + "\n"
            }
            Format::Csv => {
                let mut s = self.header.clone();
                s.push('\n');
                for row in &self.csv {
                    s.push_str(row);
                    s.push('\n');
                }
                s
            }
        })
    }

    pub fn write(&self, format: Format, out: Option<&Path>) -> anyhow::Result<()> {
        let text = self.render(format)?;
        match out {
            Some(p) => std::fs::write(p, text)?,
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_commas() {
        assert_eq!(csv_row(&["a", "b,c", "d\"e"]), "a,\"b,c\",\"d\"\"e\"");
    }

    #[test]
    fn floats_have_17_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn csv_always_has_header() {
        let t = Table::new("t,S_U");
        assert_eq!(t.render(Format::Csv).unwrap(), "t,S_U\n");
    }
}
