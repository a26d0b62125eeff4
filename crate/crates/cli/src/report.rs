use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use serde_json::{json, Map, Value};

/// Round to 12 significant digits for printing.
pub fn sig(x: f64) -> Value {
    if !x.is_finite() {
        return Value::String(format!("{x}"));
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap();
    json!(rounded)
}

pub fn sig_all(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| sig(x)).collect())
}

/// NDJSON records on stdout, optionally mirrored to a JSON array file and a
/// long-format CSV file (`record,key,value`).
pub struct Report {
    records: Vec<Value>,
    json: Option<PathBuf>,
    csv: Option<PathBuf>,
}

impl Report {
    pub fn new(json: Option<PathBuf>, csv: Option<PathBuf>) -> Self {
        Report { records: Vec::new(), json, csv }
    }

    pub fn emit(&mut self, kind: &str, fields: Value) {
        let mut map = Map::new();
        map.insert("record".into(), Value::String(kind.into()));
        if let Value::Object(f) = fields {
            map.extend(f);
        }
        let rec = Value::Object(map);
        let mut out = io::stdout().lock();
        let _ = writeln!(out, "{rec}");
        self.records.push(rec);
    }

    pub fn finish(self) -> io::Result<()> {
        if let Some(path) = &self.json {
            let mut f = File::create(path)?;
            serde_json::to_writer_pretty(&mut f, &self.records)?;
            writeln!(f)?;
        }
        if let Some(path) = &self.csv {
            let mut f = File::create(path)?;
            writeln!(f, "row,record,key,value")?;
            for (row, rec) in self.records.iter().enumerate() {
                let kind = rec["record"].as_str().unwrap_or_default();
                let mut cells = Vec::new();
                flatten(rec, String::new(), &mut cells);
                for (key, value) in cells.into_iter().filter(|(k, _)| k != "record") {
                    writeln!(f, "{row},{kind},{},{}", quote(&key), quote(&value))?;
                }
            }
        }
        Ok(())
    }
}

fn flatten(v: &Value, prefix: String, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, x)| flatten(x, join(k), out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| flatten(x, join(&i.to_string()), out)),
        Value::String(s) => out.push((prefix, s.clone())),
        other => out.push((prefix, other.to_string())),
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
