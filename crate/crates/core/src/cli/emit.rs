//! Artifact output: deterministic JSON, CSV and two-column plot files plus a
//! manifest with SHA-256 hashes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Formats a JSON value with sorted keys, two-space indentation and every
/// non-integer number as `{:.16e}` (17 significant digits).
pub fn format_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    let pad = |d: usize| "  ".repeat(d);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else {
                let f = n.as_f64().unwrap();
                write!(out, "{f:.16e}").unwrap();
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                write_value(x, depth + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push(']');
        }
        Value::Object(m) if m.is_empty() => out.push_str("{}"),
        Value::Object(m) => {
            let sorted: BTreeMap<&String, &Value> = m.iter().collect();
            out.push_str("{\n");
            for (i, (k, x)) in sorted.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push_str(": ");
                write_value(x, depth + 1, out);
                out.push_str(if i + 1 < sorted.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push('}');
        }
    }
}

/// Serialises to JSON; non-finite floats become `null`.
pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let value = serde_json::to_value(v).map_err(|e| Error::Numerical(format!("serialisation: {e}")))?;
    Ok(format_json(&value))
}

/// Two-column, whitespace-separated data with a `#` header line.
pub fn plot_data(columns: (&str, &str), rows: &[(f64, f64)]) -> String {
    let mut s = format!("# {} {}\n", columns.0, columns.1);
    for (x, y) in rows {
        writeln!(s, "{x:.16e} {y:.16e}").unwrap();
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Collects artifacts and writes them, in order, under one directory.
pub struct Emitter {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Emitter {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        let hash = Sha256::digest(contents);
        let sha256 = hash.iter().fold(String::new(), |mut s, b| {
            write!(s, "{b:02x}").unwrap();
            s
        });
        self.entries.retain(|e| e.path != name);
        self.entries.push(ManifestEntry { path: name.to_string(), bytes: contents.len(), sha256 });
        Ok(())
    }

    pub fn write_str(&mut self, name: &str, contents: &str) -> Result<()> {
        self.write(name, contents.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        self.write_str(name, &to_json(v)?)
    }

    pub fn artifacts(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.path.clone()).collect()
    }

    /// Writes `manifest.json` (entries sorted by path).
    pub fn finish(mut self) -> Result<Vec<ManifestEntry>> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let text = to_json(&serde_json::json!({ "artifacts": self.entries }))?;
        std::fs::write(self.dir.join("manifest.json"), text)?;
        Ok(self.entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_is_sorted_and_full_precision() {
        let v = serde_json::json!({"b": 0.1, "a": [1, 2.5e-300, "x"], "c": {}});
        let s = format_json(&v);
        assert_eq!(
            s,
            "{\n  \"a\": [\n    1,\n    2.5000000000000000e-300,\n    \"x\"\n  ],\n  \"b\": 1.0000000000000001e-1,\n  \"c\": {}\n}\n"
        );
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
    }

    #[test]
    fn manifest_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut e = Emitter::new(dir.path()).unwrap();
        e.write_str("x.txt", "abc").unwrap();
        let m = e.finish().unwrap();
        assert_eq!(m[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert!(dir.path().join("manifest.json").exists());
    }
}
