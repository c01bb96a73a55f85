//! File emission: CSV with six decimals, pretty JSON, and plain-text tables
//! for stdout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::Value;

pub struct Outputs {
    dir: Option<PathBuf>,
    timestamp: Option<String>,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: Option<PathBuf>, with_timestamp: bool) -> Self {
        let timestamp = with_timestamp.then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
        Outputs {
            dir,
            timestamp,
            written: Vec::new(),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn write(&mut self, rel: &str, body: &str) -> Result<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    /// CSV file; the optional first line is a `#` comment with the run time.
    pub fn csv(&mut self, rel: &str, body: &str) -> Result<()> {
        let mut text = String::new();
        if let Some(ts) = &self.timestamp {
            writeln!(text, "# generated_at={ts}").unwrap();
        }
        text.push_str(body);
        self.write(rel, &text)
    }

    pub fn json(&mut self, rel: &str, value: Value) -> Result<()> {
        let value = match (value, &self.timestamp) {
            (Value::Object(map), Some(ts)) => {
                let mut out = serde_json::Map::new();
                out.insert("generated_at".into(), Value::String(ts.clone()));
                out.extend(map);
                Value::Object(out)
            }
            (v, _) => v,
        };
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        self.write(rel, &text)
    }
}

/// Six decimals, never printing a negative zero.
pub fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

pub fn matrix_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r.iter().map(|&v| fmt6(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_decimals_without_negative_zero() {
        assert_eq!(fmt6(0.177), "0.177000");
        assert_eq!(fmt6(-1e-9), "0.000000");
        assert_eq!(fmt6(-0.5), "-0.500000");
    }

    #[test]
    fn table_aligns_columns() {
        let t = table(&["a", "bb"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(t, "a    bb\n---  --\nxyz  1\n");
    }
}
