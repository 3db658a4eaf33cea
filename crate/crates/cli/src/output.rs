//! Output files: a short commented header followed by CSV or JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Header shared by every emitted file. It has no timestamps so that
/// identical runs produce identical bytes.
pub fn header(schema: &str, config_hash: &str) -> String {
    format!(
        "# optomech {}\n# schema: {schema} v{SCHEMA_VERSION}\n# config_sha256: {config_hash}\n",
        env!("CARGO_PKG_VERSION")
    )
}

/// Write via a temporary sibling and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// A CSV body under a header.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(schema: &str, config_hash: &str, columns: &[&str]) -> Self {
        let mut text = header(schema, config_hash);
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn push_raw(&mut self, rows: &str) {
        self.text.push_str(rows);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, &self.text)
    }
}

/// Number formatting for CSV fields: shortest round-trip form, empty for absent.
pub fn num(v: f64) -> String {
    v.to_string()
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// JSON summary with the header as a leading `_header` block.
pub fn write_json(
    path: &Path,
    schema: &str,
    config_hash: &str,
    body: serde_json::Value,
) -> Result<(), CliError> {
    let mut doc = serde_json::Map::new();
    doc.insert(
        "schema".into(),
        format!("{schema} v{SCHEMA_VERSION}").into(),
    );
    doc.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    doc.insert("config_sha256".into(), config_hash.into());
    doc.insert("result".into(), body);
    let mut text =
        serde_json::to_string_pretty(&serde_json::Value::Object(doc)).expect("json serializes");
    let _ = writeln!(text);
    write_atomic(path, &text)
}
