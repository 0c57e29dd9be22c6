//! Deterministic artifact assembly. Floating-point values are written in
//! Rust's shortest round-trip form, JSON objects keep sorted key order, and
//! every document starts with the artifact version and the effective
//! configuration, so identical configurations produce byte-identical files.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::config::{RunConfig, ARTIFACT_VERSION};

/// Shortest round-trip decimal form of a float.
pub fn fmt_f64(value: f64) -> String {
    format!("{value}")
}

/// Optional float as a CSV field; missing values are empty.
pub fn fmt_opt(value: Option<f64>) -> String {
    value.map(fmt_f64).unwrap_or_default()
}

/// A CSV document with the version and config embedded as comment lines.
pub fn csv_document(config: &RunConfig, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut text = String::new();
    text.push_str(&format!("# spin7lab {ARTIFACT_VERSION}\n"));
    text.push_str(&format!("# config: {}\n", config.echo()));
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "CSV row width matches header");
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

/// A JSON document wrapping a payload with the version and config.
pub fn json_document(config: &RunConfig, payload: serde_json::Value) -> String {
    let document = serde_json::json!({
        "version": ARTIFACT_VERSION,
        "config": config.echo(),
        "result": payload,
    });
    let mut text = serde_json::to_string_pretty(&document).expect("JSON serialization");
    text.push('\n');
    text
}

/// Write an artifact to the configured path, or to standard output when no
/// path was given. A confirmation goes to standard error so artifacts on
/// standard output stay clean.
pub fn write_artifact(out: Option<&Path>, content: &str) -> Result<(), String> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent)
                        .map_err(|err| format!("cannot create {}: {err}", parent.display()))?;
                }
            }
            fs::write(path, content)
                .map_err(|err| format!("cannot write {}: {err}", path.display()))?;
            eprintln!("wrote {} ({} bytes)", path.display(), content.len());
            Ok(())
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|err| format!("cannot write to stdout: {err}"))
        }
    }
}
