use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, Result};

/// 17 significant digits: enough for any `f64` to parse back exactly.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Empty for absent or non-finite values.
pub fn fmt17_opt(v: Option<f64>) -> String {
    match v {
        Some(a) if a.is_finite() => fmt17(a),
        _ => String::new(),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
