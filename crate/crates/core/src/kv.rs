//! Flat `key = value` text format shared by raster headers and run configs.

use std::fmt::Write as _;

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// skipped. Keys are trimmed and lowercased; values are trimmed.
pub(crate) fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`", lineno + 1));
        };
        let key = key.trim().to_ascii_lowercase();
        if key.is_empty() {
            return Err(format!("line {}: empty key", lineno + 1));
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(format!("line {}: duplicate key `{key}`", lineno + 1));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn render<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

/// Splits a comma list, tolerating ENVI-style surrounding braces.
pub(crate) fn split_list(value: &str) -> Vec<String> {
    let v = value.trim().trim_start_matches('{').trim_end_matches('}');
    v.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}
