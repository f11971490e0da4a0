//! Flat `key = value` reports and the shared number format.

use std::fmt;

use crate::error::{QssError, Result};

/// Locale-independent decimal with 10 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_owned()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_owned()
    } else {
        format!("{x:.9e}")
    }
}

/// Ordered key/value record with a `#` comment header.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    header: Vec<String>,
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.header.push(line.into());
        self
    }

    pub fn text(&mut self, key: &str, value: impl fmt::Display) -> &mut Self {
        self.entries.push((key.to_owned(), value.to_string()));
        self
    }

    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        self.text(key, fmt_num(value))
    }

    pub fn int(&mut self, key: &str, value: u64) -> &mut Self {
        self.text(key, value)
    }

    pub fn flag(&mut self, key: &str, value: bool) -> &mut Self {
        self.text(key, value)
    }

    pub fn extend(&mut self, other: &Report) -> &mut Self {
        self.header.extend(other.header.iter().cloned());
        self.entries.extend(other.entries.iter().cloned());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.header {
            writeln!(f, "# {line}")?;
        }
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Parse `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(QssError::MalformedLine {
                line: i as u64 + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(QssError::MalformedLine {
                line: i as u64 + 1,
                message: "empty key".to_owned(),
            });
        }
        out.push((k.to_owned(), v.trim().to_owned()));
    }
    Ok(out)
}
