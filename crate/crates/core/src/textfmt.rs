//! Line-oriented `key value...` documents used for model and controller files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may repeat; order
//! is preserved.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct KvLine {
    pub line: usize,
    pub key: String,
    pub values: Vec<String>,
}

impl KvLine {
    pub fn value<T: FromStr>(&self, i: usize) -> Result<T> {
        let raw = self.values.get(i).ok_or_else(|| {
            Error::format(self.line, format!("`{}` needs at least {} values", self.key, i + 1))
        })?;
        raw.parse().map_err(|_| {
            Error::format(self.line, format!("cannot parse `{raw}` in `{}`", self.key))
        })
    }

    pub fn expect_len(&self, n: usize) -> Result<()> {
        if self.values.len() != n {
            return Err(Error::format(
                self.line,
                format!("`{}` takes {n} values, found {}", self.key, self.values.len()),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct KvDoc {
    entries: Vec<KvLine>,
}

impl KvDoc {
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| {
                let l = l.trim();
                if l.is_empty() || l.starts_with('#') {
                    return None;
                }
                let mut parts = l.split_whitespace().map(str::to_owned);
                let key = parts.next()?;
                Some(KvLine {
                    line: i + 1,
                    key,
                    values: parts.collect(),
                })
            })
            .collect();
        Self { entries }
    }

    pub fn get(&self, key: &str) -> Result<&KvLine> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .ok_or_else(|| Error::format(0, format!("missing key `{key}`")))
    }

    pub fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a KvLine> + 'a {
        self.entries.iter().filter(move |e| e.key == key)
    }

    pub fn scalar<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.value(0)
    }
}

/// Appends `key v0 v1 ...` to `out`.
pub fn push_line(out: &mut String, key: &str, values: &[&dyn std::fmt::Display]) {
    out.push_str(key);
    for v in values {
        let _ = write!(out, " {v}");
    }
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_values_and_skips_comments() {
        let doc = KvDoc::parse("# header\n\nn_in 3\nw 0.5\nw -1e-3\n");
        assert_eq!(doc.scalar::<usize>("n_in").unwrap(), 3);
        let ws: Vec<f64> = doc.all("w").map(|l| l.value(0).unwrap()).collect();
        assert_eq!(ws, vec![0.5, -1e-3]);
        assert_eq!(doc.get("w").unwrap().line, 4);
    }

    #[test]
    fn reports_line_of_bad_value() {
        let doc = KvDoc::parse("a 1\nb x\n");
        match doc.scalar::<f64>("b") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(doc.scalar::<f64>("c").is_err());
    }
}
