//! Flat `key = value` config files.
//!
//! One assignment per line, `#` starts a comment, blank lines are skipped.
//! Parsing is strict: a key the consumer never reads is a hard error with
//! its line number, as is a duplicated key. [`KvReader`] implements that
//! contract: `take_*` reads and marks keys, `finish` rejects leftovers.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key '{key}'")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value for '{key}': {msg}")]
    BadValue {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("missing required key '{key}'")]
    MissingKey { key: String },
}

#[derive(Debug, Clone)]
struct KvEntry {
    key: String,
    value: String,
    line: usize,
    used: bool,
}

/// Ordered view of a parsed config file. Keys are consumed with `take_*`;
/// [`KvReader::finish`] fails on any key nothing asked for.
#[derive(Debug)]
pub struct KvReader {
    entries: Vec<KvEntry>,
}

impl KvReader {
    pub fn parse(text: &str) -> Result<KvReader, ConfigError> {
        let mut entries: Vec<KvEntry> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            let Some(eq) = content.find('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("expected 'key = value', got '{content}'"),
                });
            };
            let key = content[..eq].trim().to_string();
            let value = content[eq + 1..].trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    msg: "empty key".to_string(),
                });
            }
            if let Some(prev) = entries.iter().find(|e| e.key == key) {
                let _ = prev;
                return Err(ConfigError::DuplicateKey { line, key });
            }
            entries.push(KvEntry {
                key,
                value,
                line,
                used: false,
            });
        }
        Ok(KvReader { entries })
    }

    pub fn parse_file(path: &Path) -> Result<KvReader, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        KvReader::parse(&text)
    }

    /// Consumes `key` if present, returning its raw value and line.
    pub fn take_raw(&mut self, key: &str) -> Option<(String, usize)> {
        let entry = self.entries.iter_mut().find(|e| e.key == key)?;
        entry.used = true;
        Some((entry.value.clone(), entry.line))
    }

    /// Consumes `key` and parses it, or returns `default` when absent.
    pub fn take_or<T>(&mut self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.take_raw(key) {
            None => Ok(default),
            Some((value, line)) => value.parse().map_err(|e: T::Err| ConfigError::BadValue {
                line,
                key: key.to_string(),
                msg: e.to_string(),
            }),
        }
    }

    /// Consumes a required `key` and parses it.
    pub fn take_required<T>(&mut self, key: &str) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let (value, line) = self
            .take_raw(key)
            .ok_or_else(|| ConfigError::MissingKey {
                key: key.to_string(),
            })?;
        value.parse().map_err(|e: T::Err| ConfigError::BadValue {
            line,
            key: key.to_string(),
            msg: e.to_string(),
        })
    }

    /// Consumes every key starting with `prefix`, in file order, returning
    /// `(suffix, value, line)` triples.
    pub fn take_prefixed(&mut self, prefix: &str) -> Vec<(String, String, usize)> {
        let mut out = Vec::new();
        for entry in &mut self.entries {
            if !entry.used {
                if let Some(suffix) = entry.key.strip_prefix(prefix) {
                    entry.used = true;
                    out.push((suffix.to_string(), entry.value.clone(), entry.line));
                }
            }
        }
        out
    }

    /// Errors on the first key no `take_*` call consumed.
    pub fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().find(|e| !e.used) {
            None => Ok(()),
            Some(entry) => Err(ConfigError::UnknownKey {
                line: entry.line,
                key: entry.key,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_comments_and_blanks() {
        let text = "\n# comment\nalpha = 3.5  # trailing\n beta=hello world \n";
        let mut kv = KvReader::parse(text).unwrap();
        assert_eq!(kv.take_or("alpha", 0.0).unwrap(), 3.5);
        let (v, line) = kv.take_raw("beta").unwrap();
        assert_eq!(v, "hello world");
        assert_eq!(line, 4);
        kv.finish().unwrap();
    }

    #[test]
    fn unknown_key_errors_with_line() {
        let mut kv = KvReader::parse("good = 1\nbad_key = 2\n").unwrap();
        let _ = kv.take_or("good", 0usize).unwrap();
        match kv.finish() {
            Err(ConfigError::UnknownKey { line, key }) => {
                assert_eq!(line, 2);
                assert_eq!(key, "bad_key");
            }
            other => panic!("expected UnknownKey, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_is_rejected() {
        match KvReader::parse("a = 1\na = 2\n") {
            Err(ConfigError::DuplicateKey { line, key }) => {
                assert_eq!(line, 2);
                assert_eq!(key, "a");
            }
            other => panic!("expected DuplicateKey, got {other:?}"),
        }
    }

    #[test]
    fn bad_value_names_key_and_line() {
        let mut kv = KvReader::parse("rate = fast\n").unwrap();
        match kv.take_or("rate", 1.0) {
            Err(ConfigError::BadValue { line, key, .. }) => {
                assert_eq!(line, 1);
                assert_eq!(key, "rate");
            }
            other => panic!("expected BadValue, got {other:?}"),
        }
    }

    #[test]
    fn missing_required_key() {
        let mut kv = KvReader::parse("").unwrap();
        assert!(matches!(
            kv.take_required::<usize>("num_nodes"),
            Err(ConfigError::MissingKey { .. })
        ));
    }

    #[test]
    fn prefixed_keys_keep_file_order() {
        let mut kv =
            KvReader::parse("relation.b = 1\nother = x\nrelation.a = 2\n").unwrap();
        let rels = kv.take_prefixed("relation.");
        assert_eq!(rels.len(), 2);
        assert_eq!(rels[0].0, "b");
        assert_eq!(rels[1].0, "a");
        let _ = kv.take_raw("other");
        kv.finish().unwrap();
    }

    #[test]
    fn line_without_equals_is_syntax_error() {
        assert!(matches!(
            KvReader::parse("just a line\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
    }
}
