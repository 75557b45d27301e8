//! Tokenisation and stop-word handling shared by the encoders, BM25 and the
//! overlap analysis.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

/// The default English stop-word list bundled with the crate.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Lowercases `text` and splits it on every non-alphanumeric character.
///
/// Empty tokens are dropped. No stop-word removal happens here.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Error)]
pub enum StopwordError {
    #[error("cannot read stop-word file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed stop-word file {path}, line {line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },
}

/// A set of lowercase stop-words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopWords {
    words: BTreeSet<String>,
}

impl StopWords {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The bundled 30-word English list.
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS, "<builtin>").expect("bundled stop-word list is well-formed")
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    /// Reads a stop-word file: one token per line, `#` comments and blank
    /// lines ignored. A line holding more than one token is rejected.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, StopwordError> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let content = fs::read_to_string(path).map_err(|source| StopwordError::Io {
            path: display.clone(),
            source,
        })?;
        Self::parse(&content, &display)
    }

    pub fn parse(content: &str, origin: &str) -> Result<Self, StopwordError> {
        let mut words = BTreeSet::new();
        for (idx, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.split_whitespace().count() != 1 {
                return Err(StopwordError::Malformed {
                    path: origin.to_string(),
                    line: idx + 1,
                    reason: "expected exactly one token".into(),
                });
            }
            words.insert(line.to_lowercase());
        }
        Ok(Self { words })
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    /// Tokenises `text` and removes stop-words.
    pub fn content_tokens(&self, text: &str) -> Vec<String> {
        tokenize(text)
            .into_iter()
            .filter(|t| !self.contains(t))
            .collect()
    }

    /// Hex SHA-256 over the sorted word list, newline separated.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for w in &self.words {
            hasher.update(w.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for w in &self.words {
            out.push_str(w);
            out.push('\n');
        }
        out
    }
}
