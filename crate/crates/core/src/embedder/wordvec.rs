//! File-backed encoders: averaged static word vectors and precomputed
//! whole-string vectors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{EmbedError, EmbeddingVector, Encoder};
use crate::text::tokenize;

fn read(path: &Path) -> Result<String, EmbedError> {
    fs::read_to_string(path).map_err(|source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_values(
    fields: &[&str],
    file: &str,
    line: usize,
) -> Result<Vec<f64>, EmbedError> {
    fields
        .iter()
        .map(|f| match f.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(EmbedError::MalformedLine {
                file: file.to_string(),
                line,
                reason: format!("`{f}` is not a finite number"),
            }),
        })
        .collect()
}

fn vectors_digest<'a>(kind: &str, entries: impl Iterator<Item = (&'a String, &'a Vec<f64>)>) -> String {
    let mut hasher = Sha256::new();
    for (key, values) in entries {
        hasher.update(key.as_bytes());
        hasher.update([0u8]);
        for v in values {
            hasher.update(v.to_le_bytes());
        }
    }
    format!("{kind}:{}", hex::encode(&hasher.finalize()[..8]))
}

/// Averages pre-trained token vectors; tokens missing from the vocabulary
/// are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticWordVec {
    dimension: usize,
    vectors: BTreeMap<String, Vec<f64>>,
    duplicate_tokens: usize,
}

impl StaticWordVec {
    pub fn from_vectors(dimension: usize, vectors: BTreeMap<String, Vec<f64>>) -> Result<Self, EmbedError> {
        if let Some(v) = vectors.values().find(|v| v.len() != dimension) {
            return Err(EmbedError::DimensionMismatch {
                expected: dimension,
                found: v.len(),
            });
        }
        Ok(Self {
            dimension,
            vectors,
            duplicate_tokens: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of rows whose token had already been seen (last one wins).
    pub fn duplicate_tokens(&self) -> usize {
        self.duplicate_tokens
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Text form: `token v1 ... vd` per line, no header.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (token, values) in &self.vectors {
            out.push_str(token);
            for v in values {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Reads the word-vector text format: an optional `N d` header, then one
/// `token v1 ... vd` row per line. The dimension comes from the header when
/// present, otherwise from the first row.
pub fn load_word_vectors(path: impl AsRef<Path>) -> Result<StaticWordVec, EmbedError> {
    let path = path.as_ref();
    let file = path.display().to_string();
    let content = read(path)?;

    let mut dimension: Option<usize> = None;
    let mut vectors = BTreeMap::new();
    let mut duplicates = 0;
    for (idx, line) in content.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if idx == 0 && fields.len() == 2 {
            if let (Ok(_), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                dimension = Some(d);
                continue;
            }
        }
        if fields.len() < 2 {
            return Err(EmbedError::MalformedLine {
                file,
                line: idx + 1,
                reason: "expected a token followed by values".into(),
            });
        }
        let values = parse_values(&fields[1..], &file, idx + 1)?;
        let expected = *dimension.get_or_insert(values.len());
        if values.len() != expected {
            return Err(EmbedError::InconsistentDimension {
                file,
                line: idx + 1,
                expected,
                found: values.len(),
            });
        }
        if vectors.insert(fields[0].to_string(), values).is_some() {
            duplicates += 1;
            log::warn!("{file}:{}: duplicate token `{}`, keeping last", idx + 1, fields[0]);
        }
    }

    Ok(StaticWordVec {
        dimension: dimension.unwrap_or(0),
        vectors,
        duplicate_tokens: duplicates,
    })
}

impl Encoder for StaticWordVec {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut sum = vec![0.0; self.dimension];
        let mut known = 0usize;
        for token in tokenize(text) {
            if let Some(v) = self.vectors.get(&token) {
                known += 1;
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
            }
        }
        if known > 0 {
            let inv = 1.0 / known as f64;
            sum.iter_mut().for_each(|s| *s *= inv);
        }
        Ok(EmbeddingVector::new(sum))
    }

    fn fingerprint(&self) -> String {
        vectors_digest("word-vectors", self.vectors.iter())
    }
}

/// Exact-string lookup of vectors produced outside this crate, e.g. CLS or
/// mean-pooled transformer outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Precomputed {
    dimension: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl Precomputed {
    pub fn from_vectors(dimension: usize, vectors: BTreeMap<String, Vec<f64>>) -> Result<Self, EmbedError> {
        if let Some(v) = vectors.values().find(|v| v.len() != dimension) {
            return Err(EmbedError::DimensionMismatch {
                expected: dimension,
                found: v.len(),
            });
        }
        Ok(Self { dimension, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (text, values) in &self.vectors {
            out.push_str(text);
            out.push('\t');
            for (i, v) in values.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbedError> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|source| EmbedError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Reads `text<TAB>v1 v2 ... vd` rows.
pub fn load_precomputed(path: impl AsRef<Path>) -> Result<Precomputed, EmbedError> {
    let path = path.as_ref();
    let file = path.display().to_string();
    let content = read(path)?;

    let mut dimension: Option<usize> = None;
    let mut vectors = BTreeMap::new();
    for (idx, line) in content.split('\n').enumerate() {
        if line.is_empty() {
            continue;
        }
        let Some((text, rest)) = line.split_once('\t') else {
            return Err(EmbedError::MalformedLine {
                file,
                line: idx + 1,
                reason: "expected `text<TAB>values`".into(),
            });
        };
        let fields: Vec<&str> = rest.split_whitespace().collect();
        if fields.is_empty() {
            return Err(EmbedError::MalformedLine {
                file,
                line: idx + 1,
                reason: "no values".into(),
            });
        }
        let values = parse_values(&fields, &file, idx + 1)?;
        let expected = *dimension.get_or_insert(values.len());
        if values.len() != expected {
            return Err(EmbedError::InconsistentDimension {
                file,
                line: idx + 1,
                expected,
                found: values.len(),
            });
        }
        if vectors.insert(text.to_string(), values).is_some() {
            log::warn!("{file}:{}: duplicate text `{text}`, keeping last", idx + 1);
        }
    }
    Ok(Precomputed {
        dimension: dimension.unwrap_or(0),
        vectors,
    })
}

impl Encoder for Precomputed {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        self.vectors
            .get(text)
            .map(|v| EmbeddingVector::new(v.clone()))
            .ok_or_else(|| EmbedError::MissingEmbedding(text.to_string()))
    }

    fn fingerprint(&self) -> String {
        vectors_digest("precomputed", self.vectors.iter())
    }
}
