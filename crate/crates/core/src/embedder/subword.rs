use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingVector, Encoder};
use crate::container;
use crate::text::tokenize;

pub const DEFAULT_BUCKETS: usize = 1 << 15;
pub const DEFAULT_DIMENSION: usize = 64;
const CONTAINER_KIND: &str = "subword-embedder";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct Header {
    bucket_count: usize,
    dimension: usize,
    min_n: usize,
    max_n: usize,
    seed: u64,
}

/// Maps text to table rows; independent of the table contents.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FeatureHasher {
    bucket_count: usize,
    min_n: usize,
    max_n: usize,
}

impl FeatureHasher {
    fn feature_strings(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for token in tokenize(text) {
            let padded: Vec<char> = format!("<{token}>").chars().collect();
            out.push(token);
            for n in self.min_n..=self.max_n {
                if n > padded.len() {
                    break;
                }
                out.extend(padded.windows(n).map(|w| w.iter().collect::<String>()));
            }
        }
        out
    }

    pub(crate) fn features(&self, text: &str) -> Vec<usize> {
        self.feature_strings(text)
            .iter()
            .map(|f| (fnv1a64(f.as_bytes()) % self.bucket_count as u64) as usize)
            .collect()
    }
}

/// Hashed bag-of-subwords encoder.
///
/// Each token contributes itself plus every character n-gram (n in
/// `min_n..=max_n`) of `<token>`. Features are hashed into `bucket_count`
/// rows of a `bucket_count × dimension` table; the text vector is the mean of
/// the selected rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordEmbedder {
    bucket_count: usize,
    dimension: usize,
    min_n: usize,
    max_n: usize,
    seed: u64,
    pub(crate) table: Vec<f64>,
}

impl SubwordEmbedder {
    /// Fresh model with entries uniform in `[-0.5/d, 0.5/d]`.
    pub fn new(bucket_count: usize, dimension: usize, seed: u64) -> Result<Self, EmbedError> {
        if bucket_count == 0 || dimension == 0 {
            return Err(EmbedError::InvalidConfig(
                "bucket count and dimension must be positive".into(),
            ));
        }
        let scale = 0.5 / dimension as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = (0..bucket_count * dimension)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        Ok(Self {
            bucket_count,
            dimension,
            min_n: 3,
            max_n: 5,
            seed,
            table,
        })
    }

    pub fn bucket_count(&self) -> usize {
        self.bucket_count
    }

    pub fn ngram_range(&self) -> (usize, usize) {
        (self.min_n, self.max_n)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn row(&self, bucket: usize) -> &[f64] {
        &self.table[bucket * self.dimension..(bucket + 1) * self.dimension]
    }

    pub(crate) fn hasher(&self) -> FeatureHasher {
        FeatureHasher {
            bucket_count: self.bucket_count,
            min_n: self.min_n,
            max_n: self.max_n,
        }
    }

    /// Feature strings in emission order (duplicates kept).
    pub fn feature_strings(&self, text: &str) -> Vec<String> {
        self.hasher().feature_strings(text)
    }

    /// Bucket index of every feature of `text`.
    pub fn features(&self, text: &str) -> Vec<usize> {
        self.hasher().features(text)
    }

    pub(crate) fn pool(&self, features: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        if features.is_empty() {
            return out;
        }
        for &f in features {
            for (o, v) in out.iter_mut().zip(self.row(f)) {
                *o += v;
            }
        }
        let inv = 1.0 / features.len() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        out
    }

    fn header(&self) -> Header {
        Header {
            bucket_count: self.bucket_count,
            dimension: self.dimension,
            min_n: self.min_n,
            max_n: self.max_n,
            seed: self.seed,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        container::to_bytes(CONTAINER_KIND, &self.header(), &self.table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbedError> {
        Ok(container::write(path, CONTAINER_KIND, &self.header(), &self.table)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let (header, table): (Header, Vec<f64>) = container::read(path, CONTAINER_KIND)?;
        Self::from_parts(header, table)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbedError> {
        let (header, table): (Header, Vec<f64>) = container::from_bytes(bytes, CONTAINER_KIND)?;
        Self::from_parts(header, table)
    }

    fn from_parts(h: Header, table: Vec<f64>) -> Result<Self, EmbedError> {
        if h.bucket_count == 0 || h.dimension == 0 || h.min_n == 0 || h.min_n > h.max_n {
            return Err(EmbedError::InvalidConfig("bad model header".into()));
        }
        if table.len() != h.bucket_count * h.dimension {
            return Err(EmbedError::DimensionMismatch {
                expected: h.bucket_count * h.dimension,
                found: table.len(),
            });
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::InvalidConfig("non-finite table entry".into()));
        }
        Ok(Self {
            bucket_count: h.bucket_count,
            dimension: h.dimension,
            min_n: h.min_n,
            max_n: h.max_n,
            seed: h.seed,
            table,
        })
    }
}

impl Encoder for SubwordEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        Ok(EmbeddingVector::new(self.pool(&self.features(text))))
    }

    fn fingerprint(&self) -> String {
        format!("subword:{}", container::short_digest(&self.to_bytes()))
    }
}
