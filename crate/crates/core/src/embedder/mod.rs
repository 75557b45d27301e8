//! Text encoders sharing one contract: a string goes in, a fixed-dimension
//! mean-pooled vector comes out.
//!
//! Three implementations are provided:
//! - [`SubwordEmbedder`]: hashed character n-gram bag, trainable with the
//!   triplet objective (see [`train`]).
//! - [`StaticWordVec`]: averaged pre-trained word vectors.
//! - [`Precomputed`]: exact-string lookup of vectors computed elsewhere.
//!
//! Training uses Euclidean distance; ranking uses [`cosine_similarity`].

mod loss;
mod subword;
mod train;
mod wordvec;

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::container::ContainerError;

pub use loss::{triplet_loss, triplet_loss_gradients, TripletGradients, DISTANCE_EPS};
pub use subword::{fnv1a64, SubwordEmbedder, DEFAULT_BUCKETS, DEFAULT_DIMENSION};
pub use train::{train, EpochStats, TrainConfig, TrainHistory};
pub use wordvec::{load_precomputed, load_word_vectors, Precomputed, StaticWordVec};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no precomputed embedding for `{0}`")]
    MissingEmbedding(String),
    #[error("{file}:{line}: expected {expected} values, found {found}")]
    InconsistentDimension {
        file: String,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{file}:{line}: {reason}")]
    MalformedLine {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Container(#[from] ContainerError),
}

impl EmbedError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::DimensionMismatch { .. } => "DimensionMismatch",
            Self::MissingEmbedding(_) => "MissingEmbedding",
            Self::InconsistentDimension { .. } => "InconsistentDimension",
            Self::MalformedLine { .. } => "MalformedLine",
            Self::EmptyDataset => "EmptyDataset",
            Self::InvalidConfig(_) => "InvalidConfig",
            Self::Io { .. } => "Io",
            Self::Container(_) => "Container",
        }
    }
}

/// A dense real vector; all entries finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn zeros(dimension: usize) -> Self {
        Self(vec![0.0; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Unit-length copy; vectors with norm below 1e-12 come back as zeros.
    pub fn normalized(&self) -> Self {
        let norm = self.norm();
        if norm < NORM_EPS {
            Self::zeros(self.dimension())
        } else {
            Self(self.0.iter().map(|v| v / norm).collect())
        }
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for EmbeddingVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for EmbeddingVector {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

const NORM_EPS: f64 = 1e-12;

/// `u·v / (‖u‖‖v‖)`, or 0 when either norm is below 1e-12.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, EmbedError> {
    if u.len() != v.len() {
        return Err(EmbedError::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let (mut dot, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    let (nu, nv) = (uu.sqrt(), vv.sqrt());
    if nu < NORM_EPS || nv < NORM_EPS {
        return Ok(0.0);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Text → vector contract shared by every encoder.
pub trait Encoder: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    /// Stable identifier of the encoder's parameters, stored with indexes.
    fn fingerprint(&self) -> String;
}

pub fn embed_text<E: Encoder + ?Sized>(encoder: &E, text: &str) -> Result<EmbeddingVector, EmbedError> {
    encoder.embed(text)
}

/// Any of the bundled encoders, chosen at runtime.
#[derive(Debug, Clone)]
pub enum AnyEncoder {
    Subword(SubwordEmbedder),
    WordVectors(StaticWordVec),
    Precomputed(Precomputed),
}

impl AnyEncoder {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Subword(_) => "subword",
            Self::WordVectors(_) => "word-vectors",
            Self::Precomputed(_) => "precomputed",
        }
    }
}

impl Encoder for AnyEncoder {
    fn dimension(&self) -> usize {
        match self {
            Self::Subword(e) => e.dimension(),
            Self::WordVectors(e) => e.dimension(),
            Self::Precomputed(e) => e.dimension(),
        }
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        match self {
            Self::Subword(e) => e.embed(text),
            Self::WordVectors(e) => e.embed(text),
            Self::Precomputed(e) => e.embed(text),
        }
    }

    fn fingerprint(&self) -> String {
        match self {
            Self::Subword(e) => e.fingerprint(),
            Self::WordVectors(e) => e.fingerprint(),
            Self::Precomputed(e) => e.fingerprint(),
        }
    }
}
