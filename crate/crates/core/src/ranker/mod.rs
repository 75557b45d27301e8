//! Concept retrieval: an exact cosine index over label vectors and a BM25
//! index over per-concept label documents.
//!
//! Both rank concepts, not labels. A concept's score is the best score of
//! any of its labels, and results are ordered by score descending with ties
//! broken by ascending concept id.

mod bm25;
mod vector;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::container::ContainerError;
use crate::embedder::EmbedError;
use crate::ontology::OntologyError;
use crate::text::StopwordError;

pub use bm25::{build_bm25_index, Bm25Index, Bm25Params};
pub use vector::{build_vector_index, search_concept, search_text, VectorIndex, VectorSearcher};

#[derive(Debug, Error)]
pub enum RankError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("concept query has no labels")]
    EmptyQueryConcept,
    #[error("encoder fingerprint `{found}` does not match index fingerprint `{expected}`")]
    EncoderMismatch { expected: String, found: String },
    #[error("malformed index: {0}")]
    MalformedIndex(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Stopwords(#[from] StopwordError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RankError {
    pub fn code(&self) -> String {
        match self {
            Self::InvalidK => "ranker.InvalidK".into(),
            Self::EmptyQueryConcept => "ranker.EmptyQueryConcept".into(),
            Self::EncoderMismatch { .. } => "ranker.EncoderMismatch".into(),
            Self::MalformedIndex(_) => "ranker.MalformedIndex".into(),
            Self::Embed(e) => format!("embedder.{}", e.code()),
            Self::Ontology(e) => format!("ontology.{}", e.code()),
            Self::Stopwords(_) => "ranker.MalformedStopwordFile".into(),
            Self::Container(_) => "ranker.MalformedIndex".into(),
            Self::Io { .. } => "ranker.Io".into(),
        }
    }
}

/// One entry of a ranked result list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHit {
    pub concept_id: String,
    pub best_label: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Anything that answers text-to-concept and concept-to-concept queries.
pub trait Ranker {
    fn search_text(&self, query: &str, k: usize) -> Result<Vec<RankedHit>, RankError>;

    fn search_concept(&self, query_labels: &[String], k: usize) -> Result<Vec<RankedHit>, RankError>;
}

impl<R: Ranker + ?Sized> Ranker for &R {
    fn search_text(&self, query: &str, k: usize) -> Result<Vec<RankedHit>, RankError> {
        (**self).search_text(query, k)
    }

    fn search_concept(&self, query_labels: &[String], k: usize) -> Result<Vec<RankedHit>, RankError> {
        (**self).search_concept(query_labels, k)
    }
}

/// Per-concept best score, keyed by the concept's position in ascending id
/// order; `label` is the index of the label that produced the score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Candidate {
    pub concept: usize,
    pub score: f64,
    pub label: usize,
}

/// Descending score, then ascending concept position.
pub(crate) fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .expect("finite scores")
        .then(a.concept.cmp(&b.concept))
}

/// Sorts the best `k` candidates into rank order.
pub(crate) fn top_k(mut candidates: Vec<Candidate>, k: usize) -> Vec<Candidate> {
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, rank_order);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(rank_order);
    candidates
}

/// Element-wise maximum of two per-concept score tables; the earlier entry
/// wins ties.
pub(crate) fn merge_max(acc: &mut [Option<Candidate>], next: &[Option<Candidate>]) {
    for (slot, cand) in acc.iter_mut().zip(next) {
        if let Some(c) = cand {
            match slot {
                Some(existing) if existing.score >= c.score => {}
                _ => *slot = Some(*c),
            }
        }
    }
}

pub(crate) fn check_k(k: usize) -> Result<(), RankError> {
    if k == 0 {
        Err(RankError::InvalidK)
    } else {
        Ok(())
    }
}
