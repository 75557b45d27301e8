//! Ranking evaluation: Hits@K, relation-graded nDCG@K, MRR, query/concept
//! token overlap with bucketed analysis, and a paired t-test between runs.

mod metrics;
mod run;
mod stats;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::OntologyError;
use crate::ranker::RankError;

pub use metrics::{
    bucketize_by_overlap, first_relevant_rank, hits_at_k, mrr, ndcg_at_k, ndcg_from_gains,
    overlap_degree, OverlapBucket, DEFAULT_BUCKET_EDGES,
};
pub use run::{
    compare_runs, evaluate_run, load_queries, parse_queries, Aggregates, EvalReport,
    PerQueryRecord, Significance, Statistic,
};
pub use stats::{paired_t_test, regularized_incomplete_beta, student_t_two_sided_p, TTest};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("query has no tokens left after stop-word removal")]
    EmptyQueryAfterStopwords,
    #[error("bucket edges must be strictly increasing from 0 to 1")]
    BadBucketEdges,
    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("a paired t-test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("query `{0}` is missing from the baseline run")]
    UnpairedQuery(String),
    #[error("baseline run has no Hits@{0}")]
    MissingCutoff(usize),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("k list must be non-empty and contain only positive values")]
    BadCutoffs,
    #[error("no queries to evaluate")]
    NoQueries,
    #[error("malformed query file {file}, line {line}: {reason}")]
    MalformedLine {
        file: String,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl EvalError {
    pub fn code(&self) -> String {
        let local = match self {
            Self::EmptyQueryAfterStopwords => "EmptyQueryAfterStopwords",
            Self::BadBucketEdges => "BadBucketEdges",
            Self::LengthMismatch(..) => "LengthMismatch",
            Self::TooFewPairs(_) => "TooFewPairs",
            Self::UnpairedQuery(_) => "UnpairedQuery",
            Self::MissingCutoff(_) => "MissingCutoff",
            Self::InvalidQuery(_) => "InvalidQuery",
            Self::BadCutoffs => "BadCutoffs",
            Self::NoQueries => "NoQueries",
            Self::MalformedLine { .. } => "MalformedLine",
            Self::Io { .. } => "Io",
            Self::Ontology(e) => return format!("ontology.{}", e.code()),
            Self::Rank(e) => return e.code(),
        };
        format!("eval.{local}")
    }
}

/// What a query searches with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryInput {
    Text(String),
    /// Labels of a source concept, searched together.
    Labels(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub query_id: String,
    pub input: QueryInput,
    pub relevant_ids: BTreeSet<String>,
}

impl EvalQuery {
    pub fn text<I, S>(id: impl Into<String>, text: impl Into<String>, relevant: I) -> Result<Self, EvalError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(id, QueryInput::Text(text.into()), relevant)
    }

    pub fn labels<L, T, I, S>(id: impl Into<String>, labels: L, relevant: I) -> Result<Self, EvalError>
    where
        L: IntoIterator<Item = T>,
        T: Into<String>,
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(id, QueryInput::Labels(labels.into_iter().map(Into::into).collect()), relevant)
    }

    pub fn new<I, S>(id: impl Into<String>, input: QueryInput, relevant: I) -> Result<Self, EvalError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let query_id = id.into();
        let relevant_ids: BTreeSet<String> = relevant.into_iter().map(Into::into).collect();
        if relevant_ids.is_empty() {
            return Err(EvalError::InvalidQuery(format!("{query_id}: no relevant ids")));
        }
        if let QueryInput::Labels(l) = &input {
            if l.is_empty() {
                return Err(EvalError::InvalidQuery(format!("{query_id}: no query labels")));
            }
        }
        Ok(Self {
            query_id,
            input,
            relevant_ids,
        })
    }

    /// The text used for overlap: the query itself, or all labels joined.
    pub fn overlap_text(&self) -> String {
        match &self.input {
            QueryInput::Text(t) => t.clone(),
            QueryInput::Labels(l) => l.join(" "),
        }
    }
}
