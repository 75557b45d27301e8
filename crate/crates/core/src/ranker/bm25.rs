//! Okapi BM25 over one document per concept, the document being the
//! stop-word-filtered tokens of all the concept's labels.
//!
//! score(D, Q) = Σ_t IDF(t) · tf·(k1+1) / (tf + k1·(1 − b + b·|D|/avgdl))
//! with IDF(t) = ln(1 + (N − df + 0.5)/(df + 0.5)), summed over the distinct
//! non-stop-word query terms.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_k, merge_max, top_k, Candidate, RankError, RankedHit, Ranker};
use crate::ontology::{OntologyError, OntologyGraph};
use crate::text::StopWords;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

const FORMAT_VERSION: u32 = 1;

/// Serialised form; postings are derived on load.
#[derive(Serialize, Deserialize)]
struct Stored {
    version: u32,
    k1: f64,
    b: f64,
    avgdl: f64,
    stopword_hash: String,
    stopwords: Vec<String>,
    concept_ids: Vec<String>,
    preferred_labels: Vec<String>,
    documents: Vec<BTreeMap<String, u32>>,
    df: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bm25Index {
    params: Bm25Params,
    stopwords: StopWords,
    concept_ids: Vec<String>,
    preferred_labels: Vec<String>,
    documents: Vec<BTreeMap<String, u32>>,
    doc_lengths: Vec<u32>,
    df: BTreeMap<String, u32>,
    avgdl: f64,
    postings: HashMap<String, Vec<usize>>,
}

/// Builds the index with default parameters, reading stop-words from
/// `stopwords_path`.
pub fn build_bm25_index(
    graph: &OntologyGraph,
    stopwords_path: impl AsRef<Path>,
) -> Result<Bm25Index, RankError> {
    let stopwords = StopWords::load(stopwords_path)?;
    Ok(Bm25Index::build(graph, stopwords, Bm25Params::default()))
}

impl Bm25Index {
    pub fn build(graph: &OntologyGraph, stopwords: StopWords, params: Bm25Params) -> Self {
        let mut concept_ids = Vec::with_capacity(graph.len());
        let mut preferred_labels = Vec::with_capacity(graph.len());
        let mut documents = Vec::with_capacity(graph.len());
        for concept in graph.concepts() {
            let mut doc: BTreeMap<String, u32> = BTreeMap::new();
            for label in &concept.labels {
                for token in stopwords.content_tokens(label) {
                    *doc.entry(token).or_default() += 1;
                }
            }
            concept_ids.push(concept.id.clone());
            preferred_labels.push(concept.preferred_label().to_string());
            documents.push(doc);
        }
        let mut df: BTreeMap<String, u32> = BTreeMap::new();
        for doc in &documents {
            for term in doc.keys() {
                *df.entry(term.clone()).or_default() += 1;
            }
        }
        let total: u64 = documents
            .iter()
            .map(|d| d.values().map(|&c| u64::from(c)).sum::<u64>())
            .sum();
        let avgdl = if documents.is_empty() {
            0.0
        } else {
            total as f64 / documents.len() as f64
        };
        Self::assemble(params, stopwords, concept_ids, preferred_labels, documents, df, avgdl)
    }

    fn assemble(
        params: Bm25Params,
        stopwords: StopWords,
        concept_ids: Vec<String>,
        preferred_labels: Vec<String>,
        documents: Vec<BTreeMap<String, u32>>,
        df: BTreeMap<String, u32>,
        avgdl: f64,
    ) -> Self {
        let doc_lengths = documents.iter().map(|d| d.values().sum()).collect();
        let mut postings: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, doc) in documents.iter().enumerate() {
            for term in doc.keys() {
                postings.entry(term.clone()).or_default().push(i);
            }
        }
        Self {
            params,
            stopwords,
            concept_ids,
            preferred_labels,
            documents,
            doc_lengths,
            df,
            avgdl,
            postings,
        }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn document_count(&self) -> usize {
        self.documents.len()
    }

    pub fn document_frequency(&self, term: &str) -> u32 {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn stopwords(&self) -> &StopWords {
        &self.stopwords
    }

    /// ln(1 + (N − df + 0.5)/(df + 0.5)).
    pub fn idf(&self, df: u32) -> f64 {
        let n = self.documents.len() as f64;
        let df = f64::from(df);
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Distinct query terms after stop-word removal, in sorted order.
    fn query_terms<S: AsRef<str>>(&self, tokens: &[S]) -> BTreeSet<String> {
        tokens
            .iter()
            .map(|t| t.as_ref().to_lowercase())
            .filter(|t| !self.stopwords.contains(t))
            .collect()
    }

    fn score_doc(&self, terms: &BTreeSet<String>, doc: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let len = f64::from(self.doc_lengths[doc]);
        let mut score = 0.0;
        for term in terms {
            let Some(&tf) = self.documents[doc].get(term) else {
                continue;
            };
            let tf = f64::from(tf);
            let norm = 1.0 - b + b * len / self.avgdl;
            score += self.idf(self.df[term]) * tf * (k1 + 1.0) / (tf + k1 * norm);
        }
        score
    }

    /// BM25 score of one concept for already-tokenised query terms.
    pub fn score<S: AsRef<str>>(&self, query_tokens: &[S], concept_id: &str) -> Result<f64, RankError> {
        let doc = self
            .concept_ids
            .binary_search_by(|id| id.as_str().cmp(concept_id))
            .map_err(|_| OntologyError::UnknownConceptId(concept_id.to_string()))?;
        Ok(self.score_doc(&self.query_terms(query_tokens), doc))
    }

    /// Every concept with a positive score for `query`.
    fn candidates(&self, query: &str) -> Vec<Option<Candidate>> {
        let terms = self.query_terms(&crate::text::tokenize(query));
        let mut docs: BTreeSet<usize> = BTreeSet::new();
        for term in &terms {
            if let Some(p) = self.postings.get(term) {
                docs.extend(p);
            }
        }
        let mut out = vec![None; self.documents.len()];
        for doc in docs {
            let score = self.score_doc(&terms, doc);
            if score > 0.0 {
                out[doc] = Some(Candidate {
                    concept: doc,
                    score,
                    label: 0,
                });
            }
        }
        out
    }

    fn to_hits(&self, ranked: Vec<Candidate>) -> Vec<RankedHit> {
        ranked
            .into_iter()
            .enumerate()
            .map(|(i, c)| RankedHit {
                concept_id: self.concept_ids[c.concept].clone(),
                best_label: self.preferred_labels[c.concept].clone(),
                score: c.score,
                rank: i + 1,
            })
            .collect()
    }

    /// Top-k concepts by BM25; concepts scoring zero are not returned.
    pub fn search(&self, query: &str, k: usize) -> Result<Vec<RankedHit>, RankError> {
        check_k(k)?;
        let cands = self.candidates(query).into_iter().flatten().collect();
        Ok(self.to_hits(top_k(cands, k)))
    }

    pub fn to_json(&self) -> String {
        let stored = Stored {
            version: FORMAT_VERSION,
            k1: self.params.k1,
            b: self.params.b,
            avgdl: self.avgdl,
            stopword_hash: self.stopwords.fingerprint(),
            stopwords: self.stopwords.iter().map(str::to_string).collect(),
            concept_ids: self.concept_ids.clone(),
            preferred_labels: self.preferred_labels.clone(),
            documents: self.documents.clone(),
            df: self.df.clone(),
        };
        let mut s = serde_json::to_string(&stored).expect("index serialises");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, RankError> {
        let stored: Stored =
            serde_json::from_str(s).map_err(|e| RankError::MalformedIndex(e.to_string()))?;
        if stored.version != FORMAT_VERSION {
            return Err(RankError::MalformedIndex(format!(
                "unsupported BM25 index version {}",
                stored.version
            )));
        }
        let n = stored.concept_ids.len();
        if stored.documents.len() != n || stored.preferred_labels.len() != n {
            return Err(RankError::MalformedIndex("document count mismatch".into()));
        }
        let stopwords = StopWords::from_words(&stored.stopwords);
        if stopwords.fingerprint() != stored.stopword_hash {
            return Err(RankError::MalformedIndex("stop-word hash mismatch".into()));
        }
        Ok(Self::assemble(
            Bm25Params {
                k1: stored.k1,
                b: stored.b,
            },
            stopwords,
            stored.concept_ids,
            stored.preferred_labels,
            stored.documents,
            stored.df,
            stored.avgdl,
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RankError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| RankError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RankError> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|source| RankError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&s)
    }
}

impl Ranker for Bm25Index {
    fn search_text(&self, query: &str, k: usize) -> Result<Vec<RankedHit>, RankError> {
        self.search(query, k)
    }

    fn search_concept(&self, query_labels: &[String], k: usize) -> Result<Vec<RankedHit>, RankError> {
        check_k(k)?;
        if query_labels.is_empty() {
            return Err(RankError::EmptyQueryConcept);
        }
        let mut acc = vec![None; self.documents.len()];
        for label in query_labels {
            merge_max(&mut acc, &self.candidates(label));
        }
        Ok(self.to_hits(top_k(acc.into_iter().flatten().collect(), k)))
    }
}
