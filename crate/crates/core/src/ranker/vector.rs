use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_k, merge_max, top_k, Candidate, RankError, RankedHit, Ranker};
use crate::container;
use crate::embedder::{EmbedError, EmbeddingVector, Encoder};
use crate::ontology::OntologyGraph;

const CONTAINER_KIND: &str = "vector-index";

/// Exact cosine index: one unit-normalised row per (concept, label).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dimension: usize,
    fingerprint: String,
    /// Ascending.
    concept_ids: Vec<String>,
    rows: Vec<f64>,
    row_concept: Vec<usize>,
    row_label: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dimension: usize,
    fingerprint: String,
    row_meta: Vec<(String, String)>,
}

/// Embeds every label of every concept. Zero vectors are stored as zero.
pub fn build_vector_index<E: Encoder + ?Sized>(
    graph: &OntologyGraph,
    encoder: &E,
) -> Result<VectorIndex, RankError> {
    let dimension = encoder.dimension();
    let mut index = VectorIndex {
        dimension,
        fingerprint: encoder.fingerprint(),
        concept_ids: Vec::with_capacity(graph.len()),
        rows: Vec::new(),
        row_concept: Vec::new(),
        row_label: Vec::new(),
    };
    for (pos, concept) in graph.concepts().enumerate() {
        index.concept_ids.push(concept.id.clone());
        for label in &concept.labels {
            let v = encoder.embed(label)?;
            if v.dimension() != dimension {
                return Err(EmbedError::DimensionMismatch {
                    expected: dimension,
                    found: v.dimension(),
                }
                .into());
            }
            index.rows.extend_from_slice(&v.normalized());
            index.row_concept.push(pos);
            index.row_label.push(label.clone());
        }
    }
    Ok(index)
}

impl VectorIndex {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn row_count(&self) -> usize {
        self.row_label.len()
    }

    pub fn concept_count(&self) -> usize {
        self.concept_ids.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dimension..(i + 1) * self.dimension]
    }

    /// `(concept id, label)` of row `i`.
    pub fn row_meta(&self, i: usize) -> (&str, &str) {
        (&self.concept_ids[self.row_concept[i]], &self.row_label[i])
    }

    /// Best cosine per concept against an already-encoded query.
    fn concept_scores(&self, query: &[f64]) -> Vec<Option<Candidate>> {
        let mut best: Vec<Option<Candidate>> = vec![None; self.concept_ids.len()];
        let qnorm = query.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (i, row) in self.rows.chunks_exact(self.dimension.max(1)).enumerate() {
            let score = if qnorm < 1e-12 {
                0.0
            } else {
                row.iter().zip(query).map(|(a, b)| a * b).sum::<f64>() / qnorm
            };
            let concept = self.row_concept[i];
            match &best[concept] {
                Some(c) if c.score >= score => {}
                _ => {
                    best[concept] = Some(Candidate {
                        concept,
                        score,
                        label: i,
                    })
                }
            }
        }
        best
    }

    fn to_hits(&self, ranked: Vec<Candidate>) -> Vec<RankedHit> {
        ranked
            .into_iter()
            .enumerate()
            .map(|(i, c)| RankedHit {
                concept_id: self.concept_ids[c.concept].clone(),
                best_label: self.row_label[c.label].clone(),
                score: c.score,
                rank: i + 1,
            })
            .collect()
    }

    fn check_query(&self, v: &EmbeddingVector) -> Result<(), RankError> {
        if v.dimension() != self.dimension {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dimension,
                found: v.dimension(),
            }
            .into());
        }
        Ok(())
    }

    /// Top-k concepts for a pre-encoded query vector.
    pub fn search_vector(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<RankedHit>, RankError> {
        check_k(k)?;
        self.check_query(query)?;
        let candidates = self.concept_scores(query).into_iter().flatten().collect();
        Ok(self.to_hits(top_k(candidates, k)))
    }

    /// Aggregates several pre-encoded queries by per-concept maximum.
    pub fn search_vectors(&self, queries: &[EmbeddingVector], k: usize) -> Result<Vec<RankedHit>, RankError> {
        check_k(k)?;
        if queries.is_empty() {
            return Err(RankError::EmptyQueryConcept);
        }
        let mut acc: Vec<Option<Candidate>> = vec![None; self.concept_ids.len()];
        for q in queries {
            self.check_query(q)?;
            merge_max(&mut acc, &self.concept_scores(q));
        }
        Ok(self.to_hits(top_k(acc.into_iter().flatten().collect(), k)))
    }

    fn header(&self) -> Header {
        Header {
            dimension: self.dimension,
            fingerprint: self.fingerprint.clone(),
            row_meta: (0..self.row_count())
                .map(|i| {
                    let (c, l) = self.row_meta(i);
                    (c.to_string(), l.to_string())
                })
                .collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        container::to_bytes(CONTAINER_KIND, &self.header(), &self.rows)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RankError> {
        Ok(container::write(path, CONTAINER_KIND, &self.header(), &self.rows)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RankError> {
        let (header, rows): (Header, Vec<f64>) = container::read(path, CONTAINER_KIND)?;
        if rows.len() != header.row_meta.len() * header.dimension {
            return Err(RankError::MalformedIndex("row count does not match metadata".into()));
        }
        let mut concept_ids: Vec<String> = Vec::new();
        let mut row_concept = Vec::with_capacity(header.row_meta.len());
        let mut row_label = Vec::with_capacity(header.row_meta.len());
        for (concept, label) in header.row_meta {
            match concept_ids.last() {
                Some(last) if *last == concept => {}
                Some(last) if *last > concept => {
                    return Err(RankError::MalformedIndex("rows not grouped by ascending concept id".into()))
                }
                _ => concept_ids.push(concept),
            }
            row_concept.push(concept_ids.len() - 1);
            row_label.push(label);
        }
        Ok(Self {
            dimension: header.dimension,
            fingerprint: header.fingerprint,
            concept_ids,
            rows,
            row_concept,
            row_label,
        })
    }
}

/// A vector index paired with the encoder that built it.
pub struct VectorSearcher<'a, E: Encoder + ?Sized> {
    index: &'a VectorIndex,
    encoder: &'a E,
}

impl<'a, E: Encoder + ?Sized> VectorSearcher<'a, E> {
    /// Fails when the encoder is not the one the index was built with.
    pub fn new(index: &'a VectorIndex, encoder: &'a E) -> Result<Self, RankError> {
        let found = encoder.fingerprint();
        if found != index.fingerprint {
            return Err(RankError::EncoderMismatch {
                expected: index.fingerprint.clone(),
                found,
            });
        }
        Ok(Self { index, encoder })
    }
}

impl<E: Encoder + ?Sized> Ranker for VectorSearcher<'_, E> {
    fn search_text(&self, query: &str, k: usize) -> Result<Vec<RankedHit>, RankError> {
        check_k(k)?;
        let q = self.encoder.embed(query)?;
        self.index.search_vector(&q, k)
    }

    fn search_concept(&self, query_labels: &[String], k: usize) -> Result<Vec<RankedHit>, RankError> {
        check_k(k)?;
        if query_labels.is_empty() {
            return Err(RankError::EmptyQueryConcept);
        }
        let queries = query_labels
            .iter()
            .map(|l| self.encoder.embed(l))
            .collect::<Result<Vec<_>, _>>()?;
        self.index.search_vectors(&queries, k)
    }
}

/// Convenience wrapper: encode `query` and return the top `k` concepts.
pub fn search_text<E: Encoder + ?Sized>(
    index: &VectorIndex,
    query: &str,
    k: usize,
    encoder: &E,
) -> Result<Vec<RankedHit>, RankError> {
    VectorSearcher::new(index, encoder)?.search_text(query, k)
}

/// Runs every query label and keeps each concept's maximum score.
pub fn search_concept<E: Encoder + ?Sized>(
    index: &VectorIndex,
    query_labels: &[String],
    k: usize,
    encoder: &E,
) -> Result<Vec<RankedHit>, RankError> {
    VectorSearcher::new(index, encoder)?.search_concept(query_labels, k)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::embedder::Precomputed;
    use crate::ontology::Concept;

    fn encoder(entries: &[(&str, [f64; 2])]) -> Precomputed {
        let map: BTreeMap<String, Vec<f64>> =
            entries.iter().map(|(t, v)| (t.to_string(), v.to_vec())).collect();
        Precomputed::from_vectors(2, map).unwrap()
    }

    fn setup() -> (OntologyGraph, Precomputed) {
        let g = OntologyGraph::from_concepts([
            Concept::new("A", ["a1", "a2"]),
            Concept::new("B", ["b1", "b2"]),
        ])
        .unwrap();
        let enc = encoder(&[
            ("a1", [1.0, 0.0]),
            ("a2", [0.6, 0.8]),
            ("b1", [0.0, 1.0]),
            ("b2", [-1.0, 0.0]),
            ("q", [0.8, 0.6]),
            ("zero", [0.0, 0.0]),
        ]);
        (g, enc)
    }

    #[test]
    fn one_row_per_label() {
        let (g, enc) = setup();
        let idx = build_vector_index(&g, &enc).unwrap();
        assert_eq!(idx.row_count(), 4);
        assert_eq!(idx, build_vector_index(&g, &enc).unwrap());
        assert_eq!(idx.row_meta(2), ("B", "b1"));
    }

    #[test]
    fn self_match_ranks_first() {
        let (g, enc) = setup();
        let idx = build_vector_index(&g, &enc).unwrap();
        let hits = search_text(&idx, "b2", 10, &enc).unwrap();
        assert_eq!(hits[0].concept_id, "B");
        assert_eq!(hits[0].best_label, "b2");
        assert!((hits[0].score - 1.0).abs() < 1e-12);
        assert_eq!(hits.len(), 2);
    }

    #[test]
    fn concept_keeps_best_label() {
        let (g, enc) = setup();
        let idx = build_vector_index(&g, &enc).unwrap();
        let hits = search_text(&idx, "q", 5, &enc).unwrap();
        // a1 scores 0.8, a2 scores 0.96
        assert_eq!(hits[0].concept_id, "A");
        assert_eq!(hits[0].best_label, "a2");
        assert!((hits[0].score - 0.96).abs() < 1e-12);
        assert_eq!(hits.iter().filter(|h| h.concept_id == "A").count(), 1);
        assert_eq!(hits.iter().map(|h| h.rank).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn zero_query_scores_zero_and_ties_by_id() {
        let (g, enc) = setup();
        let idx = build_vector_index(&g, &enc).unwrap();
        let hits = search_text(&idx, "zero", 5, &enc).unwrap();
        assert_eq!(hits[0].concept_id, "A");
        assert!(hits.iter().all(|h| h.score == 0.0));
    }

    #[test]
    fn concept_query_takes_max() {
        let (g, enc) = setup();
        let idx = build_vector_index(&g, &enc).unwrap();
        let single = search_concept(&idx, &["q".into()], 5, &enc).unwrap();
        assert_eq!(single, search_text(&idx, "q", 5, &enc).unwrap());
        let both = search_concept(&idx, &["q".into(), "b1".into()], 5, &enc).unwrap();
        let b = both.iter().find(|h| h.concept_id == "B").unwrap();
        assert!((b.score - 1.0).abs() < 1e-12);
        assert!(matches!(
            search_concept(&idx, &[], 5, &enc),
            Err(RankError::EmptyQueryConcept)
        ));
    }

    #[test]
    fn empty_graph_and_bad_k() {
        let (_, enc) = setup();
        let idx = build_vector_index(&OntologyGraph::default(), &enc).unwrap();
        assert!(search_text(&idx, "q", 3, &enc).unwrap().is_empty());
        assert!(matches!(search_text(&idx, "q", 0, &enc), Err(RankError::InvalidK)));
    }

    #[test]
    fn foreign_encoder_rejected() {
        let (g, enc) = setup();
        let idx = build_vector_index(&g, &enc).unwrap();
        let other = encoder(&[("q", [1.0, 1.0])]);
        assert!(matches!(
            search_text(&idx, "q", 3, &other),
            Err(RankError::EncoderMismatch { .. })
        ));
    }

    #[test]
    fn persistence_is_bitwise() {
        let (g, enc) = setup();
        let idx = build_vector_index(&g, &enc).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.idx");
        idx.save(&path).unwrap();
        let back = VectorIndex::load(&path).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.to_bytes(), idx.to_bytes());
    }
}
