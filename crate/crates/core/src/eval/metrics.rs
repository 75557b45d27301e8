use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ontology::{Concept, OntologyGraph};
use crate::ranker::RankedHit;
use crate::text::StopWords;

pub const DEFAULT_BUCKET_EDGES: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// 1-based rank of the first result whose id is relevant.
pub fn first_relevant_rank(results: &[RankedHit], relevant: &BTreeSet<String>) -> Option<usize> {
    results
        .iter()
        .position(|h| relevant.contains(&h.concept_id))
        .map(|i| i + 1)
}

/// 1 if any relevant id is among the first `k` results, else 0.
pub fn hits_at_k(results: &[RankedHit], relevant: &BTreeSet<String>, k: usize) -> u8 {
    match first_relevant_rank(results, relevant) {
        Some(r) if r <= k => 1,
        _ => 0,
    }
}

/// Reciprocal rank of the first relevant result; 0 on a miss.
pub fn mrr(results: &[RankedHit], relevant: &BTreeSet<String>) -> f64 {
    first_relevant_rank(results, relevant).map_or(0.0, |r| 1.0 / r as f64)
}

/// Linear-gain nDCG of `gains` in rank order, normalised by the same gains
/// sorted descending. 0 when every gain is 0.
pub fn ndcg_from_gains(gains: &[f64]) -> f64 {
    let dcg = |g: &[f64]| -> f64 {
        g.iter()
            .enumerate()
            .map(|(i, &g)| g / ((i + 2) as f64).log2())
            .sum()
    };
    let mut ideal = gains.to_vec();
    ideal.sort_by(|a, b| b.partial_cmp(a).expect("finite gains"));
    let idcg = dcg(&ideal);
    if idcg == 0.0 {
        0.0
    } else {
        dcg(gains) / idcg
    }
}

/// nDCG@k with gains from the ontology relation between each result and the
/// truth; with several truths each rank takes its best gain.
pub fn ndcg_at_k(
    results: &[RankedHit],
    truth_ids: &BTreeSet<String>,
    graph: &OntologyGraph,
    k: usize,
) -> Result<f64, EvalError> {
    for t in truth_ids {
        graph.concept(t)?;
    }
    let mut gains = Vec::with_capacity(k.min(results.len()));
    for hit in results.iter().take(k) {
        let mut best = 0u8;
        for t in truth_ids {
            best = best.max(graph.relation_between(&hit.concept_id, t)?.gain());
        }
        gains.push(f64::from(best));
    }
    Ok(ndcg_from_gains(&gains))
}

/// |T_q ∩ T_c| / |T_q| over distinct non-stop-word tokens, T_c pooled over
/// every label of the concept.
pub fn overlap_degree(query: &str, truth: &Concept, stopwords: &StopWords) -> Result<f64, EvalError> {
    let q: BTreeSet<String> = stopwords.content_tokens(query).into_iter().collect();
    if q.is_empty() {
        return Err(EvalError::EmptyQueryAfterStopwords);
    }
    let c: BTreeSet<String> = truth
        .labels
        .iter()
        .flat_map(|l| stopwords.content_tokens(l))
        .collect();
    let shared = q.intersection(&c).count();
    Ok(shared as f64 / q.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapBucket {
    pub lower: f64,
    pub upper: f64,
    pub query_ids: Vec<String>,
    /// Cutoff used for `mean_hits`.
    pub k: usize,
    /// Mean Hits@k of the members; absent for an empty bucket.
    pub mean_hits: Option<f64>,
}

/// Groups `(query_id, overlap, hits@k)` rows into `[lo, hi)` intervals, the
/// last one closed at 1. Rows without an overlap value are left out.
pub fn bucketize_by_overlap(
    rows: &[(String, Option<f64>, u8)],
    edges: &[f64],
    k: usize,
) -> Result<Vec<OverlapBucket>, EvalError> {
    let valid = edges.len() >= 2
        && edges[0] == 0.0
        && edges[edges.len() - 1] == 1.0
        && edges.windows(2).all(|w| w[0] < w[1]);
    if !valid {
        return Err(EvalError::BadBucketEdges);
    }
    let mut buckets: Vec<(OverlapBucket, u32)> = edges
        .windows(2)
        .map(|w| {
            (
                OverlapBucket {
                    lower: w[0],
                    upper: w[1],
                    query_ids: Vec::new(),
                    k,
                    mean_hits: None,
                },
                0,
            )
        })
        .collect();
    for (id, overlap, hits) in rows {
        let Some(o) = overlap else { continue };
        if let Some(i) = bucket_index(*o, edges) {
            buckets[i].0.query_ids.push(id.clone());
            buckets[i].1 += u32::from(*hits);
        }
    }
    Ok(buckets
        .into_iter()
        .map(|(mut b, total)| {
            if !b.query_ids.is_empty() {
                b.mean_hits = Some(f64::from(total) / b.query_ids.len() as f64);
            }
            b
        })
        .collect())
}

/// 0-based bucket containing `x`, or `None` outside `[0, 1]`.
pub(crate) fn bucket_index(x: f64, edges: &[f64]) -> Option<usize> {
    let last = edges.len() - 2;
    if x == edges[last + 1] {
        return Some(last);
    }
    edges.windows(2).position(|w| w[0] <= x && x < w[1])
}
