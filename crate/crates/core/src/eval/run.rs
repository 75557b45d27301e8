use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{
    bucket_index, bucketize_by_overlap, first_relevant_rank, hits_at_k, mrr, ndcg_at_k,
    overlap_degree, OverlapBucket, DEFAULT_BUCKET_EDGES,
};
use super::stats::paired_t_test;
use super::{EvalError, EvalQuery, QueryInput};
use crate::ontology::OntologyGraph;
use crate::ranker::Ranker;
use crate::text::StopWords;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerQueryRecord {
    pub query_id: String,
    pub first_relevant_rank: Option<usize>,
    pub hits_at_k: BTreeMap<usize, u8>,
    pub ndcg_at_k: BTreeMap<usize, f64>,
    pub mrr: f64,
    /// Absent when the query is empty after stop-word removal.
    pub overlap: Option<f64>,
    /// 1-based overlap bucket.
    pub bucket: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub queries: usize,
    pub hits_at_k: BTreeMap<usize, f64>,
    pub ndcg_at_k: BTreeMap<usize, f64>,
    pub mrr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub baseline: String,
    /// `hits@K` or `rr`.
    pub statistic: String,
    pub n: usize,
    /// Absent when infinite (constant non-zero differences); the sign is that
    /// of `mean_difference`.
    pub t: Option<f64>,
    pub p: f64,
    pub mean_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k_list: Vec<usize>,
    pub per_query: Vec<PerQueryRecord>,
    pub aggregates: Aggregates,
    pub buckets: Vec<OverlapBucket>,
    pub significance: Vec<Significance>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, EvalError> {
        serde_json::from_str(s).map_err(|e| EvalError::InvalidQuery(format!("bad report: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&s)
    }

    /// The cutoff the buckets and the `hits` statistic use: 10 when
    /// evaluated, otherwise the largest K.
    pub fn headline_k(&self) -> usize {
        headline_k(&self.k_list)
    }
}

fn headline_k(k_list: &[usize]) -> usize {
    if k_list.contains(&10) {
        10
    } else {
        *k_list.iter().max().expect("non-empty k list")
    }
}

/// Per-query statistic fed to the paired t-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Statistic {
    /// Hits@K indicator at the report's headline K.
    #[default]
    Hits,
    /// Reciprocal rank.
    Rr,
}

/// Runs every query through `ranker`, retrieving `max(k_list)` hits each.
pub fn evaluate_run(
    queries: &[EvalQuery],
    ranker: &dyn Ranker,
    graph: &OntologyGraph,
    stopwords: &StopWords,
    k_list: &[usize],
) -> Result<EvalReport, EvalError> {
    let ks: Vec<usize> = k_list.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if ks.is_empty() || ks[0] == 0 {
        return Err(EvalError::BadCutoffs);
    }
    if queries.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let max_k = *ks.last().unwrap();
    let bucket_k = headline_k(&ks);

    let mut per_query = Vec::with_capacity(queries.len());
    for q in queries {
        let results = match &q.input {
            QueryInput::Text(t) => ranker.search_text(t, max_k)?,
            QueryInput::Labels(l) => ranker.search_concept(l, max_k)?,
        };
        let mut hits = BTreeMap::new();
        let mut ndcg = BTreeMap::new();
        for &k in &ks {
            hits.insert(k, hits_at_k(&results, &q.relevant_ids, k));
            ndcg.insert(k, ndcg_at_k(&results, &q.relevant_ids, graph, k)?);
        }
        let overlap = query_overlap(q, graph, stopwords)?;
        per_query.push(PerQueryRecord {
            query_id: q.query_id.clone(),
            first_relevant_rank: first_relevant_rank(&results, &q.relevant_ids),
            hits_at_k: hits,
            ndcg_at_k: ndcg,
            mrr: mrr(&results, &q.relevant_ids),
            overlap,
            bucket: overlap.and_then(|o| bucket_index(o, &DEFAULT_BUCKET_EDGES)).map(|i| i + 1),
        });
    }

    let n = per_query.len() as f64;
    let mean_of = |f: &dyn Fn(&PerQueryRecord) -> f64| per_query.iter().map(f).sum::<f64>() / n;
    let aggregates = Aggregates {
        queries: per_query.len(),
        hits_at_k: ks
            .iter()
            .map(|&k| (k, mean_of(&|r| f64::from(r.hits_at_k[&k]))))
            .collect(),
        ndcg_at_k: ks.iter().map(|&k| (k, mean_of(&|r| r.ndcg_at_k[&k]))).collect(),
        mrr: mean_of(&|r| r.mrr),
    };

    let rows: Vec<(String, Option<f64>, u8)> = per_query
        .iter()
        .map(|r| (r.query_id.clone(), r.overlap, r.hits_at_k[&bucket_k]))
        .collect();
    let buckets = bucketize_by_overlap(&rows, &DEFAULT_BUCKET_EDGES, bucket_k)?;

    Ok(EvalReport {
        k_list: ks,
        per_query,
        aggregates,
        buckets,
        significance: Vec::new(),
    })
}

/// Best overlap over the relevant concepts; absent when no query token
/// survives stop-word removal.
fn query_overlap(
    q: &EvalQuery,
    graph: &OntologyGraph,
    stopwords: &StopWords,
) -> Result<Option<f64>, EvalError> {
    let text = q.overlap_text();
    let mut best: Option<f64> = None;
    for id in &q.relevant_ids {
        match overlap_degree(&text, graph.concept(id)?, stopwords) {
            Ok(o) => best = Some(best.map_or(o, |b: f64| b.max(o))),
            Err(EvalError::EmptyQueryAfterStopwords) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

/// Appends a paired t-test of `report` against `baseline`, pairing queries by
/// id.
pub fn compare_runs(
    report: &mut EvalReport,
    baseline_name: &str,
    baseline: &EvalReport,
    stat: Statistic,
) -> Result<(), EvalError> {
    if report.per_query.len() != baseline.per_query.len() {
        return Err(EvalError::LengthMismatch(
            report.per_query.len(),
            baseline.per_query.len(),
        ));
    }
    let k = report.headline_k();
    let value = |r: &PerQueryRecord| -> Result<f64, EvalError> {
        match stat {
            Statistic::Hits => r
                .hits_at_k
                .get(&k)
                .map(|&h| f64::from(h))
                .ok_or(EvalError::MissingCutoff(k)),
            Statistic::Rr => Ok(r.mrr),
        }
    };
    let by_id: HashMap<&str, &PerQueryRecord> = baseline
        .per_query
        .iter()
        .map(|r| (r.query_id.as_str(), r))
        .collect();
    let mut a = Vec::with_capacity(report.per_query.len());
    let mut b = Vec::with_capacity(report.per_query.len());
    for r in &report.per_query {
        let other = by_id
            .get(r.query_id.as_str())
            .ok_or_else(|| EvalError::UnpairedQuery(r.query_id.clone()))?;
        a.push(value(r)?);
        b.push(value(other)?);
    }
    let t = paired_t_test(&a, &b)?;
    report.significance.push(Significance {
        baseline: baseline_name.to_string(),
        statistic: match stat {
            Statistic::Hits => format!("hits@{k}"),
            Statistic::Rr => "rr".to_string(),
        },
        n: t.n,
        t: t.t.is_finite().then_some(t.t),
        p: t.p,
        mean_difference: t.mean_difference,
    });
    Ok(())
}

/// Parses `query_id<TAB>query<TAB>relevant_id[,relevant_id...]` lines. A
/// query field containing `|` is a list of concept labels.
pub fn parse_queries(content: &str, origin: &str) -> Result<Vec<EvalQuery>, EvalError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, raw) in content.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| EvalError::MalformedLine {
            file: origin.to_string(),
            line: idx + 1,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(bad("empty query id".into()));
        }
        if !seen.insert(id.to_string()) {
            return Err(bad(format!("duplicate query id `{id}`")));
        }
        let relevant: Vec<&str> = fields[2]
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        let input = if fields[1].contains('|') {
            QueryInput::Labels(
                fields[1]
                    .split('|')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect(),
            )
        } else {
            QueryInput::Text(fields[1].to_string())
        };
        out.push(EvalQuery::new(id, input, relevant).map_err(|e| bad(e.to_string()))?);
    }
    Ok(out)
}

pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<EvalQuery>, EvalError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_queries(&content, &path.display().to_string())
}
