//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p ontosearch-core --test acceptance -- --nocapture`
//! to see the report.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use ontosearch_core::embedder::{
    train, triplet_loss, triplet_loss_gradients, Precomputed, SubwordEmbedder, TrainConfig,
};
use ontosearch_core::eval::{evaluate_run, mrr, ndcg_at_k, overlap_degree, paired_t_test, EvalQuery};
use ontosearch_core::ranker::{build_vector_index, Bm25Index, Bm25Params, RankedHit, Ranker, VectorSearcher};
use ontosearch_core::text::StopWords;
use ontosearch_core::tripletgen::{generate_triplets, GenerateOptions};
use ontosearch_core::{Concept, OntologyGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria expected to fail, with the reason printed alongside.
const KNOWN_GAPS: &[(u32, &str)] = &[(
    1,
    "linear-gain nDCG of [3,1,2,1,1] is 0.976533, 5.3e-4 from 0.976; the expected value looks truncated",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn hits(ids: &[&str]) -> Vec<RankedHit> {
    ids.iter()
        .enumerate()
        .map(|(i, id)| RankedHit {
            concept_id: id.to_string(),
            best_label: String::new(),
            score: 1.0 - 0.1 * i as f64,
            rank: i + 1,
        })
        .collect()
}

fn set(ids: &[&str]) -> BTreeSet<String> {
    ids.iter().map(|s| s.to_string()).collect()
}

/// Energy > {Fatigue, Exhaustion}; Fatigue > {Asthenia, Feeling tired}.
fn asthenia_fragment() -> OntologyGraph {
    OntologyGraph::from_concepts([
        Concept::new("248381006", ["Energy and stamina finding"]),
        Concept::new("84229001", ["Fatigue", "Weariness"]).with_parents(["248381006"]),
        Concept::new("60119000", ["Exhaustion"]).with_parents(["248381006"]),
        Concept::new("13791008", ["Asthenia", "Lassitude"]).with_parents(["84229001"]),
        Concept::new("224960004", ["Feeling tired"]).with_parents(["84229001"]),
    ])
    .unwrap()
}

fn ndcg_example() -> Outcome {
    // Correct, sibling, parent, uncle, grandparent.
    let g = asthenia_fragment();
    let r = hits(&["13791008", "224960004", "84229001", "60119000", "248381006"]);
    let n = ndcg_at_k(&r, &set(&["13791008"]), &g, 5).unwrap();
    let oracle = {
        let dcg = |g: &[f64]| -> f64 { g.iter().enumerate().map(|(i, x)| x / (i as f64 + 2.0).log2()).sum() };
        dcg(&[3.0, 1.0, 2.0, 1.0, 1.0]) / dcg(&[3.0, 2.0, 1.0, 1.0, 1.0])
    };
    let pass = (n - 0.976).abs() <= 5e-4;
    outcome(
        pass,
        format!(
            "nDCG@5 = {n:.6} (oracle {oracle:.6}, |x - 0.976| = {:.2e}, tolerance 5e-4)",
            (n - 0.976).abs()
        ),
    )
}

fn mrr_examples() -> Outcome {
    let r = hits(&["a", "b", "c", "d", "e", "f", "g"]);
    let got: Vec<f64> = ["a", "b", "e", "g"].iter().map(|id| mrr(&r, &set(&[id]))).collect();
    let want = [1.0, 0.5, 0.2, 0.142857];
    let tol = [1e-9, 1e-9, 1e-9, 1e-6];
    let pass = got.iter().zip(want).zip(tol).all(|((g, w), t)| (g - w).abs() <= t);
    outcome(pass, format!("ranks 1,2,5,7 -> {got:?}"))
}

fn overlap_examples() -> Outcome {
    let sw = StopWords::english();
    let retinal = Concept::new("271728000", ["Retinal arteries attenuated"]);
    let macro_ = Concept::new("71485000", ["Macrodontia"]);
    let a = overlap_degree("narrow retinal arterioles", &retinal, &sw).unwrap();
    let b = overlap_degree("tooth mass excess", &macro_, &sw).unwrap();
    outcome(a == 1.0 / 3.0 && b == 0.0, format!("retinal {a}, macrodontia {b}"))
}

fn triplet_oracle() -> Outcome {
    let g = asthenia_fragment();
    let run = || generate_triplets(&g, 7, GenerateOptions::default());
    let (a, b) = (run(), run());
    let identical = a.to_tsv() == b.to_tsv();

    // Hand enumeration for Asthenia: parents' labels {Fatigue, Weariness},
    // others = sibling + uncle labels {Exhaustion, Feeling tired}. Each of
    // the 2 ordered label pairs yields (l1,l2,p), (l1,l2,o), (l1,p,o) with
    // one shared draw of p and o.
    let parents = set(&["Fatigue", "Weariness"]);
    let others = set(&["Exhaustion", "Feeling tired"]);
    let asth: Vec<_> = a
        .entries
        .iter()
        .filter(|t| t.anchor == "Asthenia" || t.anchor == "Lassitude")
        .collect();
    let mut structure_ok = asth.len() == 6;
    for chunk in asth.chunks(3) {
        let [x, y, z] = chunk else {
            structure_ok = false;
            continue;
        };
        let other_label = if x.anchor == "Asthenia" { "Lassitude" } else { "Asthenia" };
        structure_ok &= x.positive == other_label && y.positive == other_label;
        structure_ok &= parents.contains(&x.negative) && others.contains(&y.negative);
        structure_ok &= z.anchor == x.anchor && z.positive == x.negative && z.negative == y.negative;
    }
    // 3·n·(n−1) for each concept with both pools non-empty: Asthenia and
    // Fatigue (2 labels each). Single-label concepts emit nothing.
    let total_ok = a.len() == 6 + 6;
    outcome(
        identical && structure_ok && total_ok,
        format!("{} entries, Asthenia block {} entries, reproducible {identical}", a.len(), asth.len()),
    )
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = 8;
    let h = 1e-4;
    let margin = 0.1;
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 100 {
        let mut v = || -> Vec<f64> { (0..d).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let (a, p, n) = (v(), v(), v());
        let dist = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let loss = triplet_loss(&a, &p, &n, margin).unwrap();
        if loss <= 1e-3 || dist(&a, &p) <= 1e-3 || dist(&a, &n) <= 1e-3 {
            continue;
        }
        let g = triplet_loss_gradients(&a, &p, &n, margin).unwrap();
        for (which, analytic) in [(0, &g.anchor), (1, &g.positive), (2, &g.negative)] {
            let mut numeric = vec![0.0; d];
            for i in 0..d {
                let mut vs = [a.clone(), p.clone(), n.clone()];
                vs[which][i] += h;
                let up = triplet_loss(&vs[0], &vs[1], &vs[2], margin).unwrap();
                vs[which][i] -= 2.0 * h;
                let down = triplet_loss(&vs[0], &vs[1], &vs[2], margin).unwrap();
                numeric[i] = (up - down) / (2.0 * h);
            }
            let diff = dist(analytic, &numeric);
            let scale = dist(analytic, &vec![0.0; d]).max(dist(&numeric, &vec![0.0; d])).max(1e-12);
            worst = worst.max(diff / scale);
        }
        checked += 1;
    }
    outcome(worst < 1e-4, format!("max relative error {worst:.3e} over {checked} triplets"))
}

fn exact_retrieval() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = 16;
    let n = 1000;
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let v: Vec<f64> = match i % 10 {
            // Exact duplicates and power-of-two multiples create genuine ties.
            7 => vectors[i - 3].clone(),
            9 => vectors[i - 5].iter().map(|x| x * 4.0).collect(),
            _ => (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        vectors.push(v);
    }
    let mut table = BTreeMap::new();
    let mut concepts = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        // Descending ids so that id order and insertion order disagree.
        let id = format!("c{:04}", n - i);
        let label = format!("label {i}");
        table.insert(label.clone(), v.clone());
        concepts.push(Concept::new(id, [label]));
    }
    let queries: Vec<Vec<f64>> = (0..20)
        .map(|j| {
            if j % 4 == 0 {
                vectors[j * 37].clone()
            } else {
                (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
            }
        })
        .collect();
    for (j, q) in queries.iter().enumerate() {
        table.insert(format!("query {j}"), q.clone());
    }
    let encoder = Precomputed::from_vectors(d, table).unwrap();
    let graph = OntologyGraph::from_concepts(concepts.clone()).unwrap();
    let index = build_vector_index(&graph, &encoder).unwrap();
    let searcher = VectorSearcher::new(&index, &encoder).unwrap();

    let mut mismatches = 0;
    for (j, q) in queries.iter().enumerate() {
        let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut oracle: Vec<(f64, String)> = concepts
            .iter()
            .zip(&vectors)
            .map(|(c, v)| {
                let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a / vn * b).sum();
                (dot / qn, c.id.clone())
            })
            .collect();
        oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
        for k in [1, 5, 10, 100] {
            let got = searcher.search_text(&format!("query {j}"), k).unwrap();
            let same = got.len() == k
                && got
                    .iter()
                    .zip(&oracle)
                    .all(|(h, (s, id))| &h.concept_id == id && h.score.to_bits() == s.to_bits());
            if !same {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("{} queries x 4 cutoffs, {mismatches} mismatches", queries.len()))
}

fn bm25_formula(tf: f64, df: f64, n: f64, len: f64, avgdl: f64) -> f64 {
    let (k1, b) = (1.2, 0.75);
    let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
    idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avgdl))
}

fn bm25_oracle() -> Outcome {
    let graph = OntologyGraph::from_concepts([
        Concept::new("D1", ["headache head pain"]),
        Concept::new("D2", ["vomiting"]),
        Concept::new("D3", ["injury of muscle"]),
    ])
    .unwrap();
    // 3/1/3 tokens, avgdl 7/3.
    let plain = Bm25Index::build(&graph, StopWords::empty(), Bm25Params::default());
    let s_plain = plain.score(&["headache"], "D1").unwrap();
    let o_plain = bm25_formula(1.0, 1.0, 3.0, 3.0, 7.0 / 3.0);
    // With "of" removed D3 keeps 2 tokens and avgdl drops to 2.
    let stopped = Bm25Index::build(&graph, StopWords::from_words(["of"]), Bm25Params::default());
    let s_stop = stopped.score(&["headache"], "D1").unwrap();
    let o_stop = bm25_formula(1.0, 1.0, 3.0, 3.0, 2.0);
    let fixture_ok = (s_plain - o_plain).abs() < 1e-9
        && (s_plain - 0.8782).abs() < 5e-5
        && (s_stop - o_stop).abs() < 1e-9;

    // Randomised corpora: single-term monotonicity in tf and strictly
    // decreasing IDF.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vocab: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
    let mut props_ok = true;
    for trial in 0..200 {
        let docs: Vec<Vec<String>> = (0..rng.random_range(1..8))
            .map(|_| {
                (0..rng.random_range(1..6))
                    .map(|_| vocab[rng.random_range(0..vocab.len())].clone())
                    .collect()
            })
            .collect();
        let build = |docs: &[Vec<String>]| {
            let concepts = docs
                .iter()
                .enumerate()
                .map(|(i, d)| Concept::new(format!("d{i:02}"), [d.join(" ")]));
            Bm25Index::build(
                &OntologyGraph::from_concepts(concepts).unwrap(),
                StopWords::empty(),
                Bm25Params::default(),
            )
        };
        let before = build(&docs);
        let target = rng.random_range(0..docs.len());
        let term = vocab[rng.random_range(0..vocab.len())].clone();
        let mut grown = docs.clone();
        grown[target].push(term.clone());
        let after = build(&grown);
        let id = format!("d{target:02}");
        let s0 = before.score(&[term.as_str()], &id).unwrap();
        let s1 = after.score(&[term.as_str()], &id).unwrap();
        props_ok &= s1 >= s0;
        let idfs: Vec<f64> = (0..=before.document_count() as u32).map(|df| before.idf(df)).collect();
        props_ok &= idfs.windows(2).all(|w| w[1] < w[0]);
        if !props_ok {
            return outcome(false, format!("property violated on trial {trial}"));
        }
    }
    outcome(
        fixture_ok && props_ok,
        format!("score {s_plain:.6} (oracle {o_plain:.6}); with `of` removed {s_stop:.6} (oracle {o_stop:.6}); 200 random corpora"),
    )
}

fn t_test_oracle() -> Outcome {
    let zero = paired_t_test(&[0.3, 0.7, 1.0], &[0.3, 0.7, 1.0]).unwrap();
    let one = paired_t_test(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
    // ν = 1 is Cauchy: P(|T| ≥ t) = 1 − (2/π)·atan(t).
    let closed = 1.0 - 2.0 / std::f64::consts::PI * one.t.atan();
    let pass = zero.p == 1.0 && (one.t - 1.0).abs() < 1e-12 && (one.p - 0.5).abs() < 1e-9 && (one.p - closed).abs() < 1e-9;
    outcome(pass, format!("zero diffs p = {}; d = [1, 0] t = {}, p = {}", zero.p, one.t, one.p))
}

/// Pseudo-words built from random syllables, unique across the whole call.
fn pseudo_words(rng: &mut ChaCha8Rng, count: usize) -> Vec<String> {
    const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
    const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let syllables = rng.random_range(2..4);
        let w: String = (0..syllables)
            .map(|_| {
                format!(
                    "{}{}",
                    ONSETS[rng.random_range(0..ONSETS.len())],
                    VOWELS[rng.random_range(0..VOWELS.len())]
                )
            })
            .collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn vocabulary_mismatch() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100;
    let words = pseudo_words(&mut rng, n * 3 * 2);
    let mut concepts = Vec::with_capacity(n);
    for i in 0..n {
        let labels: Vec<String> = (0..3)
            .map(|j| format!("{} {}", words[(i * 3 + j) * 2], words[(i * 3 + j) * 2 + 1]))
            .collect();
        let id = format!("c{i:03}");
        let concept = Concept::new(id, labels);
        // Root, ten branches, the rest spread across the branches.
        concepts.push(match i {
            0 => concept,
            1..=10 => concept.with_parents(["c000".to_string()]),
            _ => concept.with_parents([format!("c{:03}", 1 + (i - 11) % 10)]),
        });
    }
    let full = OntologyGraph::from_concepts(concepts.clone()).unwrap();

    let triplets = generate_triplets(&full, 2024, GenerateOptions::default());
    let mut model = SubwordEmbedder::new(1 << 15, 64, 2024).unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        learning_rate: 1e-3,
        batch_size: 32,
        margin: 0.1,
        seed: 2024,
        ..Default::default()
    };
    let history = train(&mut model, &triplets, &Default::default(), &cfg).unwrap();

    // Query with the first label; index the other two.
    let held_out = OntologyGraph::from_concepts(concepts.iter().map(|c| {
        let mut c = c.clone();
        c.labels.remove(0);
        c
    }))
    .unwrap();
    let queries: Vec<EvalQuery> = concepts
        .iter()
        .map(|c| EvalQuery::text(c.id.clone(), c.labels[0].clone(), [c.id.clone()]).unwrap())
        .collect();
    let sw = StopWords::english();
    let index = build_vector_index(&held_out, &model).unwrap();
    let searcher = VectorSearcher::new(&index, &model).unwrap();
    let trained = evaluate_run(&queries, &searcher, &held_out, &sw, &[1, 10]).unwrap();
    let bm25 = Bm25Index::build(&held_out, sw.clone(), Bm25Params::default());
    let keyword = evaluate_run(&queries, &bm25, &held_out, &sw, &[1, 10]).unwrap();

    let zero_overlap: BTreeSet<&str> = keyword
        .per_query
        .iter()
        .filter(|r| r.overlap == Some(0.0))
        .map(|r| r.query_id.as_str())
        .collect();
    let bm25_hits10 = keyword
        .per_query
        .iter()
        .filter(|r| zero_overlap.contains(r.query_id.as_str()))
        .map(|r| f64::from(r.hits_at_k[&10]))
        .sum::<f64>()
        / zero_overlap.len().max(1) as f64;
    let hits1 = trained.aggregates.hits_at_k[&1];
    let last_loss = history.epochs.last().map_or(f64::NAN, |e| e.train_loss);
    outcome(
        hits1 >= 0.9 && bm25_hits10 == 0.0 && zero_overlap.len() == n,
        format!(
            "{} triplets, final train loss {last_loss:.4}; trained Hits@1 {hits1:.2}; BM25 Hits@10 {bm25_hits10:.2} on {} zero-overlap queries",
            triplets.len(),
            zero_overlap.len()
        ),
    )
}

#[test]
fn acceptance() {
    type Check = fn() -> Outcome;
    let criteria: &[(u32, &str, Check, Duration)] = &[
        (1, "nDCG worked example", ndcg_example, Duration::from_millis(1)),
        (2, "MRR worked examples", mrr_examples, Duration::from_millis(1)),
        (3, "overlap worked examples", overlap_examples, Duration::from_millis(1)),
        (4, "triplet generation oracle", triplet_oracle, Duration::from_secs(1)),
        (5, "triplet-loss gradient check", gradient_check, Duration::from_secs(1)),
        (6, "exact retrieval oracle", exact_retrieval, Duration::from_secs(5)),
        (7, "BM25 oracle and properties", bm25_oracle, Duration::from_secs(1)),
        (8, "paired t-test oracle", t_test_oracle, Duration::from_millis(1)),
        (9, "vocabulary-mismatch experiment", vocabulary_mismatch, Duration::from_secs(300)),
    ];

    let mut failed = Vec::new();
    for &(id, name, check, budget) in criteria {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = out.pass && in_time;
        println!(
            "[{}] criterion {id}: {name}: {} ({:.3?}, budget {:?})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed,
            budget
        );
        if !pass {
            failed.push(id);
        }
    }
    for (id, reason) in KNOWN_GAPS {
        println!("known gap, criterion {id}: {reason}");
    }
    let expected: Vec<u32> = KNOWN_GAPS.iter().map(|(id, _)| *id).collect();
    assert_eq!(failed, expected, "failing criteria differ from the documented gaps");
}
