//! Acceptance suite for the end-to-end criteria: one PASS/FAIL line each.
//!
//! Run with `cargo test -p ontosearch --test acceptance -- --nocapture`.

mod common;

use std::io::{Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use ontosearch::index::LoadedIndex;
use ontosearch::service::{router, ServiceState};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let body = format!(
        "paths.concepts = {}\npaths.labels = {}\npaths.relations = {}\n\
         triplets.seed = 11\ntrain.seed = 11\ntrain.epochs = 5\ntrain.lr = 0.001\n",
        p(&fixture("concepts.tsv")),
        p(&fixture("labels.tsv")),
        p(&fixture("relations.tsv")),
    );
    let path = dir.join("pipeline.conf");
    std::fs::write(&path, body).unwrap();
    path
}

/// ingest -> triplets -> train -> index -> eval, all driven by one config.
fn pipeline(dir: &Path, config: &Path) -> Vec<u8> {
    let c = p(config);
    let trip = dir.join("trip");
    let model = dir.join("model.bin");
    let idx = dir.join("idx");
    let report = dir.join("report.json");
    ok(&["--config", &c, "ingest"]);
    ok(&["--config", &c, "triplets", "--out", &p(&trip)]);
    ok(&["--config", &c, "train", "--triplets", &p(&trip.join("train.tsv")), "--dev", &p(&trip.join("dev.tsv")), "--out", &p(&model)]);
    ok(&["--config", &c, "index", "--model", &p(&model), "--bm25", "--out", &p(&idx)]);
    ok(&["--config", &c, "eval", "--index", &p(&idx), "--queries", &p(&fixture("queries.tsv")), "--out", &p(&report)]);
    std::fs::read(report).unwrap()
}

fn end_to_end_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let config = write_config(root.path());
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    let ra = pipeline(&a, &config);
    let rb = pipeline(&b, &config);
    let same_model = std::fs::read(a.join("model.bin")).unwrap() == std::fs::read(b.join("model.bin")).unwrap();
    Outcome {
        pass: ra == rb && !ra.is_empty(),
        detail: format!(
            "report {} bytes, identical: {}; model files identical: {same_model}",
            ra.len(),
            ra == rb
        ),
    }
}

fn percent_encode(s: &str) -> String {
    s.bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => (b as char).to_string(),
            _ => format!("%{b:02X}"),
        })
        .collect()
}

fn http_get(addr: std::net::SocketAddr, target: &str) -> (u16, Vec<u8>) {
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(stream, "GET {target} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).unwrap();
    let split = raw.windows(4).position(|w| w == b"\r\n\r\n").expect("header terminator");
    let head = String::from_utf8_lossy(&raw[..split]);
    let status = head.split(' ').nth(1).unwrap().parse().unwrap();
    (status, raw[split + 4..].to_vec())
}

fn random_queries(n: usize, seed: u64) -> Vec<(String, usize, &'static str)> {
    let text = std::fs::read_to_string(fixture("concepts.tsv")).unwrap()
        + &std::fs::read_to_string(fixture("labels.tsv")).unwrap();
    let mut vocab: Vec<String> = text
        .lines()
        .filter_map(|l| l.split('\t').nth(1))
        .flat_map(|label| label.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .collect();
    vocab.extend(["the", "of", "severe", "left", "acute", "xyzzy", "ache", "sensation"].map(String::from));
    vocab.sort();
    vocab.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let words = rng.random_range(1..=4);
            let q: Vec<&str> = (0..words).map(|_| vocab.choose(&mut rng).unwrap().as_str()).collect();
            let k = rng.random_range(1..=15);
            let ranker = *["vector", "bm25"].choose(&mut rng).unwrap();
            (q.join(" "), k, ranker)
        })
        .collect()
}

fn cli_service_parity(idx: &Path) -> Outcome {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    let state = ServiceState::ready(LoadedIndex::load(idx).unwrap(), None);
    rt.spawn(async move { axum::serve(listener, router(state)).await.unwrap() });

    let queries = random_queries(50, 2024);
    let mut mismatches = Vec::new();
    let mut total_hits = 0;
    for (q, k, ranker) in &queries {
        let lines = ok(&["query", "--index", &p(idx), "--q", q, "--k", &k.to_string(), "--ranker", ranker]);
        let cli_array = format!("[{}]", lines.lines().collect::<Vec<_>>().join(","));
        let (status, body) = http_get(addr, &format!("/search?q={}&k={k}&ranker={ranker}", percent_encode(q)));
        total_hits += lines.lines().count();
        if status != 200 || body != cli_array.as_bytes() {
            mismatches.push(q.clone());
        }
    }
    rt.shutdown_background();
    Outcome {
        pass: mismatches.is_empty(),
        detail: format!(
            "{} queries, {total_hits} hits compared, {} mismatches{}",
            queries.len(),
            mismatches.len(),
            mismatches.first().map(|q| format!(" (first: `{q}`)")).unwrap_or_default()
        ),
    }
}

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    let mut report = |id: u32, name: &str, budget: Duration, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed <= budget;
        println!(
            "[{}] criterion {id}: {name}: {} ({elapsed:.3?}, budget {budget:?})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
        );
        if !pass {
            failed.push(id);
        }
    };

    report(10, "end-to-end determinism", Duration::from_secs(360), &mut end_to_end_determinism);

    // Index construction is setup; the budget covers the 50 comparisons.
    let dir = tempfile::tempdir().unwrap();
    let idx = build_fixture_index(dir.path());
    report(11, "CLI/service parity", Duration::from_secs(5), &mut || cli_service_parity(&idx));

    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
