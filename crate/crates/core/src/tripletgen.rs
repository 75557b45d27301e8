//! Training triplets derived from the ontology hierarchy.
//!
//! For every concept and every ordered pair of its distinct labels, one
//! parent label and one "other" label (from siblings and uncles) are drawn,
//! and three (anchor, positive, negative) entries are emitted:
//! `(l1, l2, parent)`, `(l1, l2, other)` and `(l1, parent, other)`.
//!
//! Draws use ChaCha8 seeded from a `u64` and uniform index selection over
//! the lexicographically sorted pool, so a given graph and seed always
//! yield the same dataset.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::OntologyGraph;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TripletExample {
    pub anchor: String,
    pub positive: String,
    pub negative: String,
}

impl TripletExample {
    pub fn new(anchor: &str, positive: &str, negative: &str) -> Self {
        Self {
            anchor: anchor.to_string(),
            positive: positive.to_string(),
            negative: negative.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripletDataset {
    pub entries: Vec<TripletExample>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.90,
            dev: 0.05,
            test: 0.05,
        }
    }
}

#[derive(Debug, Error)]
pub enum TripletError {
    #[error("invalid split ratios {0:?}: each must lie in [0, 1] and they must sum to 1")]
    BadRatios(SplitRatios),
    #[error("{file}:{line}: expected 3 tab-separated fields")]
    MalformedLine { file: String, line: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl TripletError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::BadRatios(_) => "BadRatios",
            Self::MalformedLine { .. } => "MalformedLine",
            Self::Io { .. } => "Io",
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), TripletError> {
        let parts = [self.train, self.dev, self.test];
        let in_range = parts.iter().all(|r| (0.0..=1.0).contains(r));
        if !in_range || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(TripletError::BadRatios(*self));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GenerateOptions {
    /// Emit `(l, parent, other)` for concepts with a single label.
    pub single_label_fallback: bool,
    /// Drop repeated triplets, keeping the first occurrence.
    pub dedup: bool,
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &'a [String]) -> Option<&'a str> {
    if pool.is_empty() {
        None
    } else {
        Some(pool[rng.random_range(0..pool.len())].as_str())
    }
}

fn sorted_labels<'a>(
    graph: &'a OntologyGraph,
    ids: impl IntoIterator<Item = &'a String>,
) -> Vec<String> {
    let mut pool: Vec<String> = ids
        .into_iter()
        .flat_map(|id| graph.labels(id).expect("id from graph").iter().cloned())
        .collect();
    pool.sort();
    pool
}

fn push(out: &mut Vec<TripletExample>, anchor: &str, positive: &str, negative: &str) {
    // A negative textually equal to its positive carries no signal.
    if negative != positive {
        out.push(TripletExample::new(anchor, positive, negative));
    }
}

/// Generates the triplet dataset for `graph`, concepts visited in ascending
/// id order and label pairs in label order.
pub fn generate_triplets(graph: &OntologyGraph, seed: u64, opts: GenerateOptions) -> TripletDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();

    for concept in graph.concepts() {
        let id = concept.id.as_str();
        let parents = &concept.parent_ids;
        let mut others: BTreeSet<String> = graph.siblings(id).expect("id from graph");
        others.extend(graph.uncles(id).expect("id from graph"));
        others.remove(id);
        others.retain(|o| !parents.contains(o));

        let parent_pool = sorted_labels(graph, parents);
        let other_pool = sorted_labels(graph, &others);
        let labels = &concept.labels;

        if labels.len() == 1 {
            if opts.single_label_fallback {
                let p = pick(&mut rng, &parent_pool);
                let o = pick(&mut rng, &other_pool);
                if let (Some(p), Some(o)) = (p, o) {
                    push(&mut entries, &labels[0], p, o);
                }
            }
            continue;
        }

        for (i, l1) in labels.iter().enumerate() {
            for (j, l2) in labels.iter().enumerate() {
                if i == j {
                    continue;
                }
                let p = pick(&mut rng, &parent_pool);
                let o = pick(&mut rng, &other_pool);
                if let Some(p) = p {
                    push(&mut entries, l1, l2, p);
                }
                if let Some(o) = o {
                    push(&mut entries, l1, l2, o);
                }
                if let (Some(p), Some(o)) = (p, o) {
                    push(&mut entries, l1, p, o);
                }
            }
        }
    }

    if opts.dedup {
        let mut seen = BTreeSet::new();
        entries.retain(|e| seen.insert(e.clone()));
    }
    TripletDataset { entries, seed }
}

/// The three partitions produced by [`split_dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: TripletDataset,
    pub dev: TripletDataset,
    pub test: TripletDataset,
}

/// Shuffles with `seed` then partitions: `floor(N*dev)` dev entries,
/// `floor(N*test)` test entries, and the remainder for training.
pub fn split_dataset(
    ds: &TripletDataset,
    ratios: SplitRatios,
    seed: u64,
) -> Result<Split, TripletError> {
    ratios.validate()?;
    let n = ds.entries.len();
    let mut shuffled = ds.entries.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    // tolerate products like 0.05 * 100 landing a hair under an integer
    let n_dev = (n as f64 * ratios.dev + 1e-9).floor() as usize;
    let n_test = (n as f64 * ratios.test + 1e-9).floor() as usize;
    let n_train = n - n_dev - n_test;

    let test = shuffled.split_off(n_train + n_dev);
    let dev = shuffled.split_off(n_train);
    let wrap = |entries| TripletDataset {
        entries,
        seed: ds.seed,
    };
    Ok(Split {
        train: wrap(shuffled),
        dev: wrap(dev),
        test: wrap(test),
    })
}

impl TripletDataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.anchor);
            out.push('\t');
            out.push_str(&e.positive);
            out.push('\t');
            out.push_str(&e.negative);
            out.push('\n');
        }
        out
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<(), TripletError> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|source| TripletError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self, TripletError> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let content = fs::read_to_string(path).map_err(|source| TripletError::Io {
            path: display.clone(),
            source,
        })?;
        let mut entries = Vec::new();
        for (idx, line) in content.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(TripletError::MalformedLine {
                    file: display,
                    line: idx + 1,
                });
            }
            entries.push(TripletExample::new(fields[0], fields[1], fields[2]));
        }
        Ok(Self { entries, seed: 0 })
    }
}

/// Contents of `manifest.json` written next to the split files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub total: usize,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub ratios: SplitRatios,
    pub single_label_fallback: bool,
    pub dedup: bool,
}

/// Writes `train.tsv`, `dev.tsv`, `test.tsv` and `manifest.json` into `dir`.
pub fn write_split(
    dir: impl AsRef<Path>,
    split: &Split,
    manifest: &SplitManifest,
) -> Result<(), TripletError> {
    let dir = dir.as_ref();
    let io = |source| TripletError::Io {
        path: dir.display().to_string(),
        source,
    };
    fs::create_dir_all(dir).map_err(io)?;
    split.train.write_tsv(dir.join("train.tsv"))?;
    split.dev.write_tsv(dir.join("dev.tsv"))?;
    split.test.write_tsv(dir.join("test.tsv"))?;
    let mut json = serde_json::to_string_pretty(manifest).expect("manifest serialises");
    json.push('\n');
    fs::write(dir.join("manifest.json"), json).map_err(io)?;
    Ok(())
}
