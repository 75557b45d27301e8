//! Pipeline settings and their flat `section.key = value` file form.
//!
//! ```text
//! # comments start with '#'
//! paths.stopwords = data/stopwords.txt
//! train.epochs = 5
//! ranker.k = 10
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ontosearch_core::embedder::TrainConfig;
use ontosearch_core::tripletgen::SplitRatios;

use crate::error::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum RankerKind {
    #[default]
    Vector,
    Bm25,
}

impl fmt::Display for RankerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Vector => "vector",
            Self::Bm25 => "bm25",
        })
    }
}

impl FromStr for RankerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vector" => Ok(Self::Vector),
            "bm25" => Ok(Self::Bm25),
            other => Err(format!("unknown ranker `{other}` (expected vector or bm25)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Paths {
    pub concepts: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub relations: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub word_vectors: Option<PathBuf>,
    pub precomputed: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TripletSettings {
    pub seed: u64,
    pub dedup: bool,
    pub single_label_fallback: bool,
    pub ratios: SplitRatios,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    pub dimension: usize,
    pub buckets: usize,
    pub train: TrainConfig,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            dimension: 64,
            buckets: 1 << 15,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankerDefaults {
    pub k: usize,
    pub k1: f64,
    pub b: f64,
    pub kind: Option<RankerKind>,
}

impl Default for RankerDefaults {
    fn default() -> Self {
        Self {
            k: 10,
            k1: 1.2,
            b: 0.75,
            kind: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub triplets: TripletSettings,
    pub model: ModelSettings,
    pub ranker: RankerDefaults,
    pub bind: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            triplets: TripletSettings::default(),
            model: ModelSettings::default(),
            ranker: RankerDefaults::default(),
            bind: "127.0.0.1:8080".to_string(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, AppError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| AppError::config(format!("{key}: cannot parse `{value}`: {e}")))
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, AppError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| AppError::config(format!("line {}: expected `key = value`", idx + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| AppError::config(format!("line {}: {}", idx + 1, e.message)))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), AppError> {
        let path = || Some(PathBuf::from(value));
        let t = &mut self.model.train;
        match key {
            "paths.concepts" => self.paths.concepts = path(),
            "paths.labels" => self.paths.labels = path(),
            "paths.relations" => self.paths.relations = path(),
            "paths.stopwords" => self.paths.stopwords = path(),
            "paths.word_vectors" => self.paths.word_vectors = path(),
            "paths.precomputed" => self.paths.precomputed = path(),
            "paths.out" => self.paths.out = path(),
            "triplets.seed" => self.triplets.seed = parse(key, value)?,
            "triplets.dedup" => self.triplets.dedup = parse(key, value)?,
            "triplets.single_label_fallback" => self.triplets.single_label_fallback = parse(key, value)?,
            "triplets.train_ratio" => self.triplets.ratios.train = parse(key, value)?,
            "triplets.dev_ratio" => self.triplets.ratios.dev = parse(key, value)?,
            "triplets.test_ratio" => self.triplets.ratios.test = parse(key, value)?,
            "train.dim" => self.model.dimension = parse(key, value)?,
            "train.buckets" => self.model.buckets = parse(key, value)?,
            "train.epochs" => t.epochs = parse(key, value)?,
            "train.batch" => t.batch_size = parse(key, value)?,
            "train.lr" => t.learning_rate = parse(key, value)?,
            "train.margin" => t.margin = parse(key, value)?,
            "train.warmup" => t.warmup_fraction = parse(key, value)?,
            "train.beta1" => t.adam_beta1 = parse(key, value)?,
            "train.beta2" => t.adam_beta2 = parse(key, value)?,
            "train.eps" => t.adam_eps = parse(key, value)?,
            "train.seed" => t.seed = parse(key, value)?,
            "ranker.k" => self.ranker.k = parse(key, value)?,
            "ranker.k1" => self.ranker.k1 = parse(key, value)?,
            "ranker.b" => self.ranker.b = parse(key, value)?,
            "ranker.kind" => self.ranker.kind = Some(parse(key, value)?),
            "service.bind" => self.bind = value.to_string(),
            other => return Err(AppError::config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Every set value as `(key, value)`, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let p = &self.paths;
        for (key, value) in [
            ("paths.concepts", &p.concepts),
            ("paths.labels", &p.labels),
            ("paths.relations", &p.relations),
            ("paths.stopwords", &p.stopwords),
            ("paths.word_vectors", &p.word_vectors),
            ("paths.precomputed", &p.precomputed),
            ("paths.out", &p.out),
        ] {
            if let Some(v) = value {
                out.push((key, v.display().to_string()));
            }
        }
        let tr = &self.triplets;
        let t = &self.model.train;
        out.extend([
            ("triplets.seed", tr.seed.to_string()),
            ("triplets.dedup", tr.dedup.to_string()),
            ("triplets.single_label_fallback", tr.single_label_fallback.to_string()),
            ("triplets.train_ratio", tr.ratios.train.to_string()),
            ("triplets.dev_ratio", tr.ratios.dev.to_string()),
            ("triplets.test_ratio", tr.ratios.test.to_string()),
            ("train.dim", self.model.dimension.to_string()),
            ("train.buckets", self.model.buckets.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.batch", t.batch_size.to_string()),
            ("train.lr", t.learning_rate.to_string()),
            ("train.margin", t.margin.to_string()),
            ("train.warmup", t.warmup_fraction.to_string()),
            ("train.beta1", t.adam_beta1.to_string()),
            ("train.beta2", t.adam_beta2.to_string()),
            ("train.eps", t.adam_eps.to_string()),
            ("train.seed", t.seed.to_string()),
            ("ranker.k", self.ranker.k.to_string()),
            ("ranker.k1", self.ranker.k1.to_string()),
            ("ranker.b", self.ranker.b.to_string()),
        ]);
        if let Some(kind) = self.ranker.kind {
            out.push(("ranker.kind", kind.to_string()));
        }
        out.push(("service.bind", self.bind.clone()));
        out
    }

    pub fn to_file_string(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Fails with `app.MissingPath` unless `path` exists.
pub fn require_exists(path: &Path) -> Result<(), AppError> {
    if path.exists() {
        Ok(())
    } else {
        Err(AppError::new(
            "app.MissingPath",
            format!("{} does not exist", path.display()),
        ))
    }
}
