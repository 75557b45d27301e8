use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RankerKind;

#[derive(Debug, Parser)]
#[command(name = "ontosearch", version, about = "Semantic search over hierarchical ontologies")]
pub struct Cli {
    /// Flat `section.key = value` settings file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct OntologyArgs {
    /// `concept_id<TAB>preferred_label` rows.
    #[arg(long)]
    pub concepts: Option<PathBuf>,
    /// `concept_id<TAB>label` rows for further synonyms.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// `child_id<TAB>parent_id` rows.
    #[arg(long)]
    pub relations: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatArg {
    Hits,
    Rr,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate an ontology and print its statistics.
    Ingest(OntologyArgs),

    /// Generate triplets from the hierarchy and split them 90/5/5.
    Triplets {
        #[command(flatten)]
        ontology: OntologyArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for train/dev/test TSVs and manifest.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        single_label_fallback: bool,
        #[arg(long)]
        dedup: bool,
    },

    /// Train the subword encoder on triplets.
    Train {
        #[arg(long)]
        triplets: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        buckets: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        margin: Option<f64>,
        /// Warm-up fraction of all steps.
        #[arg(long)]
        warmup: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Model file to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Build vector and/or BM25 indexes into a self-contained directory.
    Index {
        #[command(flatten)]
        ontology: OntologyArgs,
        /// Trained subword model.
        #[arg(long, group = "encoder")]
        model: Option<PathBuf>,
        /// Word-vector text file (optional `N d` header, `token v1 .. vd`).
        #[arg(long, group = "encoder")]
        word_vectors: Option<PathBuf>,
        /// `text<TAB>v1 .. vd` file of externally computed label vectors.
        #[arg(long, group = "encoder")]
        precomputed: Option<PathBuf>,
        /// Also build a BM25 index.
        #[arg(long)]
        bm25: bool,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long)]
        k1: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// One-shot text search; prints hits as JSON lines.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        q: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        ranker: Option<RankerKind>,
    },

    /// Map every concept of a source ontology onto the indexed one.
    Match {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        source_concepts: PathBuf,
        #[arg(long)]
        source_labels: PathBuf,
        #[arg(long)]
        source_relations: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        ranker: Option<RankerKind>,
    },

    /// Evaluate a query set and print the report JSON.
    Eval {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// Comma-separated cutoffs.
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        k: Vec<usize>,
        #[arg(long)]
        ranker: Option<RankerKind>,
        /// Earlier report to test against; repeatable.
        #[arg(long)]
        baseline_run: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "hits")]
        stat: StatArg,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Serve the JSON-over-HTTP query API.
    Serve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        bind: Option<String>,
    },
}
