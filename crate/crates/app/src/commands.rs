use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use ontosearch_core::embedder::{
    load_precomputed, load_word_vectors, train, AnyEncoder, SubwordEmbedder,
};
use ontosearch_core::eval::{compare_runs, evaluate_run, load_queries, EvalReport, Statistic};
use ontosearch_core::ranker::{build_vector_index, Bm25Index, Bm25Params};
use ontosearch_core::text::StopWords;
use ontosearch_core::tripletgen::{
    generate_triplets, split_dataset, write_split, GenerateOptions, SplitManifest, TripletDataset,
};
use ontosearch_core::OntologyGraph;
use serde::Serialize;

use crate::cli::{Cli, Command, OntologyArgs, StatArg};
use crate::config::{require_exists, PipelineConfig};
use crate::error::AppError;
use crate::index::{hit_json, hits_to_lines, write_index_dir, LoadedIndex};

/// Parses `argv` (program name first) and runs the command, writing normal
/// output to `out`.
pub fn run_command<S: AsRef<str>>(argv: &[S], out: &mut dyn Write) -> Result<(), AppError> {
    let cli = match Cli::try_parse_from(argv.iter().map(AsRef::as_ref)) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                write!(out, "{e}").map_err(stdout_err)?;
                return Ok(());
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            return Err(AppError::usage(first.trim_start_matches("error: ")));
        }
    };
    let mut cfg = match &cli.config {
        Some(path) => {
            require_exists(path)?;
            PipelineConfig::load(path)?
        }
        None => PipelineConfig::default(),
    };
    execute(cli.command, &mut cfg, out)
}

fn stdout_err(e: std::io::Error) -> AppError {
    if e.kind() == std::io::ErrorKind::BrokenPipe {
        return AppError::new(crate::error::BROKEN_PIPE, "output closed");
    }
    AppError::new("app.Io", format!("cannot write output: {e}"))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), AppError> {
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

fn json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

fn required(flag: Option<PathBuf>, configured: &Option<PathBuf>, name: &str) -> Result<PathBuf, AppError> {
    let path = flag
        .or_else(|| configured.clone())
        .ok_or_else(|| AppError::usage(format!("missing --{name}")))?;
    require_exists(&path)?;
    Ok(path)
}

fn load_ontology(args: OntologyArgs, cfg: &PipelineConfig) -> Result<OntologyGraph, AppError> {
    let concepts = required(args.concepts, &cfg.paths.concepts, "concepts")?;
    let labels = required(args.labels, &cfg.paths.labels, "labels")?;
    let relations = required(args.relations, &cfg.paths.relations, "relations")?;
    Ok(OntologyGraph::load(concepts, labels, relations)?)
}

fn load_stopwords(flag: Option<PathBuf>, cfg: &PipelineConfig) -> Result<StopWords, AppError> {
    match flag.or_else(|| cfg.paths.stopwords.clone()) {
        Some(path) => {
            require_exists(&path)?;
            Ok(StopWords::load(path)?)
        }
        None => Ok(StopWords::english()),
    }
}

fn check_k(k: usize) -> Result<usize, AppError> {
    if k == 0 {
        Err(AppError::usage("k must be at least 1"))
    } else {
        Ok(k)
    }
}

fn execute(command: Command, cfg: &mut PipelineConfig, out: &mut dyn Write) -> Result<(), AppError> {
    match command {
        Command::Ingest(ontology) => {
            let graph = load_ontology(ontology, cfg)?;
            emit(out, &json_pretty(&graph.stats()))
        }

        Command::Triplets {
            ontology,
            seed,
            out: out_dir,
            single_label_fallback,
            dedup,
        } => {
            let graph = load_ontology(ontology, cfg)?;
            let t = &mut cfg.triplets;
            t.seed = seed.unwrap_or(t.seed);
            t.single_label_fallback |= single_label_fallback;
            t.dedup |= dedup;
            let dir = out_dir
                .or_else(|| cfg.paths.out.clone())
                .ok_or_else(|| AppError::usage("missing --out"))?;
            let t = &cfg.triplets;
            let opts = GenerateOptions {
                single_label_fallback: t.single_label_fallback,
                dedup: t.dedup,
            };
            let ds = generate_triplets(&graph, t.seed, opts);
            let split = split_dataset(&ds, t.ratios, t.seed)?;
            let manifest = SplitManifest {
                seed: t.seed,
                total: ds.len(),
                train: split.train.len(),
                dev: split.dev.len(),
                test: split.test.len(),
                ratios: t.ratios,
                single_label_fallback: t.single_label_fallback,
                dedup: t.dedup,
            };
            write_split(&dir, &split, &manifest)?;
            emit(out, &json_pretty(&manifest))
        }

        Command::Train {
            triplets,
            dev,
            dim,
            buckets,
            epochs,
            batch,
            lr,
            margin,
            warmup,
            seed,
            out: model_out,
        } => {
            require_exists(&triplets)?;
            let m = &mut cfg.model;
            m.dimension = dim.unwrap_or(m.dimension);
            m.buckets = buckets.unwrap_or(m.buckets);
            let t = &mut m.train;
            t.epochs = epochs.unwrap_or(t.epochs);
            t.batch_size = batch.unwrap_or(t.batch_size);
            t.learning_rate = lr.unwrap_or(t.learning_rate);
            t.margin = margin.unwrap_or(t.margin);
            t.warmup_fraction = warmup.unwrap_or(t.warmup_fraction);
            t.seed = seed.unwrap_or(t.seed);
            let model_out = model_out
                .or_else(|| cfg.paths.out.clone())
                .ok_or_else(|| AppError::usage("missing --out"))?;

            let train_set = TripletDataset::read_tsv(&triplets)?;
            let dev_set = match dev {
                Some(p) => {
                    require_exists(&p)?;
                    TripletDataset::read_tsv(&p)?
                }
                None => TripletDataset::default(),
            };
            let m = &cfg.model;
            m.train.validate()?;
            let mut model = SubwordEmbedder::new(m.buckets, m.dimension, m.train.seed)?;
            let history = train(&mut model, &train_set, &dev_set, &m.train)?;
            model.save(&model_out)?;
            emit(out, &json_pretty(&history))
        }

        Command::Index {
            ontology,
            model,
            word_vectors,
            precomputed,
            bm25,
            stopwords,
            k1,
            b,
            out: out_dir,
        } => {
            let graph = load_ontology(ontology, cfg)?;
            let stopwords = load_stopwords(stopwords, cfg)?;
            let word_vectors = word_vectors.or_else(|| cfg.paths.word_vectors.clone());
            let precomputed = precomputed.or_else(|| cfg.paths.precomputed.clone());
            let encoder = if let Some(p) = model {
                require_exists(&p)?;
                Some(AnyEncoder::Subword(SubwordEmbedder::load(&p)?))
            } else if let Some(p) = word_vectors {
                require_exists(&p)?;
                Some(AnyEncoder::WordVectors(load_word_vectors(&p)?))
            } else if let Some(p) = precomputed {
                require_exists(&p)?;
                Some(AnyEncoder::Precomputed(load_precomputed(&p)?))
            } else {
                None
            };
            if encoder.is_none() && !bm25 {
                return Err(AppError::usage(
                    "nothing to build: pass --model, --word-vectors, --precomputed or --bm25",
                ));
            }
            let dir = out_dir
                .or_else(|| cfg.paths.out.clone())
                .ok_or_else(|| AppError::usage("missing --out"))?;
            let vector = match &encoder {
                Some(e) => Some(build_vector_index(&graph, e)?),
                None => None,
            };
            let params = Bm25Params {
                k1: k1.unwrap_or(cfg.ranker.k1),
                b: b.unwrap_or(cfg.ranker.b),
            };
            let bm25_index = bm25.then(|| Bm25Index::build(&graph, stopwords.clone(), params));
            let manifest = write_index_dir(
                &dir,
                &graph,
                &stopwords,
                encoder.as_ref(),
                vector.as_ref(),
                bm25_index.as_ref(),
            )?;
            emit(out, &json_pretty(&manifest))
        }

        Command::Query { index, q, k, ranker } => {
            require_exists(&index)?;
            let k = check_k(k.unwrap_or(cfg.ranker.k))?;
            let loaded = LoadedIndex::load(&index)?;
            let hits = loaded.search(ranker.or(cfg.ranker.kind), &q, k)?;
            emit(out, &hits_to_lines(&hits))
        }

        Command::Match {
            index,
            source_concepts,
            source_labels,
            source_relations,
            k,
            ranker,
        } => {
            require_exists(&index)?;
            require_exists(&source_concepts)?;
            require_exists(&source_labels)?;
            if let Some(p) = &source_relations {
                require_exists(p)?;
            }
            let k = check_k(k.unwrap_or(cfg.ranker.k))?;
            let loaded = LoadedIndex::load(&index)?;
            let source = OntologyGraph::load_parts(
                &source_concepts,
                &source_labels,
                source_relations.as_deref(),
            )?;
            let ranker = loaded.ranker(ranker.or(cfg.ranker.kind))?;
            for concept in source.concepts() {
                let hits = ranker.search_concept(&concept.labels, k)?;
                let items: Vec<String> = hits.iter().map(hit_json).collect();
                let line = format!(
                    "{{\"source_id\":{},\"candidates\":[{}]}}\n",
                    serde_json::to_string(&concept.id).expect("string serialises"),
                    items.join(",")
                );
                emit(out, &line)?;
            }
            Ok(())
        }

        Command::Eval {
            index,
            queries,
            k,
            ranker,
            baseline_run,
            stat,
            out: report_out,
        } => {
            require_exists(&index)?;
            require_exists(&queries)?;
            for p in &baseline_run {
                require_exists(p)?;
            }
            let loaded = LoadedIndex::load(&index)?;
            let queries = load_queries(&queries)?;
            let ranker = loaded.ranker(ranker.or(cfg.ranker.kind))?;
            let mut report = evaluate_run(&queries, ranker.as_ref(), &loaded.graph, &loaded.stopwords, &k)?;
            let stat = match stat {
                StatArg::Hits => Statistic::Hits,
                StatArg::Rr => Statistic::Rr,
            };
            for path in &baseline_run {
                let baseline = EvalReport::load(path)?;
                compare_runs(&mut report, &baseline_name(path), &baseline, stat)?;
            }
            let json = report.to_json();
            if let Some(p) = report_out {
                fs::write(&p, &json).map_err(|e| AppError::io(&p, e))?;
            }
            emit(out, &json)
        }

        Command::Serve { index, bind } => {
            require_exists(&index)?;
            let bind = bind.unwrap_or_else(|| cfg.bind.clone());
            crate::service::serve_blocking(index, &bind, cfg.ranker.kind)
        }
    }
}

fn baseline_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
