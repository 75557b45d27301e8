//! The on-disk index directory built by `index` and read by `query`,
//! `match`, `eval` and `serve`.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/ontology/{concepts,labels,relations}.tsv
//! <dir>/stopwords.txt
//! <dir>/encoder.{bin,vec,tsv}   optional, copy of the encoder
//! <dir>/vector.idx              optional
//! <dir>/bm25.json               optional
//! ```

use std::fs;
use std::path::Path;

use ontosearch_core::embedder::{load_precomputed, load_word_vectors, AnyEncoder, SubwordEmbedder};
use ontosearch_core::ranker::{Bm25Index, RankedHit, Ranker, VectorIndex, VectorSearcher};
use ontosearch_core::text::StopWords;
use ontosearch_core::{Encoder, OntologyGraph};
use serde::{Deserialize, Serialize};

use crate::config::RankerKind;
use crate::error::AppError;

const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderEntry {
    pub kind: String,
    pub file: String,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Entry {
    pub k1: f64,
    pub b: f64,
    pub stopword_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub version: u32,
    pub concepts: usize,
    pub labels: usize,
    pub encoder: Option<EncoderEntry>,
    pub bm25: Option<Bm25Entry>,
}

pub fn encoder_file(kind: &str) -> &'static str {
    match kind {
        "subword" => "encoder.bin",
        "word-vectors" => "encoder.vec",
        _ => "encoder.tsv",
    }
}

fn save_encoder(encoder: &AnyEncoder, path: &Path) -> Result<(), AppError> {
    match encoder {
        AnyEncoder::Subword(m) => m.save(path)?,
        AnyEncoder::WordVectors(w) => fs::write(path, w.to_text()).map_err(|e| AppError::io(path, e))?,
        AnyEncoder::Precomputed(p) => p.save(path)?,
    }
    Ok(())
}

fn load_encoder(kind: &str, path: &Path) -> Result<AnyEncoder, AppError> {
    Ok(match kind {
        "subword" => AnyEncoder::Subword(SubwordEmbedder::load(path)?),
        "word-vectors" => AnyEncoder::WordVectors(load_word_vectors(path)?),
        "precomputed" => AnyEncoder::Precomputed(load_precomputed(path)?),
        other => return Err(AppError::new("ranker.MalformedIndex", format!("unknown encoder kind `{other}`"))),
    })
}

fn write(path: &Path, body: &str) -> Result<(), AppError> {
    fs::write(path, body).map_err(|e| AppError::io(path, e))
}

/// Writes a complete index directory. Returns the manifest.
pub fn write_index_dir(
    dir: &Path,
    graph: &OntologyGraph,
    stopwords: &StopWords,
    encoder: Option<&AnyEncoder>,
    vector: Option<&VectorIndex>,
    bm25: Option<&Bm25Index>,
) -> Result<IndexManifest, AppError> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    graph.save(dir.join("ontology"))?;
    write(&dir.join("stopwords.txt"), &stopwords.to_file_string())?;
    let mut encoder_entry = None;
    if let (Some(enc), Some(vec)) = (encoder, vector) {
        let file = encoder_file(enc.kind());
        save_encoder(enc, &dir.join(file))?;
        vec.save(dir.join("vector.idx"))?;
        encoder_entry = Some(EncoderEntry {
            kind: enc.kind().to_string(),
            file: file.to_string(),
            fingerprint: enc.fingerprint(),
        });
    }
    let bm25_entry = match bm25 {
        Some(idx) => {
            idx.save(dir.join("bm25.json"))?;
            Some(Bm25Entry {
                k1: idx.params().k1,
                b: idx.params().b,
                stopword_hash: idx.stopwords().fingerprint(),
            })
        }
        None => None,
    };
    let manifest = IndexManifest {
        version: MANIFEST_VERSION,
        concepts: graph.len(),
        labels: graph.stats().labels,
        encoder: encoder_entry,
        bm25: bm25_entry,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    json.push('\n');
    write(&dir.join("manifest.json"), &json)?;
    Ok(manifest)
}

/// A loaded index directory, immutable once built.
pub struct LoadedIndex {
    pub manifest: IndexManifest,
    pub graph: OntologyGraph,
    pub stopwords: StopWords,
    vector: Option<(VectorIndex, AnyEncoder)>,
    bm25: Option<Bm25Index>,
}

impl LoadedIndex {
    pub fn load(dir: &Path) -> Result<Self, AppError> {
        let manifest_path = dir.join("manifest.json");
        let text = fs::read_to_string(&manifest_path).map_err(|e| AppError::io(&manifest_path, e))?;
        let manifest: IndexManifest = serde_json::from_str(&text)
            .map_err(|e| AppError::new("ranker.MalformedIndex", format!("{}: {e}", manifest_path.display())))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(AppError::new(
                "ranker.MalformedIndex",
                format!("unsupported index manifest version {}", manifest.version),
            ));
        }
        let graph = OntologyGraph::load_dir(dir.join("ontology"))?;
        let stopwords = StopWords::load(dir.join("stopwords.txt"))?;
        let vector = match &manifest.encoder {
            Some(entry) => {
                let encoder = load_encoder(&entry.kind, &dir.join(&entry.file))?;
                let index = VectorIndex::load(dir.join("vector.idx"))?;
                // Validates that the stored encoder built this index.
                VectorSearcher::new(&index, &encoder)?;
                Some((index, encoder))
            }
            None => None,
        };
        let bm25 = match manifest.bm25 {
            Some(_) => Some(Bm25Index::load(dir.join("bm25.json"))?),
            None => None,
        };
        Ok(Self {
            manifest,
            graph,
            stopwords,
            vector,
            bm25,
        })
    }

    /// Vector when available, BM25 otherwise.
    pub fn default_kind(&self) -> RankerKind {
        if self.vector.is_some() {
            RankerKind::Vector
        } else {
            RankerKind::Bm25
        }
    }

    pub fn ranker(&self, kind: Option<RankerKind>) -> Result<Box<dyn Ranker + '_>, AppError> {
        match kind.unwrap_or_else(|| self.default_kind()) {
            RankerKind::Vector => {
                let (index, encoder) = self
                    .vector
                    .as_ref()
                    .ok_or_else(|| AppError::usage("index has no vector ranker"))?;
                Ok(Box::new(VectorSearcher::new(index, encoder)?))
            }
            RankerKind::Bm25 => Ok(Box::new(
                self.bm25
                    .as_ref()
                    .ok_or_else(|| AppError::usage("index has no BM25 ranker"))?,
            )),
        }
    }

    pub fn search(&self, kind: Option<RankerKind>, query: &str, k: usize) -> Result<Vec<RankedHit>, AppError> {
        Ok(self.ranker(kind)?.search_text(query, k)?)
    }

    pub fn match_labels(&self, kind: Option<RankerKind>, labels: &[String], k: usize) -> Result<Vec<RankedHit>, AppError> {
        Ok(self.ranker(kind)?.search_concept(labels, k)?)
    }

    /// Fingerprints of the loaded rankers, keyed by ranker name.
    pub fn fingerprints(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if let Some(e) = &self.manifest.encoder {
            out.push(("vector", e.fingerprint.clone()));
        }
        if let Some(b) = &self.manifest.bm25 {
            out.push(("bm25", format!("bm25:k1={},b={},stopwords={}", b.k1, b.b, b.stopword_hash)));
        }
        out
    }
}

/// One hit as a single JSON object; shared by the CLI and the service so
/// both emit identical bytes.
pub fn hit_json(hit: &RankedHit) -> String {
    serde_json::to_string(hit).expect("hit serialises")
}

/// JSON lines, one hit per line.
pub fn hits_to_lines(hits: &[RankedHit]) -> String {
    hits.iter().map(|h| hit_json(h) + "\n").collect()
}

/// A JSON array of hits.
pub fn hits_to_array(hits: &[RankedHit]) -> String {
    let items: Vec<String> = hits.iter().map(hit_json).collect();
    format!("[{}]", items.join(","))
}
