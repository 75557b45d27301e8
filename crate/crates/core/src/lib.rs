//! Semantic search over hierarchical clinical ontologies.
//!
//! The pipeline: load an [`ontology`], derive training triplets from its
//! hierarchy ([`tripletgen`]), train a label encoder with a triplet margin
//! loss ([`embedder`]), index concept labels for exact cosine or BM25
//! retrieval ([`ranker`]), and score result lists ([`eval`]).

pub mod container;
pub mod embedder;
pub mod eval;
pub mod ontology;
pub mod ranker;
pub mod text;
pub mod tripletgen;

pub use embedder::{AnyEncoder, EmbeddingVector, Encoder};
pub use ontology::{Concept, OntologyGraph, RelationKind};
pub use tripletgen::{TripletDataset, TripletExample};
