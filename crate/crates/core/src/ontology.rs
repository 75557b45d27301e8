//! Hierarchical ontology: concepts with ordered labels and a multi-parent
//! is-a relation.
//!
//! The graph is loaded from three tab-separated files and is immutable once
//! built. Structural queries (siblings, uncles, relation classification)
//! drive triplet generation and the graded nDCG gain.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("duplicate concept id `{0}`")]
    DuplicateConceptId(String),
    #[error("unknown parent id `{parent}` referenced by `{child}`")]
    UnknownParentId { child: String, parent: String },
    #[error("unknown concept id `{0}`")]
    UnknownConceptId(String),
    #[error("cycle detected: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error("empty label for concept `{0}`")]
    EmptyLabel(String),
    #[error("duplicate label `{label}` for concept `{id}`")]
    DuplicateLabel { id: String, label: String },
    #[error("concept `{0}` has no labels")]
    NoLabels(String),
    #[error("{file}:{line}: {reason}")]
    MalformedLine {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl OntologyError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::DuplicateConceptId(_) => "DuplicateConceptId",
            Self::UnknownParentId { .. } => "UnknownParentId",
            Self::UnknownConceptId(_) => "UnknownConceptId",
            Self::CycleDetected(_) => "CycleDetected",
            Self::EmptyLabel(_) => "EmptyLabel",
            Self::DuplicateLabel { .. } => "DuplicateLabel",
            Self::NoLabels(_) => "NoLabels",
            Self::MalformedLine { .. } => "MalformedLine",
            Self::Io { .. } => "Io",
        }
    }
}

/// A concept with its labels; the first label is the preferred one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub labels: Vec<String>,
    pub parent_ids: BTreeSet<String>,
}

impl Concept {
    pub fn new<I, S>(id: impl Into<String>, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            id: id.into(),
            labels: labels.into_iter().map(Into::into).collect(),
            parent_ids: BTreeSet::new(),
        }
    }

    pub fn with_parents<I, S>(mut self, parents: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.parent_ids.extend(parents.into_iter().map(Into::into));
        self
    }

    pub fn preferred_label(&self) -> &str {
        &self.labels[0]
    }
}

/// Relation of a result concept to a ground-truth concept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelationKind {
    Same,
    ParentOfTruth,
    ChildOfTruth,
    GrandParentOfTruth,
    GrandChildOfTruth,
    UncleOfTruth,
    SiblingOfTruth,
    Other,
}

impl RelationKind {
    /// Graded relevance used by nDCG.
    pub fn gain(self) -> u8 {
        match self {
            Self::Same => 3,
            Self::ParentOfTruth | Self::ChildOfTruth => 2,
            Self::GrandParentOfTruth
            | Self::GrandChildOfTruth
            | Self::UncleOfTruth
            | Self::SiblingOfTruth => 1,
            Self::Other => 0,
        }
    }
}

pub fn gain_of_relation(kind: RelationKind) -> u8 {
    kind.gain()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OntologyGraph {
    concepts: BTreeMap<String, Concept>,
    children: BTreeMap<String, BTreeSet<String>>,
}

/// Summary counts printed by `ingest`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub concepts: usize,
    pub labels: usize,
    pub edges: usize,
    pub roots: usize,
    pub leaves: usize,
}

impl OntologyGraph {
    /// Builds and validates a graph from concept records.
    pub fn from_concepts(concepts: impl IntoIterator<Item = Concept>) -> Result<Self, OntologyError> {
        let mut map = BTreeMap::new();
        for concept in concepts {
            validate_labels(&concept)?;
            if map.contains_key(&concept.id) {
                return Err(OntologyError::DuplicateConceptId(concept.id));
            }
            map.insert(concept.id.clone(), concept);
        }

        let mut children: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for concept in map.values() {
            for parent in &concept.parent_ids {
                if !map.contains_key(parent) {
                    return Err(OntologyError::UnknownParentId {
                        child: concept.id.clone(),
                        parent: parent.clone(),
                    });
                }
                children
                    .entry(parent.clone())
                    .or_default()
                    .insert(concept.id.clone());
            }
        }

        let graph = Self {
            concepts: map,
            children,
        };
        if let Some(cycle) = graph.find_cycle() {
            return Err(OntologyError::CycleDetected(cycle));
        }
        Ok(graph)
    }

    /// Loads `concepts.tsv`, `labels.tsv` and `relations.tsv`.
    pub fn load(
        concepts_path: impl AsRef<Path>,
        labels_path: impl AsRef<Path>,
        relations_path: impl AsRef<Path>,
    ) -> Result<Self, OntologyError> {
        Self::load_parts(concepts_path.as_ref(), labels_path.as_ref(), Some(relations_path.as_ref()))
    }

    /// Like [`OntologyGraph::load`] but the relations file may be absent, in
    /// which case every concept is a root.
    pub fn load_parts(
        concepts_path: &Path,
        labels_path: &Path,
        relations_path: Option<&Path>,
    ) -> Result<Self, OntologyError> {

        let mut order: Vec<String> = Vec::new();
        let mut records: BTreeMap<String, Concept> = BTreeMap::new();
        for (line, [id, label]) in read_tsv::<2>(concepts_path)? {
            if id.is_empty() {
                return Err(malformed(concepts_path, line, "empty concept id"));
            }
            if records.contains_key(&id) {
                return Err(OntologyError::DuplicateConceptId(id));
            }
            order.push(id.clone());
            records.insert(id.clone(), Concept::new(id, [label]));
        }

        for (_, [id, label]) in read_tsv::<2>(labels_path)? {
            let concept = records
                .get_mut(&id)
                .ok_or_else(|| OntologyError::UnknownConceptId(id.clone()))?;
            concept.labels.push(label);
        }

        let relations = match relations_path {
            Some(p) => read_tsv::<2>(p)?,
            None => Vec::new(),
        };
        for (_, [child, parent]) in relations {
            if !records.contains_key(&parent) {
                return Err(OntologyError::UnknownParentId { child, parent });
            }
            let concept = records
                .get_mut(&child)
                .ok_or_else(|| OntologyError::UnknownConceptId(child.clone()))?;
            concept.parent_ids.insert(parent);
        }

        Self::from_concepts(order.into_iter().map(|id| records.remove(&id).unwrap()))
    }

    /// Writes the three TSV files into `dir`, in ascending concept id order.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), OntologyError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|source| io_err(dir, source))?;
        let mut concepts = String::new();
        let mut labels = String::new();
        let mut relations = String::new();
        for c in self.concepts.values() {
            concepts.push_str(&format!("{}\t{}\n", c.id, c.labels[0]));
            for l in &c.labels[1..] {
                labels.push_str(&format!("{}\t{}\n", c.id, l));
            }
            for p in &c.parent_ids {
                relations.push_str(&format!("{}\t{}\n", c.id, p));
            }
        }
        for (name, body) in [
            ("concepts.tsv", concepts),
            ("labels.tsv", labels),
            ("relations.tsv", relations),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|source| io_err(&path, source))?;
        }
        Ok(())
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, OntologyError> {
        let dir = dir.as_ref();
        Self::load(
            dir.join("concepts.tsv"),
            dir.join("labels.tsv"),
            dir.join("relations.tsv"),
        )
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.concepts.contains_key(id)
    }

    pub fn concept(&self, id: &str) -> Result<&Concept, OntologyError> {
        self.concepts
            .get(id)
            .ok_or_else(|| OntologyError::UnknownConceptId(id.to_string()))
    }

    /// Concepts in ascending id order.
    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn labels(&self, id: &str) -> Result<&[String], OntologyError> {
        Ok(&self.concept(id)?.labels)
    }

    pub fn parents(&self, id: &str) -> Result<&BTreeSet<String>, OntologyError> {
        Ok(&self.concept(id)?.parent_ids)
    }

    pub fn children(&self, id: &str) -> Result<BTreeSet<String>, OntologyError> {
        self.concept(id)?;
        Ok(self.children.get(id).cloned().unwrap_or_default())
    }

    fn children_ref(&self, id: &str) -> impl Iterator<Item = &String> {
        self.children.get(id).into_iter().flatten()
    }

    /// Concepts sharing at least one parent with `id`, excluding `id`.
    pub fn siblings(&self, id: &str) -> Result<BTreeSet<String>, OntologyError> {
        let concept = self.concept(id)?;
        let mut out = BTreeSet::new();
        for parent in &concept.parent_ids {
            out.extend(self.children_ref(parent).filter(|c| *c != id).cloned());
        }
        Ok(out)
    }

    /// Siblings of any direct parent of `id`.
    pub fn uncles(&self, id: &str) -> Result<BTreeSet<String>, OntologyError> {
        let mut out = BTreeSet::new();
        for parent in self.parents(id)? {
            out.extend(self.siblings(parent)?);
        }
        Ok(out)
    }

    /// Classifies `result_id` relative to `truth_id`, returning the highest
    /// gain kind that applies.
    pub fn relation_between(
        &self,
        result_id: &str,
        truth_id: &str,
    ) -> Result<RelationKind, OntologyError> {
        self.concept(result_id)?;
        let truth = self.concept(truth_id)?;
        if result_id == truth_id {
            return Ok(RelationKind::Same);
        }
        if truth.parent_ids.contains(result_id) {
            return Ok(RelationKind::ParentOfTruth);
        }
        if self.children_ref(truth_id).any(|c| c == result_id) {
            return Ok(RelationKind::ChildOfTruth);
        }
        let grandparent = truth
            .parent_ids
            .iter()
            .any(|p| self.concepts[p].parent_ids.contains(result_id));
        if grandparent {
            return Ok(RelationKind::GrandParentOfTruth);
        }
        let grandchild = self
            .children_ref(truth_id)
            .any(|c| self.children_ref(c).any(|g| g == result_id));
        if grandchild {
            return Ok(RelationKind::GrandChildOfTruth);
        }
        if self.uncles(truth_id)?.contains(result_id) {
            return Ok(RelationKind::UncleOfTruth);
        }
        if self.siblings(truth_id)?.contains(result_id) {
            return Ok(RelationKind::SiblingOfTruth);
        }
        Ok(RelationKind::Other)
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            concepts: self.concepts.len(),
            labels: self.concepts.values().map(|c| c.labels.len()).sum(),
            edges: self.concepts.values().map(|c| c.parent_ids.len()).sum(),
            roots: self
                .concepts
                .values()
                .filter(|c| c.parent_ids.is_empty())
                .count(),
            leaves: self
                .concepts
                .keys()
                .filter(|id| !self.children.contains_key(*id))
                .count(),
        }
    }

    /// Iterative three-colour DFS over parent edges; returns one cycle.
    fn find_cycle(&self) -> Option<Vec<String>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Fresh,
            Active,
            Done,
        }
        let mut marks: BTreeMap<&str, Mark> =
            self.concepts.keys().map(|k| (k.as_str(), Mark::Fresh)).collect();

        for start in self.concepts.keys() {
            if marks[start.as_str()] != Mark::Fresh {
                continue;
            }
            let mut path: Vec<&str> = vec![start];
            let mut stack: Vec<std::collections::btree_set::Iter<'_, String>> =
                vec![self.concepts[start].parent_ids.iter()];
            marks.insert(start, Mark::Active);
            while let Some(iter) = stack.last_mut() {
                match iter.next() {
                    Some(next) => match marks[next.as_str()] {
                        Mark::Fresh => {
                            marks.insert(next, Mark::Active);
                            path.push(next);
                            stack.push(self.concepts[next].parent_ids.iter());
                        }
                        Mark::Active => {
                            let from = path.iter().position(|p| *p == next).unwrap();
                            let mut cycle: Vec<String> =
                                path[from..].iter().map(|s| s.to_string()).collect();
                            cycle.push(next.clone());
                            return Some(cycle);
                        }
                        Mark::Done => {}
                    },
                    None => {
                        stack.pop();
                        let done = path.pop().unwrap();
                        marks.insert(done, Mark::Done);
                    }
                }
            }
        }
        None
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

fn validate_labels(concept: &Concept) -> Result<(), OntologyError> {
    if concept.labels.is_empty() {
        return Err(OntologyError::NoLabels(concept.id.clone()));
    }
    let mut seen = BTreeSet::new();
    for label in &concept.labels {
        if label.trim().is_empty() {
            return Err(OntologyError::EmptyLabel(concept.id.clone()));
        }
        if !seen.insert(label.as_str()) {
            return Err(OntologyError::DuplicateLabel {
                id: concept.id.clone(),
                label: label.clone(),
            });
        }
    }
    Ok(())
}

fn io_err(path: &Path, source: std::io::Error) -> OntologyError {
    OntologyError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, line: usize, reason: &str) -> OntologyError {
    OntologyError::MalformedLine {
        file: path.display().to_string(),
        line,
        reason: reason.to_string(),
    }
}

/// Reads a headerless TSV with exactly `N` columns, skipping `#` comments
/// and empty lines. Returns 1-based line numbers with the fields.
fn read_tsv<const N: usize>(path: &Path) -> Result<Vec<(usize, [String; N])>, OntologyError> {
    let content = fs::read_to_string(path).map_err(|source| io_err(path, source))?;
    let mut rows = Vec::new();
    for (idx, raw) in content.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != N {
            return Err(malformed(
                path,
                idx + 1,
                &format!("expected {N} tab-separated fields, found {}", fields.len()),
            ));
        }
        let arr: [String; N] = std::array::from_fn(|i| fields[i].to_string());
        rows.push((idx + 1, arr));
    }
    Ok(rows)
}
