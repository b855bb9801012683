//! The semantics layer: URI-identified medical concepts, typed relations
//! between them, bindings from CVTs to concepts, local-to-global concept
//! mappings and information-content similarity.
//!
//! Relations point from the more specific concept to the more general one
//! (`hec:Tooth part_of hec:Jaw`). The `is_a`, `part_of` and
//! `regional_part_of` sub-graphs are each kept acyclic.

mod fragment;
mod mapping;
mod similarity;
mod text;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::{ConceptVocabulary, Registry};

pub use mapping::{discover_mappings, normalize_label, token_jaccard, ConceptMapping, MappingMethod, MappingSet};
pub use similarity::{resnik_similarity, AnnotationCounts, InformationContent};
pub(crate) use text::quote as text_quote;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConceptGroup {
    Anatomical,
    Symptom,
    Disease,
    TreatmentDrug,
}

impl ConceptGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            ConceptGroup::Anatomical => "Anatomical",
            ConceptGroup::Symptom => "Symptom",
            ConceptGroup::Disease => "Disease",
            ConceptGroup::TreatmentDrug => "TreatmentDrug",
        }
    }
}

impl FromStr for ConceptGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Anatomical" => Ok(ConceptGroup::Anatomical),
            "Symptom" => Ok(ConceptGroup::Symptom),
            "Disease" => Ok(ConceptGroup::Disease),
            "TreatmentDrug" => Ok(ConceptGroup::TreatmentDrug),
            other => Err(format!("unknown concept group {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    IsA,
    PartOf,
    RegionalPartOf,
    AssociatedWith,
}

impl Predicate {
    pub const ALL: [Predicate; 4] = [
        Predicate::IsA,
        Predicate::PartOf,
        Predicate::RegionalPartOf,
        Predicate::AssociatedWith,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Predicate::IsA => "is_a",
            Predicate::PartOf => "part_of",
            Predicate::RegionalPartOf => "regional_part_of",
            Predicate::AssociatedWith => "associated_with",
        }
    }

    /// Whether the sub-graph of this predicate must stay acyclic.
    pub fn is_hierarchical(self) -> bool {
        !matches!(self, Predicate::AssociatedWith)
    }

    /// Predicates followed by query expansion unless told otherwise.
    pub fn expansion_default() -> BTreeSet<Predicate> {
        [Predicate::IsA, Predicate::PartOf, Predicate::RegionalPartOf].into()
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Predicate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Predicate::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown predicate {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedicalConcept {
    pub uri: String,
    pub label: String,
    pub group: ConceptGroup,
}

impl MedicalConcept {
    pub fn new(uri: impl Into<String>, label: impl Into<String>, group: ConceptGroup) -> Self {
        Self {
            uri: uri.into(),
            label: label.into(),
            group,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConceptRelation {
    pub subject: String,
    pub predicate: Predicate,
    pub object: String,
}

impl ConceptRelation {
    pub fn new(subject: impl Into<String>, predicate: Predicate, object: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            predicate,
            object: object.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptBinding {
    pub cvt_id: String,
    pub concept_uri: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OntologyError {
    #[error("concept {0:?} is already defined")]
    DuplicateUri(String),
    #[error("invalid concept: {0}")]
    InvalidConcept(String),
    #[error("relation endpoint {0:?} is not a known concept")]
    UnknownEndpoint(String),
    #[error("a concept cannot be related to itself ({0:?})")]
    SelfRelation(String),
    #[error("relation would introduce a {0} cycle")]
    CycleIntroduced(Predicate),
    #[error("unknown concept {0:?}")]
    UnknownConcept(String),
    #[error("CVT {cvt:?} is already bound to {existing:?}")]
    BindingConflict { cvt: String, existing: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("concept {0:?} has several equally good global candidates")]
    AmbiguousMapping(String),
    #[error("invalid mapping: {0}")]
    InvalidMapping(String),
    #[error("threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("{0:?} and {1:?} share no is_a ancestor")]
    NoCommonAncestor(String, String),
    #[error("annotation corpus is empty")]
    ZeroCorpus,
}

impl OntologyError {
    pub fn code(&self) -> &'static str {
        match self {
            OntologyError::DuplicateUri(_) => "DuplicateURI",
            OntologyError::InvalidConcept(_) => "InvalidConcept",
            OntologyError::UnknownEndpoint(_) => "UnknownEndpoint",
            OntologyError::SelfRelation(_) => "SelfRelation",
            OntologyError::CycleIntroduced(_) => "CycleIntroduced",
            OntologyError::UnknownConcept(_) => "UnknownConcept",
            OntologyError::BindingConflict { .. } => "BindingConflict",
            OntologyError::Parse { .. } => "OntologyParse",
            OntologyError::AmbiguousMapping(_) => "AmbiguousMapping",
            OntologyError::InvalidMapping(_) => "InvalidMapping",
            OntologyError::InvalidThreshold(_) => "InvalidThreshold",
            OntologyError::NoCommonAncestor(..) => "NoCommonAncestor",
            OntologyError::ZeroCorpus => "ZeroCorpus",
        }
    }
}

/// An ontology snapshot. Build it up with `add_*`, then share it
/// read-only (typically behind an `Arc`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ontology {
    concepts: BTreeMap<String, MedicalConcept>,
    relations: BTreeSet<ConceptRelation>,
    /// object -> (predicate, subject)
    incoming: BTreeMap<String, BTreeSet<(Predicate, String)>>,
    /// subject -> (predicate, object)
    outgoing: BTreeMap<String, BTreeSet<(Predicate, String)>>,
    bindings: BTreeMap<String, String>,
}

impl Ontology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_concept(&mut self, concept: MedicalConcept) -> Result<(), OntologyError> {
        if !crate::registry::well_formed_uri(&concept.uri) {
            return Err(OntologyError::InvalidConcept(format!(
                "{:?} is not of the form scheme:name",
                concept.uri
            )));
        }
        if concept.label.trim().is_empty() {
            return Err(OntologyError::InvalidConcept(format!("{:?} has an empty label", concept.uri)));
        }
        if self.concepts.contains_key(&concept.uri) {
            return Err(OntologyError::DuplicateUri(concept.uri));
        }
        self.concepts.insert(concept.uri.clone(), concept);
        Ok(())
    }

    /// Adds a relation. Re-adding an existing relation is a no-op.
    pub fn add_relation(&mut self, rel: ConceptRelation) -> Result<(), OntologyError> {
        for end in [&rel.subject, &rel.object] {
            if !self.concepts.contains_key(end) {
                return Err(OntologyError::UnknownEndpoint(end.clone()));
            }
        }
        if rel.subject == rel.object {
            return Err(OntologyError::SelfRelation(rel.subject));
        }
        if self.relations.contains(&rel) {
            return Ok(());
        }
        if rel.predicate.is_hierarchical() && self.reaches_upward(&rel.object, &rel.subject, rel.predicate) {
            return Err(OntologyError::CycleIntroduced(rel.predicate));
        }
        self.incoming
            .entry(rel.object.clone())
            .or_default()
            .insert((rel.predicate, rel.subject.clone()));
        self.outgoing
            .entry(rel.subject.clone())
            .or_default()
            .insert((rel.predicate, rel.object.clone()));
        self.relations.insert(rel);
        Ok(())
    }

    fn reaches_upward(&self, from: &str, target: &str, predicate: Predicate) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(c) = stack.pop() {
            if c == target {
                return true;
            }
            if !seen.insert(c) {
                continue;
            }
            if let Some(out) = self.outgoing.get(c) {
                stack.extend(out.iter().filter(|(p, _)| *p == predicate).map(|(_, o)| o.as_str()));
            }
        }
        false
    }

    /// Binds a CVT to the concept its values denote. A CVT binds to at most
    /// one concept.
    pub fn bind(&mut self, cvt_id: impl Into<String>, concept_uri: impl Into<String>) -> Result<(), OntologyError> {
        let (cvt_id, concept_uri) = (cvt_id.into(), concept_uri.into());
        if !self.concepts.contains_key(&concept_uri) {
            return Err(OntologyError::UnknownConcept(concept_uri));
        }
        match self.bindings.get(&cvt_id) {
            Some(existing) if *existing != concept_uri => Err(OntologyError::BindingConflict {
                cvt: cvt_id,
                existing: existing.clone(),
            }),
            _ => {
                self.bindings.insert(cvt_id, concept_uri);
                Ok(())
            }
        }
    }

    pub fn binding(&self, cvt_id: &str) -> Option<&str> {
        self.bindings.get(cvt_id).map(String::as_str)
    }

    pub fn bindings(&self) -> impl Iterator<Item = ConceptBinding> + '_ {
        self.bindings.iter().map(|(c, u)| ConceptBinding {
            cvt_id: c.clone(),
            concept_uri: u.clone(),
        })
    }

    /// CVTs bound to `uri`, sorted.
    pub fn cvts_for(&self, uri: &str) -> Vec<&str> {
        self.bindings
            .iter()
            .filter(|(_, u)| u.as_str() == uri)
            .map(|(c, _)| c.as_str())
            .collect()
    }

    /// Binding CVT ids that the registry does not know.
    pub fn dangling_bindings(&self, registry: &Registry) -> Vec<String> {
        self.bindings
            .keys()
            .filter(|c| registry.cvt(c).is_none())
            .cloned()
            .collect()
    }

    pub fn concept(&self, uri: &str) -> Option<&MedicalConcept> {
        self.concepts.get(uri)
    }

    pub fn contains(&self, uri: &str) -> bool {
        self.concepts.contains_key(uri)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &MedicalConcept> {
        self.concepts.values()
    }

    pub fn relations(&self) -> impl Iterator<Item = &ConceptRelation> {
        self.relations.iter()
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub(crate) fn parents(&self, uri: &str, predicate: Predicate) -> impl Iterator<Item = &str> {
        self.outgoing
            .get(uri)
            .into_iter()
            .flatten()
            .filter(move |(p, _)| *p == predicate)
            .map(|(_, o)| o.as_str())
    }

    pub(crate) fn neighbours(&self, uri: &str) -> impl Iterator<Item = &str> {
        let out = self.outgoing.get(uri).into_iter().flatten();
        let inc = self.incoming.get(uri).into_iter().flatten();
        out.chain(inc).map(|(_, c)| c.as_str())
    }

    /// Concepts reaching `root` through chains of `predicates` edges
    /// (child to parent), at most `max_depth` edges long when given.
    /// `root` itself is never included.
    pub fn descendants(
        &self,
        root: &str,
        predicates: &BTreeSet<Predicate>,
        max_depth: Option<usize>,
    ) -> Result<BTreeSet<String>, OntologyError> {
        if !self.contains(root) {
            return Err(OntologyError::UnknownConcept(root.to_string()));
        }
        let mut found = BTreeSet::new();
        let mut seen: BTreeSet<&str> = [root].into();
        let mut queue = VecDeque::from([(root, 0usize)]);
        while let Some((c, depth)) = queue.pop_front() {
            if max_depth.is_some_and(|m| depth >= m) {
                continue;
            }
            for (p, child) in self.incoming.get(c).into_iter().flatten() {
                if predicates.contains(p) && seen.insert(child) {
                    found.insert(child.clone());
                    queue.push_back((child, depth + 1));
                }
            }
        }
        Ok(found)
    }

    /// `uri` and everything above it along `predicate`.
    pub fn ancestors_or_self(&self, uri: &str, predicate: Predicate) -> Result<BTreeSet<String>, OntologyError> {
        if !self.contains(uri) {
            return Err(OntologyError::UnknownConcept(uri.to_string()));
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![uri];
        while let Some(c) = stack.pop() {
            if seen.insert(c.to_string()) {
                stack.extend(self.parents(c, predicate));
            }
        }
        Ok(seen)
    }
}

impl ConceptVocabulary for Ontology {
    fn knows_concept(&self, uri: &str) -> bool {
        self.contains(uri)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Jaw/teeth plus the brain regions used throughout the tests.
    pub fn anatomy() -> Ontology {
        let mut o = Ontology::new();
        for (uri, label) in [
            ("hec:Jaw", "Jaw"),
            ("hec:Tooth", "Tooth"),
            ("hec:Molar", "Molar"),
            ("fma:Brain", "Brain"),
            ("fma:Cerebellum", "Cerebellum"),
            ("hec:BodyPart", "Body part"),
        ] {
            o.add_concept(MedicalConcept::new(uri, label, ConceptGroup::Anatomical))
                .unwrap();
        }
        o.add_concept(MedicalConcept::new("hec:Caries", "Caries", ConceptGroup::Disease))
            .unwrap();
        for (s, p, ob) in [
            ("hec:Tooth", Predicate::PartOf, "hec:Jaw"),
            ("hec:Molar", Predicate::IsA, "hec:Tooth"),
            ("fma:Cerebellum", Predicate::RegionalPartOf, "fma:Brain"),
            ("hec:Jaw", Predicate::IsA, "hec:BodyPart"),
            ("fma:Brain", Predicate::IsA, "hec:BodyPart"),
            ("hec:Caries", Predicate::AssociatedWith, "hec:Tooth"),
        ] {
            o.add_relation(ConceptRelation::new(s, p, ob)).unwrap();
        }
        o
    }
}
